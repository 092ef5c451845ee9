import os
import logging

import numpy as np

# Project
from hardy.atoms import verify_atom
from hardy.utils import make_rng
from hardy.fourier import lipschitz_estimate, fourier_atom_direct, fourier_via_dilation_identity
from hardy.artifacts import write_atom_archive
from hardy.estimates.reports import EstimateReport
from hardy.experiments.abstract import AbstractExperiment

__all__ = ["AtomGenExperiment"]

logger = logging.getLogger(__name__)

CROSS_CHECK_ATOMS = 50
CROSS_CHECK_POINTS = 20
CROSS_CHECK_TOLERANCE = 1e-6
ORIGIN_TOLERANCE = 1e-8
LIPSCHITZ_PAIRS = 200


class AtomGenExperiment(AbstractExperiment):
    """Certified atoms written as archives, with a two-path Fourier cross-check"""

    __identity__ = "atom-gen"
    stream = 4

    def run(self) -> EstimateReport:
        d, pv = self.d, self.pv
        count = self.config.atoms.count
        atoms = self.atoms(count)
        report = EstimateReport(self.__identity__, self.metadata(s=self.config.s_order, count=count))
        archive_root = self.run_dir.subdirectory("atoms")

        failures = 0
        for k, atom in enumerate(atoms):
            certificate = verify_atom(d, pv, atom, self.config.grids.indicator_resolution)
            failures += not certificate.passed
            write_atom_archive(os.path.join(archive_root, f"atom_{k:04d}"), atom, certificate)
            report.raw_rows.append(
                {
                    "atom": k,
                    "i0": atom.ball.index,
                    "seed": atom.seed,
                    "attempts": atom.attempts,
                    "support_margin": certificate.support_margin,
                    "size_ratio": certificate.size_ratio,
                    "moment_worst": certificate.moment_worst,
                    "passed": certificate.passed,
                }
            )
        report.check("all_certified", failures == 0, value=failures, threshold=0)

        rng = make_rng(self.seed, 1)
        worst_gap, worst_origin, skipped = 0.0, 0.0, 0
        for k, atom in enumerate(atoms[:CROSS_CHECK_ATOMS]):
            directions = rng.standard_normal((CROSS_CHECK_POINTS, d.n))
            # frequencies on the scale of the atom's own transform
            scale = 10.0 ** rng.uniform(-1.5, 0.5, size=(CROSS_CHECK_POINTS, 1))
            points = directions * scale @ np.linalg.inv(d.power(atom.ball.index))
            direct = fourier_atom_direct(atom, points, self.max_level)
            identity = fourier_via_dilation_identity(atom, points, self.max_level)
            usable = direct.resolved & identity.resolved
            skipped += int(np.count_nonzero(~usable))
            gap = np.abs(direct.values - identity.values)[usable] / atom.l1_norm()
            worst_gap = max(worst_gap, float(np.max(gap, initial=0.0)))
            at_origin = abs(fourier_atom_direct(atom, np.zeros((1, d.n)), series=False).values[0]) / atom.l1_norm()
            worst_origin = max(worst_origin, at_origin)
            for point, a, b in zip(points[usable], direct.values[usable], identity.values[usable]):
                report.plot_rows.append(
                    {"series": f"atom{k}", "abscissa": float(np.linalg.norm(point)), "ordinate": abs(a), "fit": abs(b)}
                )
        report.check(
            "fourier_paths_agree", worst_gap <= CROSS_CHECK_TOLERANCE, value=worst_gap, threshold=CROSS_CHECK_TOLERANCE
        )
        report.check(
            "transform_vanishes_at_origin",
            worst_origin <= ORIGIN_TOLERANCE,
            value=worst_origin,
            threshold=ORIGIN_TOLERANCE,
        )

        lipschitz = lipschitz_estimate(atoms[0], 2.0, LIPSCHITZ_PAIRS, make_rng(self.seed, 2))
        report.check(
            "lipschitz_witness", lipschitz.passed, value=lipschitz.empirical, threshold=lipschitz.analytic_bound
        )
        report.constant = worst_gap
        report.sample_sizes = {
            "atoms": count,
            "cross_checked_atoms": min(count, CROSS_CHECK_ATOMS),
            "points_per_atom": CROSS_CHECK_POINTS,
            "under_resolved": skipped,
        }
        report.details = {"archives": archive_root, "lipschitz_analytic_bound": lipschitz.analytic_bound}
        return report
