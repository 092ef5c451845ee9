import math
import logging

import numpy as np
import scipy.linalg

# Project
from hardy.utils import make_rng
from hardy.dilation import build_ellipsoid, spectral_report, monte_carlo_ball_volume
from hardy.mixed_norm import GridFunction, mixed_norm_eval, indicator_bound_check
from hardy.quasi_norm import (
    rho_table,
    index_by_scan,
    lemma33_envelope,
    isotropic_comparison,
    quasi_triangle_constant,
)
from hardy.estimates.reports import EstimateReport
from hardy.experiments.abstract import AbstractExperiment

__all__ = ["ValidateDilationExperiment", "RhoTableExperiment", "NormTableExperiment"]

logger = logging.getLogger(__name__)

VOLUME_TOLERANCE = 0.02
LYAPUNOV_TOLERANCE = 1e-10
CERTIFICATE_TOLERANCE = 1e-10
RECTANGLE_TOLERANCE = 1e-10
SCAN_RANGE = (-20, 20)


class ValidateDilationExperiment(AbstractExperiment):
    """Spectral data, ellipsoid certificate and Monte-Carlo ball volumes"""

    __identity__ = "validate-dilation"
    requires_hardy = False
    stream = 1

    def run(self) -> EstimateReport:
        d = self.d
        report = EstimateReport(self.__identity__, self.metadata())
        report.details = {"spectral": spectral_report(d), "ellipsoid_radius": d.ellipsoid.radius}

        lyapunov = build_ellipsoid(d.matrix, d.delta, method="lyapunov")
        difference = float(np.linalg.norm(lyapunov.P - d.ellipsoid.P) / np.linalg.norm(d.ellipsoid.P))
        report.check(
            "lyapunov_agreement", difference < LYAPUNOV_TOLERANCE, value=difference, threshold=LYAPUNOV_TOLERANCE
        )

        # r Delta inside A Delta: A^{-T} P A^{-1} <= P / delta in the Loewner order
        pulled = d.inverse.T @ d.ellipsoid.P @ d.inverse
        top = float(np.max(scipy.linalg.eigh(pulled, d.ellipsoid.P, eigvals_only=True)))
        report.check(
            "containment_certificate",
            top <= 1.0 / d.delta + CERTIFICATE_TOLERANCE,
            value=top,
            threshold=1.0 / d.delta + CERTIFICATE_TOLERANCE,
        )

        rng = make_rng(self.seed, 0)
        samples = 4 * self.config.experiments.quasi_norm_samples
        lo, hi = self.config.experiments.norm_i_range
        worst = 0.0
        for i in range(lo, hi + 1):
            volume = monte_carlo_ball_volume(d, i, samples, rng)
            error = abs(volume / d.b**i - 1.0)
            worst = max(worst, error)
            report.raw_rows.append({"i": i, "volume": volume, "expected": d.b**i, "rel_err": error})
            report.plot_rows.append({"series": "ball_volume", "abscissa": d.b**i, "ordinate": volume, "fit": d.b**i})
        report.constant = worst
        report.sample_sizes = {"volume_samples": samples, "balls": hi - lo + 1}
        report.check("ball_volume", worst < VOLUME_TOLERANCE, value=worst, threshold=VOLUME_TOLERANCE)
        return report


class RhoTableExperiment(AbstractExperiment):
    """rho and rho* at random points, cross-checked against a linear scan"""

    __identity__ = "rho-table"
    requires_hardy = False
    stream = 2

    def _points(self, rng: np.random.Generator) -> np.ndarray:
        count = self.config.experiments.quasi_norm_samples
        directions = rng.standard_normal((count, self.d.n))
        lengths = 10.0 ** rng.uniform(-2.0, 2.0, size=(count, 1))
        return directions * lengths

    def run(self) -> EstimateReport:
        d, e, e_star = self.d, self.e, self.e_star
        rng = make_rng(self.seed, 0)
        points = self._points(rng)
        report = EstimateReport(self.__identity__, self.metadata())
        report.raw_rows = rho_table(e, e_star, points)

        searched = e.index(points)
        scanned = index_by_scan(e, points, SCAN_RANGE)
        mismatches = int(np.count_nonzero(searched != scanned))
        report.check("search_matches_scan", mismatches == 0, value=mismatches, threshold=0)

        # rho(Ax) = b rho(x) is a shift of the shell index by one
        pushed = e.index(points @ d.matrix.T)
        homogeneity = int(np.count_nonzero(pushed != searched + 1))
        report.check("homogeneity", homogeneity == 0, value=homogeneity, threshold=0)

        triangle = quasi_triangle_constant(e, len(points) // 4 or 1, rng)
        envelope = lemma33_envelope(e, len(points), rng)
        report.constant = triangle
        report.details = {
            "quasi_triangle_constant": triangle,
            "euclidean_envelope": {
                "outer_lower": envelope.outer_lower,
                "outer_upper": envelope.outer_upper,
                "inner_lower": envelope.inner_lower,
                "inner_upper": envelope.inner_upper,
                "constant": envelope.constant,
            },
        }
        report.check("quasi_triangle_finite", math.isfinite(triangle), value=triangle)
        report.check("euclidean_envelope_finite", math.isfinite(envelope.constant), value=envelope.constant)

        if np.allclose(d.matrix, d.matrix[0, 0] * np.eye(d.n)):
            low, high = isotropic_comparison(e, points)
            report.details["isotropic"] = {"min": low, "max": high}
            report.check("isotropic_comparison", low >= 1.0 - 1e-9 and high <= d.b * (1.0 + 1e-9), value=high)

        report.sample_sizes = {"points": len(points), "envelope_samples": len(points)}
        report.plot_rows = [
            {"series": "rho_star", "abscissa": row["rho"], "ordinate": row["rho_star"], "fit": ""}
            for row in report.raw_rows
            if row["rho"] > 0
        ]
        return report


class NormTableExperiment(AbstractExperiment):
    """Mixed norms of ball indicators against max{b^{-i/p_-}, b^{-i/p_+}}"""

    __identity__ = "norm-table"
    stream = 3

    def run(self) -> EstimateReport:
        d, pv = self.d, self.pv
        resolution = self.config.grids.indicator_resolution
        bound = indicator_bound_check(d, pv, self.config.experiments.norm_i_range, resolution)
        report = EstimateReport(self.__identity__, self.metadata(resolution=resolution))
        report.raw_rows = bound.rows
        report.constant = bound.constant
        report.stability = bound.drift
        report.sample_sizes = {"balls": len(bound.rows), "resolution": resolution}
        report.plot_rows = [
            {"series": "inverse_norm", "abscissa": row["i"], "ordinate": 1.0 / row["norm"], "fit": ""}
            for row in bound.rows
        ]
        worst_error = max(row["est_rel_err"] for row in bound.rows)
        report.details = {"central_constant": bound.central_constant, "worst_rel_err": worst_error}
        report.check("indicator_bound", bound.passed, value=bound.constant, detail=f"drift={bound.drift:.3g}")

        # rectangle law: ||1_R|| = prod a_k^{1/p_k}
        sides = np.linspace(0.5, 2.5, d.n)
        rectangle = GridFunction.midpoint(np.zeros(d.n), sides, 16, values=np.ones((16,) * d.n))
        expected = math.prod(a ** (1.0 / p) for a, p in zip(sides, pv.floats))
        error = abs(mixed_norm_eval(rectangle, pv) / expected - 1.0)
        report.check("rectangle_law", error < RECTANGLE_TOLERANCE, value=error, threshold=RECTANGLE_TOLERANCE)
        return report
