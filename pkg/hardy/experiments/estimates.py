import logging

# Project
from hardy.atoms import AtomicSum, random_atomic_sums, coefficient_lp_check, coefficient_sum_check
from hardy.utils import make_rng, derive_seed
from hardy.fourier import shell_points
from hardy.estimates.decay import verify_origin_decay
from hardy.estimates.maximal import compare_maximal_atomic
from hardy.estimates.reports import EstimateReport
from hardy.estimates.fourier_bounds import verify_transform_bound, verify_derivative_bound, verify_finite_sum_bound
from hardy.experiments.abstract import AbstractExperiment
from hardy.estimates.hardy_littlewood import verify_hardy_littlewood, verify_hardy_littlewood_sum

__all__ = [
    "DerivativeBoundExperiment",
    "TransformBoundExperiment",
    "FiniteSumBoundExperiment",
    "OriginDecayExperiment",
    "HardyLittlewoodExperiment",
    "MaximalCompareExperiment",
]

logger = logging.getLogger(__name__)

# sums whose transforms are sampled; the coefficient bounds run over every sum
TRANSFORMED_SUMS = 10
HARDY_LITTLEWOOD_SUMS = 3
MAXIMAL_SUM_ATOMS = 2


def _merge_all(report: EstimateReport, parts: list[EstimateReport], label: str):
    for k, part in enumerate(parts):
        report.merge(part, f"{label}{k}")
        report.raw_rows.extend({label: k, **row} for row in part.raw_rows)
        report.plot_rows.extend({**row, "series": f"{label}{k}.{row['series']}"} for row in part.plot_rows)
    constants = [part.constant for part in parts if part.constant is not None]
    report.constant = max(constants) if constants else None


class DerivativeBoundExperiment(AbstractExperiment):
    __identity__ = "verify-lemma31"
    stream = 5

    def run(self) -> EstimateReport:
        # two halves of lemma31_atoms each feed the doubling drift
        atoms = self.atoms(2 * self.config.experiments.lemma31_atoms)
        return verify_derivative_bound(self.d, self.pv, atoms, seed=self.seed, threads=self.threads)


class TransformBoundExperiment(AbstractExperiment):
    __identity__ = "verify-lemma32"
    stream = 6

    def run(self) -> EstimateReport:
        sizes = self.config.experiments
        points, _ = shell_points(self.e_star, sizes.shell_range, sizes.points_per_shell, make_rng(self.seed, 0))
        return verify_transform_bound(
            self.d,
            self.pv,
            self.config.atoms.count,
            x_points=points,
            seed=self.seed,
            e_star=self.e_star,
            threads=self.threads,
            **self.config.atom_options(),
        )


class FiniteSumBoundExperiment(AbstractExperiment):
    """Transform bound on finite atomic sums, plus both coefficient bounds on every sum"""

    __identity__ = "verify-thm31"
    stream = 7

    def sums(self) -> list[AtomicSum]:
        sizes = self.config.experiments
        return random_atomic_sums(
            self.d,
            self.pv,
            sizes.sum_count,
            self.seed,
            max_atoms=sizes.max_sum_atoms,
            threads=self.threads,
            **self.config.atom_options(),
        )

    def run(self) -> EstimateReport:
        d, pv = self.d, self.pv
        sizes = self.config.experiments
        resolution = self.config.atoms.resolution
        sums = self.sums()
        points, _ = shell_points(self.e_star, sizes.shell_range, sizes.points_per_shell, make_rng(self.seed, 0))

        report = EstimateReport(self.__identity__, self.metadata(sums=len(sums)))
        parts = [
            verify_finite_sum_bound(sum_, d, pv, x_points=points, e_star=self.e_star, resolution=resolution)
            for sum_ in sums[:TRANSFORMED_SUMS]
        ]
        _merge_all(report, parts, "sum")

        worst_l1, worst_lp = 0.0, 0.0
        l1_passed, lp_passed = True, True
        for sum_ in sums:
            l1 = coefficient_sum_check(sum_, d, pv, resolution)
            lp = coefficient_lp_check(sum_, d, pv, resolution)
            l1_passed &= l1.passed
            lp_passed &= lp.passed
            worst_l1 = max(worst_l1, l1.lhs / l1.rhs)
            worst_lp = max(worst_lp, lp.lhs / lp.rhs)
            report.plot_rows.append({"series": "coefficients", "abscissa": l1.rhs, "ordinate": l1.lhs, "fit": ""})
        report.details["coefficient_sum_ratio"] = worst_l1
        report.details["coefficient_lp_ratio"] = worst_lp
        report.sample_sizes = {
            "sums": len(sums),
            "transformed_sums": len(parts),
            "points": len(points),
            "atoms": sum(len(s) for s in sums),
        }
        report.check("coefficient_sum_bound", l1_passed, value=worst_l1, threshold=1.0 + l1.slack)
        report.check("coefficient_lp_bound", lp_passed, value=worst_lp, threshold=1.0 + lp.slack)
        return report


class OriginDecayExperiment(AbstractExperiment):
    __identity__ = "decay-origin"
    stream = 8

    def run(self) -> EstimateReport:
        sizes = self.config.experiments
        atoms = self.atoms(sizes.decay_atoms)
        report = EstimateReport(self.__identity__, self.metadata(atoms=len(atoms), s=self.config.s_order))
        parts = [
            verify_origin_decay(
                atom, self.d, self.pv, ray_count=sizes.ray_count, seed=derive_seed(self.seed, k), e_star=self.e_star
            )
            for k, atom in enumerate(atoms)
        ]
        _merge_all(report, parts, "atom")
        report.details["beta"] = parts[0].details["beta"]
        report.sample_sizes = {"atoms": len(atoms), "rays_per_atom": sizes.ray_count}
        return report


class HardyLittlewoodExperiment(AbstractExperiment):
    """Uniform shell integrals over (p, 2, s)-atoms, then the finite-sum form"""

    __identity__ = "hardy-littlewood"
    stream = 9

    def run(self) -> EstimateReport:
        d, pv = self.d, self.pv
        sizes = self.config.experiments
        shell_resolution = self.config.grids.shell_resolution
        report = verify_hardy_littlewood(
            d,
            pv,
            sizes.hl_atoms,
            seed=self.seed,
            shell_range=sizes.shell_range,
            resolution=shell_resolution,
            e_star=self.e_star,
            threads=self.threads,
            **self.config.atom_options(r=2.0),
        )
        sums = random_atomic_sums(
            d,
            pv,
            HARDY_LITTLEWOOD_SUMS,
            derive_seed(self.seed, 1),
            max_atoms=sizes.max_sum_atoms,
            threads=self.threads,
            **self.config.atom_options(r=2.0),
        )
        for k, sum_ in enumerate(sums):
            part = verify_hardy_littlewood_sum(
                sum_,
                d,
                pv,
                shell_range=sizes.shell_range,
                resolution=shell_resolution,
                norm_resolution=self.config.atoms.resolution,
                e_star=self.e_star,
            )
            report.merge(part, f"sum{k}")
        return report


class MaximalCompareExperiment(AbstractExperiment):
    """Radial maximal norm against the atomic norm for a single atom and a short sum"""

    __identity__ = "maximal-compare"
    stream = 10

    def run(self) -> EstimateReport:
        d, pv = self.d, self.pv
        grids = self.config.grids
        single = AtomicSum.single(self.atoms(1, i0_range=(0, 0))[0])
        pair_options = self.config.atom_options(i0_range=(-1, 1))
        pair = random_atomic_sums(d, pv, 1, derive_seed(self.seed, 1), max_atoms=MAXIMAL_SUM_ATOMS, **pair_options)[0]
        report = EstimateReport(self.__identity__, self.metadata(resolution=grids.maximal_resolution))
        parts = [
            compare_maximal_atomic(
                candidate,
                d,
                pv,
                resolution=grids.maximal_resolution,
                kernel_nodes=grids.kernel_nodes,
                norm_resolution=self.config.atoms.resolution,
            )
            for candidate in (single, pair)
        ]
        _merge_all(report, parts, "case")
        report.stability = max(part.stability for part in parts)
        report.sample_sizes = {"cases": len(parts), "atoms": [len(single), len(pair)]}
        return report
