import math
import logging
from typing import Callable
from fractions import Fraction
from collections import defaultdict
from dataclasses import field, dataclass

import numpy as np

# Lamb Framework
from lamb.exc import InvalidParamValueError

# Project
from hardy.atoms import Atom, AtomicSum, random_atoms, coefficient_lp_check
from hardy.utils import make_rng, compensated_sum, parallel_map
from hardy.fourier import FourierEvaluation, fourier_finite_sum, fourier_atom_direct
from hardy.dilation import Dilation, ball_membership, ball_half_widths
from hardy.exceptions import TailDominantError
from hardy.mixed_norm import ExponentVector, GridFunction
from hardy.quasi_norm import QuasiNormEvaluator, sample_shell
from hardy.estimates.reports import EstimateReport, drift

__all__ = [
    "WeightExponents",
    "ShellIntegral",
    "weight_exponents",
    "annulus_grid",
    "shell_integral",
    "plancherel_outer_bound",
    "monte_carlo_shell",
    "verify_hardy_littlewood",
    "verify_hardy_littlewood_sum",
]

logger = logging.getLogger(__name__)

TAIL_LIMIT = 0.10
DRIFT_LIMIT = 0.10
UNIFORMITY_LIMIT = 10.0
MONTE_CARLO_LIMIT = 0.15
TAIL_FIT_SHELLS = 3


@dataclass(frozen=True)
class WeightExponents:
    """Exact exponents of min{rho*^{1 - 1/p_- - 1/p_+}, rho*^{1 - 2/p_+}}"""

    outer: Fraction
    inner: Fraction

    @property
    def coincide(self) -> bool:
        return self.outer == self.inner

    def weight(self, rho_star) -> np.ndarray:
        rho_star = np.asarray(rho_star, dtype=float)
        return np.where(rho_star > 1.0, rho_star ** float(self.outer), rho_star ** float(self.inner))


def weight_exponents(pv: ExponentVector) -> WeightExponents:
    if not pv.is_hardy_admissible:
        raise InvalidParamValueError(f"Hardy-Littlewood weight needs exponents in (0, 1], got {pv}")
    p_minus, p_plus = pv.p_minus_exact, pv.p_plus_exact
    return WeightExponents(outer=1 - 1 / p_minus - 1 / p_plus, inner=1 - 2 / p_plus)


def annulus_grid(d_star: Dilation, resolution: int) -> GridFunction:
    """Midpoint cells of B*_1 minus B*_0, weights rescaled to the exact area b - 1"""
    half = ball_half_widths(d_star, 1)
    outer = GridFunction.midpoint(-half, half, resolution)
    mesh = outer.mesh()
    inside = ball_membership(d_star, mesh, 1) & ~ball_membership(d_star, mesh, 0)
    weights = outer.cell_weights() * inside
    total = float(np.sum(weights))
    return outer.with_values(weights * ((d_star.b - 1.0) / total))


@dataclass
class ShellIntegral:
    """Per-shell contributions J_k of the weighted integral and their tails"""

    shells: np.ndarray
    contributions: np.ndarray
    resolved: np.ndarray
    tail_low: float = 0.0
    tail_high: float = 0.0
    holes: float = 0.0
    outer_bound: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def inner(self) -> float:
        return float(compensated_sum(self.contributions[self.resolved]))

    @property
    def tail(self) -> float:
        return self.tail_low + self.tail_high + self.holes

    @property
    def total(self) -> float:
        return self.inner + self.tail

    @property
    def tail_fraction(self) -> float:
        total = self.total
        return self.tail / total if total > 0 else 0.0

    def rows(self, label: str = "") -> list[dict]:
        return [
            {"label": label, "shell": int(k), "contribution": float(j), "resolved": bool(ok)}
            for k, j, ok in zip(self.shells, self.contributions, self.resolved)
        ]


def _geometric_tail(values: np.ndarray, steps: np.ndarray) -> float:
    """Sum of the geometric continuation beyond values[-1]; steps are shell distances from the edge"""
    if values[-1] == 0.0:
        return 0.0
    if values[0] <= 0.0:
        return math.inf
    span = float(steps[0] - steps[-1])
    ratio = (values[-1] / values[0]) ** (1.0 / span) if span > 0 else math.inf
    if not ratio < 1.0:
        return math.inf
    return float(values[-1] * ratio / (1.0 - ratio))


def shell_integral(
    transform: Callable[[np.ndarray], FourierEvaluation],
    e_star: QuasiNormEvaluator,
    pv: ExponentVector,
    shell_range: tuple[int, int] = (-10, 10),
    resolution: int = 24,
    l2_norm: float | None = None,
) -> ShellIntegral:
    """J_k = w(b^k)^{p_+} b^k sum over the annulus of |F((A*)^k eta)|^{p_+}"""
    d_star = e_star.dilation
    exponents = weight_exponents(pv)
    p = pv.p_plus
    annulus = annulus_grid(d_star, resolution)
    cells = annulus.values.ravel() > 0
    eta = annulus.mesh().reshape(-1, d_star.n)[cells]
    weights = annulus.values.ravel()[cells]

    shells = np.arange(shell_range[0], shell_range[1] + 1)
    contributions = np.zeros(shells.size)
    resolved = np.zeros(shells.size, dtype=bool)
    for m, k in enumerate(shells):
        evaluation = transform(eta @ d_star.power(int(k)).T)
        rho_value = d_star.b ** float(k)
        weight = float(exponents.weight(rho_value)) ** p
        contributions[m] = weight * rho_value * float(np.sum(weights * np.abs(evaluation.values) ** p))
        resolved[m] = evaluation.under_resolved_count == 0

    result = ShellIntegral(shells=shells, contributions=contributions, resolved=resolved)
    good = np.flatnonzero(resolved)
    if good.size < TAIL_FIT_SHELLS:
        result.tail_high = math.inf
        return result
    top, bottom = good[-TAIL_FIT_SHELLS:], good[:TAIL_FIT_SHELLS]
    result.tail_high = _geometric_tail(contributions[top], -shells[top].astype(float))
    result.tail_low = _geometric_tail(contributions[bottom][::-1], shells[bottom][::-1].astype(float))
    for m in range(good[0] + 1, good[-1]):
        if not resolved[m]:
            left, right = good[good < m][-1], good[good > m][0]
            fraction = (m - left) / (right - left)
            result.holes += float(contributions[left] ** (1 - fraction) * contributions[right] ** fraction)
    if l2_norm is not None:
        result.outer_bound = plancherel_outer_bound(d_star, pv, l2_norm, int(shells[-1]) + 1)
    return result


def plancherel_outer_bound(d_star: Dilation, pv: ExponentVector, l2_norm: float, first_shell: int) -> float:
    """|a|_2^{p+} (sum_{k >= first} |shell_k| w_k^{2p+/(2-p+)})^{(2-p+)/2} by Hoelder"""
    p = pv.p_plus
    q = 2.0 * p / (2.0 - p)
    exponent = 1.0 + float(weight_exponents(pv).outer) * q
    ratio = d_star.b**exponent
    series = (d_star.b - 1.0) * d_star.b ** (first_shell * exponent) / (1.0 - ratio)
    return l2_norm**p * series ** ((2.0 - p) / 2.0)


def monte_carlo_shell(
    transform: Callable[[np.ndarray], FourierEvaluation],
    e_star: QuasiNormEvaluator,
    pv: ExponentVector,
    k: int,
    samples: int,
    rng: np.random.Generator,
) -> float:
    points = sample_shell(e_star, k, samples, rng)
    rho_value = e_star.b ** float(k)
    weight = float(weight_exponents(pv).weight(rho_value)) ** pv.p_plus
    volume = rho_value * (e_star.b - 1.0)
    return weight * volume * float(np.mean(np.abs(transform(points).values) ** pv.p_plus))


def _atom_integral(atom: Atom, e_star, pv, shell_range, resolution) -> ShellIntegral:
    return shell_integral(
        lambda x: fourier_atom_direct(atom, x), e_star, pv, shell_range, resolution, l2_norm=atom.l2_norm()
    )


def verify_hardy_littlewood(
    d: Dilation,
    pv: ExponentVector,
    atom_count: int,
    seed: int = 0,
    atoms: list[Atom] | None = None,
    shell_range: tuple[int, int] = (-10, 10),
    resolution: int = 24,
    monte_carlo_atoms: int = 3,
    monte_carlo_samples: int = 4000,
    e_star: QuasiNormEvaluator | None = None,
    threads: int = 1,
    **atom_options,
) -> EstimateReport:
    """Uniform bound on I(a) = int [|a^| min{rho*^{1-1/p_- -1/p_+}, rho*^{1-2/p_+}}]^{p_+} over (p, 2, s)-atoms"""
    exponents = weight_exponents(pv)
    e_star = e_star or QuasiNormEvaluator.for_transpose(d)
    if atoms is None:
        atom_options.setdefault("r", 2.0)
        atoms = random_atoms(d, pv, 2 * atom_count, seed, threads=threads, **atom_options)
    if any(atom.r_exponent != 2.0 for atom in atoms):
        raise InvalidParamValueError("Hardy-Littlewood bound is stated for r = 2 atoms")

    integrals = parallel_map(lambda atom: _atom_integral(atom, e_star, pv, shell_range, resolution), atoms, threads)
    worst_tail = max(integral.tail_fraction for integral in integrals)
    if worst_tail > TAIL_LIMIT:
        raise TailDominantError(
            f"Tail estimate is {worst_tail:.3g} of the shell integral",
            error_details={"tail_fraction": worst_tail, "shell_range": list(shell_range)},
        )

    p = pv.p_plus
    values = np.array([integral.total ** (1.0 / p) for integral in integrals])
    half = max(1, len(atoms) // 2)
    constant = float(np.max(values))
    stability = drift(float(np.max(values[:half])), constant)
    per_index = defaultdict(float)
    for atom, value in zip(atoms, values):
        per_index[atom.ball.index] = max(per_index[atom.ball.index], float(value))
    positive = [v for v in per_index.values() if v > 0]
    uniformity = max(positive) / min(positive) if len(positive) > 1 else 1.0

    report = EstimateReport(
        "hardy-littlewood",
        {
            "matrix": d.matrix.tolist(),
            "exponents": pv.labels(),
            "seed": seed,
            "shell_range": list(shell_range),
            "weight_exponents": [str(exponents.outer), str(exponents.inner)],
        },
    )
    report.constant = constant
    report.stability = stability
    report.sample_sizes = {"atoms": len(atoms), "shells": int(shell_range[1] - shell_range[0] + 1)}
    report.details = {
        "per_i0": {str(k): v for k, v in sorted(per_index.items())},
        "uniformity": uniformity,
        "worst_tail_fraction": worst_tail,
        "outer_bound_max": max((i.outer_bound for i in integrals if i.outer_bound is not None), default=None),
    }
    for m, (atom, integral) in enumerate(zip(atoms, integrals)):
        report.raw_rows.append(
            {
                "atom": m,
                "i0": atom.ball.index,
                "seed": atom.seed,
                "inner": integral.inner,
                "tail_low": integral.tail_low,
                "tail_high": integral.tail_high,
                "outer_bound": integral.outer_bound,
                "value": float(values[m]),
            }
        )
    for k, value in zip(integrals[0].shells, np.max([i.contributions for i in integrals], axis=0)):
        report.plot_rows.append(
            {"series": "shell_max", "abscissa": d.b ** float(k), "ordinate": float(value), "fit": ""}
        )

    report.check("constant_finite", math.isfinite(constant) and constant > 0, value=constant)
    report.check("i0_uniformity", uniformity <= UNIFORMITY_LIMIT, value=uniformity, threshold=UNIFORMITY_LIMIT)
    report.check("constant_stable", stability < DRIFT_LIMIT, value=stability, threshold=DRIFT_LIMIT)
    report.check("tail_small", worst_tail <= TAIL_LIMIT, value=worst_tail, threshold=TAIL_LIMIT)
    if pv.p_minus_exact == pv.p_plus_exact:
        report.check("branch_coincidence", exponents.coincide, detail=f"exponent {exponents.outer}")

    rng = make_rng(seed, 31)
    worst_mc = 0.0
    for atom, integral in zip(atoms[:monte_carlo_atoms], integrals):
        peak = int(np.argmax(np.where(integral.resolved, integral.contributions, -1.0)))
        k = int(integral.shells[peak])
        estimate = monte_carlo_shell(lambda x: fourier_atom_direct(atom, x), e_star, pv, k, monte_carlo_samples, rng)
        reference = float(integral.contributions[peak])
        worst_mc = max(worst_mc, abs(estimate - reference) / reference if reference > 0 else 0.0)
    report.check("monte_carlo_agreement", worst_mc <= MONTE_CARLO_LIMIT, value=worst_mc, threshold=MONTE_CARLO_LIMIT)
    return report


def verify_hardy_littlewood_sum(
    sum_: AtomicSum,
    d: Dilation,
    pv: ExponentVector,
    shell_range: tuple[int, int] = (-10, 10),
    resolution: int = 24,
    norm_resolution: int = 64,
    e_star: QuasiNormEvaluator | None = None,
) -> EstimateReport:
    """Weighted integral of a finite sum against the bound carried by its coefficients

    With p_+ <= 1 the integrand is subadditive, so over the shells where the whole sum is
    resolved the integral of F stays below sum |lambda_i|^{p_+} I(a_i).
    """
    e_star = e_star or QuasiNormEvaluator.for_transpose(d)
    p = pv.p_plus
    integral = shell_integral(lambda x: fourier_finite_sum(sum_, x), e_star, pv, shell_range, resolution)
    if integral.tail_fraction > TAIL_LIMIT:
        raise TailDominantError(f"Tail estimate is {integral.tail_fraction:.3g} of the shell integral")
    terms = [_atom_integral(atom, e_star, pv, shell_range, resolution) for atom in sum_.atoms]
    constant = max(term.inner ** (1.0 / p) for term in terms)
    value = integral.inner ** (1.0 / p)
    lp_check = coefficient_lp_check(sum_, d, pv, norm_resolution)
    coefficient_bound = constant * lp_check.lhs

    report = EstimateReport("hardy-littlewood-sum", {"atoms": len(sum_), "exponents": pv.labels()})
    report.constant = value / lp_check.lhs if lp_check.lhs > 0 else 0.0
    report.details = {
        "value": value,
        "total_with_tail": integral.total ** (1.0 / p),
        "atom_constant": constant,
        "coefficients_lp": lp_check.lhs,
        "atomic_norm": lp_check.rhs,
    }
    report.raw_rows = integral.rows("sum")
    report.check(
        "coefficient_bound", value <= coefficient_bound * (1.0 + 1e-9), value=value, threshold=coefficient_bound
    )
    report.check("coefficient_lp_check", lp_check.passed, value=lp_check.lhs, threshold=1.03 * lp_check.rhs)
    norm_bound = 1.03 * constant * lp_check.rhs
    report.check("atomic_norm_bound", value <= norm_bound, value=value, threshold=norm_bound)
    return report
