import math
import logging
from typing import Callable
from dataclasses import dataclass

import numpy as np

# Lamb Framework
from lamb.exc import ClientError, ServerError, InvalidParamValueError

# Project
from hardy.atoms import Atom, AtomicSum
from hardy.utils import as_points, monomials, parallel_map, multi_indices, compensated_sum
from hardy.exceptions import PhaseUnderResolvedError, error_message
from hardy.mixed_norm import GridFunction
from hardy.quasi_norm import QuasiNormEvaluator, sample_shell

__all__ = [
    "FourierEvaluation",
    "LipschitzEstimate",
    "DIRECT",
    "DILATION_IDENTITY",
    "CANONICAL",
    "required_level",
    "transform_grid",
    "fourier_atom_direct",
    "fourier_via_dilation_identity",
    "fourier_derivative",
    "fourier_finite_sum",
    "exp_remainder",
    "moment_series_transform",
    "series_eligible",
    "ray_points",
    "shell_points",
    "lipschitz_estimate",
]

logger = logging.getLogger(__name__)

DIRECT = "direct"
DILATION_IDENTITY = "dilation_identity"
CANONICAL = "canonical"

PHASE_LIMIT = 0.5
MAX_REFINEMENT = 4
BATCH_SIZE = 256
SERIES_RADIUS = 1.0
SERIES_EXTRA_TERMS = 24


@dataclass(frozen=True, eq=False)
class FourierEvaluation:
    """Transform values at a batch of frequencies

    Points whose phase per cell stays above the limit even at the finest level are kept,
    flagged in `under_resolved` and carry their residual phase in `phase_err`.
    `floor` is the estimated round-off level of each value, eps times the absolute sum
    of the quadrature terms unless the moment series gives a tighter one.
    """

    points: np.ndarray
    values: np.ndarray
    method: str
    levels: np.ndarray
    phase_err: np.ndarray
    under_resolved: np.ndarray
    l1_bound: float
    floor: np.ndarray | None = None

    def __post_init__(self):
        if self.floor is None:
            object.__setattr__(self, "floor", np.full(len(self.values), np.finfo(float).eps * self.l1_bound))
        sizes = {len(self.points), len(self.values), len(self.levels), len(self.under_resolved), len(self.floor)}
        if len(sizes) > 1:
            raise ServerError("Fourier evaluation arrays have unequal lengths")
        if not np.all(np.isfinite(self.values)):
            raise ServerError(f"Non-finite transform values in {self.method} evaluation")

    def __len__(self):
        return len(self.values)

    @property
    def resolved(self) -> np.ndarray:
        return ~self.under_resolved

    @property
    def under_resolved_count(self) -> int:
        return int(np.count_nonzero(self.under_resolved))

    def require_resolved(self) -> "FourierEvaluation":
        if self.under_resolved_count:
            raise PhaseUnderResolvedError(
                f"{self.under_resolved_count} of {len(self)} points exceed the phase limit after refinement",
                error_details={"worst_phase": float(np.max(self.phase_err))},
            )
        return self

    def rows(self, rho_star: np.ndarray | None = None) -> list[dict]:
        rows = []
        for m, (point, value) in enumerate(zip(self.points, self.values)):
            row = {f"x{k + 1}": float(c) for k, c in enumerate(point)}
            row["rho_star"] = float(rho_star[m]) if rho_star is not None else ""
            row["re_F"] = float(value.real)
            row["im_F"] = float(value.imag)
            row["abs_F"] = float(abs(value))
            row["method"] = self.method
            row["phase_err"] = float(self.phase_err[m])
            row["floor"] = float(self.floor[m])
            row["under_resolved"] = bool(self.under_resolved[m])
            rows.append(row)
        return rows


def _phase(spacing: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    return 2.0 * math.pi * np.abs(freqs) @ spacing


def required_level(spacing: np.ndarray, freqs: np.ndarray, max_level: int = MAX_REFINEMENT) -> np.ndarray:
    """Smallest refinement level with phase per cell under the limit, capped at max_level"""
    phase = _phase(np.asarray(spacing, dtype=float), freqs)
    with np.errstate(divide="ignore"):
        needed = np.ceil(np.log2(np.maximum(phase, 1e-300) / PHASE_LIMIT) + 1e-12)
    return np.clip(needed, 0, max_level).astype(int)


def transform_grid(grid: GridFunction, freqs: np.ndarray, weight: np.ndarray | None = None) -> np.ndarray:
    """sum_t w(t) g(t) e^{-2 pi i t.x} by successive contraction of the tensor axes"""
    values = grid.values if weight is None else grid.values * weight
    values = np.asarray(values, dtype=complex)
    result = np.empty(freqs.shape[0], dtype=complex)
    for start in range(0, freqs.shape[0], BATCH_SIZE):
        chunk = freqs[start : start + BATCH_SIZE]
        factors = [
            w * np.exp(-2j * math.pi * np.outer(chunk[:, k], axis))
            for k, (axis, w) in enumerate(zip(grid.axes, grid.weights))
        ]
        partial = np.einsum("...j,mj->m...", values, factors[-1])
        for factor in reversed(factors[:-1]):
            partial = np.einsum("m...j,mj->m...", partial, factor)
        result[start : start + BATCH_SIZE] = partial
    return result


def _evaluate_levels(
    grid_at: Callable[[int], GridFunction],
    freqs: np.ndarray,
    max_level: int,
    weight_at: Callable[[GridFunction], np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    base_spacing = grid_at(0).spacing()
    levels = required_level(base_spacing, freqs, max_level)
    values = np.empty(freqs.shape[0], dtype=complex)
    for level in np.unique(levels):
        mask = levels == level
        grid = grid_at(int(level))
        weight = weight_at(grid) if weight_at is not None else None
        values[mask] = transform_grid(grid, freqs[mask], weight)
    phase = _phase(base_spacing, freqs) / 2.0**levels
    return values, levels, phase


def _build(points, values, method, levels, phase, l1_bound, floor=None) -> FourierEvaluation:
    flagged = phase >= PHASE_LIMIT
    if np.any(flagged):
        logger.debug(f"{int(np.count_nonzero(flagged))} points left under-resolved by the {method} path")
    return FourierEvaluation(
        points=points,
        values=values,
        method=method,
        levels=levels,
        phase_err=phase,
        under_resolved=flagged,
        l1_bound=l1_bound,
        floor=floor,
    )


def _require_certified(atom: Atom):
    if not atom.certified:
        raise InvalidParamValueError(f"Atom with seed {atom.seed} is not certified")


def _parallel(evaluate: Callable[[np.ndarray], tuple], points: np.ndarray, threads: int):
    if threads <= 1 or len(points) <= BATCH_SIZE:
        return evaluate(points)
    chunks = np.array_split(points, math.ceil(len(points) / BATCH_SIZE))
    parts = parallel_map(evaluate, chunks, threads)
    return tuple(np.concatenate(column) for column in zip(*parts))


def exp_remainder(z: np.ndarray, order: int) -> np.ndarray:
    """e^z minus its Taylor polynomial of degree `order`, summed without cancellation for |z| <= 1"""
    term = z ** (order + 1) / math.factorial(order + 1)
    total = term.copy()
    for m in range(order + 2, order + 2 + SERIES_EXTRA_TERMS):
        term = term * z / m
        total += term
    return total


def _measured_moments(masses: np.ndarray, offsets: np.ndarray, gammas: list) -> tuple[np.ndarray, np.ndarray]:
    """Moments sum_t m_t o_t^gamma with compensated summation, and the root-sum-square of their terms"""
    terms = masses[:, None] * monomials(offsets, gammas)
    moments = compensated_sum(terms.real) + 1j * compensated_sum(terms.imag)
    return moments, np.sqrt(np.sum(np.abs(terms) ** 2, axis=0))


def _frequency_powers(w: np.ndarray, gammas: list, order: int) -> np.ndarray:
    """w^gamma per row of w and per multi-index, exact at w = 0"""
    table = np.ones(w.shape + (order + 1,), dtype=complex)
    for e in range(1, order + 1):
        table[..., e] = table[..., e - 1] * w
    powers = np.ones((w.shape[0], len(gammas)), dtype=complex)
    for k in range(w.shape[1]):
        powers *= table[:, k, [gamma[k] for gamma in gammas]]
    return powers


def moment_series_transform(
    grid: GridFunction, origin: np.ndarray, freqs: np.ndarray, order: int, weight: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Transform split about `origin` into a Taylor part of degree `order` and its remainder

    The Taylor part is sum_gamma m_gamma (-2 pi i x)^gamma / gamma! over the measured grid
    moments, the remainder is summed term by term, so a grid function with non-vanishing
    moments keeps them. Returns (values, round-off floor per frequency).
    """
    values = grid.values if weight is None else grid.values * weight
    masses = (grid.cell_weights() * values).ravel().astype(complex)
    offsets = grid.mesh().reshape(-1, grid.n) - origin
    gammas = multi_indices(grid.n, order)
    moments, spread = _measured_moments(masses, offsets, gammas)
    factorials = np.array([math.prod(math.factorial(g) for g in gamma) for gamma in gammas], dtype=float)
    eps = np.finfo(float).eps

    result = np.empty(freqs.shape[0], dtype=complex)
    floor = np.empty(freqs.shape[0])
    for start in range(0, freqs.shape[0], BATCH_SIZE):
        chunk = freqs[start : start + BATCH_SIZE]
        powers = _frequency_powers(-2j * math.pi * chunk, gammas, order) / factorials
        remainder = exp_remainder(-2j * math.pi * (chunk @ offsets.T), order)
        result[start : start + BATCH_SIZE] = powers @ moments + remainder @ masses
        floor[start : start + BATCH_SIZE] = eps * (np.abs(powers) @ spread + np.abs(remainder) @ np.abs(masses))
    return result * np.exp(-2j * math.pi * (freqs @ origin)), floor


def series_eligible(grid: GridFunction, origin: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Frequencies with |2 pi (t - origin).x| <= 1 over the whole grid"""
    extent = float(np.max(np.linalg.norm(grid.mesh().reshape(-1, grid.n) - origin, axis=1)))
    return 2.0 * math.pi * extent * np.linalg.norm(freqs, axis=1) <= SERIES_RADIUS


def _with_series(grid_at, origin, freqs, order, max_level, weight_at=None, series=True):
    """Level-selected quadrature, with the moment series taking over near the origin"""
    base = grid_at(0)
    weight = weight_at(base) if weight_at is not None else None
    near = series_eligible(base, origin, freqs) if series else np.zeros(len(freqs), dtype=bool)
    values = np.empty(len(freqs), dtype=complex)
    levels = np.zeros(len(freqs), dtype=int)
    phase = _phase(base.spacing(), freqs)
    masses = base.cell_weights() * (base.values if weight is None else base.values * weight)
    floor = np.full(len(freqs), np.finfo(float).eps * float(np.sum(np.abs(masses))))
    if np.any(near):
        values[near], floor[near] = moment_series_transform(base, origin, freqs[near], order, weight)
    if not np.all(near):
        far = ~near
        values[far], levels[far], phase[far] = _evaluate_levels(grid_at, freqs[far], max_level, weight_at)
    return values, levels, phase, floor


def fourier_atom_direct(
    atom: Atom, x_points, max_level: int = MAX_REFINEMENT, threads: int = 1, series: bool = True
) -> FourierEvaluation:
    """Quadrature of a(t) e^{-2 pi i t.x} on the atom's own grid, refined per point"""
    _require_certified(atom)
    points = as_points(x_points, atom.dilation.n)
    origin = atom.ball.center_array
    values, levels, phase, floor = _parallel(
        lambda chunk: _with_series(atom.sample, origin, chunk, atom.s_order, max_level, series=series),
        points,
        threads,
    )
    return _build(points, values, DIRECT, levels, phase, atom.l1_norm(), floor)


def fourier_via_dilation_identity(
    atom: Atom, x_points, max_level: int = MAX_REFINEMENT, threads: int = 1
) -> FourierEvaluation:
    """b^{i0} e^{-2 pi i x0.x} G((A*)^{i0} x), G the transform of a(A^{i0} . + x0) on B_0"""
    _require_certified(atom)
    d = atom.dilation
    points = as_points(x_points, d.n)
    pulled = points @ d.power(atom.ball.index)

    values, levels, phase = _parallel(
        lambda chunk: _evaluate_levels(atom.canonical_samples, chunk, max_level), pulled, threads
    )
    shift = np.exp(-2j * math.pi * (points @ atom.ball.center_array))
    values = atom.ball.volume(d) * shift * values
    return _build(points, values, DILATION_IDENTITY, levels, phase, atom.l1_norm())


def fourier_derivative(
    atom: Atom, alpha, x_points, max_level: int = MAX_REFINEMENT, threads: int = 1, series: bool = True
) -> FourierEvaluation:
    """d^alpha of the transform of xi -> a(A^{i0} xi + x0)

    Evaluated on the atom's own grid with xi = A^{-i0}(t - x0): weight (-2 pi i xi)^alpha,
    frequency A^{-i0 T} x and Jacobian b^{-i0}, so the moments are those the atom was
    projected on.
    """
    _require_certified(atom)
    d = atom.dilation
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != d.n or min(alpha) < 0:
        raise InvalidParamValueError(f"Multi-index {alpha} does not fit dimension {d.n}")
    if sum(alpha) > atom.s_order:
        raise InvalidParamValueError(f"|alpha| = {sum(alpha)} exceeds the moment order s = {atom.s_order}")
    points = as_points(x_points, d.n)
    pull = d.power(-atom.ball.index)
    center = atom.ball.center_array

    def weight_at(grid: GridFunction) -> np.ndarray:
        xi = (grid.mesh().reshape(-1, d.n) - center) @ pull.T
        return _frequency_powers(-2j * math.pi * xi, [alpha], max(alpha))[:, 0].reshape(grid.shape)

    order = atom.s_order - sum(alpha)
    freqs = points @ pull
    values, levels, phase, floor = _parallel(
        lambda chunk: _with_series(atom.sample, center, chunk, order, max_level, weight_at, series),
        freqs,
        threads,
    )
    jacobian = atom.ball.volume(d)
    values = np.exp(2j * math.pi * (freqs @ center)) * values / jacobian
    return _build(points, values, CANONICAL, levels, phase, atom.l1_norm() / jacobian, floor / jacobian)


def fourier_finite_sum(
    sum_: AtomicSum, x_points, max_level: int = MAX_REFINEMENT, threads: int = 1, series: bool = True
) -> FourierEvaluation:
    if len(sum_) == 0:
        raise InvalidParamValueError("Atomic sum has no terms")
    points = as_points(x_points, sum_.atoms[0].dilation.n)
    values = np.zeros(len(points), dtype=complex)
    levels = np.zeros(len(points), dtype=int)
    phase = np.zeros(len(points))
    floor = np.zeros(len(points))
    for i, (coefficient, atom) in enumerate(zip(sum_.coefficients, sum_.atoms)):
        try:
            term = fourier_atom_direct(atom, points, max_level, threads, series)
        except (ClientError, ServerError) as e:
            raise e.__class__(f"Term {i}: {error_message(e)}", error_details={"term": i}) from e
        values += coefficient * term.values
        levels = np.maximum(levels, term.levels)
        phase = np.maximum(phase, term.phase_err)
        floor += abs(coefficient) * term.floor
    l1_bound = float(sum(abs(c) * a.l1_norm() for c, a in zip(sum_.coefficients, sum_.atoms)))
    return _build(points, values, DIRECT, levels, phase, l1_bound, floor)


def ray_points(
    n: int, ray_count: int, rng: np.random.Generator, t_range: tuple[float, float] = (1e-4, 1e2), per_ray: int = 25
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Log-spaced points t*u on random unit directions u; returns (directions, t, points)"""
    directions = rng.standard_normal((ray_count, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    t = np.geomspace(t_range[0], t_range[1], per_ray)
    points = (directions[:, None, :] * t[None, :, None]).reshape(-1, n)
    return directions, t, points


def shell_points(
    e_star: QuasiNormEvaluator, shell_range: tuple[int, int], per_shell: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform samples of every rho*-shell j in shell_range; returns (points, shell index)"""
    lo, hi = shell_range
    points = [sample_shell(e_star, j, per_shell, rng) for j in range(lo, hi + 1)]
    shells = np.repeat(np.arange(lo, hi + 1), per_shell)
    return np.concatenate(points), shells


@dataclass(frozen=True)
class LipschitzEstimate:
    empirical: float
    analytic_bound: float
    pairs: int

    @property
    def passed(self) -> bool:
        return math.isfinite(self.empirical) and self.empirical <= self.analytic_bound * (1.0 + 1e-6)


def lipschitz_estimate(atom: Atom, box: float, pairs: int, rng: np.random.Generator) -> LipschitzEstimate:
    """Empirical Lipschitz constant of the transform on [-box, box]^n against 2 pi ||t| a|_1"""
    n = atom.dilation.n
    x = rng.uniform(-box, box, size=(pairs, n))
    y = np.clip(x + rng.normal(scale=box * 1e-2, size=(pairs, n)), -box, box)
    both = fourier_atom_direct(atom, np.concatenate([x, y]))
    fx, fy = both.values[:pairs], both.values[pairs:]
    distance = np.linalg.norm(x - y, axis=1)
    usable = distance > 0
    empirical = float(np.max(np.abs(fx - fy)[usable] / distance[usable])) if np.any(usable) else 0.0

    samples = atom.samples
    moment = np.linalg.norm(samples.mesh(), axis=-1) * np.abs(samples.values)
    analytic = 2.0 * math.pi * float(np.sum(samples.cell_weights() * moment))
    return LipschitzEstimate(empirical=empirical, analytic_bound=analytic, pairs=pairs)
