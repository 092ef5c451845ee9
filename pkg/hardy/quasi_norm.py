import math
import logging
from dataclasses import dataclass

import numpy as np
import scipy.special

# Lamb Framework
from lamb.exc import ServerError

# Project
from hardy.utils import as_points
from hardy.dilation import Dilation, ball_membership, ball_half_widths, transpose_dilation
from hardy.exceptions import IndexSaturationError

__all__ = [
    "QuasiNormEvaluator",
    "Lemma33Envelope",
    "rho",
    "rho_star",
    "index_by_scan",
    "sample_shell",
    "shell_entry_point",
    "lemma33_ratios",
    "lemma33_envelope",
    "quasi_triangle_ratios",
    "quasi_triangle_constant",
    "isotropic_comparison",
    "rho_table",
]

logger = logging.getLogger(__name__)

DEFAULT_INDEX_RANGE = (-60, 60)
SHELL_ENTRY_PUSH = 1e-9


@dataclass(frozen=True, eq=False)
class QuasiNormEvaluator:
    """Step quasi-norm rho(x) = b^i on B_{i+1} minus B_i"""

    dilation: Dilation
    index_range: tuple[int, int] = DEFAULT_INDEX_RANGE

    @classmethod
    def for_transpose(cls, d: Dilation, index_range: tuple[int, int] = DEFAULT_INDEX_RANGE) -> "QuasiNormEvaluator":
        return cls(transpose_dilation(d), index_range)

    @property
    def b(self) -> float:
        return self.dilation.b

    def membership(self, points: np.ndarray, j: np.ndarray) -> np.ndarray:
        """Per-point membership x_m in B_{j_m}"""
        pulls = self.dilation.power_stack(-np.asarray(j, dtype=int))
        pulled = np.einsum("mij,mj->mi", pulls, points)
        ellipsoid = self.dilation.ellipsoid
        return ellipsoid.norm(pulled) < ellipsoid.radius * (1.0 - 1e-12)

    def index(self, x) -> np.ndarray:
        """Shell index i with x in B_{i+1} minus B_i; zero points are rejected"""
        points = as_points(x, self.dilation.n)
        if np.any(np.all(points == 0.0, axis=1)):
            raise ServerError("Shell index is undefined at the origin")
        i_min, i_max = self.index_range
        count = points.shape[0]
        lo = np.full(count, i_min, dtype=int)
        hi = np.full(count, i_max + 1, dtype=int)

        too_small = self.membership(points, lo)
        too_large = ~self.membership(points, hi)
        if np.any(too_small) or np.any(too_large):
            bad = np.flatnonzero(too_small | too_large)
            raise IndexSaturationError(
                f"{bad.size} point(s) fall outside B_{i_max + 1} minus B_{i_min}",
                error_details={"index_range": list(self.index_range), "example": points[bad[0]].tolist()},
            )

        while np.any(hi - lo > 1):
            mid = (lo + hi) // 2
            inside = self.membership(points, mid)
            hi = np.where(inside, mid, hi)
            lo = np.where(inside, lo, mid)

        # monotone membership: the bracket must be (outside, inside)
        if np.any(self.membership(points, lo)) or not np.all(self.membership(points, hi)):
            raise ServerError("Ball membership is not monotone in the index")
        return lo

    def evaluate(self, x) -> np.ndarray:
        points = as_points(x, self.dilation.n)
        values = np.zeros(points.shape[0])
        nonzero = np.any(points != 0.0, axis=1)
        if np.any(nonzero):
            values[nonzero] = self.b ** self.index(points[nonzero]).astype(float)
        return values


def _scalar_or_array(x, values: np.ndarray):
    return float(values[0]) if np.ndim(x) == 1 else values


def rho(e: QuasiNormEvaluator, x) -> float | np.ndarray:
    return _scalar_or_array(x, e.evaluate(x))


def rho_star(e_star: QuasiNormEvaluator, x) -> float | np.ndarray:
    """rho for the transpose dilation; e_star must be built on A^T"""
    return _scalar_or_array(x, e_star.evaluate(x))


def index_by_scan(e: QuasiNormEvaluator, x, scan_range: tuple[int, int] = (-20, 20)) -> np.ndarray:
    """Linear scan over ball membership, the reference for the binary search"""
    points = as_points(x, e.dilation.n)
    result = np.full(points.shape[0], np.iinfo(int).min, dtype=int)
    found = np.zeros(points.shape[0], dtype=bool)
    for j in range(scan_range[0], scan_range[1] + 2):
        inside = ball_membership(e.dilation, points, j) & ~found
        result[inside] = j - 1
        found |= inside
    return result


def sample_shell(e: QuasiNormEvaluator, j: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples of B_{j+1} minus B_j, all with rho = b^j"""
    d = e.dilation
    half = ball_half_widths(d, 1)
    accepted = []
    total = 0
    while total < count:
        batch = rng.uniform(-half, half, size=(max(2 * (count - total), 64), d.n))
        keep = ball_membership(d, batch, 1) & ~ball_membership(d, batch, 0)
        accepted.append(batch[keep])
        total += int(np.count_nonzero(keep))
    canonical = np.concatenate(accepted)[:count]
    return canonical @ d.power(j).T


def shell_entry_point(e: QuasiNormEvaluator, u: np.ndarray, j: int) -> np.ndarray:
    """Point on the ray along u where it leaves B_j, so rho = b^j there"""
    d = e.dilation
    direction = np.asarray(u, dtype=float)
    t = d.ellipsoid.radius / float(d.ellipsoid.norm(d.power(-j) @ direction))
    return t * (1.0 + SHELL_ENTRY_PUSH) * direction


@dataclass(frozen=True)
class Lemma33Envelope:
    """Empirical constants of the rho versus Euclidean norm comparison

    outer regime rho > 1: c^-1 rho^{a-} <= |x| <= c rho^{a+}
    inner regime rho <= 1: c^-1 rho^{a+} <= |x| <= c rho^{a-}
    with a-/+ = ln(lambda_-/+)/ln(b).
    """

    outer_lower: float
    outer_upper: float
    inner_lower: float
    inner_upper: float
    outer_count: int
    inner_count: int

    @property
    def constant(self) -> float:
        return max(self.outer_lower, self.outer_upper, self.inner_lower, self.inner_upper)


def lemma33_ratios(e: QuasiNormEvaluator, points: np.ndarray) -> dict[str, np.ndarray]:
    d = e.dilation
    values = e.evaluate(points)
    length = np.linalg.norm(points, axis=1)
    a_minus, a_plus = d.log_lambda_ratio_minus, d.log_lambda_ratio_plus
    outer = values > 1.0
    inner = ~outer
    return {
        "outer_lower": values[outer] ** a_minus / length[outer],
        "outer_upper": length[outer] / values[outer] ** a_plus,
        "inner_lower": values[inner] ** a_plus / length[inner],
        "inner_upper": length[inner] / values[inner] ** a_minus,
    }


def _sample_across_shells(e: QuasiNormEvaluator, count: int, rng: np.random.Generator, span: int) -> np.ndarray:
    shells = rng.integers(-span, span + 1, size=count)
    points = np.empty((count, e.dilation.n))
    for j in np.unique(shells):
        mask = shells == j
        points[mask] = sample_shell(e, int(j), int(np.count_nonzero(mask)), rng)
    return points


def lemma33_envelope(
    e: QuasiNormEvaluator, sample_count: int, rng: np.random.Generator, span: int = 8
) -> Lemma33Envelope:
    if sample_count < 1000:
        logger.warning(f"Lemma envelope requested with only {sample_count} samples")
    points = _sample_across_shells(e, sample_count, rng, span)
    ratios = lemma33_ratios(e, points)

    def extreme(key):
        return float(np.max(ratios[key])) if ratios[key].size else 0.0

    return Lemma33Envelope(
        outer_lower=extreme("outer_lower"),
        outer_upper=extreme("outer_upper"),
        inner_lower=extreme("inner_lower"),
        inner_upper=extreme("inner_upper"),
        outer_count=int(ratios["outer_lower"].size),
        inner_count=int(ratios["inner_lower"].size),
    )


def quasi_triangle_ratios(e: QuasiNormEvaluator, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """rho(x+y) / (rho(x) + rho(y)), pairs with x = y = 0 give 0"""
    numerator = e.evaluate(np.asarray(x) + np.asarray(y))
    denominator = e.evaluate(x) + e.evaluate(y)
    return np.divide(numerator, denominator, out=np.zeros_like(numerator), where=denominator > 0)


def quasi_triangle_constant(e: QuasiNormEvaluator, sample_count: int, rng: np.random.Generator, span: int = 6) -> float:
    x = _sample_across_shells(e, sample_count, rng, span)
    y = _sample_across_shells(e, sample_count, rng, span)
    constant = float(np.max(quasi_triangle_ratios(e, x, y)))
    if not math.isfinite(constant):
        raise ServerError("Quasi-triangle constant is not finite")
    return constant


def isotropic_comparison(e: QuasiNormEvaluator, points: np.ndarray) -> tuple[float, float]:
    """min/max of omega_n |x|^n / rho(x); within [1, b) when A is a multiple of the identity"""
    n = e.dilation.n
    omega = math.pi ** (n / 2) / scipy.special.gamma(n / 2 + 1)
    scaled = omega * np.linalg.norm(points, axis=1) ** n / e.dilation.ellipsoid.volume
    ratios = scaled / e.evaluate(points)
    return float(np.min(ratios)), float(np.max(ratios))


def rho_table(e: QuasiNormEvaluator, e_star: QuasiNormEvaluator, points: np.ndarray) -> list[dict]:
    points = as_points(points, e.dilation.n)
    values = e.evaluate(points)
    star_values = e_star.evaluate(points)
    nonzero = np.any(points != 0.0, axis=1)
    indices = np.zeros(points.shape[0], dtype=int)
    if np.any(nonzero):
        indices[nonzero] = e.index(points[nonzero])
    rows = []
    for point, value, star, i, present in zip(points, values, star_values, indices, nonzero):
        row = {f"x{k + 1}": float(c) for k, c in enumerate(point)}
        row["rho"] = float(value)
        row["rho_star"] = float(star)
        row["index_i"] = int(i) if present else ""
        rows.append(row)
    return rows
