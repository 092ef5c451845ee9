import math
import logging
from dataclasses import field, dataclass

import numpy as np
import scipy.linalg

# Lamb Framework
from lamb.exc import ServerError, InvalidParamValueError

# Project
from hardy.utils import make_rng, monomials, derive_seed, parallel_map, multi_indices
from hardy.dilation import Dilation, DilatedBall, ball_diameter, ball_half_widths
from hardy.exceptions import ShapeMismatchError, DegenerateProjectionError
from hardy.mixed_norm import ExponentVector, GridFunction, aggregate, mixed_norm_eval, indicator_ball_norm

__all__ = [
    "DilatedBall",
    "Atom",
    "AtomicSum",
    "AtomCertificate",
    "CoefficientCheck",
    "min_vanishing_order",
    "generate_atom",
    "verify_atom",
    "atomic_norm",
    "coefficient_sum_check",
    "coefficient_lp_check",
    "random_atoms",
    "random_atomic_sums",
]

logger = logging.getLogger(__name__)

PROFILE_SHARPNESS = 4.0
SIZE_SATURATION = 0.9
SIZE_SLACK = 1e-6
MOMENT_THRESHOLD = 1e-8
CONDITION_LIMIT = 1e12
PROJECTION_FLOOR = 1e-10
MAX_PROJECTION_ATTEMPTS = 16
EXTRA_DEGREE = 2
DEFAULT_RESOLUTION = 64
DEFAULT_INDICATOR_RESOLUTION = 128


def min_vanishing_order(d: Dilation, pv: ExponentVector) -> int:
    """floor((1/p_- - 1) ln b / ln lambda_-), never negative"""
    factor = float(1 / pv.p_minus_exact - 1) if pv.p_minus_exact != math.inf else -1.0
    value = factor * math.log(d.b) / math.log(d.lambda_minus)
    return max(0, math.floor(value + 1e-12))


def _profile(q: np.ndarray) -> np.ndarray:
    """exp(k - k/(1-q)) inside the unit level set, zero outside"""
    inside = q < 1.0
    gap = np.where(inside, 1.0 - q, 1.0)
    return np.where(inside, np.exp(PROFILE_SHARPNESS - PROFILE_SHARPNESS / gap), 0.0)


@dataclass(frozen=True, eq=False)
class Atom:
    """Smooth (p, r, s)-atom a = scale * phi * poly on x0 + B_{i0}

    phi is the bump of the canonical ball and poly the projected polynomial, both read in
    canonical coordinates xi = A^{-i0}(x - x0) normalised by the half widths of B_0.
    """

    dilation: Dilation
    ball: DilatedBall
    r_exponent: float
    s_order: int
    samples: GridFunction
    certified: bool
    seed: int
    coefficients: np.ndarray
    scale: float
    resolution: int
    attempts: int = 1
    basis: tuple = field(init=False, repr=False)

    def __post_init__(self):
        degree = self.s_order + EXTRA_DEGREE
        object.__setattr__(self, "basis", tuple(multi_indices(self.dilation.n, degree)))
        if len(self.basis) != len(self.coefficients):
            raise ShapeMismatchError(
                f"{len(self.coefficients)} coefficients for a basis of {len(self.basis)} monomials"
            )

    @property
    def canonical_half_widths(self) -> np.ndarray:
        return ball_half_widths(self.dilation, 0)

    def canonical(self, xi: np.ndarray) -> np.ndarray:
        """a(A^{i0} xi + x0)"""
        xi = np.asarray(xi, dtype=float)
        ellipsoid = self.dilation.ellipsoid
        q = ellipsoid.norm(xi) ** 2 / ellipsoid.radius**2
        phi = _profile(q)
        values = np.zeros(xi.shape[:-1])
        support = phi > 0
        if np.any(support):
            eta = xi[support] / self.canonical_half_widths
            values[support] = self.scale * phi[support] * (monomials(eta, self.basis) @ self.coefficients)
        return values

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xi = (x - self.ball.center_array) @ self.dilation.power(-self.ball.index).T
        return self.canonical(xi)

    def sample(self, level: int = 0) -> GridFunction:
        """Atom on its bounding box, each base cell split into 2^level per axis"""
        if level == 0:
            return self.samples
        lo, hi = self.ball.bounding_box(self.dilation)
        return GridFunction.midpoint(lo, hi, self.resolution * 2**level, func=self.evaluate)

    def canonical_samples(self, level: int = 0) -> GridFunction:
        """a(A^{i0} . + x0) on the bounding box of B_0"""
        half = self.canonical_half_widths
        return GridFunction.midpoint(-half, half, self.resolution * 2**level, func=self.canonical)

    def lr_norm(self, r: float | None = None) -> float:
        r = self.r_exponent if r is None else r
        values = np.abs(self.samples.values)
        if math.isinf(r):
            return float(np.max(values))
        return float(np.sum(self.samples.cell_weights() * values**r) ** (1.0 / r))

    def l1_norm(self) -> float:
        return self.lr_norm(1.0)

    def l2_norm(self) -> float:
        return self.lr_norm(2.0)

    def scaled(self, c: float) -> "Atom":
        return Atom(
            dilation=self.dilation,
            ball=self.ball,
            r_exponent=self.r_exponent,
            s_order=self.s_order,
            samples=self.samples.scale(c),
            certified=False,
            seed=self.seed,
            coefficients=self.coefficients,
            scale=self.scale * c,
            resolution=self.resolution,
            attempts=self.attempts,
        )

    def metadata(self) -> dict:
        return {
            "ball": {"center": list(self.ball.center), "index": self.ball.index},
            "r": "inf" if math.isinf(self.r_exponent) else self.r_exponent,
            "s": self.s_order,
            "seed": self.seed,
            "scale": self.scale,
            "resolution": self.resolution,
            "attempts": self.attempts,
            "coefficients": self.coefficients.tolist(),
            "certified": self.certified,
        }


@dataclass(frozen=True, eq=False)
class AtomicSum:
    coefficients: np.ndarray
    atoms: tuple

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=complex).ravel()
        atoms = tuple(self.atoms)
        if coefficients.size != len(atoms):
            raise ShapeMismatchError(f"{coefficients.size} coefficients for {len(atoms)} atoms")
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def single(cls, atom: Atom, coefficient: complex = 1.0) -> "AtomicSum":
        return cls(np.array([coefficient]), (atom,))

    def __len__(self):
        return len(self.atoms)

    def combine(self, other: "AtomicSum") -> "AtomicSum":
        return AtomicSum(np.concatenate([self.coefficients, other.coefficients]), self.atoms + other.atoms)

    def scaled(self, c: complex) -> "AtomicSum":
        return AtomicSum(c * self.coefficients, self.atoms)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[:-1], dtype=complex)
        for coefficient, atom in zip(self.coefficients, self.atoms):
            total += coefficient * atom.evaluate(x)
        return total

    @property
    def min_order(self) -> int:
        return min(a.s_order for a in self.atoms)


def _project(vandermonde: np.ndarray, root_weight: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Weighted least-squares coefficients of the polynomial part of target"""
    system = root_weight[:, None] * vandermonde
    rhs = root_weight * target
    if np.linalg.cond(system) <= CONDITION_LIMIT:
        coefficients, *_ = scipy.linalg.lstsq(system, rhs, lapack_driver="gelsy")
        return coefficients
    # orthonormal basis from pivoted QR, rank-revealing
    q, r, pivots = scipy.linalg.qr(system, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    rank = int(np.count_nonzero(diagonal > diagonal[0] * 1e-14))
    logger.debug(f"Projection fell back to orthonormal basis of rank {rank}/{system.shape[1]}")
    reduced = scipy.linalg.solve_triangular(r[:rank, :rank], q[:, :rank].T @ rhs)
    coefficients = np.zeros(system.shape[1])
    coefficients[pivots[:rank]] = reduced
    return coefficients


def generate_atom(
    d: Dilation,
    pv: ExponentVector,
    ball: DilatedBall,
    r: float = 2.0,
    s: int | None = None,
    seed: int = 0,
    resolution: int = DEFAULT_RESOLUTION,
    indicator_resolution: int = DEFAULT_INDICATOR_RESOLUTION,
) -> Atom:
    s_min = min_vanishing_order(d, pv)
    s = s_min if s is None else int(s)
    if s < s_min:
        raise InvalidParamValueError(f"Moment order s={s} below the minimum {s_min}", error_details={"s_min": s_min})
    if not r > max(pv.p_plus, 1.0):
        raise InvalidParamValueError(f"Atom exponent r={r} must exceed max(p_+, 1) = {max(pv.p_plus, 1.0)}")
    if len(ball.center) != d.n:
        raise ShapeMismatchError(f"Ball center of dimension {len(ball.center)} for dilation of dimension {d.n}")

    rng = make_rng(seed)
    lo, hi = ball.bounding_box(d)
    grid = GridFunction.midpoint(lo, hi, resolution)
    points = grid.mesh().reshape(-1, d.n)
    weights = grid.cell_weights().ravel()
    xi = (points - ball.center_array) @ d.power(-ball.index).T
    phi = _profile(d.ellipsoid.norm(xi) ** 2 / d.ellipsoid.radius**2)
    support = phi > 0
    eta = xi[support] / ball_half_widths(d, 0)

    full_basis = multi_indices(d.n, s + EXTRA_DEGREE)
    moment_count = len(multi_indices(d.n, s))
    vandermonde = monomials(eta, full_basis)
    root_weight = np.sqrt(weights[support] * phi[support])

    for attempt in range(1, MAX_PROJECTION_ATTEMPTS + 1):
        coefficients = rng.standard_normal(len(full_basis))
        target = vandermonde @ coefficients
        projected = _project(vandermonde[:, :moment_count], root_weight, target)
        coefficients[:moment_count] -= projected
        residual = vandermonde @ coefficients
        # refinement pass, leaves the discrete moments at round-off
        coefficients[:moment_count] -= _project(vandermonde[:, :moment_count], root_weight, residual)
        residual = vandermonde @ coefficients
        original_norm = np.linalg.norm(root_weight * target)
        if np.linalg.norm(root_weight * residual) >= PROJECTION_FLOOR * original_norm:
            break
        logger.debug(f"Degenerate projection on attempt {attempt} for seed {seed}, resampling")
    else:
        raise DegenerateProjectionError(
            f"Moment projection degenerated {MAX_PROJECTION_ATTEMPTS} times for seed {seed}",
            error_details={"seed": seed, "s": s},
        )

    raw = np.zeros(points.shape[0])
    raw[support] = phi[support] * residual
    if math.isinf(r):
        raw_norm = float(np.max(np.abs(raw)))
    else:
        raw_norm = float(np.sum(weights * np.abs(raw) ** r) ** (1.0 / r))
    bound = _size_bound(d, pv, ball, r, indicator_resolution)
    scale = SIZE_SATURATION * bound / raw_norm

    atom = Atom(
        dilation=d,
        ball=ball,
        r_exponent=float(r),
        s_order=s,
        samples=grid.with_values((scale * raw).reshape(grid.shape)),
        certified=False,
        seed=int(seed),
        coefficients=coefficients,
        scale=scale,
        resolution=resolution,
        attempts=attempt,
    )
    certificate = verify_atom(d, pv, atom, indicator_resolution=indicator_resolution)
    if not certificate.passed:
        raise ServerError(f"Generated atom failed certification: {certificate.as_dict()}")
    return Atom(**{**_atom_fields(atom), "certified": True})


def _atom_fields(atom: Atom) -> dict:
    return {
        "dilation": atom.dilation,
        "ball": atom.ball,
        "r_exponent": atom.r_exponent,
        "s_order": atom.s_order,
        "samples": atom.samples,
        "certified": atom.certified,
        "seed": atom.seed,
        "coefficients": atom.coefficients,
        "scale": atom.scale,
        "resolution": atom.resolution,
        "attempts": atom.attempts,
    }


def _size_bound(d: Dilation, pv: ExponentVector, ball: DilatedBall, r: float, indicator_resolution: int) -> float:
    indicator = indicator_ball_norm(d, ball, pv, indicator_resolution).value
    volume_term = 1.0 if math.isinf(r) else ball.volume(d) ** (1.0 / r)
    return volume_term / indicator


@dataclass(frozen=True)
class AtomCertificate:
    support_passed: bool
    support_margin: float
    size_passed: bool
    size_ratio: float
    size_margin: float
    moments_passed: bool
    moment_worst: float
    moment_margin: float

    @property
    def passed(self) -> bool:
        return self.support_passed and self.size_passed and self.moments_passed

    def as_dict(self) -> dict:
        return {
            "support": {"passed": self.support_passed, "margin": self.support_margin},
            "size": {"passed": self.size_passed, "ratio": self.size_ratio, "margin": self.size_margin},
            "moments": {"passed": self.moments_passed, "worst": self.moment_worst, "margin": self.moment_margin},
            "passed": self.passed,
        }


def verify_atom(
    d: Dilation, pv: ExponentVector, atom: Atom, indicator_resolution: int = DEFAULT_INDICATOR_RESOLUTION
) -> AtomCertificate:
    """Independent re-check of support, size and vanishing moments on the sample grid"""
    grid = atom.samples
    points = grid.mesh().reshape(-1, d.n)
    values = np.asarray(grid.values).ravel()
    weights = grid.cell_weights().ravel()
    magnitude = np.abs(values)
    peak = float(np.max(magnitude)) if magnitude.size else 0.0

    outside = ~atom.ball.contains(d, points)
    leak = float(np.max(magnitude[outside])) if np.any(outside) else 0.0
    support_margin = -leak / peak if peak > 0 else 0.0

    bound = _size_bound(d, pv, atom.ball, atom.r_exponent, indicator_resolution)
    size_ratio = atom.lr_norm() / bound

    l1 = float(np.sum(weights * magnitude))
    diameter = ball_diameter(d, atom.ball.index)
    centred = (points - atom.ball.center_array) / diameter
    moments = (weights * values) @ monomials(centred, multi_indices(d.n, atom.s_order))
    worst = float(np.max(np.abs(moments)) / l1) if l1 > 0 else 0.0

    return AtomCertificate(
        support_passed=leak == 0.0,
        support_margin=support_margin,
        size_passed=size_ratio <= 1.0 + SIZE_SLACK,
        size_ratio=size_ratio,
        size_margin=1.0 + SIZE_SLACK - size_ratio,
        moments_passed=worst <= MOMENT_THRESHOLD,
        moment_worst=worst,
        moment_margin=MOMENT_THRESHOLD - worst,
    )


def _common_edges(d: Dilation, balls, resolution: int) -> list[np.ndarray]:
    boxes = [ball.bounding_box(d) for ball in balls]
    edges = []
    for k in range(d.n):
        merged = np.concatenate([np.linspace(lo[k], hi[k], resolution + 1) for lo, hi in boxes])
        edges.append(np.unique(merged))
    return edges


def atomic_norm(sum_: AtomicSum, d: Dilation, pv: ExponentVector, resolution: int = 64) -> float:
    """Atomic norm of one decomposition, rasterised on the merged partition of all balls

    Each ball contributes `resolution` cells per axis to the partition, so balls of very
    different scales are all resolved.
    """
    magnitudes = np.abs(sum_.coefficients)
    if len(sum_) == 0 or not np.any(magnitudes > 0):
        return 0.0
    balls = [atom.ball for atom in sum_.atoms]
    grid = GridFunction.from_edges(_common_edges(d, balls, resolution))
    mesh = grid.mesh()
    terms = []
    for magnitude, ball in zip(magnitudes, balls):
        indicator = ball.contains(d, mesh).astype(float)
        norm = mixed_norm_eval(grid.with_values(indicator), pv)
        if norm == 0.0:
            raise ShapeMismatchError(f"Ball {ball} is not resolved by the common grid")
        terms.append(magnitude * indicator / norm)
    return mixed_norm_eval(grid.with_values(aggregate(terms, pv.p_underline)), pv)


@dataclass(frozen=True)
class CoefficientCheck:
    lhs: float
    rhs: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.lhs <= (1.0 + self.slack) * self.rhs

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "passed": self.passed}


def coefficient_sum_check(
    sum_: AtomicSum, d: Dilation, pv: ExponentVector, resolution: int = 64, slack: float = 0.03
) -> CoefficientCheck:
    """sum |lambda_i| <= (1 + slack) * atomic norm"""
    if not pv.is_hardy_admissible:
        raise InvalidParamValueError(f"Coefficient check needs exponents in (0, 1], got {pv}")
    lhs = float(np.sum(np.abs(sum_.coefficients)))
    return CoefficientCheck(lhs=lhs, rhs=atomic_norm(sum_, d, pv, resolution), slack=slack)


def coefficient_lp_check(
    sum_: AtomicSum, d: Dilation, pv: ExponentVector, resolution: int = 64, slack: float = 0.03
) -> CoefficientCheck:
    """(sum |lambda_i|^{p_+})^{1/p_+} <= (1 + slack) * atomic norm"""
    if not pv.is_hardy_admissible:
        raise InvalidParamValueError(f"Coefficient check needs exponents in (0, 1], got {pv}")
    lhs = float(np.sum(np.abs(sum_.coefficients) ** pv.p_plus) ** (1.0 / pv.p_plus))
    return CoefficientCheck(lhs=lhs, rhs=atomic_norm(sum_, d, pv, resolution), slack=slack)


def random_atoms(
    d: Dilation,
    pv: ExponentVector,
    count: int,
    seed: int,
    i0_range: tuple[int, int] = (-6, 6),
    r: float = 2.0,
    s: int | None = None,
    center_spread: float = 1.0,
    resolution: int = DEFAULT_RESOLUTION,
    indicator_resolution: int = DEFAULT_INDICATOR_RESOLUTION,
    threads: int = 1,
    stream: int = 0,
) -> list[Atom]:
    """Atoms with indices cycling through i0_range and uniformly spread centers

    Atom k draws from its own derived seed, so prefixes of the list do not depend on count.
    """
    lo, hi = i0_range
    span = hi - lo + 1

    def build(k: int) -> Atom:
        atom_seed = derive_seed(seed, stream, k)
        placement = make_rng(atom_seed, 1)
        center = placement.uniform(-center_spread, center_spread, size=d.n)
        ball = DilatedBall(tuple(center), lo + k % span)
        return generate_atom(d, pv, ball, r, s, atom_seed, resolution, indicator_resolution)

    atoms = parallel_map(build, range(count), threads)
    logger.info(f"Generated {len(atoms)} atoms over i0 in [{lo}, {hi}]")
    return atoms


def random_atomic_sums(
    d: Dilation,
    pv: ExponentVector,
    count: int,
    seed: int,
    max_atoms: int = 8,
    threads: int = 1,
    **atom_options,
) -> list[AtomicSum]:
    sums = []
    for k in range(count):
        rng = make_rng(seed, 2, k)
        size = int(rng.integers(1, max_atoms + 1))
        coefficients = rng.uniform(0.1, 1.0, size) * np.exp(2j * np.pi * rng.uniform(size=size))
        atoms = random_atoms(
            d, pv, size, derive_seed(seed, 3, k), threads=threads, stream=k, **atom_options
        )
        sums.append(AtomicSum(coefficients, tuple(atoms)))
    return sums
