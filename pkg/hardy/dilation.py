import math
import logging
import threading
from functools import cached_property
from dataclasses import field, dataclass

import numpy as np
import scipy.linalg
import scipy.special

# Lamb Framework
from lamb.exc import ServerError, InvalidParamValueError

# Project
from hardy.exceptions import NotExpansiveError, SingularMatrixError, DimensionMismatchError, SeriesDivergenceError

__all__ = [
    "EllipsoidForm",
    "Dilation",
    "DilatedBall",
    "validate_dilation",
    "check_determinant",
    "build_ellipsoid",
    "ball_membership",
    "transpose_dilation",
    "eigenvalue_moduli",
    "ball_quadratic_form",
    "ball_half_widths",
    "ball_diameter",
    "monte_carlo_ball_volume",
    "spectral_report",
]

logger = logging.getLogger(__name__)

EXPANSIVE_TOLERANCE = 1e-9
SERIES_TOLERANCE = 1e-14
SERIES_MAX_TERMS = 10_000
CERTIFICATE_TOLERANCE = 1e-10
DETERMINANT_TOLERANCE = 1e-10
MEMBERSHIP_SHRINK = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class EllipsoidForm:
    """Unit-volume ellipsoid {x : x^T P x < radius^2}"""

    P: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(self.P))

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def norm(self, x: np.ndarray) -> np.ndarray:
        """|x|_P along the last axis"""
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", x, self.P, x))

    @property
    def volume(self) -> float:
        n = self.n
        omega = math.pi ** (n / 2) / scipy.special.gamma(n / 2 + 1)
        return float(omega * self.radius**n / math.sqrt(np.linalg.det(self.P)))


@dataclass(frozen=True, eq=False)
class Dilation:
    matrix: np.ndarray
    n: int
    b: float
    lambda_abs: np.ndarray
    lambda_minus: float
    lambda_plus: float
    ellipsoid: EllipsoidForm
    expansion_r: float
    _powers: dict = field(default_factory=dict, init=False, repr=False)
    _powers_lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))
        object.__setattr__(self, "lambda_abs", _frozen(self.lambda_abs))

    @cached_property
    def inverse(self) -> np.ndarray:
        return _frozen(np.linalg.inv(self.matrix))

    @property
    def delta(self) -> float:
        return self.expansion_r**2

    def power(self, i: int) -> np.ndarray:
        """A^i for any integer i, cached"""
        i = int(i)
        with self._powers_lock:
            value = self._powers.get(i)
            if value is None:
                base = self.matrix if i >= 0 else self.inverse
                value = _frozen(np.linalg.matrix_power(base, abs(i)))
                self._powers[i] = value
        return value

    def power_stack(self, indices: np.ndarray) -> np.ndarray:
        """Stack of A^i for an integer index array, shape indices.shape + (n, n)"""
        indices = np.asarray(indices, dtype=int)
        unique, inverse = np.unique(indices, return_inverse=True)
        table = np.stack([self.power(i) for i in unique]) if unique.size else np.zeros((0, self.n, self.n))
        return table[inverse.reshape(indices.shape)]

    @property
    def log_lambda_ratio_minus(self) -> float:
        """ln(lambda_-)/ln(b)"""
        return math.log(self.lambda_minus) / math.log(self.b)

    @property
    def log_lambda_ratio_plus(self) -> float:
        """ln(lambda_+)/ln(b)"""
        return math.log(self.lambda_plus) / math.log(self.b)


@dataclass(frozen=True)
class DilatedBall:
    """x0 + B_i"""

    center: tuple[float, ...]
    index: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        object.__setattr__(self, "index", int(self.index))

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def volume(self, d: Dilation) -> float:
        return d.b**self.index

    def contains(self, d: Dilation, x) -> np.ndarray:
        return ball_membership(d, np.asarray(x, dtype=float) - self.center_array, self.index)

    def bounding_box(self, d: Dilation) -> tuple[np.ndarray, np.ndarray]:
        half = ball_half_widths(d, self.index)
        return self.center_array - half, self.center_array + half


def eigenvalue_moduli(matrix: np.ndarray) -> np.ndarray:
    """Sorted eigenvalue moduli read from the real Schur form"""
    t, _ = scipy.linalg.schur(matrix, output="real")
    n = t.shape[0]
    moduli = []
    k = 0
    while k < n:
        if k + 1 < n and t[k + 1, k] != 0.0:
            # complex conjugate pair: |lambda|^2 = det of the 2x2 block
            modulus = math.sqrt(abs(np.linalg.det(t[k : k + 2, k : k + 2])))
            moduli.extend([modulus, modulus])
            k += 2
        else:
            moduli.append(abs(t[k, k]))
            k += 1
    return np.sort(np.asarray(moduli))


def build_ellipsoid(matrix, delta: float, method: str = "series") -> EllipsoidForm:
    """Ellipsoid Delta with |Delta| = 1 and the contraction certificate for r = sqrt(delta)

    P solves P = I + delta * A^{-T} P A^{-1}; the series method sums delta^j (A^{-j})^T A^{-j}
    until a term drops below 1e-14 in spectral norm, the lyapunov method hands the same
    equation to scipy.
    """
    a = np.asarray(matrix, dtype=float)
    n = a.shape[0]
    if delta <= 1.0:
        raise InvalidParamValueError(f"Ellipsoid parameter delta must exceed 1, got {delta}")
    inverse = np.linalg.inv(a)
    if method == "series":
        step = math.sqrt(delta) * inverse
        power = np.eye(n)
        p = np.eye(n)
        for j in range(1, SERIES_MAX_TERMS + 1):
            power = power @ step
            term = power.T @ power
            p += term
            term_norm = np.linalg.norm(term, 2)
            if not np.isfinite(term_norm) or term_norm > 1e300:
                raise SeriesDivergenceError(
                    f"Ellipsoid series blew up at term {j}", error_details={"delta": delta, "term": j}
                )
            if term_norm < SERIES_TOLERANCE:
                logger.debug(f"Ellipsoid series truncated after {j} terms")
                break
        else:
            raise SeriesDivergenceError(
                f"Ellipsoid series did not converge in {SERIES_MAX_TERMS} terms for delta={delta}",
                error_details={"delta": delta},
            )
    elif method == "lyapunov":
        p = scipy.linalg.solve_discrete_lyapunov(math.sqrt(delta) * inverse.T, np.eye(n))
    else:
        raise InvalidParamValueError(f"Unknown ellipsoid construction method {method}")
    p = (p + p.T) / 2

    # certificate: spectrum of P^{-1/2} A^{-T} P A^{-1} P^{-1/2} bounded by 1/delta
    try:
        chol = np.linalg.cholesky(p)
    except np.linalg.LinAlgError as e:
        raise SeriesDivergenceError("Ellipsoid matrix is not positive definite") from e
    m = inverse.T @ p @ inverse
    half = scipy.linalg.solve_triangular(chol, m, lower=True)
    similar = scipy.linalg.solve_triangular(chol, half.T, lower=True)
    top = float(np.max(np.linalg.eigvalsh((similar + similar.T) / 2)))
    if top > 1.0 / delta + CERTIFICATE_TOLERANCE:
        raise SeriesDivergenceError(
            f"Contraction certificate failed: {top:.12g} > 1/delta = {1.0 / delta:.12g}",
            error_details={"delta": delta, "top_eigenvalue": top},
        )

    omega = math.pi ** (n / 2) / scipy.special.gamma(n / 2 + 1)
    _, logdet = np.linalg.slogdet(p)
    radius = math.exp((0.5 * logdet - math.log(omega)) / n)
    return EllipsoidForm(P=p, radius=radius)


def check_determinant(b: float, moduli: np.ndarray) -> None:
    """|det A| must equal the product of eigenvalue moduli to a relative DETERMINANT_TOLERANCE"""
    spectral_b = float(np.prod(moduli))
    if abs(b - spectral_b) > DETERMINANT_TOLERANCE * b:
        raise ServerError(
            f"Determinant {b:.15g} disagrees with eigenvalue product {spectral_b:.15g}",
            error_details={"det": b, "eigenvalue_product": spectral_b},
        )


def validate_dilation(
    matrix,
    lambda_minus: float | None = None,
    lambda_plus: float | None = None,
    delta: float | None = None,
    method: str = "series",
) -> Dilation:
    try:
        a = np.array(matrix, dtype=float)
    except (TypeError, ValueError) as e:
        raise DimensionMismatchError(f"Dilation matrix is not a numeric array: {matrix!r}") from e
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatchError(
            f"Dilation matrix must be square, got shape {a.shape}", error_details={"shape": list(a.shape)}
        )
    if not np.all(np.isfinite(a)):
        raise InvalidParamValueError("Dilation matrix has non-finite entries")
    n = a.shape[0]

    det = float(np.linalg.det(a))
    scale = max(1.0, float(np.max(np.abs(a))))
    if abs(det) <= 1e-12 * scale**n:
        raise SingularMatrixError(f"Dilation matrix is singular, det = {det:.3e}", error_details={"det": det})

    moduli = eigenvalue_moduli(a)
    if moduli[0] <= 1.0 + EXPANSIVE_TOLERANCE:
        raise NotExpansiveError(
            f"Dilation matrix is not expansive: min |lambda| = {moduli[0]:.12g}",
            error_details={"lambda_abs": moduli.tolist()},
        )

    b = abs(det)
    check_determinant(b, moduli)

    if lambda_minus is None:
        lambda_minus = 1.0 + 0.95 * (moduli[0] - 1.0)
    if lambda_plus is None:
        lambda_plus = 1.05 * moduli[-1]
    if not 1.0 < lambda_minus < moduli[0]:
        raise InvalidParamValueError(
            f"lambda_minus={lambda_minus} must lie in (1, {moduli[0]:.12g})",
            error_details={"lambda_minus": lambda_minus},
        )
    if not lambda_plus > moduli[-1]:
        raise InvalidParamValueError(
            f"lambda_plus={lambda_plus} must exceed {moduli[-1]:.12g}", error_details={"lambda_plus": lambda_plus}
        )

    if delta is None:
        delta = 0.999 * lambda_minus**2
        if delta <= 1.0:
            delta = (1.0 + lambda_minus**2) / 2
    if not 1.0 < delta < moduli[0] ** 2:
        raise InvalidParamValueError(
            f"delta={delta} must lie in (1, {moduli[0] ** 2:.12g})", error_details={"delta": delta}
        )

    ellipsoid = build_ellipsoid(a, delta, method=method)
    dilation = Dilation(
        matrix=a,
        n=n,
        b=b,
        lambda_abs=moduli,
        lambda_minus=float(lambda_minus),
        lambda_plus=float(lambda_plus),
        ellipsoid=ellipsoid,
        expansion_r=math.sqrt(delta),
    )
    logger.debug(f"Validated dilation b={b:.6g}, lambda_abs={moduli.tolist()}, r={dilation.expansion_r:.6g}")
    return dilation


def ball_membership(d: Dilation, x, i: int) -> np.ndarray | bool:
    """x in B_i, open ball, boundary deterministically outside"""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d.n:
        raise DimensionMismatchError(f"Point dimension {x.shape[-1]} does not match dilation dimension {d.n}")
    pulled = x @ d.power(-i).T
    inside = d.ellipsoid.norm(pulled) < d.ellipsoid.radius * (1.0 - MEMBERSHIP_SHRINK)
    return bool(inside) if inside.ndim == 0 else inside


def transpose_dilation(d: Dilation) -> Dilation:
    return validate_dilation(
        d.matrix.T, lambda_minus=d.lambda_minus, lambda_plus=d.lambda_plus, delta=d.delta
    )


def ball_quadratic_form(d: Dilation, i: int) -> np.ndarray:
    """Q_i with B_i = {x : x^T Q_i x < radius^2}"""
    pull = d.power(-i)
    return pull.T @ d.ellipsoid.P @ pull


def ball_half_widths(d: Dilation, i: int) -> np.ndarray:
    push = d.power(i)
    covariance = push @ np.linalg.inv(d.ellipsoid.P) @ push.T
    return d.ellipsoid.radius * np.sqrt(np.diag(covariance))


def ball_diameter(d: Dilation, i: int) -> float:
    push = d.power(i)
    covariance = push @ np.linalg.inv(d.ellipsoid.P) @ push.T
    return float(2.0 * d.ellipsoid.radius * math.sqrt(np.max(np.linalg.eigvalsh(covariance))))


def monte_carlo_ball_volume(
    d: Dilation, i: int, samples: int, rng: np.random.Generator, batch: int = 200_000
) -> float:
    half = ball_half_widths(d, i)
    box_volume = float(np.prod(2 * half))
    hits = 0
    remaining = samples
    while remaining > 0:
        size = min(batch, remaining)
        points = rng.uniform(-half, half, size=(size, d.n))
        hits += int(np.count_nonzero(ball_membership(d, points, i)))
        remaining -= size
    return box_volume * hits / samples


def spectral_report(d: Dilation) -> dict:
    return {
        "matrix": d.matrix.tolist(),
        "b": d.b,
        "lambda_abs": d.lambda_abs.tolist(),
        "lambda_minus": d.lambda_minus,
        "lambda_plus": d.lambda_plus,
        "expansion_r": d.expansion_r,
    }
