import csv
import math
import logging
from typing import Callable, Sequence
from fractions import Fraction
from dataclasses import dataclass

import numpy as np

# Lamb Framework
from lamb.exc import InvalidParamValueError

# Project
from hardy.utils import compensated_sum
from hardy.dilation import Dilation, DilatedBall
from hardy.exceptions import ShapeMismatchError, IndexSaturationError

__all__ = [
    "ExponentVector",
    "GridFunction",
    "IndicatorNorm",
    "IndicatorBoundReport",
    "mixed_norm_eval",
    "rasterize_ball",
    "indicator_ball_norm",
    "indicator_bound_check",
    "aggregate",
]

logger = logging.getLogger(__name__)

INDEX_LIMIT = 60


def _parse_exponent(value) -> Fraction | float:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "oo"):
            return math.inf
        return Fraction(text)
    if isinstance(value, float):
        if math.isinf(value):
            return math.inf
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class ExponentVector:
    """Mixed-norm exponents, stored exactly (Fraction) or as math.inf"""

    p: tuple

    def __post_init__(self):
        try:
            parsed = tuple(_parse_exponent(v) for v in self.p)
        except (ValueError, ZeroDivisionError, TypeError) as e:
            raise InvalidParamValueError(f"Can not parse exponents {self.p!r}") from e
        if not parsed or any(v <= 0 for v in parsed):
            raise InvalidParamValueError(
                f"Exponents must be positive, got {self.p!r}", error_details={"p": str(self.p)}
            )
        object.__setattr__(self, "p", parsed)

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def floats(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.p)

    @property
    def p_minus_exact(self):
        return min(self.p)

    @property
    def p_plus_exact(self):
        return max(self.p)

    @property
    def p_minus(self) -> float:
        return float(self.p_minus_exact)

    @property
    def p_plus(self) -> float:
        return float(self.p_plus_exact)

    @property
    def p_underline(self) -> float:
        return min(self.p_minus, 1.0)

    @property
    def is_hardy_admissible(self) -> bool:
        return all(v <= 1 for v in self.p)

    def labels(self) -> list[str]:
        return ["inf" if v == math.inf else str(v) for v in self.p]

    def __str__(self):
        return "(" + ", ".join(self.labels()) + ")"


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples on a tensor grid; axis k carries coordinate x_{k+1}"""

    axes: tuple
    weights: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        weights = tuple(np.asarray(w, dtype=float) for w in self.weights)
        values = np.asarray(self.values)
        if len(axes) != len(weights):
            raise ShapeMismatchError(f"{len(axes)} axes but {len(weights)} weight arrays")
        for k, (axis, weight) in enumerate(zip(axes, weights)):
            if axis.ndim != 1 or weight.shape != axis.shape:
                raise ShapeMismatchError(f"Axis {k} nodes and weights disagree: {axis.shape} vs {weight.shape}")
            if axis.size > 1 and not np.all(np.diff(axis) > 0):
                raise ShapeMismatchError(f"Axis {k} nodes are not strictly increasing")
            if not np.all(weight > 0):
                raise ShapeMismatchError(f"Axis {k} has non-positive quadrature weights")
        shape = tuple(a.size for a in axes)
        if values.shape != shape:
            raise ShapeMismatchError(
                f"Value array of shape {values.shape} does not match grid {shape}",
                error_details={"values": list(values.shape), "grid": list(shape)},
            )
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_edges(cls, edges: Sequence[np.ndarray], func: Callable | None = None, values=None) -> "GridFunction":
        """Composite midpoint rule on the cells between consecutive edges"""
        edges = [np.asarray(e, dtype=float) for e in edges]
        axes = tuple((e[1:] + e[:-1]) / 2 for e in edges)
        weights = tuple(np.diff(e) for e in edges)
        if values is None:
            shape = tuple(a.size for a in axes)
            values = np.zeros(shape) if func is None else func(cls.mesh_of(axes))
        return cls(axes, weights, values)

    @classmethod
    def midpoint(cls, lo, hi, resolution, func: Callable | None = None, values=None) -> "GridFunction":
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        resolution = np.broadcast_to(np.asarray(resolution, dtype=int), lo.shape)
        edges = [np.linspace(a, b, int(m) + 1) for a, b, m in zip(lo, hi, resolution)]
        return cls.from_edges(edges, func=func, values=values)

    @classmethod
    def gauss_legendre(cls, lo, hi, nodes, func: Callable) -> "GridFunction":
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        nodes = np.broadcast_to(np.asarray(nodes, dtype=int), lo.shape)
        axes, weights = [], []
        for a, b, m in zip(lo, hi, nodes):
            x, w = np.polynomial.legendre.leggauss(int(m))
            axes.append((b - a) / 2 * x + (a + b) / 2)
            weights.append((b - a) / 2 * w)
        return cls(tuple(axes), tuple(weights), func(cls.mesh_of(axes)))

    @staticmethod
    def mesh_of(axes) -> np.ndarray:
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    def mesh(self) -> np.ndarray:
        return self.mesh_of(self.axes)

    def cell_weights(self) -> np.ndarray:
        """Tensor product of the per-axis weights"""
        result = np.ones(())
        for w in self.weights:
            result = np.multiply.outer(result, w)
        return result

    def spacing(self) -> np.ndarray:
        return np.array([float(np.max(w)) for w in self.weights])

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.axes, self.weights, values)

    def scale(self, c) -> "GridFunction":
        return self.with_values(c * self.values)

    def integral(self) -> complex:
        return complex(np.sum(self.cell_weights() * self.values))

    def to_csv(self, path):
        """Axis descriptor rows first, then row-major values"""
        with open(path, "w", newline="", encoding="utf-8") as csv_file:
            writer = csv.writer(csv_file)
            writer.writerow(["record", "axis", "position", "first", "second"])
            for k, (axis, weight) in enumerate(zip(self.axes, self.weights)):
                for position, (node, w) in enumerate(zip(axis, weight)):
                    writer.writerow(["axis", k, position, format(node, ".17g"), format(w, ".17g")])
            flat = np.asarray(self.values, dtype=complex).ravel(order="C")
            for position, value in enumerate(flat):
                writer.writerow(["value", "", position, format(value.real, ".17g"), format(value.imag, ".17g")])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        nodes, weights, values = {}, {}, []
        with open(path, encoding="utf-8") as csv_file:
            for row in csv.DictReader(csv_file):
                if row["record"] == "axis":
                    k = int(row["axis"])
                    nodes.setdefault(k, []).append(float(row["first"]))
                    weights.setdefault(k, []).append(float(row["second"]))
                else:
                    values.append(complex(float(row["first"]), float(row["second"])))
        axes = tuple(np.asarray(nodes[k]) for k in sorted(nodes))
        shape = tuple(a.size for a in axes)
        return cls(axes, tuple(np.asarray(weights[k]) for k in sorted(weights)), np.asarray(values).reshape(shape))

    def save_npz(self, path):
        payload = {"values": self.values}
        for k, (axis, weight) in enumerate(zip(self.axes, self.weights)):
            payload[f"axis_{k}"] = axis
            payload[f"weight_{k}"] = weight
        np.savez(path, **payload)

    @classmethod
    def load_npz(cls, path) -> "GridFunction":
        with np.load(path) as data:
            n = sum(1 for key in data.files if key.startswith("axis_"))
            return cls(
                tuple(data[f"axis_{k}"] for k in range(n)),
                tuple(data[f"weight_{k}"] for k in range(n)),
                data["values"],
            )


def mixed_norm_eval(f: GridFunction, pv: ExponentVector) -> float:
    """Iterated L^p norm, x_1 innermost; infinite exponents take the grid sup"""
    if pv.n != f.n:
        raise ShapeMismatchError(
            f"Exponent vector of length {pv.n} for a {f.n}-dimensional grid",
            error_details={"exponents": pv.n, "grid": f.n},
        )
    values = np.abs(f.values).astype(float)
    peak = float(np.max(values)) if values.size else 0.0
    if peak == 0.0:
        return 0.0
    values = values / peak
    for weight, p in zip(f.weights, pv.floats):
        if math.isinf(p):
            values = np.max(values, axis=0)
        else:
            shaped = weight.reshape((-1,) + (1,) * (values.ndim - 1))
            values = compensated_sum(shaped * values**p, axis=0) ** (1.0 / p)
    return peak * float(values)


def aggregate(values: Sequence[np.ndarray], q: float) -> np.ndarray:
    """(sum_i g_i^q)^{1/q} pointwise for nonnegative g_i"""
    stacked = np.stack([np.asarray(v, dtype=float) for v in values])
    return compensated_sum(stacked**q, axis=0) ** (1.0 / q)


def _check_index(index: int):
    if abs(index) > INDEX_LIMIT:
        raise IndexSaturationError(
            f"Ball index {index} outside of [-{INDEX_LIMIT}, {INDEX_LIMIT}]", error_details={"index": index}
        )


def rasterize_ball(d: Dilation, ball: DilatedBall, resolution: int) -> GridFunction:
    """Cell-centre indicator of x0 + B_i on its bounding box"""
    _check_index(ball.index)
    lo, hi = ball.bounding_box(d)
    return GridFunction.midpoint(lo, hi, resolution, func=lambda mesh: ball.contains(d, mesh).astype(float))


@dataclass(frozen=True)
class IndicatorNorm:
    value: float
    est_rel_err: float


def indicator_ball_norm(d: Dilation, ball: DilatedBall, pv: ExponentVector, resolution: int = 128) -> IndicatorNorm:
    if resolution < 32:
        raise InvalidParamValueError(f"Indicator resolution must be at least 32 nodes per axis, got {resolution}")
    value = mixed_norm_eval(rasterize_ball(d, ball, resolution), pv)
    coarse = mixed_norm_eval(rasterize_ball(d, ball, resolution // 2), pv)
    error = abs(value - coarse) / value if value > 0 else math.inf
    return IndicatorNorm(value=value, est_rel_err=error)


@dataclass(frozen=True)
class IndicatorBoundReport:
    rows: list
    constant: float
    central_constant: float
    drift: float
    passed: bool


def indicator_bound_check(
    d: Dilation, pv: ExponentVector, i_range: tuple[int, int], resolution: int = 128
) -> IndicatorBoundReport:
    """Ratio of 1/||1_{B_i}|| to max{b^{-i/p-}, b^{-i/p+}} across i_range

    The bounding constant is the sup of the ratio; drift compares it with the sup over the
    central half of the range.
    """
    if not pv.is_hardy_admissible:
        raise InvalidParamValueError(f"Indicator bound check needs exponents in (0, 1], got {pv}")
    lo, hi = i_range
    rows = []
    origin = tuple(0.0 for _ in range(d.n))
    for i in range(lo, hi + 1):
        norm = indicator_ball_norm(d, DilatedBall(origin, i), pv, resolution)
        reference = max(d.b ** (-i / pv.p_minus), d.b ** (-i / pv.p_plus))
        ratio = 1.0 / norm.value / reference
        rows.append({"i": i, "norm": norm.value, "est_rel_err": norm.est_rel_err, "ratio": ratio})
        logger.debug(f"Indicator norm at i={i}: {norm.value:.6g} (err {norm.est_rel_err:.2e})")

    middle = (lo + hi) / 2
    quarter = max((hi - lo) / 4, 0.5)
    central = [r["ratio"] for r in rows if abs(r["i"] - middle) <= quarter]
    constant = max(r["ratio"] for r in rows)
    central_constant = max(central) if central else constant
    drift = constant / central_constant - 1.0
    return IndicatorBoundReport(
        rows=rows,
        constant=constant,
        central_constant=central_constant,
        drift=drift,
        passed=math.isfinite(constant) and drift < 0.25,
    )
