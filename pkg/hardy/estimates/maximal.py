import math
import logging
from functools import cached_property
from dataclasses import dataclass

import numpy as np
import scipy.integrate

# Lamb Framework
from lamb.exc import InvalidParamValueError

# Project
from hardy.atoms import Atom, AtomicSum, atomic_norm
from hardy.dilation import Dilation
from hardy.exceptions import GridTooCoarseError
from hardy.mixed_norm import ExponentVector, GridFunction, mixed_norm_eval
from hardy.estimates.reports import EstimateReport, drift

__all__ = [
    "BumpProfile",
    "MaximalFunction",
    "default_k_range",
    "radial_maximal_function",
    "radial_maximal_norm",
    "compare_maximal_atomic",
]

logger = logging.getLogger(__name__)

MIN_NODES_ACROSS = 8
OUTPUT_ENLARGEMENT = 3.0
RATIO_BAND = (0.01, 100.0)
REFINEMENT_DRIFT_LIMIT = 0.10
BATCH_SIZE = 512


def _bump_1d(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    gap = np.where(inside, 1.0 - u**2, 1.0)
    return np.where(inside, np.exp(-1.0 / gap), 0.0)


@dataclass(frozen=True)
class BumpProfile:
    """Tensor bump on [-1, 1]^n normalised to unit integral"""

    n: int

    @cached_property
    def normalisation(self) -> float:
        mass, _ = scipy.integrate.quad(_bump_1d, -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)
        return mass**self.n

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.prod(_bump_1d(z), axis=-1) / self.normalisation


@dataclass(frozen=True, eq=False)
class MaximalFunction:
    """|f * phi_k| on the output grid for every k in the range, maximised lazily"""

    grid: GridFunction
    k_values: np.ndarray
    stack: np.ndarray

    def restricted(self, k_lo: int, k_hi: int) -> GridFunction:
        mask = (self.k_values >= k_lo) & (self.k_values <= k_hi)
        if not np.any(mask):
            return self.grid.with_values(np.zeros(self.grid.shape))
        return self.grid.with_values(np.max(self.stack[mask], axis=0))

    @property
    def values(self) -> GridFunction:
        return self.restricted(int(self.k_values.min()), int(self.k_values.max()))

    def norm(self, pv: ExponentVector, k_range: tuple[int, int] | None = None) -> float:
        k_range = k_range or (int(self.k_values.min()), int(self.k_values.max()))
        return mixed_norm_eval(self.restricted(*k_range), pv)


def default_k_range(sum_: AtomicSum, margin: int = 5) -> tuple[int, int]:
    """Kernel scales b^{-k} covering every ball scale b^{i0}, widened by margin on both sides"""
    indices = [atom.ball.index for atom in sum_.atoms]
    return -max(indices) - margin, -min(indices) + margin


def _output_grid(d: Dilation, sum_: AtomicSum, resolution: int) -> GridFunction:
    boxes = [atom.ball.bounding_box(d) for atom in sum_.atoms]
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    center, half = (lo + hi) / 2, (hi - lo) / 2
    return GridFunction.midpoint(center - OUTPUT_ENLARGEMENT * half, center + OUTPUT_ENLARGEMENT * half, resolution)


def _kernel_box_half(d: Dilation, k: int) -> np.ndarray:
    """Half widths of the bounding box of A^{-k} [-1, 1]^n"""
    return np.abs(d.power(-k)) @ np.ones(d.n)


def _nodes_across(d: Dilation, atom: Atom, k: int, kernel_nodes: int) -> tuple[float, float]:
    """Nodes resolving the narrower function: (atom grid across the kernel, kernel grid across the atom)"""
    kernel_half = _kernel_box_half(d, k)
    atom_half = atom.ball.bounding_box(d)[1] - atom.ball.center_array
    atom_spacing = 2.0 * atom_half / atom.resolution
    kernel_spacing = 2.0 * kernel_half / kernel_nodes
    on_atom_grid = float(np.min(2.0 * kernel_half / atom_spacing))
    on_kernel_grid = float(np.min(2.0 * atom_half / kernel_spacing))
    return on_atom_grid, on_kernel_grid


def _convolve_on_atom_grid(atom: Atom, phi: BumpProfile, d: Dilation, k: int, outputs: np.ndarray) -> np.ndarray:
    """sum_t w a(t) b^k phi(A^k (x - t)) over the atom's sample grid"""
    samples = atom.samples
    nodes = samples.mesh().reshape(-1, d.n)
    masses = (samples.cell_weights() * samples.values).ravel()
    keep = masses != 0
    nodes, masses = nodes[keep], masses[keep]
    push = d.power(k)
    result = np.empty(len(outputs))
    for start in range(0, len(outputs), BATCH_SIZE):
        chunk = outputs[start : start + BATCH_SIZE]
        z = (chunk[:, None, :] - nodes[None, :, :]) @ push.T
        result[start : start + BATCH_SIZE] = d.b**k * (phi(z) @ masses)
    return result


def _convolve_on_kernel_grid(
    atom: Atom, phi: BumpProfile, d: Dilation, k: int, outputs: np.ndarray, kernel_nodes: int
) -> np.ndarray:
    """int phi(z) a(x - A^{-k} z) dz over [-1, 1]^n with a in closed form"""
    kernel = GridFunction.midpoint(-np.ones(d.n), np.ones(d.n), kernel_nodes, func=phi)
    z = kernel.mesh().reshape(-1, d.n)
    masses = (kernel.cell_weights() * kernel.values).ravel()
    offsets = z @ d.power(-k).T
    lo, hi = atom.ball.bounding_box(d)
    reach = np.abs(offsets).max(axis=0)
    near = np.all((outputs > lo - reach) & (outputs < hi + reach), axis=1)
    result = np.zeros(len(outputs))
    rows = np.flatnonzero(near)
    for start in range(0, rows.size, BATCH_SIZE):
        chunk = rows[start : start + BATCH_SIZE]
        points = outputs[chunk][:, None, :] - offsets[None, :, :]
        result[chunk] = atom.evaluate(points) @ masses
    return result


def radial_maximal_function(
    sum_: AtomicSum,
    d: Dilation,
    phi: BumpProfile | None = None,
    k_range: tuple[int, int] | None = None,
    resolution: int = 48,
    kernel_nodes: int = 24,
) -> MaximalFunction:
    """sup_k |f * phi_k| with phi_k = b^k phi(A^k .), one convolution per atom and scale

    Each convolution is integrated on the grid of whichever factor has the narrower
    support: the atom's own samples, or a kernel grid with the atom in closed form.
    """
    phi = phi or BumpProfile(d.n)
    if len(sum_) == 0:
        raise InvalidParamValueError("Maximal function needs at least one atom to place its grid")
    k_range = k_range or default_k_range(sum_)
    k_values = np.arange(k_range[0], k_range[1] + 1)
    grid = _output_grid(d, sum_, resolution)
    outputs = grid.mesh().reshape(-1, d.n)
    stack = np.zeros((k_values.size,) + grid.shape)

    for m, k in enumerate(k_values):
        total = np.zeros(len(outputs), dtype=complex)
        for coefficient, atom in zip(sum_.coefficients, sum_.atoms):
            if coefficient == 0:
                continue
            on_atom_grid, on_kernel_grid = _nodes_across(d, atom, int(k), kernel_nodes)
            if max(on_atom_grid, on_kernel_grid) < MIN_NODES_ACROSS:
                raise GridTooCoarseError(
                    f"Kernel at k={k} is resolved by {max(on_atom_grid, on_kernel_grid):.3g} nodes",
                    error_details={"k": int(k), "i0": atom.ball.index, "minimum": MIN_NODES_ACROSS},
                )
            if on_atom_grid >= on_kernel_grid:
                total += coefficient * _convolve_on_atom_grid(atom, phi, d, int(k), outputs)
            else:
                total += coefficient * _convolve_on_kernel_grid(atom, phi, d, int(k), outputs, kernel_nodes)
        stack[m] = np.abs(total).reshape(grid.shape)
        logger.debug(f"Maximal function scale k={k}: peak {float(stack[m].max()):.3e}")
    return MaximalFunction(grid=grid, k_values=k_values, stack=stack)


def radial_maximal_norm(
    sum_: AtomicSum,
    d: Dilation,
    pv: ExponentVector,
    phi: BumpProfile | None = None,
    k_range: tuple[int, int] | None = None,
    resolution: int = 48,
    kernel_nodes: int = 24,
) -> float:
    """Mixed norm of the truncated radial maximal function; zero for the zero sum"""
    if len(sum_) == 0 or not np.any(np.abs(sum_.coefficients) > 0):
        return 0.0
    return radial_maximal_function(sum_, d, phi, k_range, resolution, kernel_nodes).norm(pv)


def compare_maximal_atomic(
    sum_: AtomicSum,
    d: Dilation,
    pv: ExponentVector,
    resolution: int = 48,
    kernel_nodes: int = 24,
    norm_resolution: int = 64,
    k_range: tuple[int, int] | None = None,
) -> EstimateReport:
    """Maximal-function norm against the atomic norm of the same decomposition"""
    k_range = k_range or default_k_range(sum_)
    maximal = radial_maximal_function(sum_, d, k_range=k_range, resolution=resolution, kernel_nodes=kernel_nodes)
    value = maximal.norm(pv)
    refined = radial_maximal_function(
        sum_, d, k_range=k_range, resolution=2 * resolution, kernel_nodes=kernel_nodes
    ).norm(pv)
    atomic = atomic_norm(sum_, d, pv, norm_resolution)
    ratio = value / atomic if atomic > 0 else math.inf
    refinement = drift(value, refined)

    narrowed = [maximal.norm(pv, (k_range[0] + w, k_range[1] - w)) for w in range((k_range[1] - k_range[0]) // 2 + 1)]
    monotone = all(a <= b * (1.0 + 1e-12) for a, b in zip(narrowed[1:], narrowed[:-1]))

    report = EstimateReport(
        "maximal-compare",
        {"matrix": d.matrix.tolist(), "exponents": pv.labels(), "k_range": list(k_range), "atoms": len(sum_)},
    )
    report.constant = ratio
    report.stability = refinement
    report.sample_sizes = {"grid": list(maximal.grid.shape), "refined_grid": [2 * resolution] * d.n}
    report.details = {"maximal_norm": value, "refined_maximal_norm": refined, "atomic_norm": atomic}
    report.raw_rows = [
        {"k": int(k), "peak": float(layer.max()), "norm": mixed_norm_eval(maximal.grid.with_values(layer), pv)}
        for k, layer in zip(maximal.k_values, maximal.stack)
    ]
    report.plot_rows = [
        {"series": "truncation", "abscissa": int(2 * w + 1), "ordinate": n, "fit": ""}
        for w, n in enumerate(reversed(narrowed))
    ]
    low, high = RATIO_BAND
    report.check("ratio_in_band", low < ratio < high, value=ratio, detail=f"band=({low}, {high})")
    report.check(
        "refinement_stable", refinement < REFINEMENT_DRIFT_LIMIT, value=refinement, threshold=REFINEMENT_DRIFT_LIMIT
    )
    report.check("monotone_truncation", monotone)
    return report
