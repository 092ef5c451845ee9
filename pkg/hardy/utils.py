import logging
import itertools
from typing import Callable, Iterable, TypeVar, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Project
from hardy.exceptions import DimensionMismatchError

__all__ = [
    "make_rng",
    "derive_seed",
    "compensated_sum",
    "parallel_map",
    "multi_indices",
    "monomials",
    "as_points",
]

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator for the stream identified by (seed, keys)

    Streams for distinct key tuples are statistically independent, so atoms, samples and
    experiments can draw without sharing state.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(seed: int, *keys: int) -> int:
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def compensated_sum(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Neumaier summation along one axis, vectorised over the remaining axes"""
    values = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    total = np.zeros(values.shape[1:], dtype=float)
    correction = np.zeros_like(total)
    for term in values:
        t = total + term
        big = np.abs(total) >= np.abs(term)
        correction += np.where(big, (total - t) + term, (term - t) + total)
        total = t
    return total + correction


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Order-preserving map, threaded when threads > 1"""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def multi_indices(n: int, max_degree: int) -> list[tuple[int, ...]]:
    """All multi-indices of length n with |gamma| <= max_degree, graded order"""
    result = []
    for degree in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), degree):
            gamma = [0] * n
            for axis in combo:
                gamma[axis] += 1
            result.append(tuple(gamma))
    return result


def monomials(points: np.ndarray, indices: Sequence[tuple[int, ...]]) -> np.ndarray:
    """Vandermonde-type matrix with one column per multi-index"""
    points = np.asarray(points, dtype=float)
    columns = [np.prod(points ** np.asarray(gamma, dtype=float), axis=-1) for gamma in indices]
    return np.stack(columns, axis=-1)


def as_points(x, n: int) -> np.ndarray:
    """Coerce a single point or a batch to shape (m, n)"""
    points = np.atleast_2d(np.asarray(x, dtype=float))
    if points.shape[-1] != n or points.ndim != 2:
        raise DimensionMismatchError(
            f"Expected points of dimension {n}, got array of shape {np.shape(x)}",
            error_details={"expected": n, "shape": list(np.shape(x))},
        )
    return points
