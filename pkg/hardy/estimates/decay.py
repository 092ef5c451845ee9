import math
import logging

import numpy as np

# Lamb Framework
from lamb.exc import InvalidParamValueError

# Project
from hardy.atoms import Atom, AtomicSum
from hardy.utils import make_rng
from hardy.fourier import SERIES_RADIUS, fourier_finite_sum
from hardy.dilation import Dilation
from hardy.mixed_norm import ExponentVector
from hardy.quasi_norm import QuasiNormEvaluator, shell_entry_point
from hardy.estimates.reports import MIN_FIT_POINTS, EstimateReport, fit_loglog

__all__ = ["decay_rate", "euclidean_decay_rate", "verify_origin_decay"]

logger = logging.getLogger(__name__)

DECAY_FRACTION = 0.05
SHELL_FLOOR = -60
SETTLE_SHELLS = 16


def decay_rate(d: Dilation, pv: ExponentVector, s: int) -> float:
    """beta = (s+1) ln(lambda_-)/ln(b) + 1 - 1/p_+"""
    return (s + 1) * d.log_lambda_ratio_minus + 1.0 - 1.0 / pv.p_plus


def euclidean_decay_rate(d: Dilation, pv: ExponentVector, s: int) -> float:
    """Predicted slope of |F(x)| / |x|^{(ln b/ln lambda_+)(1/p_+ - 1)} against |x|"""
    return (s + 1) - (1.0 / pv.p_plus - 1.0) / d.log_lambda_ratio_plus


def _as_sum(source) -> AtomicSum:
    if isinstance(source, AtomicSum):
        return source
    if isinstance(source, Atom):
        return AtomicSum.single(source)
    return AtomicSum(np.ones(len(source)), tuple(source))


def _series_reach(sum_: AtomicSum) -> float:
    """Largest |x| for which every term is still evaluated by the moment series"""
    extents = []
    for atom in sum_.atoms:
        half = atom.ball.bounding_box(atom.dilation)[1] - atom.ball.center_array
        extents.append(float(np.linalg.norm(half)))
    return SERIES_RADIUS / (2.0 * math.pi * max(extents))


def verify_origin_decay(
    source,
    d: Dilation,
    pv: ExponentVector,
    ray_count: int = 8,
    shells: int = 20,
    settle: int = SETTLE_SHELLS,
    seed: int = 0,
    e_star: QuasiNormEvaluator | None = None,
) -> EstimateReport:
    """Decay of |F(x)| / rho*(x)^{1/p_+ - 1} along dilation orbits toward the origin

    Each random direction is first contracted `settle` times by (A*)^{-1}, which turns it
    toward the slowest-contracting direction. The orbit x_k = (A*)^{-k} x_0 then starts where
    that ray enters the first rho*-shell inside the moment-series range, so rho*(x_k) steps
    by exactly 1/b. Fits use only values above the round-off floor of the transform.
    """
    sum_ = _as_sum(source)
    if len(sum_) == 0:
        raise InvalidParamValueError("Origin decay needs a non-empty atom list")
    e_star = e_star or QuasiNormEvaluator.for_transpose(d)
    contraction = e_star.dilation.power(-1)
    s = sum_.min_order
    beta = decay_rate(d, pv, s)
    euclidean_beta = euclidean_decay_rate(d, pv, s)
    euclidean_exponent = (1.0 / pv.p_plus - 1.0) / d.log_lambda_ratio_plus
    reach = _series_reach(sum_)
    rng = make_rng(seed, 21)

    parameters = {"matrix": d.matrix.tolist(), "exponents": pv.labels(), "s": s, "seed": seed}
    report = EstimateReport("decay-origin", parameters)
    report.details = {"beta": beta, "euclidean_beta": euclidean_beta}
    under_resolved = 0
    discarded = 0
    decays = []
    for ray in range(ray_count):
        u = e_star.dilation.power(-settle) @ rng.standard_normal(d.n)
        u /= np.linalg.norm(u)
        j = 20
        while j > SHELL_FLOOR + shells and np.linalg.norm(shell_entry_point(e_star, u, j)) > reach:
            j -= 1
        orbit = [shell_entry_point(e_star, u, j)]
        for _ in range(shells - 1):
            orbit.append(contraction @ orbit[-1])
        points = np.stack(orbit)
        indices = e_star.index(points)
        rho_values = e_star.b ** indices.astype(float)
        evaluation = fourier_finite_sum(sum_, points)
        under_resolved += evaluation.under_resolved_count
        usable = evaluation.resolved
        magnitude = np.abs(evaluation.values)

        weight = rho_values ** (1.0 / pv.p_plus - 1.0)
        length = np.linalg.norm(points, axis=1)
        euclidean_weight = length**euclidean_exponent
        ratio = magnitude / weight
        euclidean_ratio = magnitude / euclidean_weight

        fit = fit_loglog(
            f"ray{ray}", rho_values[usable], ratio[usable], beta, floor=(evaluation.floor / weight)[usable]
        )
        report.add_fit(fit, f"ray{ray}.slope")
        euclidean_fit = fit_loglog(
            f"ray{ray}_euclidean",
            length[usable],
            euclidean_ratio[usable],
            euclidean_beta,
            floor=(evaluation.floor / euclidean_weight)[usable],
        )
        report.add_fit(euclidean_fit, f"ray{ray}.euclidean_slope")
        discarded += fit.discarded
        # first and last ratio above the floor, ordered outward to inward
        decays.append(fit.ordinates[-1] / fit.ordinates[0] if len(fit.ordinates) >= 2 else 1.0)

        for k, x, rs, value, r, f in zip(indices, points, rho_values, magnitude, ratio, evaluation.floor):
            row = {"ray": ray, "shell": int(k)}
            row.update({f"x{m + 1}": float(c) for m, c in enumerate(x)})
            row.update({"rho_star": float(rs), "abs_F": float(value), "ratio": float(r), "floor": float(f)})
            report.raw_rows.append(row)
        if fit.count < MIN_FIT_POINTS:
            logger.warning(f"Ray {ray} kept only {fit.count} shells above the round-off floor")

    worst_decay = max(decays)
    report.constant = worst_decay
    report.sample_sizes = {
        "rays": ray_count,
        "shells_per_ray": shells,
        "under_resolved": under_resolved,
        "discarded": discarded,
    }
    report.check("ratio_decays", worst_decay < DECAY_FRACTION, value=worst_decay, threshold=DECAY_FRACTION)
    report.check("beta_positive", beta > 0, value=beta, threshold=0.0)
    return report
