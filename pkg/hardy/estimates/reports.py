import math
import logging
from dataclasses import field, dataclass

import numpy as np
import scipy.stats

# Lamb Framework
from lamb.exc import ServerError

__all__ = [
    "Verdict",
    "SlopeFit",
    "EstimateReport",
    "fit_loglog",
    "drift",
    "MIN_FIT_POINTS",
    "MAX_FIT_RMS",
    "SLOPE_TOLERANCE",
    "ROUNDOFF_MARGIN",
]

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 12
MAX_FIT_RMS = 0.15
SLOPE_TOLERANCE = 0.2
CONFIDENCE = 0.95
ROUNDOFF_MARGIN = 1e3


@dataclass(frozen=True)
class Verdict:
    """Outcome of one named assertion"""

    assertion: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "assertion": self.assertion,
            "passed": self.passed,
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
        }

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = [f"[{status}] {self.assertion}"]
        if self.value is not None:
            parts.append(f"value={self.value:.6g}")
        if self.threshold is not None:
            parts.append(f"threshold={self.threshold:.6g}")
        if self.detail:
            parts.append(self.detail)
        return " ".join(parts)


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through (ln x, ln y)"""

    label: str
    slope: float
    intercept: float
    half_width: float
    rms: float
    count: int
    predicted: float
    tolerance: float = SLOPE_TOLERANCE
    discarded: int = 0
    abscissae: tuple = field(default=(), repr=False)
    ordinates: tuple = field(default=(), repr=False)

    @property
    def counts(self) -> bool:
        return self.count >= MIN_FIT_POINTS and self.rms < MAX_FIT_RMS

    @property
    def passed(self) -> bool:
        return self.counts and self.slope >= self.predicted - self.tolerance

    @property
    def margin(self) -> float:
        return self.slope - (self.predicted - self.tolerance)

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "slope": self.slope,
            "intercept": self.intercept,
            "half_width": self.half_width,
            "rms": self.rms,
            "count": self.count,
            "discarded": self.discarded,
            "predicted": self.predicted,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }

    def plot_rows(self) -> list[dict]:
        return [
            {
                "series": self.label,
                "abscissa": x,
                "ordinate": y,
                "fit": math.exp(self.intercept) * x**self.slope,
            }
            for x, y in zip(self.abscissae, self.ordinates)
        ]


def fit_loglog(label: str, x, y, predicted: float, tolerance: float = SLOPE_TOLERANCE, floor=None) -> SlopeFit:
    """Slope of ln y against ln x with a t-based confidence half-width

    With `floor` (scalar or per point) only ordinates above ROUNDOFF_MARGIN * floor enter the
    fit; the others are counted in `discarded`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    usable = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if floor is not None:
        above = y > ROUNDOFF_MARGIN * np.broadcast_to(np.asarray(floor, dtype=float), y.shape)
        discarded = int(np.count_nonzero(usable & ~above))
        usable &= above
    else:
        discarded = 0
    x, y = x[usable], y[usable]
    if discarded:
        logger.debug(f"Slope fit {label} dropped {discarded} points under the round-off floor")
    if x.size < 3:
        logger.warning(f"Slope fit {label} has only {x.size} usable points")
        return SlopeFit(label, math.nan, math.nan, math.inf, math.inf, int(x.size), predicted, tolerance, discarded)
    lx, ly = np.log(x), np.log(y)
    fit = scipy.stats.linregress(lx, ly)
    residuals = ly - (fit.intercept + fit.slope * lx)
    rms = float(np.sqrt(np.mean(residuals**2)))
    quantile = scipy.stats.t.ppf((1 + CONFIDENCE) / 2, x.size - 2)
    return SlopeFit(
        label=label,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        half_width=float(quantile * fit.stderr),
        rms=rms,
        count=int(x.size),
        predicted=predicted,
        tolerance=tolerance,
        discarded=discarded,
        abscissae=tuple(x.tolist()),
        ordinates=tuple(y.tolist()),
    )


def drift(partial: float, full: float) -> float:
    """Relative change of an empirical constant when the sample grows"""
    if partial == 0.0:
        return 0.0 if full == 0.0 else math.inf
    return abs(full / partial - 1.0)


@dataclass
class EstimateReport:
    """Self-contained record of one experiment, re-runnable from `metadata`"""

    experiment: str
    metadata: dict
    constant: float | None = None
    stability: float | None = None
    slopes: list = field(default_factory=list)
    sample_sizes: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    raw_rows: list = field(default_factory=list)
    plot_rows: list = field(default_factory=list)

    def check(self, assertion: str, passed: bool, value=None, threshold=None, detail: str = "") -> Verdict:
        verdict = Verdict(
            assertion=assertion,
            passed=bool(passed),
            value=None if value is None else float(value),
            threshold=None if threshold is None else float(threshold),
            detail=detail,
        )
        self.verdicts.append(verdict)
        log = logger.info if verdict.passed else logger.warning
        log(f"{self.experiment}: {verdict.line()}")
        return verdict

    def add_fit(self, fit: SlopeFit, assertion: str) -> SlopeFit:
        self.slopes.append(fit)
        self.plot_rows.extend(fit.plot_rows())
        self.check(
            assertion,
            fit.passed,
            value=fit.slope,
            threshold=fit.predicted - fit.tolerance,
            detail=f"rms={fit.rms:.3g} points={fit.count} discarded={fit.discarded}",
        )
        return fit

    def merge(self, other: "EstimateReport", prefix: str | None = None):
        prefix = prefix or other.experiment
        for verdict in other.verdicts:
            self.verdicts.append(
                Verdict(
                    f"{prefix}.{verdict.assertion}", verdict.passed, verdict.value, verdict.threshold, verdict.detail
                )
            )
        self.slopes.extend(other.slopes)
        self.details[prefix] = other.as_dict()

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def as_dict(self) -> dict:
        if self.constant is not None and not math.isfinite(self.constant) and self.passed:
            raise ServerError(f"{self.experiment} reports a non-finite constant with passing verdicts")
        return {
            "experiment": self.experiment,
            "metadata": self.metadata,
            "constant": self.constant,
            "stability": self.stability,
            "slopes": [fit.as_dict() for fit in self.slopes],
            "sample_sizes": self.sample_sizes,
            "verdicts": [v.as_dict() for v in self.verdicts],
            "passed": self.passed,
            "details": self.details,
        }

    def lines(self) -> list[str]:
        return [v.line() for v in self.verdicts]
