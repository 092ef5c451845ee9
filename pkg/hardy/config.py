import copy
import json
import logging
from fractions import Fraction
from functools import cached_property
from dataclasses import asdict, dataclass

from django.conf import settings

# Lamb Framework
from lamb.exc import ClientError, ServerError
from lamb.utils import dpath_value

# Project
from hardy.atoms import min_vanishing_order
from hardy.dilation import Dilation, validate_dilation
from hardy.exceptions import ConfigInvalidError, error_message
from hardy.mixed_norm import ExponentVector

__all__ = [
    "DEFAULTS",
    "DilationSettings",
    "AtomSettings",
    "GridSettings",
    "ExperimentSizes",
    "ExperimentConfig",
    "load_config",
    "apply_override",
]

logger = logging.getLogger(__name__)

DEFAULTS = {
    "dilation": {"matrix": [["2", "0"], ["0", "3"]], "lambda_minus": None, "lambda_plus": None, "delta": None},
    "exponents": ["1/2", "1"],
    "atoms": {"r": 2.0, "s": "auto", "count": 200, "i0_range": [-6, 6], "center_spread": 1.0, "resolution": 64},
    "grids": {
        "indicator_resolution": 128,
        "shell_resolution": 24,
        "maximal_resolution": 48,
        "kernel_nodes": 24,
        "max_refinement": 4,
    },
    "experiments": {
        "shell_range": [-10, 10],
        "points_per_shell": 48,
        "ray_count": 8,
        "lemma31_atoms": 25,
        "decay_atoms": 10,
        "hl_atoms": 50,
        "sum_count": 100,
        "max_sum_atoms": 8,
        "quasi_norm_samples": 10000,
        "norm_i_range": [-2, 2],
    },
    "seed": 0,
    "threads": None,
    "output_dir": None,
}


def _decimal(value) -> float:
    return float(Fraction(str(value).strip()))


def _matrix(value) -> tuple[tuple[float, ...], ...]:
    rows = tuple(tuple(_decimal(v) for v in row) for row in value)
    if not rows or any(len(row) != len(rows) for row in rows):
        raise ValueError(f"matrix must be square, got {len(rows)} rows of lengths {[len(r) for r in rows]}")
    return rows


def _int_pair(value) -> tuple[int, int]:
    lo, hi = (int(v) for v in value)
    if lo > hi:
        raise ValueError(f"range [{lo}, {hi}] is empty")
    return lo, hi


def _order(value) -> str | int:
    if str(value).strip().lower() == "auto":
        return "auto"
    order = int(value)
    if order < 0:
        raise ValueError("moment order must be non-negative")
    return order


def _positive(value) -> int:
    number = int(value)
    if number < 1:
        raise ValueError("must be a positive integer")
    return number


def _optional_float(value) -> float | None:
    return None if value is None else _decimal(value)


def _exponent(value) -> float:
    text = str(value).strip().lower()
    return float("inf") if text in ("inf", "infinity") else _decimal(text)


@dataclass(frozen=True)
class DilationSettings:
    matrix: tuple
    lambda_minus: float | None = None
    lambda_plus: float | None = None
    delta: float | None = None


@dataclass(frozen=True)
class AtomSettings:
    r: float
    s: str | int
    count: int
    i0_range: tuple[int, int]
    center_spread: float
    resolution: int


@dataclass(frozen=True)
class GridSettings:
    indicator_resolution: int
    shell_resolution: int
    maximal_resolution: int
    kernel_nodes: int
    max_refinement: int


@dataclass(frozen=True)
class ExperimentSizes:
    shell_range: tuple[int, int]
    points_per_shell: int
    ray_count: int
    lemma31_atoms: int
    decay_atoms: int
    hl_atoms: int
    sum_count: int
    max_sum_atoms: int
    quasi_norm_samples: int
    norm_i_range: tuple[int, int]


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment configuration; `as_dict` is the exact echo written with every run"""

    dilation: DilationSettings
    exponents: tuple
    atoms: AtomSettings
    grids: GridSettings
    experiments: ExperimentSizes
    seed: int
    threads: int
    output_dir: str

    @cached_property
    def dilation_object(self) -> Dilation:
        d = self.dilation
        return validate_dilation(d.matrix, lambda_minus=d.lambda_minus, lambda_plus=d.lambda_plus, delta=d.delta)

    @cached_property
    def exponent_vector(self) -> ExponentVector:
        return ExponentVector(self.exponents)

    @property
    def s_order(self) -> int:
        if self.atoms.s == "auto":
            return min_vanishing_order(self.dilation_object, self.exponent_vector)
        return int(self.atoms.s)

    def atom_options(self, **extra) -> dict:
        options = {
            "i0_range": self.atoms.i0_range,
            "r": self.atoms.r,
            "s": self.s_order,
            "center_spread": self.atoms.center_spread,
            "resolution": self.atoms.resolution,
            "indicator_resolution": self.grids.indicator_resolution,
        }
        options.update(extra)
        return options

    def as_dict(self) -> dict:
        return {
            "dilation": {
                "matrix": [[repr(v) for v in row] for row in self.dilation.matrix],
                "lambda_minus": self.dilation.lambda_minus,
                "lambda_plus": self.dilation.lambda_plus,
                "delta": self.dilation.delta,
            },
            "exponents": list(self.exponents),
            "atoms": {**asdict(self.atoms), "i0_range": list(self.atoms.i0_range)},
            "grids": asdict(self.grids),
            "experiments": {
                **asdict(self.experiments),
                "shell_range": list(self.experiments.shell_range),
                "norm_i_range": list(self.experiments.norm_i_range),
            },
            "seed": self.seed,
            "threads": self.threads,
            "output_dir": self.output_dir,
            "resolved": {"s": self.s_order, "b": self.dilation_object.b},
        }

    def validate(self, hardy: bool = True):
        """Cross-field checks; hardy=True also demands exponents in (0, 1] and s >= s_min"""
        errors = []
        try:
            d = self.dilation_object
        except (ClientError, ServerError) as e:
            raise ConfigInvalidError(
                f"Invalid dilation: {error_message(e)}",
                error_details={"errors": [{"field": "dilation.matrix", "message": error_message(e)}]},
            ) from e
        pv = self.exponent_vector
        if pv.n != d.n:
            errors.append({"field": "exponents", "message": f"{pv.n} exponents for a {d.n}x{d.n} dilation"})
        if not self.atoms.r > max(pv.p_plus, 1.0):
            errors.append({"field": "atoms.r", "message": f"r={self.atoms.r} must exceed max(p_+, 1)"})
        if hardy:
            if not pv.is_hardy_admissible:
                message = f"Hardy experiments need exponents in (0, 1], got {pv}"
                errors.append({"field": "exponents", "message": message})
            elif self.atoms.s != "auto" and int(self.atoms.s) < min_vanishing_order(d, pv):
                errors.append(
                    {"field": "atoms.s", "message": f"s={self.atoms.s} below minimum {min_vanishing_order(d, pv)}"}
                )
        if errors:
            raise ConfigInvalidError(f"{len(errors)} configuration error(s)", error_details={"errors": errors})
        return self


def _deep_merge(base: dict, update: dict) -> dict:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value
    return base


def apply_override(document: dict, override: str) -> dict:
    """KEY=VALUE with a dotted key; the value is read as a JSON literal when it parses as one"""
    if "=" not in override:
        raise ConfigInvalidError(
            f"Override {override!r} is not KEY=VALUE",
            error_details={"errors": [{"field": override, "message": "expected KEY=VALUE"}]},
        )
    key, raw = override.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = document
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigInvalidError(
                f"Override key {key} descends into a scalar",
                error_details={"errors": [{"field": key, "message": "not a section"}]},
            )
    node[parts[-1]] = value
    return document


_FIELDS = {
    "dilation": [
        ("matrix", list, _matrix),
        ("lambda_minus", str, _optional_float),
        ("lambda_plus", str, _optional_float),
        ("delta", str, _optional_float),
    ],
    "atoms": [
        ("r", str, _exponent),
        ("s", str, _order),
        ("count", str, _positive),
        ("i0_range", list, _int_pair),
        ("center_spread", float, None),
        ("resolution", str, _positive),
    ],
    "grids": [
        ("indicator_resolution", str, _positive),
        ("shell_resolution", str, _positive),
        ("maximal_resolution", str, _positive),
        ("kernel_nodes", str, _positive),
        ("max_refinement", int, None),
    ],
    "experiments": [
        ("shell_range", list, _int_pair),
        ("points_per_shell", str, _positive),
        ("ray_count", str, _positive),
        ("lemma31_atoms", str, _positive),
        ("decay_atoms", str, _positive),
        ("hl_atoms", str, _positive),
        ("sum_count", str, _positive),
        ("max_sum_atoms", str, _positive),
        ("quasi_norm_samples", str, _positive),
        ("norm_i_range", list, _int_pair),
    ],
}


def _extract(document: dict, section: str | None, key: str, req_type, transform, errors: list):
    field_name = f"{section}.{key}" if section else key
    try:
        node = document[section] if section else document
        if not isinstance(node, dict):
            raise ValueError(f"section {section} is not an object")
        value = dpath_value(node, key, req_type, allow_none=True)
        return transform(value) if transform is not None else value
    except (ClientError, ServerError, ValueError, TypeError, ZeroDivisionError) as e:
        errors.append({"field": field_name, "message": getattr(e, "message", None) or str(e)})
        return None


def load_config(
    path: str | None = None,
    overrides: list[str] | tuple = (),
    seed: int | None = None,
    out: str | None = None,
    threads: int | None = None,
    count: int | None = None,
    i0_range: tuple[int, int] | None = None,
) -> ExperimentConfig:
    """defaults < config file < overrides < explicit flags"""
    document = copy.deepcopy(DEFAULTS)
    path = path or settings.ANISO_DEFAULT_CONFIG
    if path:
        try:
            with open(path, encoding="utf-8") as config_file:
                _deep_merge(document, json.load(config_file))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigInvalidError(
                f"Can not read config {path}: {e}", error_details={"errors": [{"field": "config", "message": str(e)}]}
            ) from e
    # echoed configs carry derived values that are not inputs
    document.pop("resolved", None)
    for override in overrides:
        apply_override(document, override)
    if seed is not None:
        document["seed"] = seed
    if out is not None:
        document["output_dir"] = out
    if threads is not None:
        document["threads"] = threads
    if count is not None:
        document.setdefault("atoms", {})["count"] = count
    if i0_range is not None:
        document.setdefault("atoms", {})["i0_range"] = list(i0_range)

    errors = []
    sections = {}
    for name, fields in _FIELDS.items():
        sections[name] = {
            key: _extract(document, name, key, kind, transform, errors) for key, kind, transform in fields
        }
    exponents = _extract(document, None, "exponents", list, lambda v: tuple(str(p) for p in v), errors)
    if exponents is not None:
        try:
            ExponentVector(exponents)
        except (ClientError, ServerError) as e:
            errors.append({"field": "exponents", "message": getattr(e, "message", None) or str(e)})
    seed_value = _extract(document, None, "seed", int, None, errors)
    if seed_value is not None and not 0 <= seed_value < 2**64:
        errors.append({"field": "seed", "message": "seed must be an unsigned 64-bit integer"})
    threads_value = _extract(
        document, None, "threads", str, lambda v: settings.ANISO_THREADS if v is None else _positive(v), errors
    )
    output_dir = _extract(document, None, "output_dir", str, lambda v: str(v or settings.ANISO_OUTPUT_DIR), errors)
    unknown = sorted(set(document) - set(DEFAULTS))
    errors.extend({"field": key, "message": "unknown configuration key"} for key in unknown)
    if errors:
        raise ConfigInvalidError(f"{len(errors)} configuration error(s)", error_details={"errors": errors})

    config = ExperimentConfig(
        dilation=DilationSettings(**sections["dilation"]),
        exponents=exponents,
        atoms=AtomSettings(**sections["atoms"]),
        grids=GridSettings(**sections["grids"]),
        experiments=ExperimentSizes(**sections["experiments"]),
        seed=seed_value,
        threads=threads_value,
        output_dir=output_dir,
    )
    logger.debug(f"Resolved configuration: seed={config.seed}, exponents={config.exponents}")
    return config
