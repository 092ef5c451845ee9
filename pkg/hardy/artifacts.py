import os
import csv
import json
import math
import logging
from datetime import datetime, timezone

import numpy as np

# Lamb Framework
from lamb.exc import ServerError
from lamb.json import JsonEncoder

# Project
from hardy.atoms import Atom, AtomCertificate
from hardy.dilation import Dilation, DilatedBall
from hardy.exceptions import ShapeMismatchError
from hardy.mixed_norm import GridFunction

__all__ = [
    "RunDirectory",
    "create_run_directory",
    "plain",
    "write_json",
    "write_csv",
    "write_atom_archive",
    "read_atom_archive",
]

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"


def plain(value):
    """numpy scalars and arrays, complex numbers and non-finite floats as JSON-ready values"""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": plain(value.real), "im": plain(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return "" if value is None else str(value)


def write_json(path, payload: dict):
    with open(path, "w", encoding="utf-8") as json_file:
        json.dump(plain(payload), json_file, cls=JsonEncoder, indent=2, sort_keys=True)
        json_file.write("\n")


def write_csv(path, rows: list[dict], columns: list[str] | None = None):
    """Rows share columns in first-seen order; floats keep full precision"""
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(key for key in row if key not in columns)
    with open(path, "w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(column)) for column in columns])


class RunDirectory:
    """Output folder owned by one run: config echo, reports and CSV payloads"""

    def __init__(self, path: str, run_id: str):
        self.path = path
        self.run_id = run_id

    def file(self, name: str) -> str:
        return os.path.join(self.path, name)

    def subdirectory(self, name: str) -> str:
        path = self.file(name)
        os.makedirs(path, exist_ok=False)
        return path

    def write_config(self, config) -> str:
        path = self.file("config.json")
        write_json(path, config.as_dict())
        return path

    def write_report(self, report, prefix: str | None = None) -> list[str]:
        prefix = prefix or report.experiment
        paths = [self.file(f"{prefix}.report.json"), self.file(f"{prefix}.raw.csv"), self.file(f"{prefix}.plot.csv")]
        write_json(paths[0], report.as_dict())
        write_csv(paths[1], report.raw_rows)
        write_csv(paths[2], report.plot_rows, columns=["series", "abscissa", "ordinate", "fit"])
        logger.info(f"Report {report.experiment} written to {self.path}")
        return paths


def create_run_directory(output_dir: str, subcommand: str, seed: int, now: datetime | None = None) -> RunDirectory:
    """output_dir/<subcommand>/<UTC timestamp>-<seed>/, suffixed when the name is taken"""
    now = now or datetime.now(timezone.utc)
    run_id = f"{now.strftime('%Y%m%dT%H%M%SZ')}-{seed}"
    parent = os.path.join(output_dir, subcommand)
    os.makedirs(parent, exist_ok=True)
    for attempt in range(1000):
        name = run_id if attempt == 0 else f"{run_id}.{attempt}"
        path = os.path.join(parent, name)
        try:
            os.makedirs(path, exist_ok=False)
        except FileExistsError:
            continue
        return RunDirectory(path, name)
    raise ServerError(f"Can not allocate a run directory under {parent}")


def write_atom_archive(path: str, atom: Atom, certificate: AtomCertificate | None = None) -> str:
    """Directory with metadata.json and the sampled values as samples.npz"""
    os.makedirs(path, exist_ok=True)
    metadata = atom.metadata()
    if certificate is not None:
        metadata["certificate"] = certificate.as_dict()
        metadata["support_margin"] = certificate.support_margin
        metadata["size_margin"] = certificate.size_margin
        metadata["moment_margin"] = certificate.moment_margin
    metadata["dilation"] = {"matrix": atom.dilation.matrix.tolist(), "b": atom.dilation.b}
    metadata["l1_norm"] = atom.l1_norm()
    metadata["lr_norm"] = atom.lr_norm()
    write_json(os.path.join(path, "metadata.json"), metadata)
    atom.samples.save_npz(os.path.join(path, "samples.npz"))
    return path


def read_atom_archive(path: str, d: Dilation) -> Atom:
    """Rebuild an atom written by write_atom_archive against the same dilation"""
    with open(os.path.join(path, "metadata.json"), encoding="utf-8") as json_file:
        metadata = json.load(json_file)
    stored = np.asarray(metadata["dilation"]["matrix"], dtype=float)
    if stored.shape != d.matrix.shape or not np.array_equal(stored, d.matrix):
        raise ShapeMismatchError(
            "Atom archive was written for another dilation", error_details={"matrix": metadata["dilation"]["matrix"]}
        )
    r = metadata["r"]
    ball = metadata["ball"]
    return Atom(
        dilation=d,
        ball=DilatedBall(tuple(ball["center"]), int(ball["index"])),
        r_exponent=math.inf if r == "inf" else float(r),
        s_order=int(metadata["s"]),
        samples=GridFunction.load_npz(os.path.join(path, "samples.npz")),
        certified=bool(metadata["certified"]),
        seed=int(metadata["seed"]),
        coefficients=np.asarray(metadata["coefficients"], dtype=float),
        scale=float(metadata["scale"]),
        resolution=int(metadata["resolution"]),
        attempts=int(metadata["attempts"]),
    )
