import io
import glob
import json
import logging
import os.path
from datetime import datetime, timezone

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

# Project
from hardy.runner import SUBCOMMANDS, run
from hardy.artifacts import write_csv, create_run_directory
from hardy.logging import ExperimentContextFilter, experiment_context
from hardy.experiments import experiment_identity_map

SMALL_ATOMS = [
    "atoms.count=2",
    "atoms.resolution=32",
    "atoms.i0_range=[-1, 1]",
    "grids.indicator_resolution=64",
]


def _only(pattern: str) -> str:
    matches = glob.glob(pattern)
    assert len(matches) == 1, matches
    return matches[0]


def test_identity_map():
    assert len(experiment_identity_map) == 11
    assert SUBCOMMANDS[0] == "validate-dilation"
    assert "all" in SUBCOMMANDS


def test_validate_dilation_writes_run_tree(output_dir):
    out = io.StringIO()
    call_command("experiment", "validate-dilation", seed=3, stdout=out)
    run_dir = _only(os.path.join(output_dir, "validate-dilation", "*-3"))
    names = ("config.json", "validate-dilation.report.json", "validate-dilation.raw.csv", "validate-dilation.plot.csv")
    for name in names:
        assert os.path.isfile(os.path.join(run_dir, name))

    with open(os.path.join(run_dir, "validate-dilation.report.json"), encoding="utf-8") as report_file:
        report = json.load(report_file)
    assert report["passed"] is True
    assert {v["assertion"] for v in report["verdicts"]} >= {"lyapunov_agreement", "containment_certificate"}
    with open(os.path.join(run_dir, "config.json"), encoding="utf-8") as config_file:
        assert json.load(config_file)["seed"] == 3
    assert "validate-dilation: PASSED" in out.getvalue()


def test_non_expansive_matrix_exits_with_two(output_dir):
    out = io.StringIO()
    with pytest.raises(CommandError) as e:
        call_command(
            "experiment",
            "validate-dilation",
            overrides=['dilation.matrix=[["1", "1"], ["0", "1"]]'],
            stdout=out,
        )
    assert e.value.returncode == 2
    assert "NotExpansiveError" in out.getvalue()
    assert not os.path.exists(os.path.join(output_dir, "validate-dilation"))


def test_unknown_subcommand():
    lines = []
    assert run("no-such-experiment", echo=lines.append) == 2
    assert lines[0].startswith("ConfigInvalidError")


def test_same_seed_gives_identical_payloads(output_dir):
    flags = {"seed": 42, "overrides": ["experiments.quasi_norm_samples=2000"]}
    first = run("rho-table", flags=flags, echo=lambda line: None)
    second = run("rho-table", flags=flags, echo=lambda line: None)
    assert first == second
    payloads = []
    for path in sorted(glob.glob(os.path.join(output_dir, "rho-table", "*-42*", "rho-table.raw.csv"))):
        with open(path, "rb") as csv_file:
            payloads.append(csv_file.read())
    assert len(payloads) == 2
    assert payloads[0] == payloads[1]
    assert payloads[0].startswith(b"x1,x2,rho,rho_star,index_i\n")


def test_atom_generation_writes_archives(output_dir):
    code = run("atom-gen", flags={"seed": 1, "overrides": SMALL_ATOMS}, echo=lambda line: None)
    assert code == 0
    run_dir = _only(os.path.join(output_dir, "atom-gen", "*-1"))
    archives = sorted(glob.glob(os.path.join(run_dir, "atoms", "atom_*")))
    assert [os.path.basename(path) for path in archives] == ["atom_0000", "atom_0001"]
    for path in archives:
        assert os.path.isfile(os.path.join(path, "metadata.json"))
        assert os.path.isfile(os.path.join(path, "samples.npz"))


def test_count_and_index_range_flags(output_dir):
    out = io.StringIO()
    overrides = ["atoms.resolution=32", "grids.indicator_resolution=64"]
    arguments = ["--count", "3", "--i0-range", "-2", "0", "--seed", "4"]
    call_command("experiment", "atom-gen", *arguments, overrides=overrides, stdout=out)
    run_dir = _only(os.path.join(output_dir, "atom-gen", "*-4"))
    with open(os.path.join(run_dir, "config.json"), encoding="utf-8") as config_file:
        atoms = json.load(config_file)["atoms"]
    assert atoms["count"] == 3
    assert atoms["i0_range"] == [-2, 0]
    archives = sorted(glob.glob(os.path.join(run_dir, "atoms", "atom_*")))
    assert len(archives) == 3
    for path in archives:
        with open(os.path.join(path, "metadata.json"), encoding="utf-8") as metadata_file:
            metadata = json.load(metadata_file)
        assert -2 <= metadata["ball"]["index"] <= 0
        assert metadata["moment_margin"] > 0.0
    assert "atom-gen: PASSED" in out.getvalue()


def test_context_filter():
    record = logging.LogRecord("hardy", logging.INFO, __file__, 1, "message", None, None)
    context_filter = ExperimentContextFilter()
    with experiment_context("20260101T000000Z-5", "rho-table", 5):
        assert context_filter.filter(record)
        assert (record.run_id, record.subcommand, record.seed) == ("20260101T000000Z-5", "rho-table", 5)
    context_filter.filter(record)
    assert record.run_id is None


def test_run_directory_names(tmp_path):
    now = datetime(2026, 1, 2, 3, 4, 5, tzinfo=timezone.utc)
    first = create_run_directory(str(tmp_path), "rho-table", 7, now=now)
    second = create_run_directory(str(tmp_path), "rho-table", 7, now=now)
    assert first.run_id == "20260102T030405Z-7"
    assert second.run_id == "20260102T030405Z-7.1"
    assert os.path.isdir(second.path)

    write_csv(first.file("rows.csv"), [{"a": 1, "b": 0.1}, {"b": True, "c": None}])
    with open(first.file("rows.csv"), encoding="utf-8") as csv_file:
        assert csv_file.read() == "a,b,c\n1,0.10000000000000001,\n,true,\n"


def test_settings_carry_no_response_rendering():
    import core.settings

    assert not [name for name in vars(core.settings) if name.startswith("LAMB_RESPONSE")]
