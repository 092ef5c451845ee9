import logging
from typing import Callable

# Lamb Framework
from lamb.exc import ClientError, ServerError

# Project
from hardy.config import load_config
from hardy.logging import experiment_context
from hardy.artifacts import write_json, create_run_directory
from hardy.exceptions import ConfigInvalidError, error_message, error_exit_code
from hardy.experiments import experiment_identity_map

__all__ = ["run", "SUBCOMMANDS"]

logger = logging.getLogger(__name__)

SUBCOMMANDS = tuple(experiment_identity_map)


def _diagnostics(e: Exception) -> list[str]:
    lines = [error_message(e)]
    details = getattr(e, "error_details", None) or {}
    for entry in details.get("errors", []) if isinstance(details, dict) else []:
        lines.append(f"  {entry['field']}: {entry['message']}")
    return lines


def run(subcommand: str, config_path: str | None = None, flags: dict | None = None, echo: Callable = print) -> int:
    """Run one subcommand and return the process exit code

    0: every assertion passed, 1: some assertion failed, 2: invalid configuration or a
    numerical resolution error.
    """
    flags = flags or {}
    experiment_class = experiment_identity_map.get(subcommand.lower())
    if experiment_class is None:
        echo(f"ConfigInvalidError: unknown subcommand {subcommand}, expected one of {', '.join(SUBCOMMANDS)}")
        return ConfigInvalidError._exit_code
    try:
        config = load_config(
            config_path,
            overrides=flags.get("overrides") or (),
            seed=flags.get("seed"),
            out=flags.get("out"),
            threads=flags.get("threads"),
            count=flags.get("count"),
            i0_range=flags.get("i0_range"),
        )
        config.validate(hardy=experiment_class.requires_hardy)
    except ConfigInvalidError as e:
        for line in _diagnostics(e):
            echo(line)
        return error_exit_code(e)

    run_dir = create_run_directory(config.output_dir, experiment_class.__identity__, config.seed)
    with experiment_context(run_dir.run_id, experiment_class.__identity__, config.seed):
        run_dir.write_config(config)
        try:
            report = experiment_class(config, run_dir).execute()
        except (ClientError, ServerError) as e:
            logger.error(f"Experiment {experiment_class.__identity__} aborted: {error_message(e)}")
            write_json(
                run_dir.file("error.json"),
                {
                    "error": e.__class__.__name__,
                    "message": error_message(e),
                    "details": getattr(e, "error_details", None),
                },
            )
            for line in _diagnostics(e):
                echo(line)
            return error_exit_code(e)

    for line in report.lines():
        echo(line)
    status = "PASSED" if report.passed else "FAILED"
    echo(f"{experiment_class.__identity__}: {status} ({len(report.verdicts)} assertions) -> {run_dir.path}")
    return report.exit_code
