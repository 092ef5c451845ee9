import logging
import contextlib
from contextvars import ContextVar

__all__ = ["ExperimentContextFilter", "experiment_context"]

logger = logging.getLogger(__name__)

_run_id = ContextVar("hardy_run_id", default=None)
_subcommand = ContextVar("hardy_subcommand", default=None)
_seed = ContextVar("hardy_seed", default=None)


@contextlib.contextmanager
def experiment_context(run_id: str, subcommand: str, seed: int):
    """Bind run identity to every log record emitted inside the block"""
    tokens = [_run_id.set(run_id), _subcommand.set(subcommand), _seed.set(seed)]
    try:
        yield
    finally:
        for var, token in zip([_run_id, _subcommand, _seed], tokens):
            var.reset(token)


class ExperimentContextFilter(logging.Filter):
    def filter(self, record):
        record.run_id = _run_id.get()
        record.subcommand = _subcommand.get()
        record.seed = _seed.get()
        return True
