from typing import Dict, Type

from .suite import SUITE, AllExperiment
from .abstract import AbstractExperiment

__all__ = ["AbstractExperiment", "experiment_identity_map"]

experiment_identity_map = {
    e.__identity__.lower(): e
    for e in [
        *SUITE,
        AllExperiment,
    ]
}  # type: Dict[str, Type[AbstractExperiment]]
