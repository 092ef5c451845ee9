import logging

# Project
from hardy.artifacts import RunDirectory
from hardy.estimates.reports import EstimateReport
from hardy.experiments.abstract import AbstractExperiment
from hardy.experiments.geometry import RhoTableExperiment, NormTableExperiment, ValidateDilationExperiment
from hardy.experiments.estimates import (
    OriginDecayExperiment,
    FiniteSumBoundExperiment,
    MaximalCompareExperiment,
    TransformBoundExperiment,
    DerivativeBoundExperiment,
    HardyLittlewoodExperiment,
)
from hardy.experiments.generation import AtomGenExperiment

__all__ = ["AllExperiment", "SUITE"]

logger = logging.getLogger(__name__)

SUITE = [
    ValidateDilationExperiment,
    RhoTableExperiment,
    NormTableExperiment,
    AtomGenExperiment,
    DerivativeBoundExperiment,
    TransformBoundExperiment,
    FiniteSumBoundExperiment,
    OriginDecayExperiment,
    HardyLittlewoodExperiment,
    MaximalCompareExperiment,
]  # type: list[type[AbstractExperiment]]


class AllExperiment(AbstractExperiment):
    """Every experiment in turn, each in its own subdirectory of the run"""

    __identity__ = "all"

    def run(self) -> EstimateReport:
        report = EstimateReport(self.__identity__, self.metadata(experiments=[e.__identity__ for e in SUITE]))
        for experiment_class in SUITE:
            identity = experiment_class.__identity__
            folder = RunDirectory(self.run_dir.subdirectory(identity), self.run_dir.run_id)
            part = experiment_class(self.config, folder).execute()
            report.merge(part, identity)
            report.plot_rows.extend({**row, "series": f"{identity}.{row['series']}"} for row in part.plot_rows)
        report.sample_sizes = {"experiments": len(SUITE)}
        return report
