import logging
from functools import cached_property

# Lamb Framework
from lamb.exc import NotRealizedMethodError

# Project
from hardy.atoms import Atom, random_atoms
from hardy.utils import derive_seed
from hardy.config import ExperimentConfig
from hardy.artifacts import RunDirectory
from hardy.dilation import Dilation
from hardy.mixed_norm import ExponentVector
from hardy.quasi_norm import QuasiNormEvaluator
from hardy.estimates.reports import EstimateReport

__all__ = ["AbstractExperiment"]

logger = logging.getLogger(__name__)


class AbstractExperiment(object):
    __identity__ = None
    # exponents must lie in (0, 1] and s must reach the minimal moment order
    requires_hardy = True
    # seed stream reserved for the experiment
    stream = 0

    def __init__(self, config: ExperimentConfig, run_dir: RunDirectory):
        self.config = config
        self.run_dir = run_dir

    @cached_property
    def d(self) -> Dilation:
        return self.config.dilation_object

    @cached_property
    def pv(self) -> ExponentVector:
        return self.config.exponent_vector

    @cached_property
    def e(self) -> QuasiNormEvaluator:
        return QuasiNormEvaluator(self.d)

    @cached_property
    def e_star(self) -> QuasiNormEvaluator:
        return QuasiNormEvaluator.for_transpose(self.d)

    @property
    def seed(self) -> int:
        return derive_seed(self.config.seed, self.stream)

    @property
    def threads(self) -> int:
        return self.config.threads

    @property
    def max_level(self) -> int:
        return self.config.grids.max_refinement

    def atoms(self, count: int, **options) -> list[Atom]:
        return random_atoms(
            self.d, self.pv, count, self.seed, threads=self.threads, **self.config.atom_options(**options)
        )

    def metadata(self, **extra) -> dict:
        return {
            "matrix": self.d.matrix.tolist(),
            "b": self.d.b,
            "exponents": self.pv.labels(),
            "seed": self.config.seed,
            "stream": self.stream,
            **extra,
        }

    def run(self) -> EstimateReport:
        raise NotRealizedMethodError(f"Experiment {self.__identity__} does not implement run")

    def execute(self) -> EstimateReport:
        logger.info(f"Experiment {self.__identity__} started in {self.run_dir.path}")
        report = self.run()
        report.metadata.setdefault("seed", self.config.seed)
        self.run_dir.write_report(report, self.__identity__)
        logger.info(f"Experiment {self.__identity__} finished: {'passed' if report.passed else 'failed'}")
        return report
