from .base import BaseExperiment, ExperimentResult, RunNotes
from .control import LzThresholdExperiment, NonlinearTminExperiment
from .speed_limits import (BoundsExperiment, DiracExperiment, JcSweepExperiment, LmgScanExperiment,
                           PropertySuiteExperiment, PtQubitExperiment)
from .thermo import StaTradeoffExperiment, ThermoExperiment

EXPERIMENTS: dict[str, type[BaseExperiment]] = {
    cls.tag: cls for cls in (
        BoundsExperiment, JcSweepExperiment, LmgScanExperiment, LzThresholdExperiment, StaTradeoffExperiment,
        ThermoExperiment, DiracExperiment, PtQubitExperiment, NonlinearTminExperiment, PropertySuiteExperiment,
    )
}

__all__ = ['BaseExperiment', 'ExperimentResult', 'RunNotes', 'EXPERIMENTS']
