from fracwave.schemas.sim_config import Potential, SimConfig
from fracwave.schemas.experiment_config import ExperimentConfig, ExperimentKind, TailStatistic
from fracwave.schemas.inflation import BumpPhi, InflationParams
from fracwave.schemas.report import ExperimentReport, Fit, ReportTable, Verdict

__all__ = [
    "Potential",
    "SimConfig",
    "ExperimentConfig",
    "ExperimentKind",
    "TailStatistic",
    "BumpPhi",
    "InflationParams",
    "ExperimentReport",
    "Fit",
    "ReportTable",
    "Verdict",
]
