from fracwave.services.spectral_service import SpectralService
from fracwave.services.random_field_service import RandomFieldService
from fracwave.services.stats_service import StatsService
from fracwave.services.gibbs_service import GibbsService
from fracwave.services.dynamics_service import DynamicsService
from fracwave.services.inflation_service import InflationService
from fracwave.services.observable_service import ObservableService
from fracwave.services.field_io_service import FieldIOService
from fracwave.services.config_service import ConfigService
from fracwave.services.report_service import ReportService
from fracwave.services.experiment_service import ExperimentService

__all__ = [
    "SpectralService",
    "RandomFieldService",
    "StatsService",
    "GibbsService",
    "DynamicsService",
    "InflationService",
    "ObservableService",
    "FieldIOService",
    "ConfigService",
    "ReportService",
    "ExperimentService",
]
