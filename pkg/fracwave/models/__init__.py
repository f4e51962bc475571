from fracwave.models.field import CutoffPsi, GridField, LatticeMode, SpectralField
from fracwave.models.phase import PhasePoint, Trajectory, Ensemble
from fracwave.models.potential import PotentialKind
from fracwave.models.profile import OdeProfile
from fracwave.models.rng import RngStream

__all__ = [
    "CutoffPsi",
    "LatticeMode",
    "SpectralField",
    "GridField",
    "PhasePoint",
    "Trajectory",
    "Ensemble",
    "PotentialKind",
    "OdeProfile",
    "RngStream",
]
