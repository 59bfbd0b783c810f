"""Multi-extended-target tracking with the gamma-Gaussian-inverse-Wishart
random matrix model and variational-Bayes data association."""

from ggiwtrack._kernels import BACKEND as KERNEL_BACKEND
from ggiwtrack.association import JointAssociationEvent, MeasurementFrame
from ggiwtrack.core import GgiwState, MotionModel
from ggiwtrack.errors import CapacityError, DomainError
from ggiwtrack.simulate import ScenarioConfig, TargetSpec, crossing_scenario
from ggiwtrack.updates import AssociationConfig, VbConfig

__version__ = "0.1.0"

__all__ = [
    "AssociationConfig",
    "CapacityError",
    "DomainError",
    "GgiwState",
    "JointAssociationEvent",
    "KERNEL_BACKEND",
    "MeasurementFrame",
    "MotionModel",
    "ScenarioConfig",
    "TargetSpec",
    "VbConfig",
    "crossing_scenario",
    "__version__",
]
