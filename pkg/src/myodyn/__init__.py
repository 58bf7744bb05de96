"""myodyn: muscle activation and force estimation from joint kinematics.

A recurrent network maps joint angle, velocity and acceleration windows to
per-muscle activations and forces. Training needs no labels: the objective
combines the joint's forward-dynamics torque residual, Hill-model force
consistency, an activation-power criterion and an activation range penalty.
A per-timestep static optimization solver provides independent reference
labels for validation and for the supervised baseline.
"""

from ._alloc import tune_allocator
from .config import ModelConfig, TrainConfig, load_model_config, load_train_config
from .data import KinematicSeries, differentiate, generate_trajectory
from .errors import MyodynError
from .mechanics import JointModel, MuscleParams, MusclePath, MuscleState
from .static_opt import SoProblem, SoSolution, solve_timestep, solve_trajectory
from .trainer import Dataset, TrainResult, build_dataset, train

__version__ = "0.1.0"

tune_allocator()

__all__ = [
    "Dataset",
    "JointModel",
    "KinematicSeries",
    "ModelConfig",
    "MuscleParams",
    "MusclePath",
    "MuscleState",
    "MyodynError",
    "SoProblem",
    "SoSolution",
    "TrainConfig",
    "TrainResult",
    "build_dataset",
    "differentiate",
    "generate_trajectory",
    "load_model_config",
    "load_train_config",
    "solve_timestep",
    "solve_trajectory",
    "train",
    "__version__",
]
