"""Online hyperparameter control with contextual ridge predictors."""

from ._validation import PhaseError, SnapshotError
from .controller import HyperController, Suggestion
from .estimator import RecursiveRidgeRegressor, RewardWindow, RidgeModel, invert_spd
from .hyperspace import Dimension, Grid, HyperSpace, build_grid, config_to_index, index_to_config
from .lgds import LgdsParams, generate_system

__all__ = [
    "Dimension",
    "Grid",
    "HyperController",
    "HyperSpace",
    "LgdsParams",
    "PhaseError",
    "RecursiveRidgeRegressor",
    "RewardWindow",
    "RidgeModel",
    "SnapshotError",
    "Suggestion",
    "build_grid",
    "config_to_index",
    "generate_system",
    "index_to_config",
    "invert_spd",
]

__version__ = "0.1.0"
