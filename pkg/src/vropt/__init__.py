"""Variance-reduced finite-sum optimizers without full gradients, plus a
federated simulator, brute-force oracles and an experiment harness."""

from .distributed import DSARAH, DZeroSARAH
from .model import Dataset, QuadraticTest, RobustLinearRegression, SigmoidSquared
from .optimizers import GD, SARAH, ZeroSARAH, select_output
from .schedule import dist_schedule_preset, dsarah_schedule, sarah_schedule, schedule_preset

__version__ = "0.1.0"

__all__ = [
    "DSARAH", "DZeroSARAH", "Dataset", "GD", "QuadraticTest", "RobustLinearRegression", "SARAH",
    "SigmoidSquared", "ZeroSARAH", "dist_schedule_preset", "dsarah_schedule", "sarah_schedule",
    "schedule_preset", "select_output",
]
