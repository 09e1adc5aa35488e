from .advection import FourierInitialCondition, advection_solution, generate_advection_dataset
from .burgers import (
    BURGERS_DOMAIN,
    BurgersConfig,
    BurgersForcing,
    eval_forcing,
    generate_burgers_dataset,
    sample_burgers_forcing,
    solve_burgers,
)
from .dataset import BundledSample, TrajectoryDataset, bundle_counts, bundle_frames, stack_bundles
from .io import load_dataset, save_dataset
from .regenerate import resample_dataset
from .shallow_water import SHALLOW_WATER_DOMAIN, sample_shallow_water_ic, shallow_water_height

__all__ = [
    "BURGERS_DOMAIN",
    "SHALLOW_WATER_DOMAIN",
    "BundledSample",
    "BurgersConfig",
    "BurgersForcing",
    "FourierInitialCondition",
    "TrajectoryDataset",
    "advection_solution",
    "bundle_counts",
    "bundle_frames",
    "eval_forcing",
    "generate_advection_dataset",
    "generate_burgers_dataset",
    "load_dataset",
    "resample_dataset",
    "sample_burgers_forcing",
    "sample_shallow_water_ic",
    "save_dataset",
    "shallow_water_height",
    "solve_burgers",
    "stack_bundles",
]
