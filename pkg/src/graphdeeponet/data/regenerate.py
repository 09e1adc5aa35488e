"""Re-solve a stored split at new points from its recorded generator settings."""

from __future__ import annotations

from ..errors import InvalidArgumentError
from ..geometry import SensorSet
from .advection import generate_advection_dataset
from .burgers import BurgersConfig, generate_burgers_dataset
from .dataset import TrajectoryDataset


def resample_dataset(ds: TrajectoryDataset, sensors: SensorSet) -> TrajectoryDataset:
    """The same trajectories as ``ds`` sampled at ``sensors``.

    Values come from the generator (closed form or the fine spectral grid),
    never from interpolating the stored sensor data.
    """
    meta = ds.meta
    equation = meta.get("equation", "")
    if "seed" not in meta:
        raise InvalidArgumentError("dataset has no recorded seed; cannot regenerate it")
    if sensors.domain != ds.sensors.domain:
        raise InvalidArgumentError("query points must live in the dataset's domain")
    if equation == "burgers":
        solver = meta.get("solver", {})
        config = BurgersConfig(
            **meta["params"],
            n_internal=solver.get("n_internal", BurgersConfig.n_internal),
            rtol=solver.get("rtol", BurgersConfig.rtol),
            atol=solver.get("atol", BurgersConfig.atol),
            n_times=ds.n_times,
            t_end=meta.get("t_end", ds.n_times * ds.dt),
        )
        _, (out,) = generate_burgers_dataset(ds.n_traj, meta["seed"], ds.sensors, config, [sensors])
    elif equation.startswith("advection"):
        _, (out,) = generate_advection_dataset(
            ds.n_traj, ds.sensors, ds.n_times, meta["params"]["velocity"], ds.dt, meta["seed"], [sensors]
        )
    else:
        raise InvalidArgumentError(f"cannot regenerate equation {equation!r}")
    return out
