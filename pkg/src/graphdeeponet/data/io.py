"""Dataset files: one ``.npz`` per split.

Arrays: ``u`` (float32, [n_traj, T, N, C]), ``x`` (float64, [N, d]),
``times`` (float64, [T]). Scalar/string attributes live in a JSON document
stored as the 0-d string array ``attrs``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import SchemaError
from ..geometry import DomainSpec, SensorSet
from .dataset import TrajectoryDataset

REQUIRED_ARRAYS = ("u", "x", "times", "attrs")
REQUIRED_ATTRS = ("equation", "dt", "domain_lower", "domain_upper", "periodic", "seed", "params")


def save_dataset(ds: TrajectoryDataset, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(ds.meta)
    attrs = {
        "equation": meta.pop("equation", "unknown"),
        "dt": ds.dt,
        "domain_lower": list(ds.sensors.domain.lower),
        "domain_upper": list(ds.sensors.domain.upper),
        "periodic": list(ds.sensors.domain.periodic),
        "seed": meta.pop("seed", None),
        "params": meta.pop("params", {}),
        "extra": meta,
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            u=ds.u.astype(np.float32, copy=False),
            x=ds.sensors.positions.astype(np.float64, copy=False),
            times=ds.times.astype(np.float64, copy=False),
            attrs=np.array(json.dumps(attrs)),
        )
    return path


def load_dataset(path) -> TrajectoryDataset:
    path = Path(path)
    with np.load(path, allow_pickle=False) as z:
        for name in REQUIRED_ARRAYS:
            if name not in z.files:
                raise SchemaError(name, path)
        u, x, times = z["u"], z["x"], z["times"]
        attrs = json.loads(str(z["attrs"]))
    for name in REQUIRED_ATTRS:
        if name not in attrs:
            raise SchemaError(name, path)
    domain = DomainSpec(tuple(attrs["domain_lower"]), tuple(attrs["domain_upper"]), tuple(attrs["periodic"]))
    meta = dict(attrs.get("extra", {}))
    meta.update(equation=attrs["equation"], seed=attrs["seed"], params=attrs["params"])
    return TrajectoryDataset(u, SensorSet(x, domain), times, attrs["dt"], meta)
