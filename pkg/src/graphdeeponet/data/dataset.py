from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from ..errors import InvalidArgumentError
from ..geometry import SensorSet


@dataclass(eq=False)
class TrajectoryDataset:
    """Solution frames ``u[traj, time, node, channel]`` observed at ``sensors``."""

    u: np.ndarray
    sensors: SensorSet
    times: np.ndarray
    dt: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        u = np.asarray(self.u)
        if u.ndim == 3:
            u = u[..., None]
        if u.ndim != 4:
            raise InvalidArgumentError(f"u must have shape (n_traj, T, N, C), got {u.shape}")
        self.u = u.astype(np.float32, copy=False)
        self.times = np.asarray(self.times, dtype=np.float64)
        self.dt = float(self.dt)
        n_traj, T, N, _ = self.u.shape
        if N != self.sensors.n:
            raise InvalidArgumentError(f"u has {N} nodes but there are {self.sensors.n} sensors")
        if self.times.shape != (T,):
            raise InvalidArgumentError(f"times must have shape ({T},), got {self.times.shape}")
        if T > 1:
            steps = np.diff(self.times)
            if self.dt <= 0 or np.any(np.abs(steps - self.dt) > 1e-12 * max(1.0, abs(self.times).max())):
                raise InvalidArgumentError("times must be uniformly spaced by dt")
        if not np.all(np.isfinite(self.u)):
            raise InvalidArgumentError("u contains NaN or Inf")

    @property
    def n_traj(self) -> int:
        return self.u.shape[0]

    @property
    def n_times(self) -> int:
        return self.u.shape[1]

    @property
    def n_channels(self) -> int:
        return self.u.shape[3]

    def subset(self, idx) -> "TrajectoryDataset":
        return replace(self, u=self.u[np.atleast_1d(idx)], meta=dict(self.meta))

    def truncate(self, n_times: int) -> "TrajectoryDataset":
        """Keep only the first ``n_times`` frames."""
        return replace(self, u=self.u[:, :n_times], times=self.times[:n_times], meta=dict(self.meta))

    def until(self, t_end: float) -> "TrajectoryDataset":
        """Keep frames with ``t <= t_end``."""
        n = int(np.sum(self.times <= t_end + 1e-9 * max(1.0, abs(t_end))))
        return self.truncate(n)


@dataclass(eq=False)
class BundledSample:
    input_frames: np.ndarray
    target_frames: np.ndarray
    input_times: np.ndarray
    target_times: np.ndarray
    n_dropped: int = 0

    @property
    def K(self) -> int:
        return self.input_frames.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.target_frames.shape[0] // self.K


def bundle_counts(T: int, K: int):
    """Number of rollout blocks and trailing frames dropped for ``T`` frames."""
    if K < 1:
        raise InvalidArgumentError("K must be >= 1")
    if T < 2 * K:
        raise InvalidArgumentError(f"need at least 2K={2 * K} frames, got {T}")
    R = (T - K) // K
    return R, T - K - R * K


def bundle_frames(ds: TrajectoryDataset, K: int) -> List[BundledSample]:
    """Split each trajectory into an input bundle of ``K`` frames and ``R``
    consecutive ``K``-frame target blocks. Frames that do not fill a block are dropped."""
    R, dropped = bundle_counts(ds.n_times, K)
    end = K + R * K
    out = []
    for traj in ds.u:
        out.append(
            BundledSample(
                input_frames=traj[:K],
                target_frames=traj[K:end],
                input_times=ds.times[:K],
                target_times=ds.times[K:end],
                n_dropped=dropped,
            )
        )
    return out


def stack_bundles(samples: List[BundledSample]):
    """Stack bundles into ``(inputs[B, K, N, C], targets[B, R*K, N, C])``."""
    return (
        np.stack([s.input_frames for s in samples]),
        np.stack([s.target_frames for s in samples]),
    )
