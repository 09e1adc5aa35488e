"""Exact solutions of constant-velocity transport on a periodic box.

u(t, x) = u0(x - v t), with u0 a random low-order Fourier series.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InvalidArgumentError
from ..geometry import DomainSpec, SensorSet
from .dataset import TrajectoryDataset

MAX_MODE = 3


def _half_space_modes(dim: int, max_mode: int) -> np.ndarray:
    """Integer wave vectors with |m_c| <= max_mode, one of each +/- pair."""
    modes = []
    for m in itertools.product(range(-max_mode, max_mode + 1), repeat=dim):
        m = np.array(m)
        nz = np.flatnonzero(m)
        if nz.size == 0 or m[nz[0]] > 0:
            modes.append(m)
    return np.array(modes, dtype=np.float64)


@dataclass(frozen=True)
class FourierInitialCondition:
    modes: np.ndarray
    cos_coef: np.ndarray
    sin_coef: np.ndarray
    domain: DomainSpec

    @classmethod
    def sample(cls, rng: np.random.Generator, domain: DomainSpec, max_mode: int = MAX_MODE):
        modes = _half_space_modes(domain.dim, max_mode)
        scale = 1.0 / (1.0 + np.linalg.norm(modes, axis=1))
        cos_coef = rng.uniform(-1.0, 1.0, len(modes)) * scale
        sin_coef = rng.uniform(-1.0, 1.0, len(modes)) * scale
        return cls(modes, cos_coef, sin_coef, domain)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        phase = 2.0 * np.pi * ((x - np.asarray(self.domain.lower)) / self.domain.extent) @ self.modes.T
        return np.cos(phase) @ self.cos_coef + np.sin(phase) @ self.sin_coef


def advection_solution(ic: FourierInitialCondition, velocity, t, x) -> np.ndarray:
    """``u0(x - v t)`` wrapped onto the torus; ``t`` may be an array of times."""
    v = np.asarray(velocity, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    shifted = x[None] - t[:, None, None] * v
    return ic(ic.domain.wrap(shifted))


def generate_advection_dataset(
    n_traj: int,
    grid: SensorSet,
    n_times: int,
    velocity,
    dt: float,
    seed: int = 0,
    query_sensors: Sequence[SensorSet] = (),
):
    """``n_traj`` exact transport trajectories sampled at ``grid`` and ``n_times``
    frames ``k * dt``. Extra ``query_sensors`` behave as in the Burgers generator."""
    dom = grid.domain
    if not all(dom.periodic):
        raise InvalidArgumentError("advection generator needs a fully periodic domain")
    velocity = np.broadcast_to(np.asarray(velocity, dtype=np.float64), (dom.dim,))
    if n_traj < 1 or n_times < 1:
        raise InvalidArgumentError("n_traj and n_times must be >= 1")
    times = np.arange(n_times) * float(dt)
    rng = np.random.default_rng(seed)
    grids = [grid, *query_sensors]
    frames = [np.empty((n_traj, n_times, g.n, 1), dtype=np.float32) for g in grids]
    for i in range(n_traj):
        ic = FourierInitialCondition.sample(rng, dom)
        for g, out in zip(grids, frames):
            out[i, :, :, 0] = advection_solution(ic, velocity, times, g.positions)
    meta = {
        "equation": f"advection{dom.dim}d",
        "seed": int(seed),
        "params": {"velocity": velocity.tolist(), "max_mode": MAX_MODE},
    }
    datasets = [TrajectoryDataset(f, g, times, dt, dict(meta)) for f, g in zip(frames, grids)]
    if query_sensors:
        return datasets[0], datasets[1:]
    return datasets[0]
