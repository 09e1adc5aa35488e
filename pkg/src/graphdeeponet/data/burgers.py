"""Forced viscous Burgers data on the periodic interval [0, 16).

    u_t + (alpha u^2 - beta u_x + gamma u_xx)_x = delta(t, x),   u(0, x) = delta(0, x)

with ``delta`` a random sum of five travelling sinusoids. The solver is
pseudo-spectral (2/3 dealiasing) with an adaptive explicit Runge-Kutta
integrator; output frames are sampled from the fine Fourier representation at
arbitrary sensor positions.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import IntegrationError, InvalidArgumentError
from ..geometry import DomainSpec, SensorSet
from .dataset import TrajectoryDataset

BLOWUP = 1e6
N_TERMS = 5
WAVENUMBERS = np.array([1.0, 2.0, 3.0]) * np.pi / 8.0

BURGERS_DOMAIN = DomainSpec((0.0,), (16.0,), (True,))


@dataclass(frozen=True)
class BurgersForcing:
    A: np.ndarray
    a: np.ndarray
    b: np.ndarray
    phi: np.ndarray

    def to_dict(self):
        return {k: np.asarray(v).tolist() for k, v in asdict(self).items()}


@dataclass(frozen=True)
class BurgersConfig:
    alpha: float = 0.5
    beta: float = 0.01
    gamma: float = 0.0
    n_internal: int = 256
    n_times: int = 250
    t_end: float = 4.0
    rtol: float = 1e-6
    atol: float = 1e-8

    @property
    def params(self):
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}


def sample_burgers_forcing(seed: Union[int, np.random.SeedSequence]) -> BurgersForcing:
    rng = np.random.default_rng(seed)
    return BurgersForcing(
        A=rng.uniform(-0.5, 0.5, N_TERMS),
        a=rng.uniform(-0.4, 0.4, N_TERMS),
        b=rng.choice(WAVENUMBERS, N_TERMS),
        phi=rng.uniform(0.0, 2.0 * np.pi, N_TERMS),
    )


def eval_forcing(f: BurgersForcing, t: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    arg = np.multiply.outer(x, f.b) + (f.a * t + f.phi)
    return np.sin(arg) @ np.asarray(f.A, dtype=np.float64)


def _dealias_mask(n: int) -> np.ndarray:
    return (np.arange(n // 2 + 1) < n / 3.0).astype(np.float64)


def integrate_spectral(
    forcing: BurgersForcing,
    params: dict,
    times: np.ndarray,
    n_internal: int = 256,
    length: float = 16.0,
    initial: Optional[np.ndarray] = None,
    rtol: float = 1e-6,
    atol: float = 1e-8,
) -> np.ndarray:
    """Integrate on ``n_internal`` points and return rfft coefficients at ``times``.

    ``initial`` overrides ``u(0, x) = delta(0, x)`` (values on the internal grid).
    """
    n = int(n_internal)
    if n < 8 or n % 2:
        raise InvalidArgumentError("n_internal must be an even integer >= 8")
    alpha, beta, gamma = (float(params.get(k, 0.0)) for k in ("alpha", "beta", "gamma"))
    x = np.arange(n) * (length / n)
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    ik = 1j * k
    mask = _dealias_mask(n)
    linear = (-beta * k**2 + 1j * gamma * k**3) * mask
    zero_forcing = not np.any(forcing.A)

    def rhs(t, u):
        if not np.all(np.isfinite(u)) or np.abs(u).max() > BLOWUP:
            raise IntegrationError("solution blew up", t)
        uh = np.fft.rfft(u) * mask
        uf = np.fft.irfft(uh, n)
        d = -alpha * ik * np.fft.rfft(uf * uf) * mask + linear * uh
        if not zero_forcing:
            d = d + np.fft.rfft(eval_forcing(forcing, t, x)) * mask
        return np.fft.irfft(d, n)

    u0 = eval_forcing(forcing, 0.0, x) if initial is None else np.asarray(initial, dtype=np.float64)
    u0 = np.fft.irfft(np.fft.rfft(u0) * mask, n)
    times = np.asarray(times, dtype=np.float64)
    if times[-1] == times[0]:
        sol_y = u0[:, None]
    else:
        sol = solve_ivp(rhs, (times[0], times[-1]), u0, t_eval=times, method="RK45", rtol=rtol, atol=atol)
        if sol.status != 0:
            raise IntegrationError(sol.message, sol.t[-1] if sol.t.size else times[0])
        sol_y = sol.y
    if not np.all(np.isfinite(sol_y)) or np.abs(sol_y).max() > BLOWUP:
        raise IntegrationError("solution blew up", times[-1])
    return np.fft.rfft(sol_y.T, axis=1)


def sample_spectral(uhat: np.ndarray, positions: np.ndarray, n_internal: int, length: float = 16.0, lower: float = 0.0):
    """Evaluate the trigonometric interpolant of rfft coefficients at ``positions``."""
    x = np.asarray(positions, dtype=np.float64).reshape(-1) - lower
    m = np.arange(uhat.shape[-1])
    weights = np.full(m.shape, 2.0)
    weights[0] = 1.0
    if n_internal % 2 == 0:
        weights[-1] = 1.0
    basis = np.exp(2j * np.pi * np.outer(x, m) / length)
    return ((uhat * weights) @ basis.T).real / n_internal


def output_times(n_times: int, t_end: float) -> np.ndarray:
    return np.arange(n_times) * (t_end / n_times)


def solve_burgers(
    forcing: BurgersForcing,
    params: dict,
    grid: SensorSet,
    n_steps: int = 250,
    t_end: float = 4.0,
    n_internal: int = 256,
    **kw,
) -> TrajectoryDataset:
    """Single-trajectory dataset with ``n_steps`` frames spaced ``t_end / n_steps``."""
    dom = grid.domain
    if dom.dim != 1 or not dom.periodic[0]:
        raise InvalidArgumentError("Burgers solver needs a periodic 1D domain")
    times = output_times(n_steps, t_end)
    uhat = integrate_spectral(forcing, params, times, n_internal, float(dom.extent[0]), **kw)
    u = sample_spectral(uhat, grid.positions, n_internal, float(dom.extent[0]), dom.lower[0])
    meta = {"equation": "burgers", "params": dict(params), "n_internal": n_internal, "forcing": forcing.to_dict()}
    return TrajectoryDataset(u[None, :, :, None], grid, times, t_end / n_steps, meta)


def generate_burgers_dataset(
    n_traj: int,
    seed: int,
    sensors: SensorSet,
    config: BurgersConfig = BurgersConfig(),
    query_sensors: Sequence[SensorSet] = (),
):
    """Solve ``n_traj`` trajectories with independent forcings.

    Trajectory ``i`` draws its forcing from child ``i`` of ``SeedSequence(seed)``.
    If ``query_sensors`` are given, the same solutions sampled at those points are
    returned as extra datasets: ``(ds, [query_ds, ...])``.
    """
    if n_traj < 1:
        raise InvalidArgumentError("n_traj must be >= 1")
    dom = sensors.domain
    L, lo = float(dom.extent[0]), dom.lower[0]
    times = output_times(config.n_times, config.t_end)
    grids = [sensors, *query_sensors]
    frames = [np.empty((n_traj, config.n_times, g.n, 1), dtype=np.float32) for g in grids]
    children = np.random.SeedSequence(seed).spawn(n_traj)
    for i, child in enumerate(children):
        forcing = sample_burgers_forcing(child)
        try:
            uhat = integrate_spectral(
                forcing, config.params, times, config.n_internal, L, rtol=config.rtol, atol=config.atol
            )
        except IntegrationError as exc:
            raise IntegrationError("solution blew up", exc.time, trajectory=i) from exc
        for g, out in zip(grids, frames):
            out[i, :, :, 0] = sample_spectral(uhat, g.positions, config.n_internal, L, lo)
    meta = {
        "equation": "burgers",
        "seed": int(seed),
        "params": config.params,
        "solver": {"n_internal": config.n_internal, "rtol": config.rtol, "atol": config.atol},
        "t_end": config.t_end,
        "coefficients_note": "desk-scale defaults, not matched to any published benchmark",
    }
    dt = config.t_end / config.n_times
    datasets = [TrajectoryDataset(f, g, times, dt, dict(meta)) for f, g in zip(frames, grids)]
    if query_sensors:
        return datasets[0], datasets[1:]
    return datasets[0]
