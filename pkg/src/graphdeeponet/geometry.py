"""Domains, sensor clouds and k-NN graphs on (possibly periodic) boxes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError

DEFAULT_K = {1: 6, 2: 8}


@dataclass(frozen=True)
class DomainSpec:
    lower: tuple
    upper: tuple
    periodic: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        periodic = np.atleast_1d(self.periodic)
        if periodic.size == 1 and len(lower) > 1:
            periodic = np.repeat(periodic, len(lower))
        periodic = tuple(bool(v) for v in periodic)
        if not (len(lower) == len(upper) == len(periodic)) or len(lower) == 0:
            raise InvalidArgumentError("lower, upper and periodic must have the same length d >= 1")
        for lo, hi in zip(lower, upper):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise InvalidArgumentError(f"invalid axis bounds [{lo}, {hi})")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "periodic", periodic)

    @classmethod
    def box(cls, lower, upper, dim=1, periodic=True):
        return cls((lower,) * dim, (upper,) * dim, (periodic,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map points back into ``[lower, upper)`` along periodic axes."""
        x = np.array(x, dtype=np.float64, copy=True)
        lo = np.asarray(self.lower)
        L = self.extent
        for c in range(self.dim):
            if self.periodic[c]:
                x[..., c] = lo[c] + np.mod(x[..., c] - lo[c], L[c])
        return x

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "periodic": list(self.periodic)}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        return cls(tuple(d["lower"]), tuple(d["upper"]), tuple(d["periodic"]))


@dataclass(frozen=True, eq=False)
class SensorSet:
    positions: np.ndarray
    domain: DomainSpec

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[1] != self.domain.dim:
            raise InvalidArgumentError(
                f"positions must have shape (N, {self.domain.dim}), got {pos.shape}"
            )
        lo, hi = np.asarray(self.domain.lower), np.asarray(self.domain.upper)
        outside = (pos < lo) | (pos > hi) | ((pos == hi) & np.asarray(self.domain.periodic))
        if outside.any():
            raise InvalidArgumentError("sensor positions must lie inside the domain")
        if len(np.unique(pos, axis=0)) != len(pos):
            raise InvalidArgumentError("sensor positions must be pairwise distinct")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return self.positions.shape[0]

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def permuted(self, perm: Sequence[int]) -> "SensorSet":
        return SensorSet(self.positions[np.asarray(perm)], self.domain)


@dataclass(frozen=True, eq=False)
class SpatialGraph:
    """Directed k-NN graph. Edge ``e`` carries a message from ``senders[e]`` to
    ``receivers[e]``; ``rel_pos[e]`` is receiver minus sender (minimum image)."""

    sensors: SensorSet
    k: int
    receivers: np.ndarray
    senders: np.ndarray
    rel_pos: np.ndarray = field(repr=False)

    @property
    def edges(self) -> np.ndarray:
        return np.stack([self.receivers, self.senders], axis=1)

    @property
    def n_nodes(self) -> int:
        return self.sensors.n

    def relabel(self, perm: Sequence[int]) -> "SpatialGraph":
        """Graph for sensors reordered as ``new[i] = old[perm[i]]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return SpatialGraph(
            sensors=self.sensors.permuted(perm),
            k=self.k,
            receivers=inv[self.receivers],
            senders=inv[self.senders],
            rel_pos=self.rel_pos.copy(),
        )


def _check_same_dim(x, domain):
    if x.shape[-1] != domain.dim:
        raise InvalidArgumentError(
            f"expected points of dimension {domain.dim}, got trailing size {x.shape[-1]}"
        )


def minimum_image_displacement(xi, xj, domain: DomainSpec) -> np.ndarray:
    """``xi - xj`` with periodic components wrapped into ``[-L/2, L/2)``.

    Broadcasts over leading axes.
    """
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    _check_same_dim(xi, domain)
    _check_same_dim(xj, domain)
    d = xi - xj
    L = domain.extent
    for c in range(domain.dim):
        if domain.periodic[c]:
            d[..., c] = d[..., c] - L[c] * np.floor((d[..., c] + 0.5 * L[c]) / L[c])
    return d


def build_knn_graph(sensors: SensorSet, k: Optional[int] = None, chunk: int = 1024) -> SpatialGraph:
    """Connect every node to its ``k`` nearest distinct neighbours.

    Distances use the minimum-image metric on periodic axes. Equal distances are
    resolved in favour of the lower node index. ``k`` defaults to 6 in 1D and 8 in 2D.
    """
    domain = sensors.domain
    if k is None:
        k = DEFAULT_K.get(domain.dim, 2 * domain.dim + 4)
    k = int(k)
    n = sensors.n
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    if n <= k:
        raise InvalidArgumentError(f"need more than k={k} sensors, got {n}")

    pos = sensors.positions
    nbrs = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        block = pos[start:start + chunk]
        disp = minimum_image_displacement(block[:, None, :], pos[None, :, :], domain)
        dist2 = np.einsum("ijc,ijc->ij", disp, disp)
        rows = np.arange(block.shape[0])
        dist2[rows, start + rows] = np.inf
        # stable sort keeps the lower column index first among equal distances
        order = np.argsort(dist2, axis=1, kind="stable")
        nbrs[start:start + chunk] = order[:, :k]

    receivers = np.repeat(np.arange(n), k)
    senders = nbrs.reshape(-1)
    rel_pos = minimum_image_displacement(pos[receivers], pos[senders], domain)
    return SpatialGraph(sensors=sensors, k=k, receivers=receivers, senders=senders, rel_pos=rel_pos)


def regular_sensors(domain: DomainSpec, n_per_axis, offset: float = 0.0) -> SensorSet:
    """Uniform tensor grid with ``n_per_axis`` cells per axis.

    ``offset`` shifts every node by that fraction of a cell, e.g. 0.5 gives cell centres.
    """
    n_per_axis = np.broadcast_to(np.atleast_1d(n_per_axis), (domain.dim,))
    axes = []
    for c in range(domain.dim):
        lo, hi, m = domain.lower[c], domain.upper[c], int(n_per_axis[c])
        h = (hi - lo) / m
        axes.append(lo + h * (np.arange(m) + offset))
    mesh = np.meshgrid(*axes, indexing="ij")
    return SensorSet(np.stack([g.reshape(-1) for g in mesh], axis=1), domain)


def sample_irregular_sensors(domain: DomainSpec, n_candidates: int, n_select: int, seed: int) -> SensorSet:
    """Pick ``n_select`` points without replacement from a regular candidate grid.

    ``n_candidates`` is the total grid size and must be a perfect ``d``-th power.
    Selected points keep the candidate-grid ordering.
    """
    if n_select > n_candidates:
        raise InvalidArgumentError(f"cannot select {n_select} of {n_candidates} candidates")
    if n_select < 1:
        raise InvalidArgumentError("n_select must be >= 1")
    per_axis = int(round(n_candidates ** (1.0 / domain.dim)))
    if per_axis ** domain.dim != n_candidates:
        raise InvalidArgumentError(
            f"n_candidates={n_candidates} is not a perfect power of dimension {domain.dim}"
        )
    grid = regular_sensors(domain, per_axis)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n_candidates, size=n_select, replace=False))
    return SensorSet(grid.positions[idx], domain)


def parse_query_spec(spec: str, domain: DomainSpec, seed: int = 0) -> SensorSet:
    """Build a query set from strings like ``regular:200``, ``offset:100`` or
    ``random:500``."""
    kind, _, count = spec.partition(":")
    try:
        n = int(count)
    except ValueError:
        raise InvalidArgumentError(f"bad query spec {spec!r}") from None
    per_axis = int(round(n ** (1.0 / domain.dim)))
    if kind == "regular":
        return regular_sensors(domain, per_axis)
    if kind == "offset":
        return regular_sensors(domain, per_axis, offset=0.5)
    if kind == "random":
        rng = np.random.default_rng(seed)
        lo, L = np.asarray(domain.lower), domain.extent
        return SensorSet(lo + L * rng.random((n, domain.dim)), domain)
    raise InvalidArgumentError(f"unknown query kind {kind!r}")
