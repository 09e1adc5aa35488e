"""Encoder / message-passing processor / attention decoder with a trunk basis."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import torch
from torch import nn

from ..errors import InvalidArgumentError, NumericFailureError
from ..geometry import DomainSpec, SensorSet, SpatialGraph
from .layers import MLP, FourierFeatures, PositionEmbedding


@dataclass
class MLPSpec:
    width: int = 128
    depth: int = 2


def _spec(value) -> MLPSpec:
    if isinstance(value, MLPSpec):
        return value
    if isinstance(value, dict):
        return MLPSpec(**value)
    return MLPSpec(*value)


@dataclass
class ModelConfig:
    domain: dict
    K: int = 25
    channels: int = 1
    d_lat: int = 128
    p: int = 128
    M: int = 3
    n_fourier_modes: int = 8
    encoder: MLPSpec = field(default_factory=lambda: MLPSpec(128, 2))
    phi: MLPSpec = field(default_factory=lambda: MLPSpec(128, 2))
    psi: MLPSpec = field(default_factory=lambda: MLPSpec(128, 2))
    gate: MLPSpec = field(default_factory=lambda: MLPSpec(128, 3))
    feature: MLPSpec = field(default_factory=lambda: MLPSpec(128, 3))
    trunk: MLPSpec = field(default_factory=lambda: MLPSpec(128, 3))
    activation: str = "gelu"
    # k-NN neighbours; None picks the per-dimension default
    knn: Optional[int] = None
    # feed raw coordinates to the encoder and gate instead of the periodic embedding
    raw_positions: bool = False
    # time fed to omega_feature: "bundle" divides by K*dt, "raw" passes seconds as is
    time_input: str = "bundle"
    # origin of that time: "rollout" counts from the last input frame, "block" from the start of each block
    time_origin: str = "rollout"

    def __post_init__(self):
        if isinstance(self.domain, DomainSpec):
            self.domain = self.domain.to_dict()
        for name in ("encoder", "phi", "psi", "gate", "feature", "trunk"):
            setattr(self, name, _spec(getattr(self, name)))
        for name in ("K", "channels", "d_lat", "p", "M"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")
        if self.n_fourier_modes < 0:
            raise InvalidArgumentError("n_fourier_modes must be >= 0")
        if self.time_input not in ("bundle", "raw"):
            raise InvalidArgumentError("time_input must be 'bundle' or 'raw'")
        if self.time_origin not in ("rollout", "block"):
            raise InvalidArgumentError("time_origin must be 'rollout' or 'block'")

    @property
    def domain_spec(self) -> DomainSpec:
        return DomainSpec.from_dict(self.domain)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class TorchGraph:
    """Edge index tensors and geometry for one sensor layout."""

    positions: torch.Tensor
    receivers: torch.Tensor
    senders: torch.Tensor
    rel_pos: torch.Tensor
    source: Optional[SpatialGraph] = None

    @classmethod
    def from_graph(cls, graph: SpatialGraph) -> "TorchGraph":
        return cls(
            positions=torch.tensor(graph.sensors.positions, dtype=torch.float64),
            receivers=torch.as_tensor(graph.receivers, dtype=torch.long),
            senders=torch.as_tensor(graph.senders, dtype=torch.long),
            rel_pos=torch.tensor(graph.rel_pos, dtype=torch.float64),
            source=graph,
        )

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[0]


GraphLike = Union[SpatialGraph, TorchGraph]


def as_torch_graph(graph: GraphLike) -> TorchGraph:
    return graph if isinstance(graph, TorchGraph) else TorchGraph.from_graph(graph)


@dataclass
class LatentState:
    f: torch.Tensor
    graph: TorchGraph
    step_index: int = 0


@dataclass
class FieldPrediction:
    """Coefficients ``coeffs[..., K, C, p]`` for ``times``; the field is the
    inner product of the coefficients with ``trunk(x)``."""

    coeffs: torch.Tensor
    times: torch.Tensor
    trunk: Callable[[torch.Tensor], torch.Tensor]
    domain: DomainSpec

    def __call__(self, queries) -> torch.Tensor:
        return evaluate_field(self, queries)


def evaluate_field(pred: FieldPrediction, queries) -> torch.Tensor:
    """Field values ``[..., K, Q, C]`` at arbitrary query points ``[Q, d]``."""
    if isinstance(queries, SensorSet):
        queries = queries.positions
    q = queries if torch.is_tensor(queries) else torch.tensor(np.asarray(queries))
    if q.ndim == 1:
        q = q[:, None]
    basis = pred.trunk(q).to(pred.coeffs.dtype)
    return torch.einsum("...kcp,qp->...kqc", pred.coeffs, basis)


class GraphDeepONet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c = config
        domain = c.domain_spec
        self.domain = domain
        self.dim = domain.dim
        act = c.activation
        self.pos_embed = PositionEmbedding(domain, raw=c.raw_positions)
        self.fourier = FourierFeatures(domain, c.n_fourier_modes)
        self.register_buffer("rel_scale", torch.tensor(domain.extent, dtype=torch.float64), persistent=False)

        self.encoder = MLP(c.K * c.channels + self.pos_embed.out_dim, c.d_lat, c.encoder.width, c.encoder.depth, act)
        self.phi = nn.ModuleList(
            MLP(2 * c.d_lat + self.dim, c.d_lat, c.phi.width, c.phi.depth, act) for _ in range(c.M)
        )
        self.psi = nn.ModuleList(
            MLP(2 * c.d_lat, c.d_lat, c.psi.width, c.psi.depth, act) for _ in range(c.M)
        )
        n_out = c.channels * c.p
        self.gate = MLP(self.pos_embed.out_dim + c.d_lat, n_out, c.gate.width, c.gate.depth, act)
        self.feature = MLP(1 + c.d_lat, n_out, c.feature.width, c.feature.depth, act)
        self.trunk = MLP(self.fourier.out_dim, c.p, c.trunk.width, c.trunk.depth, act)

        # the rollout starts as the identity map on latents
        nn.init.zeros_(self.psi[-1].last.weight)
        nn.init.zeros_(self.psi[-1].last.bias)
        self.encode_calls = 0

    @property
    def dtype(self):
        return self.trunk.last.weight.dtype

    # -- geometry helpers -------------------------------------------------

    def _embed_positions(self, positions: torch.Tensor) -> torch.Tensor:
        return self.pos_embed(positions.to(torch.float64)).to(self.dtype)

    # -- encoder ----------------------------------------------------------

    def encode(self, u_bundle, graph: GraphLike) -> LatentState:
        """Embed every node from its ``K`` stacked input frames and its position.

        ``u_bundle`` is ``[..., K, N, C]``; the result holds ``f[..., N, d_lat]``.
        """
        g = as_torch_graph(graph)
        u = torch.as_tensor(u_bundle).to(self.dtype)
        K, C = self.config.K, self.config.channels
        if u.ndim < 3 or u.shape[-3:] != (K, g.n_nodes, C):
            raise InvalidArgumentError(
                f"u_bundle must end with shape ({K}, {g.n_nodes}, {C}), got {tuple(u.shape)}"
            )
        self.encode_calls += 1
        per_node = u.movedim(-2, -3).reshape(*u.shape[:-3], g.n_nodes, K * C)
        pos = self._embed_positions(g.positions).expand(*per_node.shape[:-1], -1)
        f = self.encoder(torch.cat([per_node, pos], dim=-1))
        return LatentState(f, g, 0)

    # -- processor --------------------------------------------------------

    def message_passing_step(self, h: torch.Tensor, graph: GraphLike, m: int, edge_mask=None) -> torch.Tensor:
        """One round of ``phi_m`` messages summed at the receivers, then ``psi_m``.

        ``edge_mask`` (``[E]``, 0/1) multiplies individual messages.
        """
        g = as_torch_graph(graph)
        rel = (g.rel_pos / self.rel_scale).to(h.dtype)
        h_recv = h[..., g.receivers, :]
        h_send = h[..., g.senders, :]
        msg = self.phi[m](torch.cat([h_recv, h_send, rel.expand(*h_recv.shape[:-1], -1)], dim=-1))
        if edge_mask is not None:
            msg = msg * torch.as_tensor(edge_mask, dtype=msg.dtype)[:, None]
        agg = torch.zeros_like(h).index_add_(h.ndim - 2, g.receivers, msg)
        return self.psi[m](torch.cat([h, agg], dim=-1))

    def process(self, latent: LatentState, edge_mask=None) -> LatentState:
        """Advance the latent state one step: ``f + h^M`` after ``M`` message-passing rounds."""
        h = latent.f
        for m in range(self.config.M):
            h = self.message_passing_step(h, latent.graph, m, edge_mask)
        f = latent.f + h
        if not torch.isfinite(f).all():
            raise NumericFailureError("non-finite latent state", block=latent.step_index + 1)
        return LatentState(f, latent.graph, latent.step_index + 1)

    # -- decoder ----------------------------------------------------------

    def attention_scores(self, latent: LatentState) -> torch.Tensor:
        """Per-channel softmax over nodes, ``[..., N, C*p]``."""
        pos = self._embed_positions(latent.graph.positions).expand(*latent.f.shape[:-1], -1)
        logits = self.gate(torch.cat([pos, latent.f], dim=-1)) / math.sqrt(self.config.d_lat)
        return torch.softmax(logits, dim=-2)

    def node_features(self, latent: LatentState, times, time_unit: float = 1.0) -> torch.Tensor:
        """``omega_feature(t, f_i)`` for every time and node, ``[..., T, N, C*p]``.

        The network sees ``t / time_unit``.
        """
        t = (torch.as_tensor(times, dtype=torch.float64).reshape(-1) / time_unit).to(self.dtype)
        first = self.feature.layers[0]
        # the first layer is affine in (t, f): evaluate the f part once per node
        w_t, w_f = first.weight[:, :1], first.weight[:, 1:]
        from_f = latent.f @ w_f.T + first.bias
        from_t = t[:, None] * w_t[:, 0]
        hidden = from_f.unsqueeze(-3) + from_t[:, None, :]
        return self.feature.forward_from_hidden(hidden)

    def aggregate(self, latent: LatentState, times, time_unit: float = 1.0) -> torch.Tensor:
        """Coefficients ``[..., T, C, p]`` for each time in ``times``."""
        scores = self.attention_scores(latent)
        feats = self.node_features(latent, times, time_unit)
        nu = torch.einsum("...nq,...tnq->...tq", scores, feats)
        return nu.reshape(*nu.shape[:-1], self.config.channels, self.config.p)

    # -- trunk ------------------------------------------------------------

    def trunk_basis(self, x) -> torch.Tensor:
        """Basis values ``[Q, p]`` at points ``x[Q, d]``."""
        x = (x if torch.is_tensor(x) else torch.tensor(np.asarray(x))).to(torch.float64)
        if x.ndim == 1:
            x = x[:, None]
        return self.trunk(self.fourier(x).to(self.dtype))

    # -- rollout ----------------------------------------------------------

    def time_unit(self, dt: float) -> float:
        # in bundle units one rollout block spans a unit interval of the time input
        return self.config.K * dt if self.config.time_input == "bundle" else 1.0

    def block_times(self, block: int, dt: float) -> torch.Tensor:
        """Target times of rollout block ``block`` (1-based), measured from the
        last input frame: ``((block - 1) K + kappa) dt`` for ``kappa = 1..K``."""
        K = self.config.K
        return ((block - 1) * K + torch.arange(1, K + 1, dtype=torch.float64)) * dt

    def forward(self, u_bundle, graph: GraphLike, n_rollout: int, dt: float) -> List[FieldPrediction]:
        if n_rollout < 1:
            raise InvalidArgumentError("n_rollout must be >= 1")
        latent = self.encode(u_bundle, graph)
        preds = []
        for r in range(1, n_rollout + 1):
            latent = self.process(latent)
            t = self.block_times(r, dt)
            t_in = self.block_times(1, dt) if self.config.time_origin == "block" else t
            coeffs = self.aggregate(latent, t_in, time_unit=self.time_unit(dt))
            preds.append(FieldPrediction(coeffs, t, self.trunk_basis, self.domain))
        return preds

    def rollout_at(self, u_bundle, graph: GraphLike, n_rollout: int, dt: float, queries) -> torch.Tensor:
        """Stacked field values ``[..., R*K, Q, C]`` at ``queries``."""
        preds = self.forward(u_bundle, graph, n_rollout, dt)
        coeffs = torch.cat([p.coeffs for p in preds], dim=-3)
        stacked = FieldPrediction(coeffs, torch.cat([p.times for p in preds]), self.trunk_basis, self.domain)
        return evaluate_field(stacked, queries)
