from __future__ import annotations

import math

import torch
from torch import nn

from ..geometry import DomainSpec

ACTIVATIONS = {
    "gelu": nn.GELU,
    "relu": nn.ReLU,
    "tanh": nn.Tanh,
    "silu": nn.SiLU,
}


def _phase(xc, lower, extent):
    # wrap before scaling so x and x + L give bit-identical features
    frac = torch.remainder((xc - lower.to(xc.dtype)) / extent.to(xc.dtype), 1.0)
    return (2 * math.pi) * frac


class MLP(nn.Module):
    """``depth`` linear layers; hidden layers have ``width`` units and are
    followed by the activation, the output layer is linear."""

    def __init__(self, in_dim: int, out_dim: int, width: int = 128, depth: int = 2, activation: str = "gelu"):
        super().__init__()
        if depth < 1 or width < 1:
            raise ValueError("MLP width and depth must be >= 1")
        dims = [in_dim] + [width] * (depth - 1) + [out_dim]
        self.layers = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))
        self.act = ACTIVATIONS[activation]()

    @property
    def last(self) -> nn.Linear:
        return self.layers[-1]

    def forward(self, x):
        for layer in self.layers[:-1]:
            x = self.act(layer(x))
        return self.layers[-1](x)

    def forward_from_hidden(self, h):
        """Continue from the pre-activation output of the first layer."""
        if len(self.layers) == 1:
            return h
        x = self.act(h)
        for layer in self.layers[1:-1]:
            x = self.act(layer(x))
        return self.layers[-1](x)


class PositionEmbedding(nn.Module):
    """cos/sin of ``2 pi (x - lower) / L`` on periodic axes, raw coordinate elsewhere.

    With ``raw=True`` every axis passes through unchanged.
    """

    def __init__(self, domain: DomainSpec, raw: bool = False):
        super().__init__()
        self.periodic = [bool(p) and not raw for p in domain.periodic]
        self.register_buffer("lower", torch.tensor(domain.lower, dtype=torch.float64), persistent=False)
        self.register_buffer("extent", torch.tensor(domain.extent, dtype=torch.float64), persistent=False)
        self.out_dim = sum(2 if p else 1 for p in self.periodic)

    def forward(self, x):
        feats = []
        for c, periodic in enumerate(self.periodic):
            xc = x[..., c]
            if periodic:
                theta = _phase(xc, self.lower[c], self.extent[c])
                feats += [torch.cos(theta), torch.sin(theta)]
            else:
                feats.append(xc)
        return torch.stack(feats, dim=-1)


class FourierFeatures(nn.Module):
    """Trunk input ``(1, cos(2 pi x/L), sin(2 pi x/L), ..., cos(2 pi n x/L), sin(2 pi n x/L))``
    per periodic axis (one shared constant); non-periodic axes pass raw coordinates."""

    def __init__(self, domain: DomainSpec, n_modes: int):
        super().__init__()
        self.n_modes = int(n_modes)
        self.periodic = list(domain.periodic)
        self.register_buffer("lower", torch.tensor(domain.lower, dtype=torch.float64), persistent=False)
        self.register_buffer("extent", torch.tensor(domain.extent, dtype=torch.float64), persistent=False)
        n_periodic = sum(self.periodic)
        self.has_constant = n_periodic > 0 and self.n_modes > 0
        self.out_dim = int(self.has_constant) + 2 * self.n_modes * n_periodic + (len(self.periodic) - n_periodic)

    def forward(self, x):
        feats = []
        if self.has_constant:
            feats.append(torch.ones_like(x[..., :1]))
        harmonics = torch.arange(1, self.n_modes + 1, dtype=x.dtype, device=x.device)
        for c, periodic in enumerate(self.periodic):
            xc = x[..., c:c + 1]
            if periodic:
                if self.n_modes == 0:
                    continue
                theta = _phase(xc, self.lower[c], self.extent[c])
                feats += [torch.cos(theta * harmonics), torch.sin(theta * harmonics)]
            else:
                feats.append(xc)
        return torch.cat(feats, dim=-1)
