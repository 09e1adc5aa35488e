"""Classic DeepONet with time fed to the trunk: u(t, x) = <branch(u_bar), trunk(t, x)>."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from ..errors import InvalidArgumentError
from ..geometry import SensorSet
from .graphdeeponet import MLPSpec, _spec
from .layers import MLP


@dataclass
class DeepONetConfig:
    sensor_positions: list
    K: int = 5
    channels: int = 1
    p: int = 128
    branch: MLPSpec = field(default_factory=lambda: MLPSpec(128, 3))
    trunk: MLPSpec = field(default_factory=lambda: MLPSpec(128, 3))
    activation: str = "gelu"

    def __post_init__(self):
        self.sensor_positions = np.asarray(self.sensor_positions, dtype=np.float64).reshape(
            len(self.sensor_positions), -1
        ).tolist()
        self.branch = _spec(self.branch)
        self.trunk = _spec(self.trunk)

    @property
    def n_sensors(self) -> int:
        return len(self.sensor_positions)

    @property
    def dim(self) -> int:
        return len(self.sensor_positions[0])

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class DeepONet(nn.Module):
    """Grid-bound baseline: the branch reads a fixed, ordered sensor layout."""

    def __init__(self, config: DeepONetConfig):
        super().__init__()
        self.config = config
        c = config
        self.sensor_positions = np.asarray(c.sensor_positions, dtype=np.float64)
        self.branch = MLP(c.n_sensors * c.K * c.channels, c.channels * c.p, c.branch.width, c.branch.depth, c.activation)
        self.trunk = MLP(1 + c.dim, c.p, c.trunk.width, c.trunk.depth, c.activation)

    @property
    def dtype(self):
        return self.trunk.last.weight.dtype

    def check_layout(self, sensors):
        pos = sensors.positions if isinstance(sensors, SensorSet) else np.asarray(sensors, dtype=np.float64)
        pos = pos.reshape(pos.shape[0], -1)
        ref = self.sensor_positions
        if pos.shape != ref.shape or not np.array_equal(pos, ref):
            raise InvalidArgumentError("sensor layout differs from the layout the branch net was built for")

    def coefficients(self, branch_input) -> torch.Tensor:
        """``[..., C, p]`` from flattened sensor values ``[..., N*K*C]`` (or ``[..., K, N, C]``)."""
        u = torch.as_tensor(branch_input).to(self.dtype)
        c = self.config
        if u.shape[-1] != c.n_sensors * c.K * c.channels:
            u = u.reshape(*u.shape[:-3], -1)
        if u.shape[-1] != c.n_sensors * c.K * c.channels:
            raise InvalidArgumentError("branch input has the wrong number of values")
        nu = self.branch(u)
        return nu.reshape(*nu.shape[:-1], c.channels, c.p)

    def basis(self, t, x) -> torch.Tensor:
        """Trunk values ``[T, Q, p]`` on the product of times ``[T]`` and points ``[Q, d]``."""
        t = (t if torch.is_tensor(t) else torch.tensor(np.asarray(t, dtype=np.float64))).reshape(-1)
        x = x if torch.is_tensor(x) else torch.tensor(np.asarray(x, dtype=np.float64))
        if x.ndim == 1:
            x = x[:, None]
        tt = t[:, None, None].expand(-1, x.shape[0], 1)
        xx = x[None].expand(t.shape[0], -1, -1)
        return self.trunk(torch.cat([tt, xx], dim=-1).to(self.dtype))

    def forward(self, branch_input, t, x) -> torch.Tensor:
        """Predictions ``[..., T, Q, C]``."""
        nu = self.coefficients(branch_input)
        return torch.einsum("...cp,tqp->...tqc", nu, self.basis(t, x))

    def predict(self, u_bundle, sensors, t, x) -> torch.Tensor:
        self.check_layout(sensors)
        return self.forward(u_bundle, t, x)


def deeponet_baseline_forward(model: DeepONet, branch_input, t: float, x) -> float:
    """Scalar prediction at a single ``(t, x)``."""
    out = model.forward(branch_input, [t], np.atleast_2d(np.asarray(x, dtype=np.float64)))
    return float(out.detach().reshape(-1)[0])
