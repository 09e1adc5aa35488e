"""Uniform prediction interface over GraphDeepONet and the DeepONet baseline."""

from __future__ import annotations

from typing import Optional

import torch

from .geometry import SensorSet, build_knn_graph
from .model import DeepONet, GraphDeepONet, TorchGraph


def block_offsets(K: int, n_rollout: int, dt: float) -> torch.Tensor:
    """Target times measured from the last input frame, ``j * dt`` for ``j = 1..R*K``."""
    return torch.arange(1, n_rollout * K + 1, dtype=torch.float64) * dt


def predict_frames(
    model,
    inputs,
    sensors: SensorSet,
    n_rollout: int,
    dt: float,
    queries=None,
    graph: Optional[object] = None,
) -> torch.Tensor:
    """Predicted frames ``[B, R*K, Q, C]`` after the input bundle ``[B, K, N, C]``.

    ``queries`` defaults to the input sensors.
    """
    if queries is None:
        queries = sensors.positions
    elif isinstance(queries, SensorSet):
        queries = queries.positions
    if isinstance(model, GraphDeepONet):
        if graph is None:
            graph = build_knn_graph(sensors, model.config.knn)
        return model.rollout_at(inputs, graph, n_rollout, dt, queries)
    if isinstance(model, DeepONet):
        model.check_layout(sensors)
        t = block_offsets(model.config.K, n_rollout, dt)
        return model.forward(inputs, t, queries)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def prepare_graph(model, sensors: SensorSet):
    """Graph tensors for GraphDeepONet, ``None`` for grid-bound models."""
    if isinstance(model, GraphDeepONet):
        return TorchGraph.from_graph(build_knn_graph(sensors, model.config.knn))
    return None
