from .deeponet import DeepONet, DeepONetConfig, deeponet_baseline_forward
from .graphdeeponet import (
    FieldPrediction,
    GraphDeepONet,
    LatentState,
    MLPSpec,
    ModelConfig,
    TorchGraph,
    as_torch_graph,
    evaluate_field,
)
from .layers import MLP, FourierFeatures, PositionEmbedding

__all__ = [
    "DeepONet",
    "DeepONetConfig",
    "FieldPrediction",
    "FourierFeatures",
    "GraphDeepONet",
    "LatentState",
    "MLP",
    "MLPSpec",
    "ModelConfig",
    "PositionEmbedding",
    "TorchGraph",
    "as_torch_graph",
    "deeponet_baseline_forward",
    "evaluate_field",
]
