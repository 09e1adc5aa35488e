"""Graph-network DeepONet surrogate for time-dependent PDEs."""

from .geometry import (
    DomainSpec,
    SensorSet,
    SpatialGraph,
    build_knn_graph,
    minimum_image_displacement,
    regular_sensors,
    sample_irregular_sensors,
)
from .model import DeepONet, DeepONetConfig, FieldPrediction, GraphDeepONet, ModelConfig, evaluate_field

__version__ = "0.1.0"
