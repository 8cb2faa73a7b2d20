"""Random-cluster sampling and the cluster-collapse flow on weighted graphs."""

from .graph_core import (ClusterPartition, SimpleWeightedGraph, WeightedMultigraph,
                         convert_weight, generate)
from .io import seed_streams
from .trajectory import FlowEvent, FlowTrajectory

__all__ = [
    "ClusterPartition",
    "FlowEvent",
    "FlowTrajectory",
    "SimpleWeightedGraph",
    "WeightedMultigraph",
    "convert_weight",
    "generate",
    "seed_streams",
]
