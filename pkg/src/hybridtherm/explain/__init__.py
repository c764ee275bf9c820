"""Feature clustering, Owen values and model-native importances."""

from .clustering import ClusterPartition, Dendrogram, DistanceMatrix, agglomerate, cut_partition, pearson_distance
from .export import EXPORT_KINDS, export_plotdata, groupbar_table, partition_from_dendrogram_export
from .importance import native_importance, rank_overlap, top_k
from .owen import (
    MAX_EXACT_CLUSTER,
    MAX_EXACT_FEATURES,
    AttributionResult,
    coalition_table,
    coalition_values,
    level_weights,
    owen_values,
    owen_values_sampled,
    shapley_oracle,
)

__all__ = [
    "AttributionResult",
    "ClusterPartition",
    "Dendrogram",
    "DistanceMatrix",
    "EXPORT_KINDS",
    "MAX_EXACT_CLUSTER",
    "MAX_EXACT_FEATURES",
    "agglomerate",
    "coalition_table",
    "coalition_values",
    "cut_partition",
    "export_plotdata",
    "groupbar_table",
    "level_weights",
    "native_importance",
    "owen_values",
    "owen_values_sampled",
    "partition_from_dendrogram_export",
    "pearson_distance",
    "rank_overlap",
    "shapley_oracle",
    "top_k",
]
