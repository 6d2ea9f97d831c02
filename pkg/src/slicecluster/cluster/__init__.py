from .linkage import Dendrogram, LinkageScheme, ahc_average_linkage, cut, leaf_order
from .points import PseudoPoint3D, lift, pairwise_distances, positions, square
from .selection import (
    ClusterResult,
    ClusteringError,
    FusionResult,
    clip_k_range,
    cluster_axis,
    cluster_means,
    fuse_axes,
    select_k,
)
from .silhouette import VARIANTS, silhouette, silhouette_sweep

__all__ = [
    "ClusterResult",
    "ClusteringError",
    "Dendrogram",
    "FusionResult",
    "LinkageScheme",
    "PseudoPoint3D",
    "VARIANTS",
    "ahc_average_linkage",
    "clip_k_range",
    "cluster_axis",
    "cluster_means",
    "cut",
    "fuse_axes",
    "leaf_order",
    "lift",
    "pairwise_distances",
    "positions",
    "select_k",
    "silhouette",
    "silhouette_sweep",
    "square",
]
