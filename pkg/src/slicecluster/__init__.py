"""Slice-and-cluster 3D nuclei centroid estimation."""
__version__ = "0.1.0"
