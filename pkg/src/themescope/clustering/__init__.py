from .hdbscan import (
    NOISE,
    ClusterAssignment,
    ClusteringError,
    hdbscan_cluster,
    select_representatives,
)
from .metrics import ValidityReport, davies_bouldin, silhouette, validity_report

__all__ = [
    "NOISE", "ClusterAssignment", "ClusteringError",
    "hdbscan_cluster", "select_representatives",
    "ValidityReport", "davies_bouldin", "silhouette", "validity_report",
]
