from .pca import PcaModel, ProjectionError, pca_fit_transform
from .umap import UmapConfig, umap_fit_transform
from .io import load_projection, save_projection

__all__ = [
    "PcaModel", "ProjectionError", "pca_fit_transform",
    "UmapConfig", "umap_fit_transform",
    "load_projection", "save_projection",
]
