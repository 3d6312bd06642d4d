"""Triangular patch clouds: edge-adaptive meshes whose faces carry independent depth planes."""

from .errors import InputError, InvariantError, TripatchError
from .ingest import DepthMap, Image2D, Intrinsics, NormalMap
from .metrics import MetricsReport, evaluate, param_count
from .optimize import FitConfig, fit, loss, loss_gradient
from .patchcloud import PatchCloud, detach_faces, face_id_map
from .pipeline import MeshConfig, extract_mesh
from .render import export_obj, rasterize_mesh3d, rasterize_patches
from .triangulate import Mesh2D, build_constraints, triangulate_cdt

__all__ = [
    "DepthMap",
    "FitConfig",
    "Image2D",
    "InputError",
    "Intrinsics",
    "InvariantError",
    "Mesh2D",
    "MeshConfig",
    "MetricsReport",
    "NormalMap",
    "PatchCloud",
    "TripatchError",
    "build_constraints",
    "detach_faces",
    "evaluate",
    "export_obj",
    "extract_mesh",
    "face_id_map",
    "fit",
    "loss",
    "loss_gradient",
    "param_count",
    "rasterize_mesh3d",
    "rasterize_patches",
    "triangulate_cdt",
]
