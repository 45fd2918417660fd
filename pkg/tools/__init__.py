"""
dwdt tools package initialization
"""
from .obj_io import read_obj_patch, read_obj_mesh, write_obj
from .field_reader import read_fields, read_point_set
from .manifold_check import manifold_check
from .boundary_cutter import cut_to_boundary
from .metrics import compute_metrics

__all__ = [
    'read_obj_patch',
    'read_obj_mesh',
    'write_obj',
    'read_fields',
    'read_point_set',
    'manifold_check',
    'cut_to_boundary',
    'compute_metrics'
]
