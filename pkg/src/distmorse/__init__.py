"""Critical points and indices of Euclidean distance functions restricted to varieties."""

from .distfield import (
    NearestSet,
    PointCloud,
    SearchOptions,
    Subdifferential,
    dist,
    is_critical,
    load_cloud,
    nearest_points,
    subdifferential,
    subdifferential_restricted,
)
from .hypersurface import (
    CriticalPoint,
    SolveOptions,
    analyze,
    assemble_critical_system,
    bottlenecks,
    classify,
    hessian_dist_sheet,
    planar_index,
    point_target_index,
    solve_critical_points,
)
from .numerics import barycentric_zero, inertia, newton, solve_linear, sym_eig
from .pointcloud import CloudCritical, circumcenter, enumerate_critical, general_position_check
from .poly import Poly, degree_bound, eval_poly, grad, hessian, load_poly, random_poly

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
