"""Numerical comparison geometry against surfaces of revolution."""
from .errors import DomainError, InputError, NotRepresentable, SolverError
from .profile import (RadialProfile, constant_curvature, flat, from_warping, gauss_curvature,
                      oblate, perturb_profile, solve_profile, sphere, von_mangoldt)
from .surface import (GeodesicPath, Order, PolarCurve, Surface, SurfacePoint, angle_between,
                      curve_order, half_surface_membership)
from .cutlocus import CutLocus, cut_locus, extremal_segments
from .ellipse import build_ellipse, ellipse_point
from .manifolds import TestManifold, eikonal_solve
from .reference import check_condition_2_1, detect_E_p, reference_curve, reference_point
from .comparison import (BatchConfig, Tolerances, comparison_triangle, delta_stabilized_run,
                         perimeter_diameter_audit, verify_batch)

__version__ = "0.1.0"
