"""Numerical verification of linear chaos for the degenerate Black-Scholes semigroup.

The PDE u_t = nu^2 x^2a u_xx + nu^2 a x^(2a-1) u_x + beta nu x^a u_x + gamma u
on the weighted space Y_s is solved exactly through the transport group and
Romanov's quadrature, and the spectral ingredients of chaos (threshold s*,
periodic points, Godefroy-Shapiro witnesses) are checked numerically.
"""

__version__ = "0.1.0"

from .core import (GridSpec, ModelParams, ParameterError, ScalarField, TruncationWarning,  # noqa: E402
                   field_library, from_z, make_params, membership_check, norm_s, to_z, weight)
from .romanov import apply_Asq, apply_B, semigroup_defect, solution  # noqa: E402
from .spectral import (Region, classify, find_periodic, gsc_witness_bundle, s_star,  # noqa: E402
                       s_star_scan, verify_periodicity)
from .transport import apply_group, transport  # noqa: E402

__all__ = [
    "GridSpec", "ModelParams", "ParameterError", "ScalarField", "TruncationWarning",
    "field_library", "from_z", "make_params", "membership_check", "norm_s", "to_z", "weight",
    "apply_Asq", "apply_B", "semigroup_defect", "solution",
    "Region", "classify", "find_periodic", "gsc_witness_bundle", "s_star", "s_star_scan",
    "verify_periodicity", "apply_group", "transport",
]
