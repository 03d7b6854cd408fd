"""Generalized Appell functions on positive-definite lattices and their modular completions."""

from .appell import (AffineForm, AppellSpec, GenericityError, IDENTITIES, make_spec, phi, phi_plus,
                     psi_build, psi_spec, s_func, theta_series, verify_identity)
from .completion import (NumericPoint, a3_decomposition_check, compare_routes, completion_terms, modular_residual,
                         phi_hat, r_direct, r_factor)
from .errfun import ErrSpec, e_p, m_p
from .fseries import FSeries, eval_numeric, series_equal
from .lattice import DVectorSet, Lattice, c_coefficients, cartan_an, dual_vectors, glue_vectors

__version__ = "0.1.0"

__all__ = [
    "AffineForm", "AppellSpec", "DVectorSet", "ErrSpec", "FSeries", "GenericityError", "IDENTITIES", "Lattice",
    "NumericPoint", "a3_decomposition_check", "c_coefficients", "cartan_an", "compare_routes", "completion_terms",
    "dual_vectors", "e_p", "eval_numeric", "glue_vectors", "m_p", "make_spec", "modular_residual", "phi",
    "phi_hat", "phi_plus", "psi_build", "psi_spec", "r_direct", "r_factor", "s_func", "series_equal",
    "theta_series", "verify_identity",
]
