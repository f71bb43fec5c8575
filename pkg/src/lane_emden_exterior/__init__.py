"""Exterior weighted Lane-Emden problems: existence regimes and radial solutions.

The problem is ``-div(|x|^theta grad u) = |x|^ell u^p`` outside the unit
ball with ``u = 0`` on the unit sphere.
"""

__version__ = "0.1.0"

from .params import (
    DerivedParams,
    ParameterError,
    ProblemParams,
    Regime,
    RegimeError,
    RegimeKind,
    characteristic_roots,
    classify,
    derive,
    kelvin_dual,
    singular_constant,
)
from .radial import IntegratorConfig, RadialProfile, integrate_emden_fowler, integrate_exterior, integrate_interior, residual
from .solver import (
    SolveReport,
    VerificationError,
    emden_transform,
    energy_integral,
    kelvin_map,
    phi_diagnostic,
    solve_supercritical,
    verify_nonexistence,
)
from .criterion import Function, Power, criterion_nprime2, criterion_power, criterion_quadrature, w_transform
from .spectral import (
    EigenResult,
    OperatorSpec,
    eigen_condition_tau_lt_minus2,
    l1_operator,
    linearized_annulus_eigenvalue,
    principal_eigenvalue,
    root_coefficient,
    weighted_laplacian,
)

__all__ = [
    "DerivedParams", "ParameterError", "ProblemParams", "Regime", "RegimeError", "RegimeKind",
    "characteristic_roots", "classify", "derive", "kelvin_dual", "singular_constant",
    "IntegratorConfig", "RadialProfile", "integrate_emden_fowler", "integrate_exterior", "integrate_interior",
    "residual", "SolveReport", "VerificationError", "emden_transform", "energy_integral", "kelvin_map",
    "phi_diagnostic", "solve_supercritical", "verify_nonexistence", "Function", "Power", "criterion_nprime2",
    "criterion_power", "criterion_quadrature", "w_transform", "EigenResult", "OperatorSpec",
    "eigen_condition_tau_lt_minus2", "l1_operator", "linearized_annulus_eigenvalue", "principal_eigenvalue",
    "root_coefficient", "weighted_laplacian",
]
