"""Principal eigenvalue of radial weighted Sturm-Liouville operators.

The operators are ``-(r^{N'-1} v')' - V(r) v`` with eigenvalue weight
``r^{N'-1}`` (the radial form of ``|x|^theta``), on the unit ball (regular
end at 0, Dirichlet at 1) or on an annulus (Dirichlet at both ends).  The
quadratic form is discretized with linear elements and a lumped mass, which
gives a symmetric tridiagonal pencil ``(A - Q) v = lambda M v`` with ``M``
diagonal.  The smallest eigenvalue is located by bisection on eigenvalue
counts (Sylvester inertia of the LDL^T factorization); the eigenfunction by
inverse iteration.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import eigh, solve_banded
from scipy.optimize import brentq

from .params import ParameterError, ProblemParams, derive
from .radial import RadialProfile

GRADING_RATIO = 1.05
GRADING_REF_CELLS = 64
TOL_EIG = 1e-6


class NonPositiveWeight(ValueError):
    pass


@dataclass(frozen=True)
class OperatorSpec:
    """``-(r^{N'-1} v')' - V(r) v`` on ``domain``.

    ``V`` is given either as ``coefficient * r^exponent`` (integrated
    exactly) or as a callable sampled at half-cell midpoints.
    """

    kind: str
    n_prime: float
    domain: tuple
    coefficient: float = 0.0
    exponent: float = 0.0
    potential: Optional[Callable] = field(default=None, compare=False, repr=False)
    graded: bool = False
    weight_scale: float = 1.0

    def __post_init__(self):
        a, b = self.domain
        if not (0 <= a < b < math.inf):
            raise ParameterError(f"bad domain {self.domain}")
        if not self.n_prime > 2 - 1e-12 and a == 0:
            raise ParameterError("ball problems need N' > 2")
        if not self.weight_scale > 0:
            raise ParameterError("weight_scale must be positive")

    @property
    def is_ball(self) -> bool:
        return self.domain[0] == 0

    def with_coefficient(self, c: float) -> "OperatorSpec":
        return OperatorSpec(self.kind, self.n_prime, self.domain, c, self.exponent, self.potential, self.graded, self.weight_scale)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_prime": self.n_prime,
            "domain": list(self.domain),
            "coefficient": self.coefficient,
            "exponent": self.exponent,
            "eigenvalue_weight": f"{self.weight_scale!r} * r^(N'-1)",
        }


def weighted_laplacian(n_prime: float, domain=(0.0, 1.0), graded: Optional[bool] = None) -> OperatorSpec:
    graded = domain[0] == 0 if graded is None else graded
    return OperatorSpec("WeightedLaplacian", float(n_prime), tuple(float(x) for x in domain), graded=graded)


def l1_operator(params: ProblemParams, coefficient: float = 1.0) -> OperatorSpec:
    """``-div(|x|^theta grad v) - c |x|^{-(4+tau-theta)} v`` on the unit ball, radially.

    In the ``dr`` measure the potential is ``c r^{N'-5-tau}``, integrable at
    the origin because ``tau < -2``.
    """
    d = derive(params)
    n_prime, tau = float(d.n_prime), float(d.tau)
    if not tau < -2:
        raise ParameterError("L1 is only considered for tau < -2")
    if not n_prime > 2:
        raise ParameterError("L1 needs N' > 2")
    if coefficient < 0:
        raise ParameterError("potential coefficient must be nonnegative")
    return OperatorSpec("L1", n_prime, (0.0, 1.0), float(coefficient), n_prime - 5 - tau, graded=True)


def linearized_operator(profile: RadialProfile, annulus: tuple) -> OperatorSpec:
    """``-div(|x|^theta grad w) - p |x|^ell u^{p-1} w`` on an annulus, radially."""
    d = profile.params
    p, n_prime, tau = float(d.p), float(d.n_prime), float(d.tau)
    if not p > 1:
        raise ParameterError("the linearized operator needs p > 1")
    a, b = annulus
    if not (1 <= a < b) or a < profile.grid[0] or b > profile.grid[-1]:
        raise ParameterError(f"annulus {annulus} is outside the profile grid")
    spline = CubicHermiteSpline(profile.grid, profile.values, profile.derivs)

    def potential(r):
        u = np.maximum(spline(r), 0.0)
        return p * r ** (n_prime + tau - 1) * u ** (p - 1)

    return OperatorSpec("Linearized", n_prime, (float(a), float(b)), potential=potential)


def make_mesh(spec: OperatorSpec, n_cells: int) -> np.ndarray:
    """Nodes of a mesh with ``n_cells`` cells.

    Graded meshes are geometric with ratio 1.05 at 64 cells and come from one
    fixed smooth map of ``[0, 1]``, so refinement keeps the grading profile.
    """
    a, b = spec.domain
    xi = np.linspace(0.0, 1.0, n_cells + 1)
    if spec.graded:
        c = GRADING_REF_CELLS * math.log(GRADING_RATIO)
        xi = np.expm1(c * xi) / math.expm1(c)
    return a + (b - a) * xi


def _power_integral(e: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    if abs(e + 1) < 1e-14:
        return np.log(hi / lo)
    return (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)


@dataclass(eq=False)
class Pencil:
    """Tridiagonal ``K = A - Q`` (diagonal ``diag``, off-diagonal ``off``) and diagonal ``mass``."""

    nodes: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    mass: np.ndarray
    free: np.ndarray

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)
        return k, np.diag(self.mass)

    def count_below(self, x: float) -> int:
        """Number of pencil eigenvalues strictly below ``x`` (inertia of K - x M)."""
        diag, off, mass = self.diag, self.off, self.mass
        tiny = np.finfo(float).tiny
        count = 0
        piv = diag[0] - x * mass[0]
        if piv < 0:
            count += 1
        for i in range(1, len(diag)):
            if piv == 0:
                piv = tiny
            piv = diag[i] - x * mass[i] - off[i - 1] * off[i - 1] / piv
            if piv < 0:
                count += 1
        return count

    def gershgorin(self) -> tuple[float, float]:
        s = 1.0 / np.sqrt(self.mass)
        d = self.diag * s * s
        e = np.abs(self.off) * s[:-1] * s[1:]
        rad = np.zeros_like(d)
        rad[:-1] += e
        rad[1:] += e
        return float(np.min(d - rad)), float(np.max(d + rad))


def assemble(spec: OperatorSpec, n_cells: int) -> Pencil:
    if n_cells < 2:
        raise ParameterError("need at least two cells")
    r = make_mesh(spec, n_cells)
    h = np.diff(r)
    e_w = spec.n_prime - 1
    # exact cell integrals of the stiffness weight r^{N'-1}
    kappa = _power_integral(e_w, r[:-1], r[1:]) / h**2
    mid = 0.5 * (r[:-1] + r[1:])
    left_half = _power_integral(e_w, r[:-1], mid)
    right_half = _power_integral(e_w, mid, r[1:])
    mass = np.zeros_like(r)
    mass[:-1] += left_half
    mass[1:] += right_half

    q = np.zeros_like(r)
    if spec.potential is not None:
        lm = 0.5 * (r[:-1] + mid)
        rm = 0.5 * (mid + r[1:])
        q[:-1] += spec.potential(lm) * (mid - r[:-1])
        q[1:] += spec.potential(rm) * (r[1:] - mid)
    elif spec.coefficient != 0:
        if r[0] == 0 and spec.exponent <= -1:
            raise NonPositiveWeight("potential is not integrable at the origin")
        q[:-1] += spec.coefficient * _power_integral(spec.exponent, r[:-1], mid)
        q[1:] += spec.coefficient * _power_integral(spec.exponent, mid, r[1:])

    diag = np.zeros_like(r)
    diag[:-1] += kappa
    diag[1:] += kappa
    diag -= q
    off = -kappa
    mass = spec.weight_scale * mass

    first = 0 if spec.is_ball else 1
    free = np.arange(first, len(r) - 1)
    diag_f = diag[free]
    off_f = off[free[:-1]]
    mass_f = mass[free]
    if not (np.all(np.isfinite(diag_f)) and np.all(mass_f > 0) and np.all(np.isfinite(mass_f))):
        raise NonPositiveWeight("mesh places nodes where the weights are not finite and positive")
    return Pencil(r, diag_f, off_f, mass_f, free)


def smallest_eigenvalue(pencil: Pencil, rtol: float = 4 * np.finfo(float).eps) -> float:
    """Bisection on eigenvalue counts for the smallest eigenvalue of the pencil."""
    lo, hi = pencil.gershgorin()
    if pencil.count_below(hi) < 1:
        hi = 2 * abs(hi) + 1
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= rtol * max(abs(lo), abs(hi)):
            break
        if pencil.count_below(mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def inverse_iteration(pencil: Pencil, shift: float, iterations: int = 4) -> np.ndarray:
    """Eigenvector of the pencil nearest ``shift``, M-normalized and made positive."""
    n = len(pencil.diag)
    gap = max(abs(shift), 1.0) * 1e-10
    ab = np.zeros((3, n))
    ab[0, 1:] = pencil.off
    ab[1] = pencil.diag - (shift - gap) * pencil.mass
    ab[2, :-1] = pencil.off
    x = np.ones(n)
    for _ in range(iterations):
        x = solve_banded((1, 1), ab, pencil.mass * x)
        x /= math.sqrt(float(np.sum(pencil.mass * x * x)))
    if x.sum() < 0:
        x = -x
    return x


@dataclass(eq=False)
class EigenResult:
    lambda1: float
    eigenfunction: np.ndarray
    mesh: np.ndarray
    mesh_cells: int
    lambda_mesh: float
    convergence: dict
    spec: OperatorSpec = field(repr=False)

    @property
    def extrapolated(self) -> Optional[float]:
        return self.convergence.get("extrapolated")

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda_mesh": self.lambda_mesh,
            "mesh_cells": self.mesh_cells,
            "convergence": self.convergence,
            "operator": self.spec.to_dict(),
            "eigenvalue_weight_note": "sign and zero set of lambda1 do not depend on the positive weight",
        }


def _solve_mesh(spec: OperatorSpec, n_cells: int):
    pencil = assemble(spec, n_cells)
    lam = smallest_eigenvalue(pencil)
    return pencil, lam


def richardson(values: list[float], ratio: float = 2.0) -> tuple[float, float]:
    """Extrapolate the last three of a mesh-halving sequence; returns ``(value, order)``."""
    l1, l2, l3 = values[-3:]
    d1, d2 = l1 - l2, l2 - l3
    if d2 == 0 or d1 == 0 or d1 / d2 <= 0:
        return l3, math.nan
    order = math.log(d1 / d2, ratio)
    use = order if 1.0 <= order <= 6.0 else 2.0
    return l3 + (l3 - l2) / (ratio**use - 1), order


def principal_eigenvalue(spec: OperatorSpec, mesh_size: int = 64, levels: int = 3) -> EigenResult:
    """Smallest eigenvalue on ``mesh_size`` cells, with a Richardson estimate.

    The extra levels double the mesh; ``lambda1`` is the extrapolated value
    when ``levels >= 3`` and the raw mesh value otherwise.
    """
    if mesh_size < 64:
        raise ParameterError("mesh_size must be at least 64")
    table = []
    pencil0 = None
    for j in range(max(levels, 1)):
        pencil, lam = _solve_mesh(spec, mesh_size * 2**j)
        if j == 0:
            pencil0, lam0 = pencil, lam
        table.append((mesh_size * 2**j, lam))
    vec = inverse_iteration(pencil0, lam0)
    eigenfunction = np.zeros(len(pencil0.nodes))
    eigenfunction[pencil0.free] = vec
    if np.any(vec <= 0):
        raise RuntimeError("principal eigenvector changed sign; the mesh is too coarse")
    convergence = {"table": [list(row) for row in table]}
    lam1 = lam0
    if levels >= 3:
        ext, order = richardson([row[1] for row in table])
        convergence["extrapolated"] = ext
        convergence["observed_order"] = order
        lam1 = ext
    return EigenResult(lam1, eigenfunction, pencil0.nodes, mesh_size, lam0, convergence, spec)


class EigenVerdict(str, enum.Enum):
    EXISTS = "Exists"
    NO_SOLUTION = "NoSolution"
    BOUNDARY = "Boundary"


def eigen_condition_tau_lt_minus2(params: ProblemParams, mesh_size: int = 64, coefficient: float = 1.0,
                                  tol_eig: float = TOL_EIG) -> tuple[float, EigenVerdict]:
    """Principal eigenvalue of L1 and the existence verdict for the linear case."""
    d = derive(params)
    if not (float(d.tau) < -2 and float(d.p) == 1 and float(d.n_prime) > 2):
        raise ParameterError("the eigenvalue condition concerns tau < -2, p = 1, N' > 2")
    lam = principal_eigenvalue(l1_operator(params, coefficient), mesh_size).lambda1
    if abs(lam) < tol_eig:
        return lam, EigenVerdict.EXISTS
    if abs(lam) <= 10 * tol_eig:
        return lam, EigenVerdict.BOUNDARY
    return lam, EigenVerdict.NO_SOLUTION


def root_coefficient(params: ProblemParams, mesh_size: int = 64, xtol: float = 1e-12, levels: int = 3) -> float:
    """Potential coefficient ``c*`` with ``lambda1(L1 with c* potential) = 0``.

    ``c -> lambda1(c)`` is decreasing; the root is bracketed by doubling from
    ``c = 1`` and refined with Brent's method on the extrapolated eigenvalue.
    """
    base = l1_operator(params, 1.0)

    def lam(c):
        return principal_eigenvalue(base.with_coefficient(c), mesh_size, levels).lambda1

    lo, hi = 0.0, 1.0
    while lam(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            raise RuntimeError("could not bracket the critical coefficient")
    return brentq(lam, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def linearized_annulus_eigenvalue(profile: RadialProfile, annulus: tuple, mesh_size: int = 64,
                                  levels: int = 3) -> EigenResult:
    """Dirichlet principal eigenvalue of the linearized operator on an annulus; reported, not sign-checked."""
    return principal_eigenvalue(linearized_operator(profile, annulus), mesh_size, levels)
