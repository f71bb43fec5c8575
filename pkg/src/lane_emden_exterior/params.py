"""Parameter calculus for the weighted exterior Lane-Emden problem.

Everything here is a closed-form function of ``(N, theta, ell, p)``:
derived exponents, the existence regime, the Kelvin-dual parameters,
the constant of the explicit singular solution and the characteristic
roots of the linear ``tau = -2`` equation.

Inputs given as ``int`` or ``fractions.Fraction`` are classified with exact
rational arithmetic.  Float inputs are compared against regime boundaries
with the relative tolerance ``EPS_CLASSIFY``; boundary cases go to the
inclusive side (``p == p_s`` has no positive solution).
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Optional, Union

Number = Union[int, float, Fraction]

EPS_CLASSIFY = 1e-12


class ParameterError(ValueError):
    """Raised for parameters outside the domain of an operation."""


class RegimeError(ParameterError):
    """Raised when an operation is requested in the wrong existence regime."""


@dataclass(frozen=True)
class ProblemParams:
    n_dim: int
    theta: Number
    ell: Number
    p: Number

    def __post_init__(self):
        if not self.p > 0:
            raise ParameterError(f"p must be positive, got {self.p!r}")
        if int(self.n_dim) != self.n_dim or self.n_dim < 1:
            raise ParameterError(f"n_dim must be a positive integer, got {self.n_dim!r}")

    @classmethod
    def from_effective(cls, n_prime: Number, tau: Number, p: Number, n_dim: int = 3) -> "ProblemParams":
        """Build parameters from ``N' = N + theta`` and ``tau = ell - theta``."""
        theta = n_prime - n_dim
        return cls(n_dim=n_dim, theta=theta, ell=tau + theta, p=p)

    @property
    def is_rational(self) -> bool:
        return all(isinstance(x, Rational) for x in (self.theta, self.ell, self.p))

    def to_dict(self) -> dict:
        return {"n_dim": int(self.n_dim), "theta": float(self.theta), "ell": float(self.ell), "p": float(self.p)}


@dataclass(frozen=True)
class DerivedParams:
    """All derived exponents of a problem.

    Fields that need a division by ``N' - 2`` are ``None`` when ``N' = 2``;
    ``m = (2 + tau)/(p - 1)`` is ``None`` when ``p = 1``.  ``duality`` records
    ``(p > p_s) == (p < p_s')`` for ``p > 1`` and is ``None`` otherwise.
    """

    params: ProblemParams
    n_prime: Number
    tau: Number
    p: Number
    sigma: Number
    tau_prime: Number
    p_star: Number
    p_s: Optional[Number]
    p_s_prime: Optional[Number]
    gamma: Optional[Number]
    m: Optional[Number]
    duality: Optional[bool]

    @property
    def ef_shift(self):
        """``(N' - 2)/2``, the exponent of the Emden-Fowler variable."""
        return (self.n_prime - 2) / 2

    @property
    def serrin_exponent(self) -> Optional[Number]:
        """``(N' + tau)/(N' - 2)``, the largest p without any exterior supersolution."""
        return None if self.gamma is None else self.gamma - 1

    def to_dict(self) -> dict:
        def f(x):
            return None if x is None else float(x)

        return {
            "n_prime": f(self.n_prime),
            "tau": f(self.tau),
            "p": f(self.p),
            "p_s": f(self.p_s),
            "sigma": f(self.sigma),
            "tau_prime": f(self.tau_prime),
            "p_s_prime": f(self.p_s_prime),
            "gamma": f(self.gamma),
            "p_star": f(self.p_star),
            "m": f(self.m),
            "duality": self.duality,
        }


def _coerce(params: ProblemParams, exact: bool):
    if exact:
        if not params.is_rational:
            raise ParameterError("exact arithmetic requires int or Fraction inputs")
        return Fraction(params.n_dim), Fraction(params.theta), Fraction(params.ell), Fraction(params.p)
    return float(params.n_dim), float(params.theta), float(params.ell), float(params.p)


def derive(params: ProblemParams, exact: bool = False) -> DerivedParams:
    """Compute every derived exponent of ``params``.

    With ``exact=True`` (rational inputs only) all fields are Fractions.
    """
    n, theta, ell, p = _coerce(params, exact)
    if not p > 0:
        raise ParameterError("p must be positive")
    n_prime = n + theta
    tau = ell - theta
    sigma = (n_prime - 2) * (p - 1) - (4 + tau - theta)
    tau_prime = sigma - theta
    p_star = ((n_prime + 2 + 2 * tau) - (n_prime - 2) * p) / 2
    m = None if p == 1 else (2 + tau) / (p - 1)

    if n_prime == 2:
        p_s = p_s_prime = gamma = None
    else:
        p_s = (n_prime + 2 + 2 * tau) / (n_prime - 2)
        p_s_prime = (n_prime + 2 + 2 * tau_prime) / (n_prime - 2)
        gamma = (2 * (n_prime - 1) + tau) / (n_prime - 2)

    duality = None
    if p > 1 and p_s is not None:
        duality = (p > p_s) == (p < p_s_prime)

    return DerivedParams(
        params=params,
        n_prime=n_prime,
        tau=tau,
        p=p,
        sigma=sigma,
        tau_prime=tau_prime,
        p_star=p_star,
        p_s=p_s,
        p_s_prime=p_s_prime,
        gamma=gamma,
        m=m,
        duality=duality,
    )


def kelvin_dual(params: ProblemParams) -> ProblemParams:
    """Parameters of the punctured-ball problem obtained by the Kelvin transform.

    The weight ``|y|^sigma`` of the transformed problem takes the role of
    ``|x|^ell``, so the dual ``tau`` is ``tau' = sigma - theta``.  The map is
    an involution.
    """
    exact = params.is_rational
    d = derive(params, exact=exact)
    sigma = d.sigma
    if not exact:
        sigma = float(sigma)
    elif sigma.denominator == 1:
        sigma = int(sigma)
    return ProblemParams(n_dim=params.n_dim, theta=params.theta, ell=sigma, p=params.p)


class RegimeKind(str, enum.Enum):
    NO_POSITIVE_SOLUTION = "NoPositiveSolution"
    EXISTS_UNIQUE_RADIAL = "ExistsUniqueRadial"
    EXISTS_POSITIVE = "ExistsPositive"
    CONDITIONAL_EIGENVALUE = "ConditionalEigenvalue"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    reason: str

    @property
    def has_solution(self) -> Optional[bool]:
        if self.kind is RegimeKind.CONDITIONAL_EIGENVALUE:
            return None
        return self.kind is not RegimeKind.NO_POSITIVE_SOLUTION


class _Cmp:
    """Three-way comparisons, exact for Fractions and tolerant for floats."""

    def __init__(self, exact: bool, eps: float):
        self.exact = exact
        self.eps = eps

    def sign(self, a, b) -> int:
        if self.exact:
            return (a > b) - (a < b)
        if abs(a - b) <= self.eps * max(1.0, abs(a), abs(b)):
            return 0
        return 1 if a > b else -1


def classify(params: ProblemParams, eps: float = EPS_CLASSIFY) -> Regime:
    """Existence verdict for positive solutions of the exterior problem."""
    exact = params.is_rational
    d = derive(params, exact=exact)
    cmp = _Cmp(exact, eps)
    n_prime, tau, p = d.n_prime, d.tau, d.p

    s_dim = cmp.sign(n_prime, 2)
    if s_dim < 0:
        raise ParameterError(f"classification needs N' >= 2, got N' = {float(n_prime)}")
    s_tau = cmp.sign(tau, -2)
    if s_dim == 0:
        if s_tau > 0:
            return Regime(RegimeKind.NO_POSITIVE_SOLUTION, "N'=2: no power nonlinearity is admissible")
        raise ParameterError("N' = 2 is only classified for tau > -2")

    if s_tau > 0:
        if cmp.sign(p, d.p_s) <= 0:
            return Regime(RegimeKind.NO_POSITIVE_SOLUTION, "tau>-2, p<=p_s: only the trivial solution")
        return Regime(RegimeKind.EXISTS_UNIQUE_RADIAL, "tau>-2, p>p_s: unique positive radial solution")

    s_p1 = cmp.sign(p, 1)
    if s_tau < 0:
        if s_p1 == 0:
            return Regime(RegimeKind.CONDITIONAL_EIGENVALUE, "tau<-2, p=1: exists iff lambda_1(L_1)=0")
        return Regime(RegimeKind.EXISTS_POSITIVE, "tau<-2, p!=1: positive solution exists")

    # tau == -2
    if s_p1 > 0:
        return Regime(RegimeKind.EXISTS_POSITIVE, "tau=-2, p>1: positive solution exists")
    if s_p1 == 0:
        if cmp.sign(n_prime, 4) >= 0:
            return Regime(RegimeKind.EXISTS_POSITIVE, "tau=-2, p=1, N'>=4: characteristic roots negative")
        return Regime(RegimeKind.NO_POSITIVE_SOLUTION, "tau=-2, p=1, N'<4: complex characteristic roots")
    return Regime(RegimeKind.NO_POSITIVE_SOLUTION, "tau=-2, p<1: no exterior supersolution")


def singular_constant(derived: DerivedParams) -> Optional[float]:
    """Constant ``C`` such that ``C r^{-m}`` solves the equation away from 0.

    ``C^{p-1} = m (N' - 2 - m)`` with ``m = (2 + tau)/(p - 1)``; ``None``
    unless ``0 < m < N' - 2``.
    """
    p = float(derived.p)
    n_prime = float(derived.n_prime)
    if not p > 1:
        raise ParameterError("singular solution needs p > 1")
    if not n_prime > 2:
        raise ParameterError("singular solution needs N' > 2")
    m = float(derived.m)
    base = m * (n_prime - 2 - m)
    if not (m > 0 and base > 0):
        return None
    return base ** (1.0 / (p - 1))


def characteristic_roots(n_prime: Number) -> tuple[complex, complex, bool]:
    """Roots of ``x^2 + (N' - 2) x + 1 = 0`` and whether both are real negative.

    Returns ``(r1, r2, exists)``; ``exists`` holds exactly when ``N' >= 4``.
    """
    if not n_prime > 2:
        raise ParameterError("characteristic roots need N' > 2")
    b = n_prime - 2
    disc = b * b - 4
    exists = disc >= 0
    if exists:
        # product of the roots is 1; avoids cancellation in the small root
        r1 = -(float(b) + math.sqrt(float(disc))) / 2
        r2 = 1.0 / r1
        return complex(r1), complex(r2), True
    root = cmath.sqrt(float(disc))
    return (-float(b) + root) / 2, (-float(b) - root) / 2, False
