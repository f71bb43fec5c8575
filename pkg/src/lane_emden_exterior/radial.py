"""Radial ODE integration in flux form.

The radial equation ``-(r^{N'-1} w')' = r^{N'+tau-1} w^p`` is integrated as
the first-order system for ``(w, F)`` with ``F = r^{N'-1} w'``, using
``t = ln r`` as the independent variable::

    dw/dt = exp((2 - N') t) F
    dF/dt = -exp((N' + tau) t) w_+^p

The same routine serves the punctured-ball problem (started from a series
expansion at ``r0``) and the exterior problem (started at ``r = 1`` from
``u = 0``, ``u' = beta``); for the ball the ``tau`` of the Kelvin-dual
parameters is used.  Stepping is done by an embedded Runge-Kutta 5(4) pair
with dense output; the first zero is located by a bracketing root search on
the dense interpolant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853, RK45, OdeSolution
from scipy.optimize import brentq

from .params import DerivedParams, ParameterError

_METHODS = {"RK45": RK45, "DOP853": DOP853}


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    r0: float = 1e-6
    r_max: float = 1e6
    t_max: float = 200.0
    max_steps: int = 200_000
    zero_tol: float = 1e-12
    samples_per_unit: int = 4000
    method: str = "RK45"

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ParameterError("rtol and atol must be positive")
        if not 0 < self.r0 < 1:
            raise ParameterError("r0 must lie in (0, 1)")
        if not self.r_max > 1:
            raise ParameterError("r_max must exceed 1")
        if self.method not in _METHODS:
            raise ParameterError(f"unknown method {self.method!r}")

    def halved(self) -> "IntegratorConfig":
        """Same configuration with both tolerances halved."""
        return IntegratorConfig(**{**self.__dict__, "rtol": self.rtol / 2, "atol": self.atol / 2})

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial samples ``w(r)`` and ``w'(r)`` of a solution of the flux-form ODE.

    ``params`` are the parameters of the equation the profile solves, so an
    interior profile obtained through the Kelvin transform carries the dual
    parameters.
    """

    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    side: str
    params: DerivedParams

    def __post_init__(self):
        if self.side not in ("interior", "exterior"):
            raise ValueError(f"side must be 'interior' or 'exterior', got {self.side!r}")
        if len(self.grid) > 1 and not np.all(np.diff(self.grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.derivs))):
            raise ValueError("profile values must be finite")

    def __len__(self):
        return len(self.grid)

    @property
    def flux(self) -> np.ndarray:
        return self.grid ** (float(self.params.n_prime) - 1) * self.derivs


class OutcomeKind(str, enum.Enum):
    CROSSED_ZERO = "CrossedZero"
    POSITIVE_TO_HORIZON = "PositiveToHorizon"
    STEP_BUDGET_EXHAUSTED = "StepBudgetExhausted"


@dataclass(eq=False)
class ShootOutcome:
    kind: OutcomeKind
    trajectory: RadialProfile
    radius: Optional[float] = None
    decay_slope: Optional[float] = None
    flux_monotone: bool = True
    n_steps: int = 0
    # dense interpolant of (w, F) as a function of t = ln r
    dense: Optional[Callable] = field(default=None, repr=False)

    def value_at(self, r) -> np.ndarray:
        return self.dense(np.log(r))[0]


@dataclass(eq=False)
class EFTrajectory:
    """Samples of ``v(t) = r^{(N'-2)/2} u(r)``, ``t = ln r``."""

    t_grid: np.ndarray
    v: np.ndarray
    v_t: np.ndarray
    p_star: float
    kind: OutcomeKind
    zero_t: Optional[float] = None
    energy: Optional[np.ndarray] = None
    energy_drift: Optional[float] = None
    n_steps: int = 0


def _pos_pow(w, p):
    return np.power(np.maximum(w, 0.0), p)


def origin_series(alpha: float, derived: DerivedParams, r0: float) -> tuple[float, float]:
    """Two-term expansion of the regular solution with ``w(0) = alpha``.

    ``w(r) = alpha - alpha^p r^{tau+2}/((tau+2)(N'+tau)) + O(r^{2(tau+2)})``.
    Raises if ``r0`` is so large that the correction exceeds ``1e-3 alpha``.
    """
    n_prime, tau, p = float(derived.n_prime), float(derived.tau), float(derived.p)
    if not tau > -2:
        raise ParameterError(f"series start needs tau > -2, got {tau}")
    if alpha < 0:
        raise ParameterError("alpha must be nonnegative")
    if alpha == 0:
        return 0.0, 0.0
    q = tau + 2
    c = alpha**p / (q * (n_prime + tau))
    correction = c * r0**q
    if not (0 < r0 and correction < 1e-3 * alpha):
        raise ParameterError(f"r0={r0} is outside the validity range of the origin series")
    return alpha - correction, -q * c * r0 ** (q - 1)


def _integrate(rhs, t0, y0, t_bound, config: IntegratorConfig, atol, leave_start=False, floor=0.0):
    """Step until the first zero of ``y[0]`` (or ``y[0] < floor``), the bound or the budget.

    Returns ``(kind, t_end, OdeSolution, n_steps, flux_monotone)``.
    """
    solver = _METHODS[config.method](rhs, t0, y0, t_bound, rtol=config.rtol, atol=atol)
    ts = [t0]
    interps = []
    flux_ok = True
    n_steps = 0
    prev = np.array(y0, dtype=float)
    level = floor if floor > 0 else 0.0
    while True:
        if n_steps >= config.max_steps:
            kind = OutcomeKind.STEP_BUDGET_EXHAUSTED
            break
        msg = solver.step()
        if solver.status == "failed":
            raise RuntimeError(f"integration failed at t={solver.t}: {msg}")
        n_steps += 1
        interp = solver.dense_output()
        ts.append(solver.t)
        interps.append(interp)
        cur = solver.y
        if cur[1] > prev[1] + atol[1] + 8 * np.finfo(float).eps * abs(prev[1]):
            flux_ok = False
        started = prev[0] > level or (not leave_start and prev[0] > 0)
        if started and cur[0] <= level:
            t_zero = _first_crossing(interp, ts[-2], ts[-1], level)
            return OutcomeKind.CROSSED_ZERO, t_zero, OdeSolution(ts, interps), n_steps, flux_ok
        prev = cur.copy()
        if solver.status == "finished":
            kind = OutcomeKind.POSITIVE_TO_HORIZON
            break
    if len(interps) == 0:
        return kind, t0, None, n_steps, flux_ok
    return kind, ts[-1], OdeSolution(ts, interps), n_steps, flux_ok


def _first_crossing(interp, ta, tb, level):
    # leftmost sign change of the interpolant inside the step
    probe = np.linspace(ta, tb, 17)
    vals = interp(probe)[0] - level
    idx = int(np.argmax(vals <= 0))
    lo, hi = probe[idx - 1], probe[idx]
    if vals[idx] == 0:
        return hi
    return brentq(lambda t: interp(t)[0] - level, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _sample_grid(t0, t1, samples_per_unit):
    n = max(int(math.ceil((t1 - t0) * samples_per_unit)) + 1, 5)
    return np.linspace(t0, t1, n)


def _flux_rhs(n_prime, tau, p):
    a = 2.0 - n_prime
    b = n_prime + tau

    def rhs(t, y):
        return np.array([math.exp(a * t) * y[1], -math.exp(b * t) * max(y[0], 0.0) ** p])

    return rhs


def _profile_from_dense(dense, t_grid, derived, side, zero_last=False):
    states = dense(t_grid)
    r = np.exp(t_grid)
    values = states[0].copy()
    if zero_last:
        values[-1] = 0.0
    derivs = states[1] * r ** (1.0 - float(derived.n_prime))
    return RadialProfile(grid=r, values=values, derivs=derivs, side=side, params=derived)


def _check_common(derived: DerivedParams):
    if not float(derived.n_prime) > 2:
        raise ParameterError("radial solvers need N' > 2")


def integrate_interior(alpha: float, derived: DerivedParams, config: IntegratorConfig = IntegratorConfig()) -> ShootOutcome:
    """Shoot from the origin with ``w(0) = alpha`` until the first zero.

    ``derived`` are the parameters of the ball problem (typically the Kelvin
    dual of an exterior problem); ``derived.tau`` must exceed -2.
    """
    _check_common(derived)
    n_prime, tau, p = float(derived.n_prime), float(derived.tau), float(derived.p)
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    w0, dw0 = origin_series(alpha, derived, config.r0)
    t0 = math.log(config.r0)
    f0 = config.r0 ** (n_prime - 1) * dw0
    atol = np.array([config.atol * alpha, config.atol * abs(f0)])
    rhs = _flux_rhs(n_prime, tau, p)
    kind, t_end, dense, n_steps, flux_ok = _integrate(rhs, t0, [w0, f0], math.log(config.r_max), config, atol)
    crossed = kind is OutcomeKind.CROSSED_ZERO
    grid = _sample_grid(t0, t_end, config.samples_per_unit)
    profile = _profile_from_dense(dense, grid, derived, "interior", zero_last=crossed)
    out = ShootOutcome(kind, profile, flux_monotone=flux_ok, n_steps=n_steps, dense=dense)
    if crossed:
        out.radius = math.exp(t_end)
    elif kind is OutcomeKind.POSITIVE_TO_HORIZON and np.all(profile.values[-10:] > 0):
        out.decay_slope = decay_slope(profile)
    return out


def integrate_exterior(beta: float, derived: DerivedParams, config: IntegratorConfig = IntegratorConfig()) -> ShootOutcome:
    """Shoot outward from ``u(1) = 0``, ``u'(1) = beta``.

    For ``p < 1`` the run stops once ``u`` falls below ``config.zero_tol``
    and reports that radius as the crossing.
    """
    _check_common(derived)
    n_prime, tau, p = float(derived.n_prime), float(derived.tau), float(derived.p)
    if not tau > -2:
        raise ParameterError("exterior shooting needs tau > -2")
    if beta < 0:
        raise ParameterError("beta must be nonnegative")
    if beta == 0:
        prof = RadialProfile(np.array([1.0]), np.array([0.0]), np.array([0.0]), "exterior", derived)
        return ShootOutcome(OutcomeKind.CROSSED_ZERO, prof, radius=1.0)
    atol = np.array([config.atol * beta, config.atol * beta])
    floor = config.zero_tol if p < 1 else 0.0
    rhs = _flux_rhs(n_prime, tau, p)
    kind, t_end, dense, n_steps, flux_ok = _integrate(
        rhs, 0.0, [0.0, beta], math.log(config.r_max), config, atol, leave_start=True, floor=floor
    )
    crossed = kind is OutcomeKind.CROSSED_ZERO
    grid = _sample_grid(0.0, t_end, config.samples_per_unit)
    profile = _profile_from_dense(dense, grid, derived, "exterior")
    values = profile.values
    values[0] = 0.0
    if crossed:
        values[-1] = floor
    out = ShootOutcome(kind, profile, flux_monotone=flux_ok, n_steps=n_steps, dense=dense)
    if crossed:
        out.radius = math.exp(t_end)
    elif kind is OutcomeKind.POSITIVE_TO_HORIZON and np.all(values[grid > grid[-1] - math.log(10)] > 0):
        out.decay_slope = decay_slope(profile)
    return out


def ef_energy(v, v_t, n_prime: float, p: float):
    """First integral of the autonomous (critical) Emden-Fowler equation."""
    k2 = (n_prime - 2) ** 2 / 4
    return 0.5 * v_t**2 + _pos_pow(v, p + 1) / (p + 1) - 0.5 * k2 * v**2


def integrate_emden_fowler(beta: float, derived: DerivedParams, config: IntegratorConfig = IntegratorConfig()) -> EFTrajectory:
    """Integrate ``v_tt = ((N'-2)^2/4) v - e^{p_* t} v^p`` from ``v(0)=0, v_t(0)=beta``.

    Runs to ``config.t_max`` or the first return of ``v`` to zero.  When
    ``p_* = 0`` the energy is sampled and its largest relative drift over
    accepted steps is recorded.
    """
    _check_common(derived)
    n_prime, tau, p = float(derived.n_prime), float(derived.tau), float(derived.p)
    p_star = float(derived.p_star)
    if not p > 1:
        raise ParameterError("Emden-Fowler integration needs p > 1")
    if not tau > -2:
        raise ParameterError("Emden-Fowler integration needs tau > -2")
    if beta < 0:
        raise ParameterError("beta must be nonnegative")
    critical = abs(p_star) <= 1e-12 * max(1.0, p)
    if beta == 0:
        t = np.zeros(1)
        z = np.zeros(1)
        return EFTrajectory(t, z, z.copy(), p_star, OutcomeKind.POSITIVE_TO_HORIZON,
                            energy=z.copy() if critical else None, energy_drift=0.0 if critical else None)
    k2 = (n_prime - 2) ** 2 / 4

    def rhs(t, y):
        forcing = 1.0 if critical else math.exp(p_star * t)
        return np.array([y[1], k2 * y[0] - forcing * max(y[0], 0.0) ** p])

    atol = np.array([config.atol * beta, config.atol * beta])
    drift = 0.0
    e0 = 0.5 * beta**2
    solver = _METHODS[config.method](rhs, 0.0, [0.0, beta], config.t_max, rtol=config.rtol, atol=atol)
    ts, interps = [0.0], []
    prev = np.array([0.0, beta])
    kind = OutcomeKind.POSITIVE_TO_HORIZON
    zero_t = None
    n_steps = 0
    while True:
        if n_steps >= config.max_steps:
            kind = OutcomeKind.STEP_BUDGET_EXHAUSTED
            break
        solver.step()
        if solver.status == "failed":
            raise RuntimeError(f"integration failed at t={solver.t}")
        n_steps += 1
        interp = solver.dense_output()
        ts.append(solver.t)
        interps.append(interp)
        cur = solver.y
        if critical:
            drift = max(drift, abs(ef_energy(cur[0], cur[1], n_prime, p) - e0) / e0)
        if prev[0] > 0 and cur[0] <= 0:
            zero_t = _first_crossing(interp, ts[-2], ts[-1], 0.0)
            kind = OutcomeKind.CROSSED_ZERO
            break
        prev = cur.copy()
        if solver.status == "finished":
            break
    dense = OdeSolution(ts, interps)
    t_end = zero_t if zero_t is not None else ts[-1]
    grid = _sample_grid(0.0, t_end, config.samples_per_unit)
    states = dense(grid)
    v, v_t = states[0].copy(), states[1].copy()
    v[0] = 0.0
    if zero_t is not None:
        v[-1] = 0.0
    energy = ef_energy(v, v_t, n_prime, p) if critical else None
    return EFTrajectory(grid, v, v_t, p_star, kind, zero_t=zero_t, energy=energy,
                        energy_drift=drift if critical else None, n_steps=n_steps)


def _d_dx(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second-order three-point derivative at the interior nodes of a non-uniform grid."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    return (hm**2 * y[2:] - hp**2 * y[:-2] + (hp**2 - hm**2) * y[1:-1]) / (hm * hp * (hm + hp))


def _normalized(lhs: np.ndarray, rhs: np.ndarray) -> float:
    scale = max(np.max(np.abs(lhs), initial=0.0), np.max(np.abs(rhs), initial=0.0))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(lhs + rhs)) / scale)


def residual(profile: RadialProfile) -> float:
    """Largest flux-form residual on the interior nodes, relative to the term scale.

    Evaluates ``r (r^{N'-1} w')' + r^{N'+tau} w^p`` with a central difference
    in ``ln r`` and divides the sup of the sum by the sup of either term over
    the grid.
    """
    if len(profile) < 5:
        raise ValueError("residual needs at least 5 grid points")
    d = profile.params
    n_prime, tau, p = float(d.n_prime), float(d.tau), float(d.p)
    t = np.log(profile.grid)
    dflux = _d_dx(t, profile.flux)
    r = profile.grid[1:-1]
    source = r ** (n_prime + tau) * _pos_pow(profile.values[1:-1], p)
    return _normalized(dflux, source)


def decay_slope(profile: RadialProfile) -> float:
    """Least-squares slope of ``log w`` against ``log r`` over the last decade."""
    r = profile.grid
    mask = r >= r[-1] / 10
    if mask.sum() < 2:
        mask = np.ones_like(r, dtype=bool)
    w = profile.values[mask]
    if np.any(w <= 0):
        raise ParameterError("decay slope needs positive tail values")
    slope, _ = np.polyfit(np.log(r[mask]), np.log(w), 1)
    return float(slope)
