"""Radial constructions and diagnostics built on the flux-form integrator.

The positive radial solution of the supercritical exterior problem is
obtained from the ball problem: shoot from the origin with ``v(0) = alpha``
to the first zero ``R0``, rescale so that the zero sits at ``r = 1`` and map
back with the Kelvin transform ``u(r) = r^{2-N'} w(1/r)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import CubicHermiteSpline

from .params import (
    DerivedParams,
    ParameterError,
    ProblemParams,
    RegimeError,
    RegimeKind,
    classify,
    derive,
    kelvin_dual,
)
from .radial import (
    EFTrajectory,
    IntegratorConfig,
    OutcomeKind,
    RadialProfile,
    _d_dx,
    _pos_pow,
    _sample_grid,
    decay_slope,
    integrate_emden_fowler,
    integrate_exterior,
    integrate_interior,
    origin_series,
    residual,
)


class NoCrossing(RuntimeError):
    """The interior shoot never reached zero before the horizon."""


class VerificationError(RuntimeError):
    pass


def rescale(profile: RadialProfile, lam: float) -> RadialProfile:
    """Apply the scaling ``w(r) = lam^m v(lam r)``, ``m = (2 + tau)/(p - 1)``."""
    d = profile.params
    if not float(d.p) > 1:
        raise ParameterError("the scaling law needs p > 1")
    if not lam > 0:
        raise ParameterError("lam must be positive")
    m = float(d.m)
    return RadialProfile(
        grid=profile.grid / lam,
        values=lam**m * profile.values,
        derivs=lam ** (m + 1) * profile.derivs,
        side=profile.side,
        params=d,
    )


def kelvin_map(profile: RadialProfile) -> RadialProfile:
    """Kelvin transform ``g(s) = s^{2-N'} f(1/s)`` between the ball and the exterior.

    The side and the parameters (``ell`` -> ``sigma``) are swapped; the
    transform is its own inverse.
    """
    d = profile.params
    if np.any(profile.grid <= 0):
        raise ParameterError("Kelvin map needs a grid away from the origin")
    n_prime = float(d.n_prime)
    s = 1.0 / profile.grid[::-1]
    f = profile.values[::-1]
    df = profile.derivs[::-1]
    values = s ** (2 - n_prime) * f
    # d/ds of s^{2-N'} f(1/s)
    derivs = (2 - n_prime) * s ** (1 - n_prime) * f - s ** (-n_prime) * df
    side = "exterior" if profile.side == "interior" else "interior"
    return RadialProfile(grid=s, values=values, derivs=derivs, side=side, params=derive(kelvin_dual(d.params)))


@dataclass(eq=False)
class SolveReport:
    profile: RadialProfile
    beta_star: float
    lam: float
    interior_zero: float
    decay_slope: float
    residual: float
    alpha: float
    interior_start_value: float
    far_field_coefficient: float
    shoot_steps: int
    params: DerivedParams = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "beta_star": self.beta_star,
            "lambda": self.lam,
            "interior_zero": self.interior_zero,
            "decay_slope": self.decay_slope,
            "residual": self.residual,
            "alpha": self.alpha,
            "interior_start_value": self.interior_start_value,
            "far_field_coefficient": self.far_field_coefficient,
            "shoot_steps": self.shoot_steps,
            "r_max": float(self.profile.grid[-1]),
            "n_points": len(self.profile),
        }


def _interior_samples(shoot, dual: DerivedParams, alpha: float, rho: np.ndarray, r0: float) -> RadialProfile:
    # dense output where it exists, the origin series below the start radius
    n_prime = float(dual.n_prime)
    values = np.empty_like(rho)
    derivs = np.empty_like(rho)
    inside = rho >= r0
    states = shoot.dense(np.log(rho[inside]))
    values[inside] = states[0]
    derivs[inside] = states[1] * rho[inside] ** (1 - n_prime)
    for i in np.flatnonzero(~inside):
        values[i], derivs[i] = origin_series(alpha, dual, rho[i])
    return RadialProfile(rho, values, derivs, "interior", dual)


def solve_supercritical(params: ProblemParams, config: IntegratorConfig = IntegratorConfig(), alpha: float = 1.0) -> SolveReport:
    """Construct the positive radial solution on ``(1, config.r_max]``."""
    regime = classify(params)
    if regime.kind is not RegimeKind.EXISTS_UNIQUE_RADIAL:
        raise RegimeError(f"no unique radial solution in this regime: {regime.reason}")
    d = derive(params)
    dual = derive(kelvin_dual(params))
    shoot = integrate_interior(alpha, dual, config)
    if shoot.kind is not OutcomeKind.CROSSED_ZERO:
        raise NoCrossing(f"interior shoot ended with {shoot.kind.value}")
    r_zero = shoot.radius
    lam = r_zero

    t_ext = _sample_grid(0.0, math.log(config.r_max), config.samples_per_unit)
    # interior radii lam/r for r on the exterior grid, in increasing order
    rho = lam * np.exp(-t_ext[::-1])
    rho[-1] = r_zero
    interior = _interior_samples(shoot, dual, alpha, rho, config.r0)
    interior.values[-1] = 0.0
    exterior = kelvin_map(rescale(interior, lam))
    exterior.grid[0] = 1.0
    exterior.values[0] = 0.0

    m_dual = float(dual.m)
    return SolveReport(
        profile=exterior,
        beta_star=float(exterior.derivs[0]),
        lam=lam,
        interior_zero=r_zero,
        decay_slope=decay_slope(exterior),
        residual=residual(exterior),
        alpha=alpha,
        interior_start_value=float(shoot.trajectory.values[0]),
        far_field_coefficient=lam**m_dual * alpha,
        shoot_steps=shoot.n_steps,
        params=d,
    )


def shooting_invariance(params: ProblemParams, alphas: Sequence[float] = (1.0, 2.0, 5.0),
                        config: IntegratorConfig = IntegratorConfig()) -> float:
    """Largest pairwise sup-difference between solutions built from different ``alpha``."""
    profiles = [solve_supercritical(params, config, alpha=a).profile.values for a in alphas]
    worst = 0.0
    for i in range(len(profiles)):
        for j in range(i + 1, len(profiles)):
            worst = max(worst, float(np.max(np.abs(profiles[i] - profiles[j]))))
    return worst


@dataclass
class BetaOutcome:
    beta: float
    kind: OutcomeKind
    radius: Optional[float]
    log_radius: Optional[float]
    coordinates: str
    energy_drift: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "kind": self.kind.value,
            "radius": self.radius,
            "log_radius": self.log_radius,
            "coordinates": self.coordinates,
            "energy_drift": self.energy_drift,
        }


@dataclass
class NonexistenceReport:
    betas: list
    outcomes: list
    all_crossed: bool
    failures: list

    def raise_if_failed(self):
        if not self.all_crossed:
            raise VerificationError(f"trajectories survived for beta in {self.failures}")

    def to_dict(self) -> dict:
        return {
            "betas": list(self.betas),
            "all_crossed": self.all_crossed,
            "failures": list(self.failures),
            "outcomes": [o.to_dict() for o in self.outcomes],
        }


def _shoot_one(beta: float, d: DerivedParams, config: IntegratorConfig) -> BetaOutcome:
    if float(d.p) > 1:
        ef = integrate_emden_fowler(beta, d, config)
        if ef.kind is OutcomeKind.CROSSED_ZERO:
            t = ef.zero_t
            radius = math.exp(t) if t < 700 else math.inf
            return BetaOutcome(beta, ef.kind, radius, t, "emden-fowler", ef.energy_drift)
        return BetaOutcome(beta, ef.kind, None, None, "emden-fowler", ef.energy_drift)
    out = integrate_exterior(beta, d, config)
    log_r = None if out.radius is None else math.log(out.radius)
    return BetaOutcome(beta, out.kind, out.radius, log_r, "radial")


def verify_nonexistence(params: ProblemParams, betas: Sequence[float] = (1e-2, 1e-1, 1.0, 1e1, 1e2),
                        config: IntegratorConfig = IntegratorConfig(), check_regime: bool = True,
                        jobs: int = 1) -> NonexistenceReport:
    """Shoot from ``u(1) = 0`` with every slope in ``betas`` and record the first zeros.

    Every trajectory crossing zero is the numerical witness that no positive
    radial solution exists.  With ``check_regime=False`` the same scan can be
    run in the supercritical regime.
    """
    d = derive(params)
    if check_regime:
        if not (float(d.n_prime) > 2 and float(d.tau) > -2):
            raise RegimeError("nonexistence verification needs N' > 2 and tau > -2")
        if classify(params).kind is not RegimeKind.NO_POSITIVE_SOLUTION:
            raise RegimeError("nonexistence verification needs 0 < p <= p_s")
    betas = [float(b) for b in betas]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(lambda b: _shoot_one(b, d, config), betas))
    else:
        outcomes = [_shoot_one(b, d, config) for b in betas]
    failures = [o.beta for o in outcomes if o.kind is not OutcomeKind.CROSSED_ZERO]
    return NonexistenceReport(betas, outcomes, not failures, failures)


def phi_diagnostic(profile: RadialProfile) -> RadialProfile:
    """``phi = r u' + ((2 + tau)/(p - 1)) u`` on the profile grid.

    The derivative of ``phi`` is evaluated through the ODE itself.
    """
    d = profile.params
    p = float(d.p)
    if not p > 1:
        raise ParameterError("phi needs p > 1")
    m = float(d.m)
    n_prime, tau = float(d.n_prime), float(d.tau)
    r, u, du = profile.grid, profile.values, profile.derivs
    phi = r * du + m * u
    d2u = -(n_prime - 1) / r * du - r**tau * _pos_pow(u, p)
    dphi = (1 + m) * du + r * d2u
    return RadialProfile(r.copy(), phi, dphi, profile.side, d)


@dataclass(frozen=True)
class PowerLawModel:
    """``u(r) = coefficient * r^exponent`` for the problem ``params``."""

    coefficient: float
    exponent: float
    params: DerivedParams

    def value(self, r):
        return self.coefficient * r**self.exponent

    def deriv(self, r):
        return self.coefficient * self.exponent * r ** (self.exponent - 1)


@dataclass(frozen=True)
class EnergyIntegral:
    """Radial energy on ``2 < r < R``; the sphere area factor is left out."""

    gradient: float
    potential: float
    radius: float
    method: str
    angular_factor_included: bool = False

    @property
    def total(self) -> float:
        return self.gradient + self.potential

    def to_dict(self) -> dict:
        return {
            "gradient": self.gradient,
            "potential": self.potential,
            "total": self.total,
            "radius": self.radius,
            "method": self.method,
            "angular_factor_included": self.angular_factor_included,
        }


def energy_integral(source: Union[RadialProfile, PowerLawModel], R: float) -> EnergyIntegral:
    """``int_2^R r^{N-1} (r^theta u'^2 + r^ell u^{p+1}) dr`` split into its two terms.

    Power-law models are integrated adaptively in ``ln r``; sampled profiles
    by Simpson's rule on their own nodes, with the endpoints interpolated by
    a cubic Hermite spline.
    """
    if not R > 2:
        raise ParameterError("energy integral needs R > 2")
    d = source.params
    pp = d.params
    n, theta, ell, p = float(pp.n_dim), float(pp.theta), float(pp.ell), float(d.p)
    a, b = math.log(2.0), math.log(R)

    if isinstance(source, PowerLawModel):
        def grad(t):
            r = math.exp(t)
            return r ** (n + theta) * source.deriv(r) ** 2

        def pot(t):
            r = math.exp(t)
            return r ** (n + ell) * abs(source.value(r)) ** (p + 1)

        opts = dict(epsabs=0.0, epsrel=1e-12, limit=200)
        g = quad(grad, a, b, **opts)[0]
        q = quad(pot, a, b, **opts)[0]
        return EnergyIntegral(g, q, R, "adaptive-quadrature")

    r = source.grid
    if r[0] > 2 or r[-1] < R:
        raise ParameterError("profile does not cover [2, R]")
    t = np.log(r)
    spline = CubicHermiteSpline(t, source.values, r * source.derivs)
    inner = t[(t > a) & (t < b)]
    ts = np.concatenate([[a], inner, [b]])
    u = spline(ts)
    du = spline(ts, 1) / np.exp(ts)
    rs = np.exp(ts)
    g = simpson(rs ** (n + theta) * du**2, x=ts)
    q = simpson(rs ** (n + ell) * _pos_pow(u, p + 1), x=ts)
    return EnergyIntegral(float(g), float(q), R, "simpson")


@dataclass(eq=False)
class EFReport:
    trajectory: EFTrajectory
    residual: float
    increasing_fraction: float
    tail_decreasing: bool


def emden_transform(profile: RadialProfile) -> EFReport:
    """Map an exterior profile to ``v(t) = r^{(N'-2)/2} u(r)``, ``t = ln r``.

    Reports the residual of the Emden-Fowler equation and where ``v`` is
    increasing; monotonicity is reported, never asserted.
    """
    d = profile.params
    n_prime, p = float(d.n_prime), float(d.p)
    k = (n_prime - 2) / 2
    r = profile.grid
    t = np.log(r)
    v = r**k * profile.values
    v_t = k * v + r ** (k + 1) * profile.derivs
    p_star = float(d.p_star)
    traj = EFTrajectory(t, v, v_t, p_star, OutcomeKind.POSITIVE_TO_HORIZON)
    if len(r) >= 5:
        v_tt = _d_dx(t, v_t)
        lin = -(k**2) * v[1:-1]
        src = np.exp(p_star * t[1:-1]) * _pos_pow(v[1:-1], p)
        scale = max(np.abs(v_tt).max(), np.abs(lin).max(), np.abs(src).max())
        res = 0.0 if scale == 0 else float(np.abs(v_tt + lin + src).max() / scale)
    else:
        res = 0.0
    tail = r >= r[-1] / 10
    return EFReport(
        trajectory=traj,
        residual=res,
        increasing_fraction=float(np.mean(v_t > 0)),
        tail_decreasing=bool(np.all(v_t[tail] < 0)),
    )
