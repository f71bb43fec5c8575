import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from lane_emden_exterior.params import ParameterError, ProblemParams, RegimeError, derive, kelvin_dual, singular_constant
from lane_emden_exterior.radial import IntegratorConfig, OutcomeKind, RadialProfile, integrate_exterior, residual
from lane_emden_exterior.solver import (
    PowerLawModel,
    VerificationError,
    emden_transform,
    energy_integral,
    kelvin_map,
    phi_diagnostic,
    rescale,
    shooting_invariance,
    solve_supercritical,
    verify_nonexistence,
)

P6 = ProblemParams(3, 0, 0, 6)


@pytest.fixture(scope="module")
def sol6():
    return solve_supercritical(P6)


def eff(n_prime, tau, p):
    return ProblemParams.from_effective(n_prime, tau, p)


def reference_beta_star(params, rtol=5e-11):
    """Independent interior shoot in the radius variable with scipy's DOP853."""
    dual = derive(kelvin_dual(params))
    n_prime, tau, p = float(dual.n_prime), float(dual.tau), float(dual.p)
    r0 = 1e-4
    q = tau + 2
    v0 = 1 - r0**q / (q * (n_prime + tau))
    dv0 = -r0 ** (q - 1) / (n_prime + tau)

    def rhs(r, y):
        return [y[1], -(n_prime - 1) / r * y[1] - r**tau * max(y[0], 0.0) ** p]

    def hit(r, y):
        return y[0]

    hit.terminal, hit.direction = True, -1
    sol = solve_ivp(rhs, (r0, 1e3), [v0, dv0], method="DOP853", rtol=rtol, atol=1e-14, events=hit)
    r_zero = sol.t_events[0][0]
    dv = sol.y_events[0][0][1]
    m = (2 + tau) / (p - 1)
    return r_zero, -(r_zero ** (m + 1)) * dv


def test_supercritical_example(sol6):
    rep = sol6
    assert rep.profile.values[0] == 0 and rep.profile.grid[0] == 1
    assert np.all(rep.profile.values[1:] > 0)
    assert -1.05 <= rep.decay_slope <= -0.95
    assert rep.residual < 1e-6
    r_zero, beta = reference_beta_star(P6)
    assert rep.beta_star > 0
    assert rep.interior_zero == pytest.approx(r_zero, rel=1e-6)
    assert rep.beta_star == pytest.approx(beta, rel=1e-6)


def test_critical_exponent_has_no_construction():
    with pytest.raises(RegimeError):
        solve_supercritical(ProblemParams(3, 0, 0, 5))


def test_shooting_height_does_not_matter():
    assert shooting_invariance(P6, (1.0, 2.0, 5.0)) < 1e-6


def test_rescale_identity_and_group_law(sol6):
    interior = kelvin_map(sol6.profile)
    assert np.array_equal(rescale(interior, 1.0).values, interior.values)
    a = rescale(rescale(interior, 1.7), 2.3)
    b = rescale(interior, 1.7 * 2.3)
    assert np.allclose(a.grid, b.grid, rtol=1e-10, atol=0)
    assert np.allclose(a.values, b.values, rtol=1e-10, atol=1e-300)


def test_rescaled_shoot_has_zero_at_one(sol6):
    interior = kelvin_map(sol6.profile)
    assert interior.grid[-1] == pytest.approx(1.0, abs=1e-15)
    assert abs(interior.values[-1]) <= IntegratorConfig().zero_tol


def test_kelvin_map_fundamental_solution_to_constant():
    r = np.geomspace(1, 1e3, 500)
    d = derive(eff(3, 0, 6))
    prof = RadialProfile(r, r**-1.0, -(r**-2.0), "exterior", d)
    img = kelvin_map(prof)
    assert img.side == "interior"
    assert np.allclose(img.values, 1.0, rtol=0, atol=1e-15)
    assert np.allclose(img.derivs, 0.0, atol=1e-12)


def test_kelvin_map_involution(sol6):
    back = kelvin_map(kelvin_map(sol6.profile))
    scale = np.max(np.abs(sol6.profile.values))
    assert np.max(np.abs(back.values - sol6.profile.values)) <= 1e-12 * scale
    assert np.allclose(back.grid, sol6.profile.grid, rtol=1e-14)
    assert back.params.params == sol6.profile.params.params


def test_interior_image_solves_dual_equation(sol6):
    img = kelvin_map(sol6.profile)
    assert img.params.tau == pytest.approx(1.0)
    assert residual(img) < 1e-6


def test_nonexistence_subcritical():
    rep = verify_nonexistence(eff(3, 0, 4), [0.1, 1, 10])
    assert rep.all_crossed and not rep.failures
    assert all(o.coordinates == "emden-fowler" for o in rep.outcomes)


def critical_crossing_time(beta):
    # v_tt = v/4 - v^5, energy beta^2/2: time out to the turning point and back
    def g(v):
        return 2 * (beta**2 / 2 + v**2 / 8 - v**6 / 6)

    from scipy.optimize import brentq

    vmax = brentq(g, 1e-9, 10)
    # substitute v = vmax sin(phi) to remove the square-root endpoint singularity
    half = quad(lambda ph: vmax * math.cos(ph) / math.sqrt(g(vmax * math.sin(ph))), 0, math.pi / 2,
                epsabs=0, epsrel=1e-12, limit=200)[0]
    return 2 * half


def test_nonexistence_critical_crossing_time():
    rep = verify_nonexistence(eff(3, 0, 5), [1.0])
    (o,) = rep.outcomes
    assert o.kind is OutcomeKind.CROSSED_ZERO
    assert o.log_radius == pytest.approx(critical_crossing_time(1.0), rel=1e-7)
    assert o.energy_drift < 1e-8


def test_nonexistence_sublinear_uses_radial_coordinates():
    rep = verify_nonexistence(eff(3, 0, 0.5), [0.1, 1])
    assert rep.all_crossed
    assert all(o.coordinates == "radial" for o in rep.outcomes)


def test_nonexistence_checks_regime():
    with pytest.raises(RegimeError):
        verify_nonexistence(P6, [1.0])


def test_supercritical_slopes_around_beta_star(sol6):
    beta = sol6.beta_star
    rep = verify_nonexistence(P6, [beta / 2, 2 * beta], check_regime=False)
    kinds = [o.kind for o in rep.outcomes]
    # above beta* the trajectory turns back; below it stays positive with slow decay
    assert kinds[1] is OutcomeKind.CROSSED_ZERO
    assert kinds[0] is OutcomeKind.POSITIVE_TO_HORIZON
    assert not rep.all_crossed and rep.failures == [beta / 2]
    with pytest.raises(VerificationError):
        rep.raise_if_failed()


def test_parallel_verification_is_ordered():
    betas = [10.0, 0.1, 1.0, 3.0]
    a = verify_nonexistence(eff(3, 0, 3), betas, jobs=4).to_dict()
    b = verify_nonexistence(eff(3, 0, 3), betas, jobs=1).to_dict()
    assert a == b
    assert [o["beta"] for o in a["outcomes"]] == betas


def test_phi_vanishes_on_singular_solution():
    d = derive(eff(3, 0, 6))
    c, m = singular_constant(d), float(d.m)
    r = np.geomspace(1, 1e3, 300)
    u = c * r**-m
    phi = phi_diagnostic(RadialProfile(r, u, -m * c * r ** (-m - 1), "exterior", d))
    assert np.max(np.abs(phi.values)) <= 8 * np.finfo(float).eps * np.max(u)


def test_phi_at_boundary_is_beta():
    out = integrate_exterior(0.7, derive(eff(3, 0, 4)))
    phi = phi_diagnostic(out.trajectory)
    assert phi.values[0] == pytest.approx(0.7, rel=1e-14)


def test_phi_negative_on_supercritical_tail(sol6):
    phi = phi_diagnostic(sol6.profile)
    tail = sol6.profile.grid > 100
    assert np.all(phi.values[tail] < 0)


def test_energy_of_critical_model_grows_logarithmically():
    d = derive(eff(3, 0, 5))
    model = PowerLawModel(1.0, -0.5, d)
    for R in (1e3, 1e6):
        e = energy_integral(model, R)
        assert e.potential == pytest.approx(math.log(R / 2), rel=1e-6)
    R = 1e3
    ratio = energy_integral(model, R * R).potential / energy_integral(model, R).potential
    assert abs(ratio - math.log(R * R / 2) / math.log(R / 2)) < 1e-3


def test_energy_of_zero_profile():
    r = np.geomspace(1, 100, 200)
    e = energy_integral(RadialProfile(r, 0 * r, 0 * r, "exterior", derive(eff(3, 0, 4))), 50)
    assert e.total == 0.0


def test_energy_of_supercritical_solution_converges():
    rep = solve_supercritical(P6, IntegratorConfig(r_max=1e5))
    e4 = energy_integral(rep.profile, 1e4).total
    e5 = energy_integral(rep.profile, 1e5).total
    assert abs(e5 - e4) < 0.01 * e5


def test_energy_rejects_small_radius():
    with pytest.raises(ParameterError):
        energy_integral(PowerLawModel(1.0, -0.5, derive(eff(3, 0, 5))), 1.5)


def test_emden_transform_of_model_is_constant():
    r = np.geomspace(1, 100, 400)
    d = derive(eff(3, 0, 5))
    rep = emden_transform(RadialProfile(r, r**-0.5, -0.5 * r**-1.5, "exterior", d))
    assert np.allclose(rep.trajectory.v, 1.0, atol=1e-14)
    assert np.allclose(rep.trajectory.v_t, 0.0, atol=1e-14)


def test_emden_transform_of_supercritical_solution(sol6):
    rep = emden_transform(sol6.profile)
    assert rep.residual < 1e-6
    assert rep.tail_decreasing
    assert 0 < rep.increasing_fraction < 1
