import math

import numpy as np
import pytest
from scipy.linalg import eigh
from scipy.special import jn_zeros

from lane_emden_exterior.params import ParameterError, ProblemParams, derive
from lane_emden_exterior.radial import RadialProfile
from lane_emden_exterior.solver import solve_supercritical
from lane_emden_exterior.spectral import (
    EigenVerdict,
    OperatorSpec,
    assemble,
    eigen_condition_tau_lt_minus2,
    l1_operator,
    linearized_annulus_eigenvalue,
    make_mesh,
    principal_eigenvalue,
    root_coefficient,
    smallest_eigenvalue,
    weighted_laplacian,
)

L1_PARAMS = ProblemParams(5, 0, -3, 1)  # N' = 5, tau = -3
# with zero potential exponent -(4 + tau) = -1 the critical coefficient is ((tau'+2) j_{nu,1}/2)^2,
# tau' = -1, nu = (N'-2)/(tau'+2) = 3
C_STAR = (jn_zeros(3, 1)[0] / 2) ** 2


@pytest.fixture(scope="module")
def profile6():
    return solve_supercritical(ProblemParams(3, 0, 0, 6)).profile


def test_ball_laplacian_converges_to_pi_squared():
    res = principal_eigenvalue(weighted_laplacian(3), 64)
    assert abs(res.extrapolated - math.pi**2) < 1e-4
    assert res.convergence["observed_order"] >= 1.9
    assert res.lambda_mesh < math.pi**2


@pytest.mark.parametrize("n_prime", [2.5, 4.0, 6.0])
def test_ball_laplacian_matches_bessel_zero(n_prime):
    nu = (n_prime - 2) / 2
    exact = jn_zeros_real(nu) ** 2
    assert principal_eigenvalue(weighted_laplacian(n_prime), 128).lambda1 == pytest.approx(exact, rel=1e-6)


def jn_zeros_real(nu):
    from scipy.optimize import brentq
    from scipy.special import jv

    grid = np.linspace(0.5, 20, 4000)
    vals = jv(nu, grid)
    i = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    return brentq(lambda x: jv(nu, x), grid[i], grid[i + 1], xtol=1e-15)


@pytest.mark.parametrize("n_cells", [64, 128, 256])
@pytest.mark.parametrize("spec", [weighted_laplacian(3), l1_operator(L1_PARAMS, 5.0)], ids=["laplacian", "l1"])
def test_bisection_matches_dense_solve(spec, n_cells):
    pencil = assemble(spec, n_cells)
    k, m = pencil.dense()
    dense = eigh(k, m, eigvals_only=True)[0]
    assert abs(smallest_eigenvalue(pencil) - dense) <= 1e-10 * abs(dense)


def test_eigenfunction_positive_and_normalized():
    res = principal_eigenvalue(l1_operator(L1_PARAMS, 3.0), 64)
    inner = res.eigenfunction[:-1]
    assert np.all(inner > 0)
    assert res.eigenfunction[-1] == 0


def test_zero_coefficient_reduces_to_laplacian():
    a = principal_eigenvalue(l1_operator(L1_PARAMS, 0.0), 64)
    b = principal_eigenvalue(weighted_laplacian(5), 64)
    assert a.lambda1 == b.lambda1


def test_unscaled_problem_has_no_solution():
    lam, verdict = eigen_condition_tau_lt_minus2(L1_PARAMS, 64, coefficient=0.0)
    assert lam > 0 and verdict is EigenVerdict.NO_SOLUTION


def test_lambda_decreasing_in_coefficient():
    cs = np.linspace(0, 30, 7)
    lams = [principal_eigenvalue(l1_operator(L1_PARAMS, c), 64).lambda1 for c in cs]
    assert np.all(np.diff(lams) < 0)


def test_root_coefficient_matches_bessel_oracle():
    c128 = root_coefficient(L1_PARAMS, 128)
    assert c128 == pytest.approx(C_STAR, rel=1e-8)
    lam, verdict = eigen_condition_tau_lt_minus2(L1_PARAMS, 128, coefficient=c128)
    assert verdict is EigenVerdict.EXISTS


def test_weight_scale_preserves_sign():
    base = l1_operator(L1_PARAMS, 5.0)
    scaled = OperatorSpec(base.kind, base.n_prime, base.domain, base.coefficient, base.exponent,
                          graded=True, weight_scale=7.5)
    a = principal_eigenvalue(base, 64).lambda1
    b = principal_eigenvalue(scaled, 64).lambda1
    assert np.sign(a) == np.sign(b)
    assert b == pytest.approx(a / 7.5, rel=1e-12)
    above = l1_operator(L1_PARAMS, 15.0)
    assert principal_eigenvalue(above, 64).lambda1 < 0


def test_annulus_laplacian_closed_form():
    # N' = 3: v = w/r turns the operator into -w'' on (a, b)
    res = principal_eigenvalue(weighted_laplacian(3, (2.0, 4.0)), 64)
    assert res.lambda1 == pytest.approx((math.pi / 2) ** 2, rel=1e-8)


def test_linearized_with_zero_profile_is_laplacian():
    r = np.linspace(1, 10, 500)
    zero = RadialProfile(r, 0 * r, 0 * r, "exterior", derive(ProblemParams(3, 0, 0, 6)))
    a = linearized_annulus_eigenvalue(zero, (2.0, 4.0), 64).lambda1
    b = principal_eigenvalue(weighted_laplacian(3, (2.0, 4.0)), 64).lambda1
    assert a == b


def test_linearized_domain_monotonicity(profile6):
    small = linearized_annulus_eigenvalue(profile6, (2.0, 4.0)).lambda1
    large = linearized_annulus_eigenvalue(profile6, (2.0, 8.0)).lambda1
    assert small > large


def test_linearized_mesh_stability(profile6):
    a = linearized_annulus_eigenvalue(profile6, (1.5, 3.0), 64).lambda1
    b = linearized_annulus_eigenvalue(profile6, (1.5, 3.0), 128).lambda1
    assert math.isfinite(a)
    assert abs(a - b) <= 1e-3 * abs(b)


def test_linearized_rejects_annulus_off_grid(profile6):
    with pytest.raises(ParameterError):
        linearized_annulus_eigenvalue(profile6, (0.5, 3.0))
    with pytest.raises(ParameterError):
        linearized_annulus_eigenvalue(profile6, (2.0, 1e9))


def test_mesh_rules():
    spec = weighted_laplacian(3)
    mesh = make_mesh(spec, 64)
    h = np.diff(mesh)
    assert mesh[0] == 0 and mesh[-1] == 1
    assert np.allclose(h[1:] / h[:-1], 1.05, rtol=1e-12)
    assert np.allclose(make_mesh(spec, 128)[::2], mesh, atol=1e-15)
    with pytest.raises(ParameterError):
        principal_eigenvalue(spec, 32)


def test_l1_domain():
    with pytest.raises(ParameterError):
        l1_operator(ProblemParams(3, 0, 0, 1))
    with pytest.raises(ParameterError):
        eigen_condition_tau_lt_minus2(ProblemParams(5, 0, -3, 2))
