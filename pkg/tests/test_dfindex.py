import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dflab import wirtinger as W
from dflab.dfindex import (CHUNK, CertificationRequest, certify, certify_index_lower_bound,
                           check_stein_exterior, check_theta_interior, check_weight_inequality,
                           global_defining_function, shell_points,
                           strip_arrays, sweep, theta_matrix, weinstock_order)
from dflab.domain import ImplicitDomain, SignedDistanceField, boundary_points, boundary_sample, distance_jets
from dflab.errors import NoFeasibleEta, ParamBound, ShellOutsideTube, SignCondition
from dflab.weights import weight_from_callback, zero_weight


def _phi(a, b):
    def f(z):
        return a * W.abs2(z[0]) + b * W.real(z[1])

    f.dim = 2
    return f


@settings(max_examples=20, deadline=None)
@given(eta=st.floats(0.05, 0.95), a=st.floats(-1, 1), b=st.floats(-1, 1),
       s=st.floats(0.05, 0.5))
def test_theta_is_scaled_hessian_of_power(ball, eta, a, b, s):
    # i ddbar of -(-delta e^{-phi})^eta equals eta u^{eta-1} e^{-2 phi} Theta, u = -delta e^{-phi}
    _, sdf = ball
    Z = np.array([[(1 - s) * 0.6 + 0.1j, (1 - s) * 0.79j]])
    Z = Z * (1 - s) / np.linalg.norm(Z)
    phi = _phi(a, b)

    def r(z):
        d = W.sqrt(W.abs2(z[0]) + W.abs2(z[1])) - 1.0
        return -W.power(-d * W.exp(-phi(z)), eta)

    r.dim = 2
    pj = W.jet2(phi, Z)
    T = theta_matrix(distance_jets(sdf, Z).jet, pj, eta)
    u = s * np.exp(-pj.value)
    H = W.jet2(r, Z).hess
    c = eta * u ** (eta - 1) * np.exp(-2 * pj.value)
    assert np.allclose(H, c[:, None, None] * T, rtol=1e-9, atol=1e-9 * np.abs(H).max())


def test_sweep_is_independent_of_jobs(rng):
    Z = rng.normal(size=(3 * CHUNK + 17, 2)) + 0j
    fn = lambda A: np.sum(np.abs(A) ** 2, -1)  # noqa: E731
    a = sweep(fn, Z, 1)
    b = sweep(fn, Z, 4)
    assert a.tobytes() == b.tobytes() and len(a) == len(Z)


def test_shell_outside_tube_is_rejected(ball):
    dom, sdf = ball
    bp = boundary_sample(dom, 4, seed=0)
    with pytest.raises(ShellOutsideTube):
        shell_points(sdf, bp, 2 * sdf.tube)
    Zs = shell_points(sdf, bp, 0.5 * sdf.tube)
    assert np.allclose(distance_jets(sdf, Zs).jet.value, -0.5 * sdf.tube)


def test_ball_certifies_with_trivial_weight(ball):
    dom, sdf = ball
    bp = boundary_sample(dom, 40, seed=1)
    req = CertificationRequest(sdf, zero_weight(2), 0.9, bp, (1e-2, 1e-3))
    rep = certify(req)
    # the boundary inequality is reported but does not gate the verdict
    assert rep["pass"] and rep["weight_inequality"]["min_eigenvalue"] is not None
    ext = check_stein_exterior(req)
    assert ext["pass"]
    clean = strip_arrays(rep)
    assert "eigenvalues" not in clean["theta"]["shells"][0]
    with pytest.raises(ParamBound):
        CertificationRequest(sdf, zero_weight(2), 1.0, bp)
    with pytest.raises(ParamBound):
        CertificationRequest(sdf, zero_weight(2), 0.5, bp, (-1e-2,))


def test_index_search_reports_infeasible(ball):
    dom, sdf = ball
    bp = boundary_sample(dom, 10, seed=0)
    # a strongly concave weight breaks the interior estimate at every eta
    bad = weight_from_callback(_phi(-200.0, 0.0), 2)
    with pytest.raises(NoFeasibleEta):
        certify_index_lower_bound(sdf, lambda e: bad, bp, (1e-2,), bisection_tol=0.2)
    eta, hist = certify_index_lower_bound(sdf, lambda e: zero_weight(2), bp, (1e-2,))
    assert eta == 0.99 and all(ok for _, ok in hist)


def test_weinstock_expansion_is_second_order(ball):
    dom, sdf = ball
    bp = boundary_sample(dom, 20, seed=3)
    rep = weinstock_order(sdf, bp)
    assert rep["order"] > 1.8


def test_global_defining_function_on_ball(ball):
    dom, sdf = ball
    bp = boundary_sample(dom, 50, seed=2)
    g = global_defining_function(sdf, zero_weight(2), 0.5, bp.z)
    assert np.allclose(g.value(bp.z), 0, atol=1e-10)
    inside = 0.3 * bp.z[:5]
    assert np.all(g.value(inside) < 0)
    tube = bp.z * (1 - 0.5 * sdf.tube)
    form = g.exponent_form(tube, 0.5)
    assert np.all(np.linalg.eigvalsh(form)[:, 0] > 0)


def _ball_weight(c):
    def f(z):
        return c * (W.abs2(z[0]) + W.abs2(z[1]))

    f.dim = 2
    return weight_from_callback(f, 2)


@pytest.mark.parametrize("c,eta", [(0.5, 0.2), (0.5, 0.8), (1.0, 0.5), (2.0, 0.2), (4.0, 0.2)])
def test_boundary_inequality_implies_interior_positivity(ball, c, eta):
    dom, sdf = ball
    bp = boundary_sample(dom, 100, seed=0)
    req = CertificationRequest(sdf, _ball_weight(c), eta, bp, (1e-2, 3e-3, 1e-3))
    wi = check_weight_inequality(req)
    assert wi["pass"] and wi["min_eigenvalue"] > 0.1
    assert check_theta_interior(req)["pass"]


def test_bisection_is_monotone_in_grid_density(ball):
    dom, sdf = ball
    bp = boundary_sample(dom, 200, seed=0)

    def g(z):
        return -20 * W.real(z[0]) ** 2 + 3 * W.imag(z[1]) * W.real(z[0])

    g.dim = 2
    w = weight_from_callback(g, 2)
    etas = [certify_index_lower_bound(sdf, lambda e: w, bp[:n], (1e-2, 3e-3),
                                      bisection_tol=1e-3)[0] for n in (10, 40, 200)]
    assert etas[0] >= etas[1] >= etas[2]
    assert etas[0] < 0.99


def test_dilation_scales_theta_by_one_half(ball):
    dom, sdf = ball

    def rho2(z):
        return 0.25 * (W.abs2(z[0]) + W.abs2(z[1])) - 1.0

    rho2.dim = 2
    big = SignedDistanceField(ImplicitDomain(rho2, 2, 2 * dom.bbox, "ball_r2", 4.0))

    def g(z):
        return W.real(z[0]) ** 2 - 0.5 * W.abs2(z[1])

    def g2(z):
        return g([0.5 * c for c in z])

    g.dim = g2.dim = 2
    bp = boundary_sample(dom, 50, seed=1)
    bp2 = boundary_points(big, 2 * bp.z)
    offs = (1e-2, 1e-3)
    for eta in (0.3, 0.9):
        a = check_theta_interior(CertificationRequest(sdf, weight_from_callback(g, 2), eta, bp, offs))
        b = check_theta_interior(CertificationRequest(big, weight_from_callback(g2, 2), eta, bp2,
                                                      tuple(2 * s for s in offs)))
        assert a["pass"] == b["pass"]
        for sa, sb in zip(a["shells"], b["shells"]):
            assert np.allclose(sb["eigenvalues"], 0.5 * sa["eigenvalues"], rtol=1e-8, atol=1e-12)


def test_global_defining_function_sign_condition_and_continuity(ball):
    dom, sdf = ball
    bp = boundary_sample(dom, 50, seed=2)
    with pytest.raises(SignCondition):
        global_defining_function(sdf, zero_weight(2), 0.5, bp.z, B=10.0)
    g = global_defining_function(sdf, zero_weight(2), 0.5, bp.z)
    # radial line through the switch between the tube and the quadratic branch
    t = np.linspace(1 - 1.5 * g.tube, 1 - 0.5 * g.tube, 4001)
    Z = t[:, None] * bp.z[0][None, :]
    v = g.value(Z)
    assert np.max(np.abs(np.diff(v))) < 10 * (t[1] - t[0]) * (1 + np.abs(g.B))
