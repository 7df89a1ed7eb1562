import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dflab.errors import ParamBound, WrongStratum
from dflab.examples import (EXAMPLES, MuCuspFamily, MuExperimental, MuTwoCircles, WormLikeParams,
                            get_example, leaf_package_for_worm_like, mu_from_params,
                            mu_hypothesis_report, nonisotropic_collar_check, on_cut,
                            worm_boundary_point, worm_k_grid, worm_leaf_h, worm_levi_ad,
                            worm_levi_closed_form)
from dflab import wirtinger as W


def _mu(mu, w):
    return np.real(mu(np.atleast_1d(np.asarray(w, complex))))


def test_two_circles_values():
    mu = MuTwoCircles(0.5)
    assert _mu(mu, [0, 1, -1]) == pytest.approx([0.75, 0.0, -4.0])
    assert mu.gamma == 0.5
    assert mu_from_params(mu.params()) == mu
    with pytest.raises(ParamBound):
        MuTwoCircles(1.5)


def test_cusp_family_constraints():
    mu = MuCuspFamily()
    assert mu.gamma == pytest.approx(0.8)
    assert _mu(mu, [0])[0] == pytest.approx(0.75)
    with pytest.raises(ParamBound):
        MuCuspFamily(j=3, k=2)
    with pytest.raises(ParamBound):
        MuCuspFamily(j=6, k=3)
    assert MuExperimental().gamma is None


@pytest.mark.parametrize("mu", [MuTwoCircles(), MuCuspFamily()])
def test_hypotheses_hold_for_contract_families(mu):
    rep = mu_hypothesis_report(mu, n_theta=360)
    assert rep["pass"], rep


def test_collar_check():
    fam = MuCuspFamily()
    rep = nonisotropic_collar_check(fam, 0.5)
    assert rep["gamma"] == pytest.approx(0.8)
    assert rep["r_hat"] > 0 and rep["r_c"] > 0
    with pytest.raises(ParamBound):
        nonisotropic_collar_check(fam, 0.9)


def test_worm_params_bounds():
    with pytest.raises(ParamBound):
        WormLikeParams(B=1.0)
    with pytest.raises(ParamBound):
        WormLikeParams(m=1.0)
    with pytest.raises(ParamBound):
        WormLikeParams(A=1.0)
    p = WormLikeParams()
    assert WormLikeParams.from_dict(p.to_dict()) == p
    assert p.clamp_error < 1e-100


def test_defining_function_on_strata(two_circles):
    p, dom, _ = two_circles
    Z = worm_k_grid(p, n_r=6, n_theta=12)
    assert np.all(_mu(p.mu, Z[:, 1]) <= 0)
    assert np.allclose(dom.rho_value(Z), 0, atol=1e-12)
    assert np.all(dom.k_predicate(Z))
    far = np.array([[0j, 3.0 + 0j], [0j, -0.1 + 3j]])
    assert np.all(_mu(p.mu, far[:, 1]) > p.A)
    assert np.all(dom.rho_value(far) > 0)


@settings(max_examples=20, deadline=None)
@given(x=st.floats(-0.9, -0.2), y=st.floats(-0.6, 0.6), theta=st.floats(0, 2 * math.pi))
def test_boundary_parametrization_is_on_boundary(two_circles, x, y, theta):
    p, dom, _ = two_circles
    z2 = complex(x, y)
    assume(_mu(p.mu, z2)[0] < p.A)
    Z = worm_boundary_point(p, np.array([z2]), theta)
    assert abs(dom.rho_value(Z)[0]) < 1e-10


def test_levi_closed_form_matches_ad(two_circles):
    p, _, _ = two_circles
    w = np.array([0.33, 0.41, 0.59]) * np.exp(1j * np.array([3.0, 2.2, 1.5]))
    w = w[(_mu(p.mu, w) > 0) & (_mu(p.mu, w) < p.A)]
    assert len(w)
    lev, Z, L = worm_levi_closed_form(w, 0.7, p)
    ad, tang = worm_levi_ad(p, Z, L)
    assert np.allclose(tang, 0, atol=1e-9)
    assert np.allclose(lev, ad, rtol=1e-6, atol=1e-9)
    with pytest.raises(WrongStratum):
        worm_levi_closed_form(np.array([-1.0 + 0j]), 0.0, p)


def test_leaf_h_is_a_primitive_of_alpha_off_the_cut(cusp):
    p, _, _ = cusp
    pkg = leaf_package_for_worm_like(p, K_samples=worm_k_grid(p, 4, 16, 0.2))
    assert pkg.h_residual < 1e-10 and pkg.f_residual == 0
    assert pkg.leaf.C == pytest.approx(math.exp(2 * math.pi))
    assert pkg.C_measured <= pkg.leaf.C
    assert pkg.report["cusp_containment"] == 1.0
    assert pkg.gamma == pytest.approx(0.8)
    assert pkg.vertex_membership(np.array([[0j, 1 + 0j]]))[0]
    v = W.jet2(worm_leaf_h, np.array([[0j, -1 + 0j]])).value
    assert v[0] == pytest.approx(0.0, abs=1e-15)
    assert on_cut(np.array([[0j, 2 + 0j], [0j, -2 + 0j]])).tolist() == [True, False]


def test_registry():
    assert set(EXAMPLES) == {"ball", "worm_like_two_circles", "worm_like_cusp",
                             "worm_like_experimental"}
    e = get_example("ball", {"n": 3})
    assert e.domain.dim == 3 and e.has_contract
    e = get_example("worm_like_cusp", {"j": 5, "k": 4})
    assert e.worm.mu == MuCuspFamily(5, 4)
    assert not get_example("worm_like_experimental").has_contract
    with pytest.raises(KeyError):
        get_example("nope")


@pytest.mark.parametrize("mu", [MuTwoCircles(0.4), MuCuspFamily(5, 4, 0.3)])
def test_hypothesis_report_is_reproducible_from_params(mu):
    import json
    a = mu_hypothesis_report(mu, n_theta=180, seed=4)
    b = mu_hypothesis_report(mu_from_params(json.loads(json.dumps(mu.params()))), n_theta=180, seed=4)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
