import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dflab.errors import DimensionMismatch, DominationFailure, FamilyTooLarge, ParamBound
from dflab.weights import (LeafWeightParams, PointWeightParams, SmoothMaxConfig, annulus_witness,
                           cusp_containment, disc_witness, patch, point_weight,
                           property_p_witness_product, smooth_max, sphere_witness,
                           stein_variant, weight_from_callback, zero_weight)
from dflab import wirtinger as W

vals = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(vals, min_size=2, max_size=4))
def test_smooth_max_bounds_and_gradient(x):
    x = np.array(x)
    v, g, H = smooth_max(x)
    # the mollifier has support radius 1 and even symmetry in each variable
    assert x.max() - 1e-12 <= v <= x.max() + 0.5 + 1e-12
    assert np.all(g >= -1e-12) and abs(g.sum() - 1) < 1e-10
    assert np.all(np.linalg.eigvalsh(H) > -1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(vals, min_size=2, max_size=3), st.floats(-3, 3))
def test_smooth_max_translation_and_symmetry(x, c):
    x = np.array(x)
    v0, _, _ = smooth_max(x)
    v1, _, _ = smooth_max(x + c)
    v2, _, _ = smooth_max(x[::-1])
    assert abs(v1 - v0 - c) < 1e-9
    assert abs(v2 - v0) < 1e-10


def test_smooth_max_is_exact_max_when_separated():
    v, g, H = smooth_max(np.array([3.0, 1.0, 0.5]))
    assert v == pytest.approx(3.0, abs=1e-13)
    assert np.allclose(g, [1, 0, 0]) and np.allclose(H, 0)


def test_smooth_max_matches_finite_differences():
    x = np.array([0.1, 0.3, 0.2])
    _, g, H = smooth_max(x)
    h = 1e-5
    for j in range(3):
        e = np.eye(3)[j] * h
        vp, gp, _ = smooth_max(x + e)
        vm, gm, _ = smooth_max(x - e)
        assert abs((vp - vm) / (2 * h) - g[j]) < 1e-8
        assert np.allclose((gp - gm) / (2 * h), H[j], atol=1e-6)


def test_smooth_max_config_limits():
    with pytest.raises(FamilyTooLarge):
        smooth_max(np.zeros(5))
    with pytest.raises(ParamBound):
        SmoothMaxConfig(quadrature_order=10)
    with pytest.raises(ParamBound):
        SmoothMaxConfig(mollifier_radius=2.0)


def test_witnesses_validate(rng):
    Z1 = (rng.normal(size=(300, 1)) + 1j * rng.normal(size=(300, 1))) * 0.2
    rep = disc_witness(2.0, 0.4).validate(Z1)
    assert rep["n"] > 0 and rep["min_hessian"] >= 2.0 / 0.2 ** 2 * (1 - 1e-8)
    Z2 = rng.normal(size=(300, 2)) + 1j * rng.normal(size=(300, 2))
    Z2 *= rng.uniform(0.99, 1.01, (300, 1)) / np.linalg.norm(Z2, axis=1, keepdims=True)
    sw = sphere_witness(1.0, 0.4)
    assert sw.validate(Z2)["max_value"] <= 1
    with pytest.raises(ParamBound):
        disc_witness(1.0, 0.4, R=0.5)
    with pytest.raises(DimensionMismatch):
        sw.validate(Z1)


def test_annulus_witness_contains_cusp(rng):
    w = annulus_witness(1.0, 0.5, 0.8, coord=1)
    t = rng.uniform(-w.R, w.R, 2000)
    x = 1 + rng.uniform(-1, 1, 2000) * np.abs(t) ** (1 / 0.8)
    Z = np.stack([np.zeros(2000), x + 1j * t], -1)
    frac, n = cusp_containment(w, 0.8, Z, coord=1)
    assert n > 0 and frac == 1.0
    w.validate(Z)
    with pytest.raises(ParamBound):
        annulus_witness(1.0, 0.5, 1.2)


def test_product_witness_certifies_averaged_bound():
    pw = property_p_witness_product([disc_witness(2.0, 0.4), disc_witness(2.0, 0.4)])
    assert pw.hessian_bound == pytest.approx(0.5 * 2.0 / 0.2 ** 2)
    Z = np.array([[0.05 + 0.02j, -0.03j], [0.0, 0.1]])
    pw.validate(Z)


def test_point_weight_params_bounds():
    p = PointWeightParams(eta=0.5, A=1.0, B=2.0)
    assert p.zeta > p.zeta_bound and p.M > p.M_bound
    with pytest.raises(ParamBound):
        PointWeightParams(eta=0.5, A=2.0, B=1.0)
    with pytest.raises(ParamBound):
        PointWeightParams(eta=0.5, A=1.0, B=2.0, zeta=0.5)
    with pytest.raises(ParamBound):
        PointWeightParams(eta=0.9999, A=50.0, B=400.0)


def test_point_weight_range():
    params = PointWeightParams(eta=0.3, A=0.5, B=1.5)
    w = disc_witness(params.M, 0.4, dim=2)
    p = np.zeros(2, complex)
    phi = point_weight(p, w, params)
    v = phi.value(np.zeros((1, 2)))
    assert v[0] == pytest.approx(params.A)
    Z = np.array([[0.01 + 0.01j, -0.02j]])
    assert phi.region(Z).all()
    assert phi.value(Z)[0] <= params.B


def test_leaf_params_bounds():
    C = np.exp(2 * np.pi)
    p = LeafWeightParams(eta=0.5, A=1.0, B_tilde=1.0 + 2 * np.log(C) + 1, C=C, D=1.0)
    assert 1 < p.E and p.M > p.M_bound
    lo, hi = p.phi_range
    assert lo < hi < 0
    with pytest.raises(ParamBound):
        LeafWeightParams(eta=0.5, A=1.0, B_tilde=2.0, C=C, D=1.0)


def _lin(c):
    def f(z):
        return c + W.real(z[0])

    f.dim = 1
    return f


def test_patch_reduces_to_member_away_from_overlap():
    w1 = weight_from_callback(_lin(0.0), 1, "a")
    w2 = weight_from_callback(_lin(1.0), 1, "b")
    r1 = lambda Z: np.atleast_2d(Z)[:, 0].real < 0.5  # noqa: E731
    r2 = lambda Z: np.atleast_2d(Z)[:, 0].real > -0.5  # noqa: E731
    target = lambda Z: np.ones(len(np.atleast_2d(Z)), bool)  # noqa: E731
    out = patch([w1, w2], [r1, r2], target, 0.1, 0.5)
    Z = np.array([[-0.9 + 0j], [0.9 + 0j], [0.0 + 0j]])
    v = out.value(Z)
    assert v[0] == w1.value(Z[:1])[0]
    assert v[1] == w2.value(Z[1:2])[0]
    # w2 dominates by 1 > xi on the overlap, so the smooth max equals it
    assert v[2] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DominationFailure):
        patch([w1, w2], [r1, r2], target, 0.1, 0.5, boundary_samples=[np.array([[0.5 + 0j]]),
                                                                      np.array([[-0.5 + 0j]])])


def test_patch_single_member_is_identity():
    w = zero_weight(2)
    assert patch([w], [w.region], w.region, 0.1, 0.5) is w


def test_stein_variant_of_zero_weight():
    w = stein_variant(zero_weight(2))
    assert w.name == "zero_stein"
    with pytest.raises(ParamBound):
        stein_variant(weight_from_callback(_lin(0.0), 1))


def test_point_weight_estimate_and_bound_on_region(ball, rng):
    dom, sdf = ball
    from dflab.weights import weight_min_eigenvalue
    params = PointWeightParams(eta=0.5, A=1.0, B=2.0)
    p = np.array([1.0 + 0j, 0j])
    w = sphere_witness(params.M, 0.4)
    phi = point_weight(p, w, params)
    Z = dom.sampler(20000, rng)
    Z = Z[phi.region(Z)]
    assert len(Z) > 10
    v = phi.value(Z)
    assert np.all(np.abs(v) <= params.B)
    assert np.all(weight_min_eigenvalue(phi, sdf, Z, params.eta) > 0)


def test_leaf_weight_bound_and_positivity(cusp):
    from dflab.examples import leaf_package_for_worm_like, worm_k_grid, worm_leaf_weight_builder
    from dflab.weights import leaf_theta_check
    p, _, sdf = cusp
    Zk = worm_k_grid(p, n_r=4, n_theta=12, vertex_exclusion=0.2)
    pkg = leaf_package_for_worm_like(p, Zk)
    w = worm_leaf_weight_builder(pkg, sdf, Zk)(0.3)
    prm = w.provenance[1]["params"]
    off = Zk + np.array([1e-4 + 1e-4j, 0])
    Z = np.concatenate([Zk, off])
    Z = Z[w.region(Z)]
    assert np.all(np.abs(w.value(Z)) <= prm.B_tilde)
    res = leaf_theta_check(pkg.leaf, prm, w.provenance[1]["r"], sdf, Zk)
    assert np.all(res["schur"] > 0) and np.all(res["transverse"] > 0)
    ext = stein_variant(w)
    assert ext.name == "leaf_stein"
    assert ext.params["sign"] == -1 and ext.params["r"] <= w.params["r"]
    assert np.all(ext.value(Zk) >= prm.A)
