import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dflab import wirtinger as W
from dflab.domain import boundary_sample
from dflab.errors import BranchCut, OutsideBox, ParamBound
from dflab.gvf import (CUTOFF_MAX_ORDER, AnnulusFieldParams, blended_field, check_good_field,
                       commutator_pairing, constant_field, cutoff_derivatives,
                       field_from_callbacks, h_from_field, obstruction_scan, psi_cutoff,
                       psi_scaling)


def _radial(scale, **kw):
    def x1(z):
        return scale * z[0]

    def x2(z):
        return scale * z[1]

    x1.dim = x2.dim = 2
    return field_from_callbacks([x1, x2], 2, **kw)


@pytest.fixture(scope="module")
def sphere_points(ball):
    dom, _ = ball
    return boundary_sample(dom, 64, seed=4)


def test_normal_field_on_sphere_is_good(sphere_points):
    rep = check_good_field(_radial(2.0), sphere_points)
    assert rep["pass"]
    assert rep["modulus_range"] == pytest.approx([1.0, 1.0])
    assert rep["max_argument"] < 1e-12 and rep["max_commutator"] == 0


def test_rotated_field_fails_argument_condition(sphere_points):
    rep = check_good_field(_radial(2.0j), sphere_points)
    assert not rep["pass"]
    assert not rep["conditions"]["argument"]["pass"]
    assert rep["conditions"]["commutator"]["pass"]


@settings(max_examples=25, deadline=None)
@given(c1=st.complex_numbers(max_magnitude=3), c2=st.complex_numbers(max_magnitude=3))
def test_constant_field_commutes(sphere_points, c1, c2):
    X = constant_field([c1, c2])
    _, dbar = X(sphere_points.z)
    assert np.all(commutator_pairing(dbar, sphere_points.delta_jet.dz) == 0)


def test_field_params_are_validated():
    with pytest.raises(ParamBound):
        constant_field([1.0, 0.0], C=1.0)
    with pytest.raises(ParamBound):
        constant_field([1.0, 0.0], epsilon=0.0)
    with pytest.raises(ParamBound):
        _radial(np.nan)(np.ones((1, 2)))


def test_dbar_of_nonholomorphic_field():
    def x1(z):
        return W.abs2(z[0]) * z[1]

    def x2(z):
        return W.conj(z[1])

    x1.dim = x2.dim = 2
    X = field_from_callbacks([x1, x2], 2)
    z = np.array([[0.3 + 0.4j, -1 + 0.5j]])
    _, dbar = X(z)
    assert np.allclose(dbar[0], [[z[0, 0] * z[0, 1], 0], [0, 1]])


@settings(max_examples=40, deadline=None)
@given(t=st.floats(-0.5, 1.5))
def test_cutoff_shape(t):
    d = cutoff_derivatives(t, 2)
    assert 0 <= d[0] <= 1 and d[1] >= 0
    e = cutoff_derivatives(1 - t, 0)
    assert abs(d[0] + e[0] - 1) < 1e-12


def test_cutoff_derivatives_match_finite_differences():
    t = np.array([0.2, 0.55, 0.9])
    D = cutoff_derivatives(t, CUTOFF_MAX_ORDER)
    h = 1e-6
    for k in range(3):
        fd = (cutoff_derivatives(t + h, k)[..., k] - cutoff_derivatives(t - h, k)[..., k]) / (2 * h)
        assert np.allclose(fd, D[..., k + 1], rtol=1e-5, atol=1e-6 * np.abs(D[..., k + 1]).max())
    with pytest.raises(ParamBound):
        cutoff_derivatives(0.5, CUTOFF_MAX_ORDER + 1)


def test_annulus_params():
    p = AnnulusFieldParams(0.8, 0.1)
    assert p.m == 5 and p.zeta == pytest.approx(1e-8)
    with pytest.raises(ParamBound):
        AnnulusFieldParams(0.8, 0.1, m=4)
    with pytest.raises(ParamBound):
        AnnulusFieldParams(0.9, 0.1)
    with pytest.raises(ParamBound):
        AnnulusFieldParams(1.0, 0.1)


@pytest.fixture(scope="module")
def cutoff():
    return AnnulusFieldParams(0.5, 0.3)


def test_psi_at_center_and_outside_bump(cutoff):
    z = cutoff.zeta
    psi, _, _, chi = psi_cutoff(np.array([1.0 + 0j]), cutoff)
    assert psi[0] == 1 and chi[0] == 1
    hy, hx = cutoff.box
    y = np.linspace(1.001 * math.sqrt(2) * z, 0.99 * hy, 5)
    w = 1 + 0.5 * hx + 1j * y
    psi, dbar, _, _ = psi_cutoff(w, cutoff)
    assert np.all(psi == 0) and np.all(dbar == 0)
    with pytest.raises(OutsideBox):
        psi_cutoff(np.array([1 + 3j * z]), cutoff)


def test_psi_dbar_matches_finite_differences(cutoff):
    hy, hx = cutoff.box
    w = np.array([1 + 0.3 * hx + 0.4j * hy, 1 - 0.2 * hx + 0.2j * hy])
    psi, dbar, dz, _ = psi_cutoff(w, cutoff)
    h = 1e-4 * cutoff.zeta
    px = (psi_cutoff(w + h, cutoff)[0] - psi_cutoff(w - h, cutoff)[0]) / (2 * h)
    py = (psi_cutoff(w + 1j * h, cutoff)[0] - psi_cutoff(w - 1j * h, cutoff)[0]) / (2 * h)
    scale = np.abs(px).max() + np.abs(py).max()
    assert np.allclose(0.5 * (px + 1j * py), dbar, atol=1e-6 * scale)
    assert np.allclose(0.5 * (px - 1j * py), dz, atol=1e-6 * scale)


def test_psi_dbar_scales_like_eps_squared():
    rep = psi_scaling(0.5, [0.4, 0.2, 0.1], ny=101, nx=11)
    assert all(r == pytest.approx(4.0, rel=0.05) for r in rep["ratios"]["dbar"])


def test_blended_field_limits(ball, cutoff):
    _, sdf = ball
    base = constant_field([1.0, 0.0], region=lambda Z: np.ones(len(Z), bool), C=4.0)
    X = blended_field(base, np.array([0, 1.0 + 0j]), cutoff, sdf, leaf_coord=1)
    hy, hx = cutoff.box
    Z = np.array([[0.1 + 0j, 1 + 0j],
                  [0.1 + 0j, 1 + 0.2 * hx + 1.9j * cutoff.zeta],
                  [0.1 + 0j, 1 + 2 * hx + 0j]])
    coef, dbar = X(Z)
    assert np.allclose(coef[0], [0, 2])
    bc, bd = base(Z[1:])
    assert coef[1:].tobytes() == bc.tobytes() and dbar[1:].tobytes() == bd.tobytes()


def test_h_from_field(sphere_points):
    rep = h_from_field(_radial(2.0, C=2.0), sphere_points)
    assert np.allclose(rep["re_h"], 0) and rep["re_ok"] and rep["im_ok"]
    assert not rep["re_equality"]
    rep = h_from_field(_radial(4.0, C=2.0), sphere_points)
    assert rep["re_ok"] and rep["re_equality"]
    assert not h_from_field(_radial(8.0, C=2.0), sphere_points)["re_ok"]
    with pytest.raises(BranchCut):
        h_from_field(_radial(-2.0), sphere_points)


def _Y(a):
    def y(z):
        return a * W.real(z[1]) + 0.0 * W.real(z[0])

    y.dim = 2
    return y


def test_obstruction_scan(cusp):
    _, _, sdf = cusp
    C = math.exp(2 * math.pi)
    rep = obstruction_scan(sdf, [_Y(0.0), _Y(0.3)], C, n_theta=180, names=["zero", "cos"])
    assert rep["pass"]
    zero, cos = rep["candidates"]
    assert zero["max_value"] == pytest.approx(0.5, rel=1e-6)
    assert zero["normalization"] == pytest.approx(0.5, rel=1e-6)
    assert cos["ad_residual"] < 1e-12
    assert {round(t, 6) for t in cos["critical_theta"]} >= {0.0, round(math.pi, 6)}
    with pytest.raises(ParamBound):
        obstruction_scan(sdf, [lambda z: -10.0 + 0.0 * W.real(z[1])], C, n_theta=8)
