import numpy as np
import pytest

from dflab.domain import boundary_points, boundary_sample
from dflab.errors import NoNullSpace
from dflab.examples import worm_base_field, worm_k_grid
from dflab.forms import (NonPSDWarning, alpha_at, alpha_projection_residual, beta_at, beta_matrix,
                         dbar_h_residual, dc_alpha_identity_residual, form_dump)


@pytest.fixture(scope="module")
def k_points(cusp):
    p, dom, sdf = cusp
    Z = worm_k_grid(p, n_r=4, n_theta=8, vertex_exclusion=0.2)
    return boundary_points(sdf, Z)


def test_alpha_on_k_matches_closed_form(k_points):
    a = alpha_at(k_points)
    z2 = k_points.z[:, 1]
    assert np.allclose(a.pi10[:, 1], 1j / (2 * z2), atol=1e-8)
    assert np.array_equal(a.pi01, np.conj(a.pi10))
    assert np.max(alpha_projection_residual(k_points)) < 1e-8


def test_beta_on_k_vanishes_on_null_direction(k_points):
    B = beta_at(k_points).form
    assert np.allclose(B[:, 1, :], 0, atol=1e-7)
    assert np.allclose(B[:, :, 1], 0, atol=1e-7)
    assert np.all(beta_at(k_points).min_eigenvalue > -1e-8)


def test_beta_is_hermitian_and_psd_on_ball(ball):
    dom, sdf = ball
    bp = boundary_sample(dom, 30, seed=1)
    B = beta_matrix(bp.delta_jet)
    assert np.allclose(B, np.conj(np.swapaxes(B, 1, 2)))
    assert np.all(np.linalg.eigvalsh(B)[:, 0] > -1e-12)


def test_beta_warns_when_indefinite():
    from dflab.wirtinger import WirtingerJet2

    class Fake:
        pass

    jet = WirtingerJet2(np.zeros(1), np.array([[1.0 + 0j, 0j]]), np.zeros((1, 2, 2), complex),
                        np.eye(2, dtype=complex)[None])
    bp = Fake()
    bp.delta_jet = jet
    with pytest.warns(NonPSDWarning):
        beta_at(bp)


def test_dc_alpha_identity_and_first_order_convergence(k_points, cusp):
    _, _, sdf = cusp
    r1 = dc_alpha_identity_residual(sdf, k_points, h=1e-3).max()
    r2 = dc_alpha_identity_residual(sdf, k_points, h=5e-4).max()
    # forward differences: halving h at least halves the residual
    assert r2 <= 0.5 * r1


def test_dbar_h_identity_for_worm_base_field(k_points):
    X = worm_base_field()
    res = dbar_h_residual(k_points, X)
    assert np.max(res) < 1e-8


def test_strictly_pseudoconvex_point_has_no_null_space(ball):
    dom, _ = ball
    bp = boundary_sample(dom, 5, seed=0)
    with pytest.raises(NoNullSpace):
        dc_alpha_identity_residual(None, bp)


def test_form_dump_is_json_ready(k_points):
    import json
    recs = form_dump(k_points[0])
    json.dumps(recs)
    assert len(recs) == 1
