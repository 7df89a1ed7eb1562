"""The 1-form alpha, the (1,1)-form beta and their structural identities.

Notation at a point: g = d(delta)/dz, Q = d^2 delta/dz dzbar and
S = d^2 delta/dz dz.  Hermitian form matrices use the convention
H(v) = v* H v (see :mod:`dflab.wirtinger`).  d^c = i(d - dbar).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .domain import jet_derivative, levi_spectrum
from .errors import BranchCut, NoNullSpace
from .wirtinger import min_eigenvalue


@dataclass(frozen=True)
class AlphaAtPoint:
    pi10: np.ndarray
    pi01: np.ndarray


@dataclass(frozen=True)
class BetaAtPoint:
    form: np.ndarray

    @property
    def min_eigenvalue(self):
        return min_eigenvalue(self.form)


class NonPSDWarning(UserWarning):
    pass


def _gQS(jet):
    return jet.dz, jet.dzdzbar, jet.dzdz


def pi10_from_jet(jet):
    """(1,0) part of alpha: 2 sum_j g_j d(d delta/dzbar_j)."""
    g, Q, _ = _gQS(jet)
    return 2.0 * np.einsum("...kj,...j->...k", Q, g)


def pi10_alternative(jet):
    """Equivalent expression -2 sum_j conj(g_j) d(d delta/dz_j)."""
    g, _, S = _gQS(jet)
    return -2.0 * np.einsum("...kj,...j->...k", S, np.conj(g))


def alpha_at(bp):
    a = pi10_from_jet(bp.delta_jet)
    return AlphaAtPoint(a, np.conj(a))


def alpha_projection_residual(bp):
    """Per-point max-norm gap between the two expressions for the (1,0) part."""
    return np.max(np.abs(pi10_from_jet(bp.delta_jet) - pi10_alternative(bp.delta_jet)), axis=-1)


def beta_matrix(jet):
    """Form matrix of beta: S* (I - 4 g g*) S."""
    g, _, S = _gQS(jet)
    n = g.shape[-1]
    P = np.eye(n) - 4.0 * g[..., :, None] * np.conj(g)[..., None, :]
    Sh = np.conj(np.swapaxes(S, -1, -2))
    return Sh @ P @ S


def beta_at(bp, warn_tol=1e-6):
    B = beta_matrix(bp.delta_jet)
    lam = min_eigenvalue(B)
    if np.any(lam < -warn_tol):
        warnings.warn(f"beta has eigenvalue {float(lam.min()):.3e}", NonPSDWarning)
    return BetaAtPoint(B)


def _null_basis(bp, null_tol):
    spec = levi_spectrum(bp, null_tol)
    if not np.all(spec.null_mask.any(axis=-1)):
        raise NoNullSpace("Levi form is definite at some point")
    return spec


def dc_alpha_matrix(sdf, Z, h=1e-4):
    """(1,1) part of d^c alpha as a form matrix, by forward differences of alpha."""
    _, D = jet_derivative(lambda dj: pi10_from_jet(dj.jet), sdf, Z, h)
    # coefficient of i dz_k ^ dzbar_j is d a_k/dzbar_j + conj(d a_j/dzbar_k)
    c = D + np.conj(np.swapaxes(D, -1, -2))
    return np.swapaxes(c, -1, -2)


def dc_alpha_identity_residual(sdf, bp, h=1e-4, null_tol=1e-6):
    """Max-norm of (d^c alpha + 2 beta) on the Levi null space, per point."""
    spec = _null_basis(bp, null_tol)
    M = dc_alpha_matrix(sdf, bp.z, h) + 2.0 * beta_matrix(bp.delta_jet)
    out = np.empty(len(bp))
    for i in range(len(bp)):
        V = spec.eigenvectors[i][:, spec.null_mask[i]]
        out[i] = np.max(np.abs(V.conj().T @ M[i] @ V))
    return out


def dbar_h_residual(bp, X, null_tol=1e-6):
    """Residual of the identity dbar h - pi01 alpha = -(1/2) e^{-2h} sum dδ([X, d/dzbar_j]) dzbar_j.

    ``X.evaluate(Z)`` must return the coefficients (N, n) and their
    dzbar-derivatives (N, n, n) indexed [point, component k, coordinate j].
    h = (1/2) log(X delta) on the principal branch.
    """
    spec = _null_basis(bp, null_tol)
    coef, dbar = X.evaluate(bp.z)
    g, Q, _ = _gQS(bp.delta_jet)
    Xd = np.einsum("nk,nk->n", coef, g)
    if np.any(np.abs(np.angle(Xd)) >= np.pi - 0.1):
        raise BranchCut("X delta is too close to the negative real axis")
    # dbar of X delta by the product rule: dX^k/dzbar_j g_k + X^k d g_k/dzbar_j
    dXd = np.einsum("nkj,nk->nj", dbar, g) + np.einsum("nk,nkj->nj", coef, Q)
    dbar_h = 0.5 * dXd / Xd[:, None]
    pi01 = np.conj(pi10_from_jet(bp.delta_jet))
    comm = -np.einsum("nkj,nk->nj", dbar, g)
    lhs = dbar_h - pi01 + 0.5 * comm / Xd[:, None]
    out = np.empty(len(bp))
    for i in range(len(bp)):
        V = spec.eigenvectors[i][:, spec.null_mask[i]]
        out[i] = np.max(np.abs(lhs[i] @ np.conj(V)))
    return out


def form_dump(bp, null_tol=1e-6):
    """Per-point JSON-ready records of alpha, beta and Levi eigenvalues."""
    a = alpha_at(bp).pi10
    B = beta_matrix(bp.delta_jet)
    lev = levi_spectrum(bp, null_tol).eigenvalues
    res = alpha_projection_residual(bp)
    out = []
    for i in range(len(bp)):
        out.append({
            "point": [[float(c.real), float(c.imag)] for c in bp.z[i]],
            "alpha_pi10": [[float(c.real), float(c.imag)] for c in a[i]],
            "beta_matrix": [[[float(c.real), float(c.imag)] for c in row] for row in B[i]],
            "levi_eigenvalues": [float(x) for x in lev[i]],
            "residuals": {"alpha_projection": float(res[i])},
        })
    return out
