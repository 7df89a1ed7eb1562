"""Implicit domains, signed distance with jets, frames and boundary sampling."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import AmbiguousFootPoint, EmptyBoundary, NoConvergence
from .wirtinger import WirtingerJet2, assemble, real_jet


def to_real(Z):
    Z = np.atleast_2d(Z)
    return np.concatenate([Z.real, Z.imag], axis=-1)


def to_complex(X):
    n = X.shape[-1] // 2
    return X[..., :n] + 1j * X[..., n:]


def make_rng(seed, *key):
    """Counter-based generator keyed by (seed, key...)."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in key]])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ImplicitDomain:
    """Domain {rho < 0} in C^n.

    ``sampler(budget, rng)`` may supply boundary points in closed form and
    ``k_predicate(Z)`` flags points of the weakly pseudoconvex set.
    """

    rho: Callable
    dim: int
    bbox: np.ndarray
    name: str = "domain"
    diameter: Optional[float] = None
    sampler: Optional[Callable] = None
    k_predicate: Optional[Callable] = None
    excluded: Optional[Callable] = None

    @property
    def diam(self):
        if self.diameter is not None:
            return float(self.diameter)
        b = np.asarray(self.bbox)
        return float(np.max(b[:, 1] - b[:, 0]))

    def rho_jets(self, Z):
        """Real value, gradient and Hessian of rho at points Z (N, n)."""
        v, G, H = real_jet(self.rho, np.atleast_2d(Z))
        return np.real(v), np.real(G), np.real(H)

    def rho_value(self, Z):
        return np.real(np.asarray(self.rho([np.asarray(c) for c in np.atleast_2d(Z).T])))


@dataclass(frozen=True)
class SignedDistanceField:
    parent: ImplicitDomain
    newton_tol: float = 1e-12
    max_iter: int = 60
    tube_fraction: float = 0.05

    @property
    def tube(self):
        return self.tube_fraction * self.parent.diam


@dataclass(frozen=True)
class DistanceJets:
    """Signed distance data at a batch of points."""

    z: np.ndarray
    foot: np.ndarray
    jet: WirtingerJet2
    normal_real: np.ndarray
    hess_real: np.ndarray


def _project(dom, X, tol, max_iter):
    """Newton projection x <- x - rho grad/|grad|^2 onto the zero set."""
    X = X.copy()
    for _ in range(max_iter):
        v, G, _ = dom.rho_jets(to_complex(X))
        g2 = np.sum(G * G, axis=-1)
        if np.any(g2 < 1e-28):
            raise NoConvergence("vanishing gradient of the defining function")
        X = X - (v / g2)[:, None] * G
        if np.all(np.abs(v) < tol):
            return X
    v = dom.rho_value(to_complex(X))
    if np.all(np.abs(v) < 10 * tol):
        return X
    raise NoConvergence("projection did not converge")


def _closest(dom, X0, Xs, tol, max_iter, extra=2):
    """Lagrange-Newton solve of xi + t grad rho(xi) = x, rho(xi) = 0."""
    N, d = X0.shape
    xi = Xs.copy()
    _, G, _ = dom.rho_jets(to_complex(xi))
    t = np.sum((X0 - xi) * G, -1) / np.sum(G * G, -1)
    done = 0
    for it in range(max_iter + extra):
        v, G, H = dom.rho_jets(to_complex(xi))
        F = np.concatenate([xi + t[:, None] * G - X0, v[:, None]], axis=1)
        J = np.zeros((N, d + 1, d + 1))
        J[:, :d, :d] = np.eye(d) + t[:, None, None] * H
        J[:, :d, d] = G
        J[:, d, :d] = G
        step = np.linalg.solve(J, -F[..., None])[..., 0]
        xi = xi + step[:, :d]
        t = t + step[:, d]
        scale = 1.0 + np.linalg.norm(X0, axis=-1)
        if np.all(np.linalg.norm(step[:, :d], axis=-1) < tol * scale) and np.all(np.abs(v) < tol):
            done += 1
            if done > extra:
                break
    else:
        if done == 0:
            raise NoConvergence("foot-point iteration did not converge")
    v, G, H = dom.rho_jets(to_complex(xi))
    return xi, t, v, G, H


def distance_jets(sdf, Z, check_unique=True):
    """Signed distance, foot points and jets at points Z of shape (N, n).

    The gradient of delta is the unit normal at the foot point and its real
    Hessian is S (I + delta S)^{-1}, with S the shape operator of the level set
    of rho through the foot point.
    """
    Z = np.atleast_2d(np.asarray(Z, complex))
    dom = sdf.parent
    X0 = to_real(Z)
    Xs = _project(dom, X0, sdf.newton_tol, sdf.max_iter)
    xi, t, v, G, H = _closest(dom, X0, Xs, sdf.newton_tol, sdf.max_iter)
    gn = np.linalg.norm(G, axis=-1)
    Nrm = G / gn[:, None]
    delta = np.sum((X0 - xi) * Nrm, axis=-1)
    d = X0.shape[1]
    P = np.eye(d) - Nrm[:, :, None] * Nrm[:, None, :]
    S = P @ H @ P / gn[:, None, None]
    M = np.eye(d) + delta[:, None, None] * S
    if check_unique:
        # the distance must be a local minimum along the level set
        tang = np.linalg.eigvalsh(P @ M @ P + Nrm[:, :, None] * Nrm[:, None, :])
        if np.any(tang[:, 0] <= 1e-9):
            raise AmbiguousFootPoint("point lies beyond a focal point of the boundary")
        pert = 0.05 * np.abs(delta)[:, None] * np.roll(Nrm, 1, axis=-1)
        Xs2 = _project(dom, X0 + pert, sdf.newton_tol, sdf.max_iter)
        xi2, *_ = _closest(dom, X0, Xs2, sdf.newton_tol, sdf.max_iter)
        gap = np.linalg.norm(xi2 - xi, axis=-1)
        if np.any(gap > 10 * sdf.newton_tol * (1 + np.linalg.norm(X0, axis=-1)) + 1e-9):
            raise AmbiguousFootPoint("restarted foot-point iteration disagrees")
    Hd = S @ np.linalg.inv(M)
    Hd = 0.5 * (Hd + np.swapaxes(Hd, -1, -2))
    jet = assemble(delta, Nrm, Hd)
    return DistanceJets(Z, to_complex(xi), jet, Nrm, Hd)


def signed_distance(sdf, z):
    """Wirtinger 2-jet of the signed distance at one point or a batch."""
    z = np.asarray(z, complex)
    dj = distance_jets(sdf, z)
    return dj.jet[0] if z.ndim == 1 else dj.jet


def foot_point(sdf, z):
    z = np.asarray(z, complex)
    dj = distance_jets(sdf, z)
    return dj.foot[0] if z.ndim == 1 else dj.foot


def jet_derivative(fn, sdf, Z, h=1e-4):
    """Forward-difference d/dz and d/dzbar of a quantity built from delta jets.

    ``fn(DistanceJets)`` returns an array with leading sample axis; the result
    has an extra trailing axis indexing the coordinate.
    """
    Z = np.atleast_2d(np.asarray(Z, complex))
    n = Z.shape[1]
    base = fn(distance_jets(sdf, Z, check_unique=False))
    dx, dy = [], []
    for j in range(n):
        e = np.zeros(n, complex)
        e[j] = h
        dx.append((fn(distance_jets(sdf, Z + e, check_unique=False)) - base) / h)
        dy.append((fn(distance_jets(sdf, Z + 1j * e, check_unique=False)) - base) / h)
    dx, dy = np.stack(dx, -1), np.stack(dy, -1)
    return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


@dataclass(frozen=True)
class BoundaryPoint:
    """Boundary data, batched over a leading sample axis.

    ``normal`` holds the components of nu = 4 sum dδ/dzbar_j d/dz_j and
    ``tangent_basis`` has shape (N, n, n-1) with orthonormal columns.
    """

    z: np.ndarray
    delta_jet: WirtingerJet2
    normal: np.ndarray
    tangent_basis: np.ndarray

    def __len__(self):
        return len(self.z)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            idx = slice(idx, idx + 1)
        return BoundaryPoint(self.z[idx], self.delta_jet[idx], self.normal[idx],
                             self.tangent_basis[idx])


def tangent_frame(dz):
    """Orthonormal basis of {v : sum dz_j v_j = 0} (batched)."""
    N, n = dz.shape
    u = np.conj(dz) / np.linalg.norm(dz, axis=-1, keepdims=True)
    M = np.concatenate([u[:, :, None], np.broadcast_to(np.eye(n), (N, n, n))], axis=2)
    Q, _ = np.linalg.qr(M)
    return Q[:, :, 1:]


def boundary_points(sdf, Z):
    """Boundary frames at points assumed to lie on the boundary."""
    dj = distance_jets(sdf, Z, check_unique=False)
    jet = dj.jet
    return BoundaryPoint(dj.z, jet, 4.0 * np.conj(jet.dz), tangent_frame(jet.dz))


@dataclass(frozen=True)
class LeviSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    null_mask: np.ndarray
    null_tol: float = 1e-6

    @property
    def min_eigenvalue(self):
        return self.eigenvalues[..., 0]


def levi_spectrum(bp, null_tol=1e-6):
    """Eigen-decomposition of the complex Hessian of delta on tangent vectors."""
    T = bp.tangent_basis
    L = np.conj(np.swapaxes(T, -1, -2)) @ bp.delta_jet.hess @ T
    L = 0.5 * (L + np.conj(np.swapaxes(L, -1, -2)))
    w, U = np.linalg.eigh(L)
    return LeviSpectrum(w, T @ U, np.abs(w) < null_tol, null_tol)


def _generic_candidates(dom, budget, rng, tol):
    b = np.asarray(dom.bbox, float)
    n = dom.dim
    X = rng.uniform(b[:, 0], b[:, 1], size=(max(64, 8 * budget), 2 * n))
    Z = to_complex(X)
    if dom.excluded is not None:
        Z = Z[~dom.excluded(Z)]
    v = dom.rho_value(Z)
    if not (np.any(v < 0) and np.any(v > 0)):
        raise EmptyBoundary("no sign change of the defining function in the box")
    keep = []
    for Zc in np.array_split(Z, max(1, len(Z) // 512)):
        try:
            Xp = _project(dom, to_real(Zc), tol, 60)
        except NoConvergence:
            continue
        keep.append(to_complex(Xp))
    if not keep:
        raise EmptyBoundary("projection onto the boundary failed")
    Z = np.concatenate(keep)
    ok = np.abs(dom.rho_value(Z)) < 1e-10
    if dom.excluded is not None:
        ok &= ~dom.excluded(Z)
    return Z[ok]


def boundary_sample(dom, budget, seed, newton_tol=1e-12, levi_threshold=1e-3,
                    weak_fraction=0.5):
    """Deterministic boundary sample with oversampling of the weak locus.

    A fraction ``weak_fraction`` of the budget is drawn from candidates whose
    smallest Levi eigenvalue is below ``levi_threshold`` (or flagged by the
    domain's weak-set predicate), the rest uniformly from all candidates.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = make_rng(seed, 0)
    if dom.sampler is not None:
        Z = dom.sampler(3 * budget, rng)
    else:
        Z = _generic_candidates(dom, budget, rng, newton_tol)
    if len(Z) == 0:
        raise EmptyBoundary("no boundary candidates")
    sdf = SignedDistanceField(dom, newton_tol)
    bp = boundary_points(sdf, Z)
    lam = levi_spectrum(bp).min_eigenvalue
    weak = lam < levi_threshold
    if dom.k_predicate is not None:
        weak |= dom.k_predicate(Z)
    n_weak = min(int(round(weak_fraction * budget)), int(weak.sum()))
    idx_w = np.flatnonzero(weak)
    idx_w = idx_w[rng.permutation(len(idx_w))[:n_weak]]
    rest = np.setdiff1d(np.arange(len(Z)), idx_w)
    idx_r = rest[rng.permutation(len(rest))[:budget - n_weak]]
    idx = np.sort(np.concatenate([idx_w, idx_r]))
    return bp[idx]


def boundary_csv_rows(bp, null_tol=1e-6):
    """Rows for CSV export: coordinates, rho residual, Levi eigenvalues."""
    lev = levi_spectrum(bp, null_tol).eigenvalues
    rows = []
    for k in range(len(bp)):
        row = []
        for c in bp.z[k]:
            row += [float(c.real), float(c.imag)]
        row.append(float(bp.delta_jet.value[k]))
        row += [float(x) for x in lev[k]]
        rows.append(row)
    return rows
