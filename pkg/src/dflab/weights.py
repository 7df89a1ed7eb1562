"""Weight functions: Property (P) witnesses, point and leaf weights, patching.

A weight is evaluated through Wirtinger 2-jets at batches of points.  The
boundary inequality it must satisfy is

    i ddbar phi + 2 beta - i eta/(1-eta) (dphi - 2 pi10 alpha) ^ conj(...) > 0,

assembled by :func:`weight_form` from the weight jets and the signed-distance
jets at the same points.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import wirtinger as W
from .domain import distance_jets
from .errors import (DimensionMismatch, DominationFailure, EstimateFailure, FamilyTooLarge,
                     LogDomain, ParamBound, ThetaNotPositive)
from .forms import beta_matrix, pi10_from_jet
from .wirtinger import WirtingerJet2, jet2, min_eigenvalue, wedge


def _dot_mask(Z):
    return np.ones(len(np.atleast_2d(Z)), bool)


# ------------------------------------------------------------------ witnesses

@dataclass(frozen=True)
class PropertyPWitness:
    """A function 0 <= lambda <= 1 with i ddbar lambda >= M/R^2 on ``region``.

    ``lam`` is a jet callback on C^dim; ``region(Z)`` returns a boolean mask.
    """

    lam: Callable
    M: float
    r: float
    R: float
    region: Callable
    dim: int
    name: str = "witness"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.M > 0 and self.r > 0):
            raise ParamBound("M and r must be positive")
        if not 0 < self.R < self.r:
            raise ParamBound("need 0 < R < r")

    @property
    def hessian_bound(self):
        return self.M / self.R ** 2

    def validate(self, samples, rtol=1e-8):
        """Check the witness invariants on the samples inside the region."""
        Z = np.atleast_2d(np.asarray(samples, complex))
        if Z.shape[1] != self.dim:
            raise DimensionMismatch(f"witness has dimension {self.dim}")
        Z = Z[self.region(Z)]
        if len(Z) == 0:
            return {"n": 0, "min_value": None, "max_value": None, "min_hessian": None}
        jet = jet2(self.lam, Z)
        v = jet.value
        lo = float(min_eigenvalue(jet.hess).min())
        if np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
            raise ParamBound(f"witness leaves [0, 1]: range [{v.min():.3g}, {v.max():.3g}]")
        if lo < self.hessian_bound * (1 - rtol):
            raise ParamBound(f"witness Hessian {lo:.4g} below M/R^2 = {self.hessian_bound:.4g}")
        return {"n": int(len(Z)), "min_value": float(v.min()), "max_value": float(v.max()),
                "min_hessian": lo}


def disc_witness(M, r, dim=1, R=None):
    """lambda = (M/R^2)|w|^2 on the ball |w| < R/sqrt(M) in C^dim."""
    R = 0.5 * r if R is None else R

    def lam(w):
        return (M / R ** 2) * sum(W.abs2(c) for c in w)

    lam.dim = dim

    def region(Z):
        return np.sum(np.abs(np.atleast_2d(Z)) ** 2, axis=-1) <= R ** 2 / M

    return PropertyPWitness(lam, M, r, R, region, dim, "disc", {"M": M, "r": r, "R": R})


def annulus_witness(M, r, gamma, n=2, coord=0, R=None, center=1.0):
    """Witness at the vertex of a cusp with exponent gamma.

    lambda = (2M/R^2)(Re z_c - 1)^2 + (M/R^2) sum_{j != c} |z_j|^2, with
    R < min(r, (2M)^{-gamma/(2(1-gamma))}) so that the cusp points
    |Re z_c - 1| <= |Im z_c|^{1/gamma} within B(p, R) satisfy lambda <= 1.
    """
    if not 0 < gamma < 1:
        raise ParamBound("gamma must lie in (0, 1)")
    cap = min(r, (2 * M) ** (-gamma / (2 * (1 - gamma))))
    R = 0.5 * cap if R is None else R
    if not 0 < R < cap:
        raise ParamBound(f"R must lie in (0, {cap:.4g})")

    def lam(z):
        out = (2 * M / R ** 2) * W.power(W.real(z[coord]) - center, 2)
        for j in range(n):
            if j != coord:
                out = out + (M / R ** 2) * W.abs2(z[j])
        return out

    lam.dim = n

    def region(Z):
        Z = np.atleast_2d(Z)
        v = (2 * M / R ** 2) * (Z[:, coord].real - center) ** 2
        v = v + (M / R ** 2) * (np.sum(np.abs(Z) ** 2, -1) - np.abs(Z[:, coord]) ** 2)
        return v <= 1.0

    return PropertyPWitness(lam, M, r, R, region, n, "annulus",
                            {"M": M, "r": r, "gamma": gamma, "R": R, "coord": coord,
                             "center": center})


def cusp_containment(w, gamma, Z, coord=0, center=1.0):
    """Fraction of cusp points |Re z_c - 1| <= |Im z_c|^{1/gamma} in B(p, R) inside the region."""
    Z = np.atleast_2d(Z)
    zc = Z[:, coord]
    p = np.zeros(Z.shape[1], complex)
    p[coord] = center
    cusp = np.abs(zc.real - center) <= np.abs(zc.imag) ** (1 / gamma)
    near = np.linalg.norm(Z - p, axis=-1) <= w.R
    sel = cusp & near
    if not sel.any():
        return 1.0, 0
    return float(np.mean(w.region(Z[sel]))), int(sel.sum())


def property_p_witness_product(witnesses):
    """Average of one-variable witnesses lambda_j(z_j) over the coordinates.

    Each factor must certify Hessian (n-m) M / R^2 for the product to certify
    M / R^2, so the product's M is the factors' M divided by their count.
    """
    if not witnesses:
        raise ParamBound("empty witness list")
    if len(witnesses) == 1:
        return witnesses[0]
    if any(w.dim != 1 for w in witnesses):
        raise DimensionMismatch("product witness needs one-variable factors")
    R = min(w.R for w in witnesses)
    r = min(w.r for w in witnesses)
    k = len(witnesses)
    bound = min(w.hessian_bound for w in witnesses) / k

    def lam(z):
        return sum(w.lam([z[j]]) for j, w in enumerate(witnesses)) * (1.0 / k)

    lam.dim = k

    def region(Z):
        Z = np.atleast_2d(Z)
        return np.all([w.region(Z[:, j:j + 1]) for j, w in enumerate(witnesses)], axis=0)

    return PropertyPWitness(lam, bound * R ** 2, r, R, region, k, "product",
                            {"factors": [w.params for w in witnesses]})


def sphere_witness(M, r, n=2, R=None):
    """lambda = 1/2 + (M/R^2)(|z|^2 - 1) on the shell where it lies in [0, 1]."""
    R = 0.5 * r if R is None else R
    c = M / R ** 2

    def lam(z):
        return 0.5 + c * (sum(W.abs2(x) for x in z) - 1.0)

    lam.dim = n

    def region(Z):
        return np.abs(np.sum(np.abs(np.atleast_2d(Z)) ** 2, -1) - 1.0) <= 0.5 / c

    return PropertyPWitness(lam, M, r, R, region, n, "sphere", {"M": M, "r": r, "R": R})


# ------------------------------------------------------------------- weights

@dataclass(frozen=True)
class WeightFunction:
    """A real weight on C^dim evaluated through Wirtinger 2-jets.

    ``evaluator(Z)`` returns a :class:`WirtingerJet2` for points Z (N, dim)
    and ``region(Z)`` the mask of points where the weight is defined.
    ``provenance`` records the builder and its arguments so that the weight
    can be rebuilt (see :func:`stein_variant`).
    """

    evaluator: Callable
    dim: int
    region: Callable = _dot_mask
    name: str = "weight"
    params: dict = field(default_factory=dict)
    bound: Optional[float] = None
    provenance: Optional[tuple] = None

    def jets(self, Z):
        return self.evaluator(np.atleast_2d(np.asarray(Z, complex)))

    def value(self, Z):
        return self.jets(Z).value

    def to_dict(self):
        return {"name": self.name, "params": _jsonable(self.params), "bound": self.bound}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (int, float, str, bool)) or x is None:
        return x
    return repr(x)


def weight_from_callback(f, dim, name="weight", params=None, region=_dot_mask, bound=None,
                         provenance=None):
    """Wrap a jet callback f(z) as a weight."""
    return WeightFunction(lambda Z: jet2(f, Z), dim, region, name, dict(params or {}), bound,
                          provenance)


def zero_weight(dim):
    def f(z):
        return 0.0 * W.real(z[0])

    f.dim = dim
    return weight_from_callback(f, dim, "zero", bound=0.0, provenance=("zero", {"dim": dim}))


def weight_form(phi, djet, eta):
    """Form matrix of i ddbar phi + 2 beta - eta/(1-eta) i w ^ conj(w), w = dphi - 2 pi10."""
    if not 0 < eta < 1:
        raise ParamBound("eta must lie in (0, 1)")
    w = phi.dz - 2.0 * pi10_from_jet(djet)
    return phi.hess + 2.0 * beta_matrix(djet) - (eta / (1 - eta)) * wedge(w, w)


def stein_form(phi, djet, eta):
    """Exterior analogue: i ddbar phi - 2 beta - 1/(1-eta) i w ^ conj(w), w = dphi + 2 pi10."""
    if not 0 < eta < 1:
        raise ParamBound("eta must lie in (0, 1)")
    w = phi.dz + 2.0 * pi10_from_jet(djet)
    return phi.hess - 2.0 * beta_matrix(djet) - (1.0 / (1 - eta)) * wedge(w, w)


def weight_min_eigenvalue(weight, sdf, Z, eta, stein=False):
    """Per-point min eigenvalue of the weight inequality form at points Z."""
    Z = np.atleast_2d(np.asarray(Z, complex))
    dj = distance_jets(sdf, Z, check_unique=False)
    phi = weight.jets(Z)
    form = (stein_form if stein else weight_form)(phi, dj.jet, eta)
    return min_eigenvalue(form)


def _require_positive(lam, Z, what):
    k = int(np.argmin(lam))
    if not lam[k] > 0:
        raise EstimateFailure(f"{what} loses positivity", Z[k], float(lam[k]))


# --------------------------------------------------------------- point weight

@dataclass(frozen=True)
class PointWeightParams:
    """Constants for the point weight; zeta and M default to 1.1 x their lower bounds."""

    eta: float
    A: float
    B: float
    zeta: Optional[float] = None
    M: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ParamBound("eta must lie in (0, 1)")
        if not 0 < self.A < self.B:
            raise ParamBound("need 0 < A < B")
        if self.zeta is None:
            object.__setattr__(self, "zeta", 1.1 * self.zeta_bound)
        if not self.zeta > self.zeta_bound:
            raise ParamBound(f"zeta must exceed {self.zeta_bound:.6g}")
        with np.errstate(over="ignore", invalid="ignore"):
            mb = self.M_bound
        if not (np.isfinite(mb) and mb > 0):
            raise ParamBound("constants overflow double precision at this eta")
        if self.M is None:
            object.__setattr__(self, "M", 1.1 * mb)
        if not self.M > self.M_bound:
            raise ParamBound(f"M must exceed {self.M_bound:.6g}")

    @property
    def zeta_bound(self):
        return self.eta / (1 - self.eta)

    @property
    def M_bound(self):
        A, B, z = self.A, self.B, self.zeta
        return (np.exp(A * z) - np.exp(-B * z)) / (np.exp(-A * z) - np.exp(-B * z))

    @property
    def r_coefficient(self):
        """zeta^{-1} e^{-B zeta}(M(e^{-A zeta} - e^{-B zeta}) - (e^{A zeta} - e^{-B zeta}))."""
        A, B, z, M = self.A, self.B, self.zeta, self.M
        return (np.exp(-B * z) * (M * (np.exp(-A * z) - np.exp(-B * z))
                                  - (np.exp(A * z) - np.exp(-B * z))) / z)

    @property
    def alpha_coefficient(self):
        eta, z = self.eta, self.zeta
        return 4 * eta * z / ((1 - eta) * z - eta)


def point_weight_radius(params, sdf, Z_near):
    """Largest r allowed by the curvature inequality on the sample points near p.

    The inequality compares r_coefficient / r^2 with the largest eigenvalue of
    c i pi10 ^ conj(pi10) - 2 beta over the samples.
    """
    dj = distance_jets(sdf, np.atleast_2d(Z_near), check_unique=False)
    a = pi10_from_jet(dj.jet)
    F = params.alpha_coefficient * wedge(a, a) - 2.0 * beta_matrix(dj.jet)
    top = float(np.max(np.linalg.eigvalsh(W.hermitian_part(F))[..., -1]))
    if top <= 0:
        return np.inf
    return float(np.sqrt(params.r_coefficient / top))


def point_weight(p, w, params):
    """Weight near a point p built from a dimension-0 witness.

    Parameters
    ----------
    p : array_like
        Base point in C^n.
    w : PropertyPWitness
        Witness with radius ``w.R`` around p.
    params : PointWeightParams
        Exponent and constants; ``params.M`` must not exceed ``w.M``.

    Returns
    -------
    WeightFunction
        phi_p = -zeta^{-1} log(e^{-A zeta} + (e^{A zeta} - e^{-B zeta}) |z-p|^2 / R^2
        - (e^{-A zeta} - e^{-B zeta}) lambda), defined on B(p, R) intersected with
        the witness region.
    """
    p = np.asarray(p, complex)
    if w.dim != len(p):
        raise DimensionMismatch("witness and point dimensions differ")
    if w.M < params.M * (1 - 1e-12):
        raise ParamBound(f"witness M = {w.M:.4g} below required {params.M:.4g}")
    lam_p = float(np.real(np.asarray(w.lam([np.atleast_1d(c) for c in p])))[0])
    if not 0 <= lam_p <= 1:
        raise ParamBound("witness leaves [0, 1] at p")
    A, B, z, R = params.A, params.B, params.zeta, w.R
    c0, c1, c2 = np.exp(-A * z), np.exp(A * z) - np.exp(-B * z), np.exp(-A * z) - np.exp(-B * z)

    def arg(zz):
        d2 = sum(W.abs2(zz[j] - p[j]) for j in range(len(p)))
        return c0 + (c1 / R ** 2) * d2 - c2 * w.lam(zz)

    def phi(zz):
        return -W.log(arg(zz)) * (1.0 / z)

    phi.dim = len(p)

    def region(Z):
        Z = np.atleast_2d(Z)
        return (np.linalg.norm(Z - p, axis=-1) < R) & w.region(Z)

    def evaluate(Z):
        a = np.real(np.asarray(arg([c for c in Z.T])))
        if np.any(a <= 0):
            raise LogDomain("log argument of the point weight is not positive")
        return jet2(phi, Z)

    prm = {"p": [[c.real, c.imag] for c in p], "eta": params.eta, "A": A, "B": B,
           "zeta": z, "M": params.M, "R": R, "witness": w.params}
    return WeightFunction(evaluate, len(p), region, "point", prm, B,
                          ("point", {"p": p, "w": w, "params": params}))


# ----------------------------------------------------------------- smooth max

@dataclass(frozen=True)
class SmoothMaxConfig:
    """Mollified maximum.

    The mollifier is the product of one-dimensional bumps
    c (1 - (t/a)^2)^4 on [-a, a] with a = 1/2, so its support is a cube
    contained in the unit ball for up to four variables.  Integrals reduce to
    one-dimensional order-statistic integrals evaluated piecewise with
    Gauss-Legendre rules, which are exact for these polynomial integrands.
    """

    mollifier_radius: float = 1.0
    quadrature_order: int = 24
    family_size: int = 4

    def __post_init__(self):
        if self.mollifier_radius != 1.0:
            raise ParamBound("the mollifier support is fixed to the unit ball")
        if not 1 <= self.family_size <= 4:
            raise ParamBound("family size cap must lie in 1..4")
        if self.quadrature_order < 20:
            raise ParamBound("quadrature order below 20 is not exact for the integrands")

    @property
    def half_width(self):
        return 0.5 * self.mollifier_radius

    def nodes(self):
        """Gauss-Legendre nodes and weights on [-1, 1]."""
        return np.polynomial.legendre.leggauss(self.quadrature_order)


_BUMP_C = 315.0 / 256.0


def _bump(u, a):
    """Density and distribution function of the 1D bump of half-width a."""
    s = np.clip(u / a, -1.0, 1.0)
    f = (_BUMP_C / a) * (1 - s * s) ** 4
    # integral of (315/256)(1-s^2)^4 from -1 to s
    F = 0.5 + (315.0 / 256.0) * (s - 4 * s ** 3 / 3 + 6 * s ** 5 / 5 - 4 * s ** 7 / 7 + s ** 9 / 9)
    inside = np.abs(u) < a
    return np.where(inside, f, 0.0), np.where(u <= -a, 0.0, np.where(u >= a, 1.0, F))


def smooth_max(x, cfg=SmoothMaxConfig()):
    """Mollified maximum chi(x) with gradient and Hessian.

    Parameters
    ----------
    x : array_like
        Values of shape (k,) or a batch (N, k) with k <= ``cfg.family_size``.
    cfg : SmoothMaxConfig

    Returns
    -------
    value, gradient, hessian
        Shapes (N,), (N, k), (N, k, k); unbatched input gives unbatched output.
    """
    x = np.asarray(x, float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    N, k = X.shape
    if k > cfg.family_size:
        raise FamilyTooLarge(f"family of size {k} exceeds cap {cfg.family_size}")
    if k == 1:
        out = (X[:, 0].copy(), np.ones((N, 1)), np.zeros((N, 1, 1)))
        return tuple(o[0] for o in out) if single else out
    a = cfg.half_width
    gx, gw = cfg.nodes()
    val = np.empty(N)
    grad = np.empty((N, k))
    hess = np.empty((N, k, k))
    for i in range(N):
        xi = X[i]
        lo = xi.max() - a
        br = np.unique(np.concatenate([xi - a, xi + a]))
        br = br[br >= lo]
        t = []
        wt = []
        for u, v in zip(br[:-1], br[1:]):
            if v > u:
                t.append(0.5 * (v - u) * gx + 0.5 * (u + v))
                wt.append(0.5 * (v - u) * gw)
        t, wt = np.concatenate(t), np.concatenate(wt)
        f, F = _bump(t[None, :] - xi[:, None], a)
        g = np.empty(k)
        H = np.zeros((k, k))
        for j in range(k):
            others = np.prod(np.delete(F, j, axis=0), axis=0)
            g[j] = np.sum(wt * f[j] * others)
            for l in range(j + 1, k):
                rest = np.prod(np.delete(F, [j, l], axis=0), axis=0)
                H[j, l] = H[l, j] = -np.sum(wt * f[j] * f[l] * rest)
        H[np.diag_indices(k)] = -H.sum(axis=1)
        dens = np.sum(f * np.stack([np.prod(np.delete(F, j, axis=0), axis=0) for j in range(k)]), 0)
        val[i] = np.sum(wt * t * dens)
        grad[i] = g
        hess[i] = H
    return (val[0], grad[0], hess[0]) if single else (val, grad, hess)


# --------------------------------------------------------------------- patch

def _gap_on_boundaries(weights, regions, boundary_samples):
    """Smallest sampled max_k (phi_k - phi_j) over z on the boundary of O_j."""
    worst = np.inf
    for j, Zb in enumerate(boundary_samples):
        Zb = np.atleast_2d(np.asarray(Zb, complex))
        if len(Zb) == 0:
            continue
        vj = weights[j].value(Zb)
        best = np.full(len(Zb), -np.inf)
        for k, wk in enumerate(weights):
            if k == j:
                continue
            ok = regions[k](Zb)
            if ok.any():
                vk = np.full(len(Zb), -np.inf)
                vk[ok] = wk.value(Zb[ok])
                best = np.maximum(best, vk - vj)
        i = int(np.argmin(best))
        if not best[i] > 0:
            raise DominationFailure("boundary domination fails", Zb[i])
        worst = min(worst, float(best[i]))
    return worst


def patch(weights, regions, target, epsilon, eta, boundary_samples=None, check_samples=None,
          sdf=None, cfg=SmoothMaxConfig()):
    """Patch weights on overlapping regions with the mollified maximum.

    Parameters
    ----------
    weights : list of WeightFunction
    regions : list of callables
        Masks of the open sets O_j on which the weights satisfy the estimate.
    target : callable
        Mask of the set O_0 to be covered.
    epsilon : float
        Upper bound for phi_0 - max_j phi_j.
    eta : float
        Exponent of the weight inequality, used by the positivity check.
    boundary_samples : list of arrays, optional
        Sample points on the boundary of each O_j inside the closure of O_0,
        used to check domination and to choose xi.
    check_samples : array, optional
        Points of O_0 on which the patched inequality is verified (needs sdf).

    Returns
    -------
    WeightFunction
        phi_0 = xi chi(phi_j / xi), with xi = min(epsilon, gap / 2).
    """
    if not epsilon > 0:
        raise ParamBound("epsilon must be positive")
    if len(weights) != len(regions):
        raise DimensionMismatch("weights and regions differ in length")
    if len(weights) == 1:
        return weights[0]
    if len(weights) > cfg.family_size:
        raise FamilyTooLarge(f"family of size {len(weights)} exceeds cap {cfg.family_size}")
    gap = np.inf
    if boundary_samples is not None:
        gap = _gap_on_boundaries(weights, regions, boundary_samples)
    xi = min(epsilon, 0.5 * gap)
    dim = weights[0].dim

    def evaluate(Z):
        Z = np.atleast_2d(np.asarray(Z, complex))
        N, n = Z.shape
        masks = np.stack([r(Z) for r in regions])
        if not masks.any(axis=0).all():
            raise DominationFailure("point outside every region", Z[int(np.argmin(masks.any(0)))])
        count = masks.sum(axis=0)
        val = np.empty(N)
        dz = np.empty((N, n), complex)
        dzdzbar = np.empty((N, n, n), complex)
        dzdz = np.empty((N, n, n), complex)
        jets = []
        for j, w in enumerate(weights):
            sel = masks[j]
            jets.append(w.jets(Z[sel]) if sel.any() else None)
        pos = [np.cumsum(m) - 1 for m in masks]
        single = count == 1
        for j in range(len(weights)):
            s = single & masks[j]
            if s.any():
                jt = jets[j]
                idx = pos[j][s]
                val[s] = jt.value[idx]
                dz[s] = jt.dz[idx]
                dzdzbar[s] = jt.dzdzbar[idx]
                dzdz[s] = jt.dzdz[idx]
        multi = np.flatnonzero(~single)
        if len(multi):
            k = len(weights)
            vals = np.full((len(multi), k), -np.inf)
            for j in range(k):
                for q, i in enumerate(multi):
                    if masks[j, i]:
                        vals[q, j] = jets[j].value[pos[j][i]]
            # members not defined at a point sit 2 xi below the top value and drop out
            top = vals.max(axis=1, keepdims=True)
            vals = np.where(np.isfinite(vals), vals, top - 2 * xi)
            cv, cg, ch = smooth_max(vals / xi, cfg)
            for q, i in enumerate(multi):
                g = np.zeros(n, complex)
                Qm = np.zeros((n, n), complex)
                Sm = np.zeros((n, n), complex)
                parts = []
                for j in range(k):
                    if masks[j, i]:
                        jt = jets[j]
                        ii = pos[j][i]
                        parts.append((j, jt.dz[ii], jt.dzdzbar[ii], jt.dzdz[ii]))
                for j, dj, Qj, Sj in parts:
                    g += cg[q, j] * dj
                    Qm += cg[q, j] * Qj
                    Sm += cg[q, j] * Sj
                for j, dj, _, _ in parts:
                    for l, dl, _, _ in parts:
                        b = ch[q, j, l] / xi
                        # d/dz_a d/dzbar_b: dphi_j/dz_a conj(dphi_l/dz_b)
                        Qm += b * np.outer(dj, np.conj(dl))
                        Sm += b * np.outer(dj, dl)
                val[i] = xi * cv[q]
                dz[i] = g
                dzdzbar[i] = Qm
                dzdz[i] = Sm
        return WirtingerJet2(val, dz, dzdzbar, dzdz)

    def region(Z):
        return target(Z) & np.any([r(Z) for r in regions], axis=0)

    bound = max((w.bound for w in weights if w.bound is not None), default=None)
    out = WeightFunction(evaluate, dim, region, "patch",
                         {"xi": xi, "epsilon": epsilon, "parts": [w.name for w in weights]},
                         None if bound is None else bound + xi,
                         ("patch", {"weights": weights, "regions": regions, "target": target,
                                    "epsilon": epsilon, "eta": eta}))
    if check_samples is not None:
        if sdf is None:
            raise ParamBound("positivity check needs the signed distance field")
        Zc = np.atleast_2d(np.asarray(check_samples, complex))
        Zc = Zc[region(Zc)]
        if len(Zc):
            _require_positive(weight_min_eigenvalue(out, sdf, Zc, eta), Zc, "patched weight estimate")
    return out


# --------------------------------------------------------------- leaf weight

@dataclass(frozen=True)
class LeafWeightParams:
    """Constants of the leaf weight.

    Constraints: E > 1, A + 2 E log C < B_tilde, zeta > eta/(1-eta) and M above
    2 C^{E zeta}(e^{A zeta} - e^{-Bt zeta}) / (C^{-E zeta} e^{-A zeta} - C^{E zeta} e^{-Bt zeta}).
    ``zeta`` and ``M`` default to 1.1 x their bounds; ``E`` defaults to the
    midpoint of its admissible interval.
    """

    eta: float
    A: float
    B_tilde: float
    C: float
    D: float
    E: Optional[float] = None
    zeta: Optional[float] = None
    M: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ParamBound("eta must lie in (0, 1)")
        if not (self.A > 0 and self.C > 1 and self.D > 0):
            raise ParamBound("need A > 0, C > 1 and D > 0")
        e_hi = (self.B_tilde - self.A) / (2 * np.log(self.C))
        if not e_hi > 1:
            raise ParamBound(f"need B_tilde > A + 2 log C = {self.A + 2 * np.log(self.C):.6g}")
        if self.E is None:
            object.__setattr__(self, "E", 0.5 * (1 + e_hi))
        if not 1 < self.E < e_hi:
            raise ParamBound(f"E must lie in (1, {e_hi:.6g})")
        if self.zeta is None:
            object.__setattr__(self, "zeta", 1.1 * self.eta / (1 - self.eta))
        if not self.zeta > self.eta / (1 - self.eta):
            raise ParamBound("zeta must exceed eta/(1-eta)")
        with np.errstate(over="ignore", invalid="ignore"):
            mb = self.M_bound
        if not (np.isfinite(mb) and mb > 0):
            raise ParamBound("constants overflow double precision at this eta")
        if self.M is None:
            object.__setattr__(self, "M", 1.1 * mb)
        if not self.M > self.M_bound:
            raise ParamBound(f"M must exceed {self.M_bound:.6g}")

    @property
    def _c(self):
        z, A, Bt = self.zeta, self.A, self.B_tilde
        CE = self.C ** (self.E * z)
        return CE, np.exp(-A * z), np.exp(A * z), np.exp(-Bt * z)

    @property
    def M_bound(self):
        CE, eA_, eA, eB = self._c
        return 2 * CE * (eA - eB) / (eA_ / CE - CE * eB)

    @property
    def coefficients(self):
        """(k1, k2, k3) with phi = k1 (|z|^2/D^2 + lambda o f) - k2 |f|^2 / R^2 - k3."""
        CE, eA_, eA, eB = self._c
        return 0.5 * (eA_ / CE - CE * eB), CE * (eA - eB), eA_ / CE

    @property
    def phi_range(self):
        """Bounds of phi where |f| <= R: [-k2 - k3, -C^{E zeta} e^{-Bt zeta}]."""
        CE, eA_, eA, eB = self._c
        return -CE * (eA - eB) - eA_ / CE, -CE * eB

    @property
    def r_coefficient(self):
        """Coefficient of r^{-2} i ddbar|f|^2 in the leaf positivity form."""
        z = self.zeta
        CE, eA_, eA, eB = self._c
        C2 = self.C ** (-2 * self.E * z)
        return np.exp(-self.B_tilde * z) * (0.5 * (C2 * eA_ - eB) * self.M - (eA - eB)) / z

    @property
    def tangential_coefficient(self):
        z = self.zeta
        CE, eA_, eA, eB = self._c
        C2 = self.C ** (-2 * self.E * z)
        return 0.5 * np.exp(-self.B_tilde * z) * (C2 * eA_ - eB) / (z * self.D ** 2)

    @property
    def alpha_coefficient(self):
        eta, z = self.eta, self.zeta
        return 4 * eta * z / ((1 - eta) * z - eta)

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in ("eta", "A", "B_tilde", "C", "D", "E", "zeta", "M")}


@dataclass(frozen=True)
class LeafData:
    """Leaf structure: f vanishing on the leaf, a primitive h of alpha and membership."""

    f: Callable
    h: Callable
    leaf_membership: Callable
    dim: int
    codim: int
    C: float
    name: str = "leaf"

    def f_values(self, Z):
        Z = np.atleast_2d(Z)
        return np.stack([np.asarray(c) for c in self.f([c for c in Z.T])], -1)


def leaf_theta_form(leaf, params, r, sdf, Z, sign=1.0):
    """Leaf positivity form Theta(r) at points Z (sign=-1 flips h).

    Returns the form split as (core, tangential, radial) with
    Theta(r) = core + tangential * I + radial, where core collects the terms
    in h, alpha and beta and radial is the r^{-2} i ddbar|f|^2 term.
    """
    Z = np.atleast_2d(np.asarray(Z, complex))
    dj = distance_jets(sdf, Z, check_unique=False)
    hf = leaf.h
    hj = jet2(lambda z: sign * hf(z), Z)
    a = pi10_from_jet(dj.jet)
    n = Z.shape[1]

    def f2(z):
        return sum(W.abs2(c) for c in leaf.f(z))

    f2.dim = n
    fj = jet2(f2, Z)
    if sign > 0:
        w = hj.dz - a
        core = 2 * hj.hess + 2 * beta_matrix(dj.jet) - params.alpha_coefficient * wedge(w, w)
    else:
        w = hj.dz + a
        ce = 4 * params.zeta / ((1 - params.eta) * params.zeta - params.eta)
        core = 2 * hj.hess - 2 * beta_matrix(dj.jet) - ce * wedge(w, w)
    return core, params.tangential_coefficient, params.r_coefficient / r ** 2 * fj.hess


def _leaf_frame(leaf, Z):
    """Unitary frames whose first columns span ker(df) at each point."""
    Z = np.atleast_2d(Z)
    comps = []
    for j in range(leaf.codim):
        _, dz, _ = W.complex_jet1(lambda z, j=j: leaf.f(z)[j], Z)
        comps.append(dz)
    J = np.stack(comps, 1)
    _, _, Vh = np.linalg.svd(J)
    V = np.conj(np.swapaxes(Vh, -1, -2))
    # right singular vectors: the last n - codim columns span the kernel
    return np.concatenate([V[:, :, leaf.codim:], V[:, :, :leaf.codim]], axis=2)


def leaf_theta_check(leaf, params, r, sdf, Z, sign=1.0, identity_tol=1e-9):
    """Positivity of Theta(r) on leaf points, resolved in a leaf-adapted frame.

    On the leaf the core terms vanish on tangent vectors (dh = alpha there and
    d^c alpha = -2 beta on null directions), leaving the small tangential
    constant.  That constant is far below double-precision rounding of the
    core terms, so the core block is checked to vanish within
    ``identity_tol`` and then replaced by its exact value 0.  Positivity is
    decided by the Schur complement of the transverse block.

    Returns
    -------
    dict
        ``schur`` (per-point min eigenvalue of the reduced tangential form),
        ``transverse`` (per-point min eigenvalue of the transverse block) and
        ``identity_residual`` (per-point size of the core tangential block).
    """
    Z = np.atleast_2d(np.asarray(Z, complex))
    core, tc, rad = leaf_theta_form(leaf, params, r, sdf, Z, sign)
    U = _leaf_frame(leaf, Z)
    Uh = np.conj(np.swapaxes(U, -1, -2))
    m = Z.shape[1] - leaf.codim
    Cf = Uh @ core @ U
    Rf = Uh @ rad @ U
    scale = 1.0 + np.max(np.abs(core), axis=(-2, -1))
    resid = np.max(np.abs(Cf[:, :m, :m]), axis=(-2, -1)) / scale
    if np.any(resid > identity_tol):
        k = int(np.argmax(resid))
        raise EstimateFailure("h violates the leaf identities", Z[k], float(resid[k]))
    T = Cf + Rf + tc * np.eye(Z.shape[1])
    T[:, :m, :m] = Rf[:, :m, :m] + tc * np.eye(m)
    T = 0.5 * (T + np.conj(np.swapaxes(T, -1, -2)))
    Tnn = T[:, m:, m:]
    Ttn = T[:, :m, m:]
    trans = np.linalg.eigvalsh(Tnn)[:, 0]
    schur = np.full(len(Z), -np.inf)
    ok = trans > 0
    if ok.any():
        S = T[ok, :m, :m] - Ttn[ok] @ np.linalg.solve(Tnn[ok], np.conj(np.swapaxes(Ttn[ok], -1, -2)))
        S = 0.5 * (S + np.conj(np.swapaxes(S, -1, -2)))
        schur[ok] = np.linalg.eigvalsh(S)[:, 0]
    return {"schur": schur, "transverse": trans, "identity_residual": resid}


def search_leaf_radius(leaf, params, sdf, Z, r0=0.5, max_halvings=80, sign=1.0):
    """Largest r = r0 / 2^k for which Theta(r) is positive on the leaf samples."""
    r = r0
    for _ in range(max_halvings):
        res = leaf_theta_check(leaf, params, r, sdf, Z, sign)
        if np.all(res["schur"] > 0) and np.all(res["transverse"] > 0):
            return r
        r *= 0.5
    k = int(np.argmin(res["schur"]))
    raise ThetaNotPositive("no admissible radius found", np.atleast_2d(Z)[k],
                           float(res["schur"][k]))


def leaf_weight(leaf, witness, params, r=None, sdf=None, leaf_samples=None, sign=1.0,
                region=None):
    """Weight near an admissible leaf.

    Parameters
    ----------
    leaf : LeafData
    witness : PropertyPWitness
        Witness on C^{codim} with constant ``params.M``.
    params : LeafWeightParams
    r : float, optional
        Radius used by the positivity form; defaults to ``witness.r``.
    sdf : SignedDistanceField, optional
        Needed to check the positivity form on ``leaf_samples``.
    leaf_samples : array, optional
        Leaf points used for the checks phi_eps >= A and Theta(r) > 0.
    sign : float
        +1 for the interior weight, -1 for the exterior (h replaced by -h).
    region : callable, optional
        Neighborhood U_eps of the leaf; intersected with the witness domain.

    Returns
    -------
    WeightFunction
        phi_eps = 2 h - zeta^{-1} log(-phi) on {z : f(z) in witness region}.
    """
    if witness.dim != leaf.codim:
        raise DimensionMismatch("witness dimension must equal the leaf codimension")
    if witness.M < params.M * (1 - 1e-12):
        raise ParamBound(f"witness M = {witness.M:.4g} below required {params.M:.4g}")
    if abs(params.C - leaf.C) > 1e-12 * leaf.C:
        raise ParamBound("parameter C differs from the leaf's constant")
    r = witness.r if r is None else r
    k1, k2, k3 = params.coefficients
    R, D, z = witness.R, params.D, params.zeta
    n = leaf.dim

    def phi(zz):
        f = leaf.f(zz)
        z2 = sum(W.abs2(c) for c in zz) * (1.0 / D ** 2)
        return k1 * (z2 + witness.lam(f)) - (k2 / R ** 2) * sum(W.abs2(c) for c in f) - k3

    def phi_eps(zz):
        return 2.0 * sign * leaf.h(zz) - W.log(-phi(zz)) * (1.0 / z)

    phi_eps.dim = n

    def dom(Z):
        Z = np.atleast_2d(Z)
        ok = witness.region(leaf.f_values(Z))
        return ok if region is None else ok & region(Z)

    def evaluate(Z):
        v = np.real(np.asarray(phi([c for c in Z.T])))
        if np.any(v >= 0):
            raise LogDomain("leaf weight log argument is not positive")
        return jet2(phi_eps, Z)

    bound = params.B_tilde
    prm = {"leaf": leaf.name, "params": params.to_dict(), "r": r, "R": R, "sign": sign,
           "witness": witness.params}
    out = WeightFunction(evaluate, n, dom, "leaf" if sign > 0 else "leaf_stein", prm, bound,
                         ("leaf", {"leaf": leaf, "witness": witness, "params": params, "r": r,
                                   "sdf": sdf, "leaf_samples": leaf_samples, "sign": sign,
                                   "region": region}))
    if leaf_samples is not None:
        Zs = np.atleast_2d(np.asarray(leaf_samples, complex))
        vals = out.value(Zs)
        if np.any(vals < params.A):
            k = int(np.argmin(vals))
            raise EstimateFailure("leaf weight below A on the leaf", Zs[k], float(vals[k]))
        if sdf is not None:
            res = leaf_theta_check(leaf, params, r, sdf, Zs, sign)
            lam = np.minimum(res["schur"], res["transverse"])
            k = int(np.argmin(lam))
            if not lam[k] > 0:
                raise ThetaNotPositive("leaf positivity form fails; r is too large", Zs[k],
                                       float(lam[k]))
    return out


def stein_variant(w):
    """Rebuild a weight with h replaced by -h for the exterior inequality."""
    prov = w.provenance
    if not prov or prov[0] not in ("leaf", "point", "zero"):
        raise ParamBound("weight has no rebuildable provenance")
    kind, args = prov
    if kind == "leaf":
        args = dict(args)
        args["sign"] = -args["sign"]
        # the exterior form has a different core, so the admissible radius is searched again
        if args["sdf"] is not None and args["leaf_samples"] is not None:
            args["r"] = search_leaf_radius(args["leaf"], args["params"], args["sdf"],
                                           args["leaf_samples"], r0=args["r"], sign=args["sign"])
        return leaf_weight(**args)
    # point and zero weights carry no primitive h
    return replace(w, name=w.name + "_stein")
