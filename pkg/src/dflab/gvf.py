"""Good vector fields: the three-condition checker, the truncated-Taylor cutoff,
the blended field near a cusp vertex, h = (1/2) log(X delta) and the
winding obstruction scan.

A field is described by ``evaluate(Z) -> (coef, dbar)`` with ``coef`` of shape
(N, n) and ``dbar[i, k, j] = d X^k / d zbar_j`` at point i.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import wirtinger as W
from .domain import distance_jets
from .errors import BlendGap, BranchCut, OutsideBox, ParamBound


def _all(Z):
    return np.ones(len(np.atleast_2d(Z)), bool)


@dataclass(frozen=True)
class VectorFieldSpec:
    """A (1,0) vector field with declared constants ``epsilon`` and ``C``."""

    evaluate: Callable
    dim: int
    region: Callable = _all
    epsilon: float = 0.1
    C: float = 2.0
    name: str = "field"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParamBound("epsilon must be positive")
        if not self.C > 1:
            raise ParamBound("C must exceed 1")

    def __call__(self, Z):
        Z = np.atleast_2d(np.asarray(Z, complex))
        coef, dbar = self.evaluate(Z)
        if not (np.all(np.isfinite(coef)) and np.all(np.isfinite(dbar))):
            raise ParamBound(f"field {self.name} has non-finite coefficients")
        return coef, dbar


def field_from_callbacks(components, dim, **kw):
    """Field whose k-th coefficient is the complex jet callback ``components[k]``."""
    if len(components) != dim:
        raise ParamBound("need one callback per coordinate")

    def evaluate(Z):
        vals, dbars = [], []
        for f in components:
            v, _, db = W.complex_jet1(f, Z)
            vals.append(v)
            dbars.append(db)
        return np.stack(vals, 1), np.stack(dbars, 1)

    return VectorFieldSpec(evaluate, dim, **kw)


def constant_field(c, **kw):
    c = np.asarray(c, complex)
    n = len(c)

    def evaluate(Z):
        N = len(Z)
        return np.broadcast_to(c, (N, n)).copy(), np.zeros((N, n, n), complex)

    return VectorFieldSpec(evaluate, n, **kw)


def commutator_pairing(coef_dbar, g):
    """d delta([X, d/dzbar_j]) = -sum_k (d X^k/d zbar_j)(d delta/d z_k), shape (N, n)."""
    return -np.einsum("nkj,nk->nj", coef_dbar, g)


def check_good_field(X, K_samples, tol=0.0):
    """Check the three good-field conditions at each boundary sample.

    Returns worst margins (positive means satisfied), worst points and a
    verdict.  ``K_samples`` is a :class:`dflab.domain.BoundaryPoint`.
    """
    Z = K_samples.z
    if not np.all(X.region(Z)):
        raise ParamBound("samples lie outside the field's region")
    coef, dbar = X(Z)
    g = K_samples.delta_jet.dz
    Xd = np.einsum("nk,nk->n", coef, g)
    mod = np.abs(Xd)
    arg = np.abs(np.angle(Xd))
    comm = np.max(np.abs(commutator_pairing(dbar, g)), axis=1)
    C, eps = X.C, X.epsilon
    margins = {
        "modulus_lower": mod - 1.0 / C,
        "modulus_upper": C - mod,
        "argument": eps - arg,
        "commutator": eps - comm,
    }
    out = {"epsilon": eps, "C": C, "n": len(Z), "conditions": {}}
    ok = True
    for key, m in margins.items():
        i = int(np.argmin(m))
        passed = bool(m[i] > -tol)
        ok &= passed
        out["conditions"][key] = {"margin": float(m[i]), "pass": passed,
                                  "worst_point": [[float(c.real), float(c.imag)] for c in Z[i]]}
    out["max_argument"] = float(arg.max())
    out["max_commutator"] = float(comm.max())
    out["modulus_range"] = [float(mod.min()), float(mod.max())]
    out["pass"] = ok
    return out


# ------------------------------------------------------------- the 1D cutoff

def _series_mul(a, b):
    K = a.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), complex if np.iscomplexobj(a) else float)
    for i in range(K):
        out[..., i:] += a[..., i:i + 1] * b[..., :K - i]
    return out


def _smoothstep_series(t):
    """Series of 6t^5 - 15t^4 + 10t^3 given the series of t."""
    t2 = _series_mul(t, t)
    t3 = _series_mul(t2, t)
    t4 = _series_mul(t3, t)
    t5 = _series_mul(t4, t)
    return 6 * t5 - 15 * t4 + 10 * t3


CUTOFF_MAX_ORDER = 8


def cutoff_derivatives(t0, order):
    """Derivatives 0..order of chi = S o S at t0, with S the quintic smoothstep.

    chi is C^8, so orders above 8 are rejected.
    """
    if order > CUTOFF_MAX_ORDER:
        raise ParamBound(f"cutoff derivatives are continuous only up to order {CUTOFF_MAX_ORDER}")
    t0 = np.asarray(t0, float)
    t = np.zeros(t0.shape + (order + 1,))
    t[..., 0] = t0
    if order >= 1:
        t[..., 1] = 1.0
    return _chi_from_series(t)


def _chi_from_series(t):
    """Taylor coefficients -> derivatives of chi(t(y)) for a series t."""
    K = t.shape[-1]
    t0 = t[..., 0]
    inner = (t0 > 0) & (t0 < 1)
    s = _smoothstep_series(_smoothstep_series(np.where(inner[..., None], t, 0.0)))
    s = np.where(inner[..., None], s, 0.0)
    s[..., 0] = np.where(t0 >= 1, 1.0, s[..., 0])
    fact = np.array([math.factorial(j) for j in range(K)], float)
    return s * fact


def bump_derivatives(y, zeta, order):
    """d^j/dy^j chi(2 - y^2/zeta^2) for j = 0..order."""
    if order > CUTOFF_MAX_ORDER:
        raise ParamBound(f"cutoff derivatives are continuous only up to order {CUTOFF_MAX_ORDER}")
    y = np.asarray(y, float)
    t = np.zeros(y.shape + (order + 1,))
    t[..., 0] = 2.0 - (y / zeta) ** 2
    if order >= 1:
        t[..., 1] = -2.0 * y / zeta ** 2
    if order >= 2:
        t[..., 2] = -1.0 / zeta ** 2
    return _chi_from_series(t)


@dataclass(frozen=True)
class AnnulusFieldParams:
    """Cutoff parameters near a cusp vertex at leaf coordinate 1.

    zeta = eps^{2 gamma/(1 - gamma)}; m defaults to ceil(1/(1 - gamma)).
    """

    gamma: float
    eps: float
    m: int = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ParamBound("gamma must lie in (0, 1)")
        if not self.eps > 0:
            raise ParamBound("eps must be positive")
        m_min = math.ceil(1.0 / (1.0 - self.gamma) - 1e-12)
        if self.m is None:
            object.__setattr__(self, "m", m_min)
        if self.m < m_min:
            raise ParamBound(f"m must be at least {m_min}")
        if self.m + 1 > CUTOFF_MAX_ORDER:
            raise ParamBound(f"m must be at most {CUTOFF_MAX_ORDER - 1} for the C^8 cutoff")

    @property
    def zeta(self):
        return self.eps ** (2 * self.gamma / (1 - self.gamma))

    @property
    def box(self):
        """Half-widths (in y, in x - 1) of the box where the cutoff is defined."""
        z = self.zeta
        return 2 * z, 2 * (2 * z) ** (1 / self.gamma)

    def inside(self, w):
        hy, hx = self.box
        w = np.asarray(w, complex)
        return (np.abs(w.imag) < hy) & (np.abs(w.real - 1) < hx)

    def to_dict(self):
        return {"gamma": self.gamma, "eps": self.eps, "m": self.m, "zeta": self.zeta}


def psi_cutoff(w, p, check=True):
    """Truncated-Taylor cutoff and its dbar derivative at leaf coordinates ``w``.

    Returns (psi, dpsi/dzbar, dpsi/dz, chi(2 - y^2/zeta^2)).
    """
    w = np.asarray(w, complex)
    if check and not np.all(p.inside(w)):
        raise OutsideBox("points lie outside the cutoff box")
    x1, y = w.real - 1.0, w.imag
    m = p.m
    D = bump_derivatives(y, p.zeta, m + 1)
    psi = np.zeros(w.shape, complex)
    dx = np.zeros(w.shape, complex)
    for j in range(m + 1):
        c = (-1j) ** j / math.factorial(j)
        psi += x1 ** j * c * D[..., j]
        if j >= 1:
            dx += j * x1 ** (j - 1) * c * D[..., j]
    dy = np.zeros(w.shape, complex)
    for j in range(m + 1):
        dy += x1 ** j * (-1j) ** j / math.factorial(j) * D[..., j + 1]
    dbar = -0.5 * x1 ** m * (-1j) ** (m + 1) / math.factorial(m) * D[..., m + 1]
    dz = 0.5 * (dx - 1j * dy)
    return psi, dbar, dz, D[..., 0]


def psi_error_bounds(p, ny=401, nx=41):
    """Sup over the cutoff box of |dpsi/dzbar| and |psi - chi(2 - y^2/zeta^2)|."""
    hy, hx = p.box
    y = np.linspace(-hy, hy, ny + 2)[1:-1]
    x = np.linspace(-hx, hx, nx + 2)[1:-1]
    w = 1.0 + x[None, :] + 1j * y[:, None]
    psi, dbar, _, chi = psi_cutoff(w, p)
    return {"dbar": float(np.abs(dbar).max()), "deviation": float(np.abs(psi - chi).max())}


def psi_scaling(gamma, eps_list, m=None, **kw):
    """Error bounds over a halving sequence of eps and their successive ratios."""
    rows = [dict(eps=e, **psi_error_bounds(AnnulusFieldParams(gamma, e, m), **kw)) for e in eps_list]
    ratios = {k: [rows[i][k] / rows[i + 1][k] for i in range(len(rows) - 1)]
              for k in ("dbar", "deviation")}
    return {"rows": rows, "ratios": ratios}


# ---------------------------------------------------------- blended field

def blended_field(base, p_point, params, sdf, leaf_coord=0):
    """Blend ``base`` into the constant normal field at ``p_point`` with the cutoff.

    X = (1 - psi) base + 4 psi sum_j (d delta/d zbar_j)(p) d/dz_j, psi taken in
    the leaf coordinate.  Outside the cutoff box the base field is used;
    where psi == 1 exactly the constant field is used without touching the base.
    """
    p_point = np.atleast_2d(np.asarray(p_point, complex))
    gp = distance_jets(sdf, p_point, check_unique=False).jet.dz[0]
    nu = 4.0 * np.conj(gp)
    n = base.dim
    lc = leaf_coord

    def region(Z):
        Z = np.atleast_2d(Z)
        return params.inside(Z[:, lc]) | base.region(Z)

    def evaluate(Z):
        Z = np.atleast_2d(np.asarray(Z, complex))
        N = len(Z)
        box = params.inside(Z[:, lc])
        use_base = ~box & base.region(Z)
        if np.any(~box & ~use_base):
            raise BlendGap("sample is covered by neither the base field nor the cutoff box")
        coef = np.zeros((N, n), complex)
        dbar = np.zeros((N, n, n), complex)
        if use_base.any():
            c, d = base(Z[use_base])
            coef[use_base], dbar[use_base] = c, d
        if box.any():
            psi, psb, _, _ = psi_cutoff(Z[box, lc], params)
            coef_b = psi[:, None] * nu[None, :]
            dbar_b = np.zeros((box.sum(), n, n), complex)
            dbar_b[:, :, lc] = psb[:, None] * nu[None, :]
            mixed = psi != 1.0
            if mixed.any():
                Zb = Z[box][mixed]
                if not np.all(base.region(Zb)):
                    raise BlendGap("base field is needed where it is not defined")
                c, d = base(Zb)
                q = psi[mixed]
                coef_b[mixed] += (1 - q)[:, None] * c
                dbar_b[mixed] += (1 - q)[:, None, None] * d
                dbar_b[mixed, :, lc] -= psb[mixed][:, None] * c
            coef[box], dbar[box] = coef_b, dbar_b
        return coef, dbar

    return VectorFieldSpec(evaluate, n, region, base.epsilon, base.C,
                           name=f"{base.name}_blended",
                           params={"base": base.params, "cutoff": params.to_dict(),
                                   "vertex": [[float(c.real), float(c.imag)] for c in p_point[0]]})


def h_from_field(X, bp, branch_margin=1e-12):
    """h = (1/2) log(X delta) on the principal branch, with the declared bounds.

    Returns a dict with Re h, Im h, the bounds and whether each holds (and
    whether it holds with equality up to rounding).
    """
    coef, _ = X(bp.z)
    Xd = np.einsum("nk,nk->n", coef, bp.delta_jet.dz)
    if np.any(np.abs(np.angle(Xd)) > np.pi - branch_margin) or np.any(Xd == 0):
        raise BranchCut("X delta meets the negative real axis")
    h = 0.5 * np.log(Xd)
    re_b, im_b = 0.5 * math.log(X.C), 0.5 * X.epsilon
    are, aim = np.abs(h.real), np.abs(h.imag)
    rt = 1e-12
    return {
        "re_h": h.real, "im_h": h.imag,
        "re_bound": re_b, "im_bound": im_b,
        "re_ok": bool(np.all(are <= re_b * (1 + rt))),
        "im_ok": bool(np.all(aim <= im_b * (1 + rt))),
        "re_equality": bool(np.any(np.abs(are - re_b) <= rt * re_b)),
        "im_equality": bool(np.any(np.abs(aim - im_b) <= rt * im_b)),
    }


# ------------------------------------------------------- obstruction scan

def _winding_field(Y, coef_scale=1.0):
    """X^1 = e^{i log|z2|^2} e^{Y(z2)}, X^2 = 0 as jet callbacks."""

    def x1(z):
        return coef_scale * W.exp(1j * W.log(W.abs2(z[1])) + Y(z))

    def x2(z):
        return 0.0 * W.real(z[0])

    x1.dim = x2.dim = 2
    return [x1, x2]


def obstruction_scan(sdf, Y_family, C, n_theta=720, names=None, tol=1e-12):
    """Scan |d delta([X, d/dzbar_2])| on the unit circle of the leaf.

    For each real jet callback Y (arguments: coordinate list, z2 = z[1]) the
    candidate field is X^1 = e^{i log|z2|^2} e^Y.  The analytic value
    |g_1| e^Y |dY/dzbar_2 + i/zbar_2| is compared with |g_1| / C, where g_1 is
    d delta/dz_1 on the circle; the same quantity is also assembled from the
    field's jets and the signed-distance jets.
    """
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    w = np.exp(1j * th)
    Z = np.stack([np.zeros_like(w), w], 1)
    g = distance_jets(sdf, Z, check_unique=False).jet.dz
    g1 = np.abs(g[:, 0])
    reports = []
    for idx, Y in enumerate(Y_family):
        name = names[idx] if names else f"Y{idx}"
        yv, ydz, ydzb = W.complex_jet1(Y, Z)
        yv = yv.real
        if np.any(yv < -math.log(C) - tol):
            raise ParamBound(f"{name} is not bounded below by -log C")
        analytic = g1 * np.exp(yv) * np.abs(ydzb[:, 1] + 1j / np.conj(w))
        comps = _winding_field(Y)
        fld = field_from_callbacks(comps, 2, C=C, name=name)
        _, dbar = fld(Z)
        assembled = np.abs(commutator_pairing(dbar, g)[:, 1])
        # dY/dtheta = 2 Re(i e^{i theta} dY/dz2)
        dth = 2 * np.real(1j * w * ydz[:, 1])
        sign = np.sign(dth)
        crit = np.nonzero(sign != np.roll(sign, -1))[0]
        flat = np.abs(dth) < 1e-12
        crit = np.union1d(crit, np.nonzero(flat)[0])
        thr = g1 / C
        j = int(np.argmax(analytic))
        reports.append({
            "name": name,
            "max_value": float(analytic[j]),
            "theta_max": float(th[j]),
            "threshold": float(thr.max()),
            "critical_theta": [float(th[i]) for i in crit[:16]],
            "n_critical": int(len(crit)),
            "value_at_critical": float(analytic[crit].max()) if len(crit) else None,
            "exceeds": bool(np.any(analytic[crit] > thr[crit] - tol)) if len(crit) else False,
            "ad_residual": float(np.max(np.abs(assembled - analytic))),
            "normalization": float(g1.mean()),
        })
    return {"C": C, "n_theta": n_theta, "candidates": reports,
            "pass": all(r["exceeds"] for r in reports)}
