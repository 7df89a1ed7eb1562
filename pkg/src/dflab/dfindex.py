"""Certification of Diederich-Fornaess exponents on sampled grids.

For a weight phi and exponent eta the interior form is

    Theta = e^phi (ddbar delta + (-delta) ddbar phi + (1-eta)(-delta)^{-1} d delta ^ dbar delta
                   - eta (dphi ^ dbar delta + d delta ^ dbar phi) - eta (-delta) dphi ^ dbar phi),

whose positivity near the boundary makes -(e^{-phi}(-delta))^eta
plurisubharmonic.  All checks are sampled: they report the worst point and
margin rather than proving uniform positivity.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import wirtinger as W
from .domain import BoundaryPoint, distance_jets, tangent_frame
from .errors import DflabError, NoFeasibleEta, ParamBound, ShellOutsideTube, SignCondition
from .weights import SmoothMaxConfig, smooth_max, weight_form
from .wirtinger import WirtingerJet2, min_eigenvalue, wedge

CHUNK = 256


def sweep(fn, Z, jobs=1):
    """Apply fn to fixed-size chunks of Z and concatenate.

    Chunk boundaries do not depend on ``jobs``, so results are identical for
    any worker count.
    """
    Z = np.atleast_2d(Z)
    parts = [Z[i:i + CHUNK] for i in range(0, len(Z), CHUNK)]
    if jobs <= 1 or len(parts) <= 1:
        out = [fn(p) for p in parts]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            out = list(ex.map(fn, parts))
    return np.concatenate(out) if out else np.empty(0)


@dataclass(frozen=True)
class CertificationRequest:
    """Inputs of a certification run.

    ``boundary`` is a :class:`BoundaryPoint` batch; interior shells are the
    points xi - s n(xi) for each offset s = -delta.
    """

    sdf: object
    weight: object
    eta: float
    boundary: BoundaryPoint
    interior_offsets: tuple = ()
    jobs: int = 1
    tol: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ParamBound("eta must lie in (0, 1)")
        if any(not s > 0 for s in self.interior_offsets):
            raise ParamBound("shell offsets must be positive")


def default_offsets(sdf):
    return tuple(f * sdf.parent.diam for f in (1e-2, 3e-3, 1e-3))


def _inward_normal(bp):
    return 2.0 * np.conj(bp.delta_jet.dz)


def shell_points(sdf, bp, s):
    """Points at signed distance -s (s > 0 inside, s < 0 outside) along the normals."""
    if abs(s) > sdf.tube:
        raise ShellOutsideTube(f"offset {s:.3g} exceeds tube width {sdf.tube:.3g}")
    return bp.z - s * _inward_normal(bp)


def _restrict(weight, Z):
    mask = weight.region(Z)
    return Z[mask], mask


def _worst(lam, Z):
    if len(lam) == 0:
        return None, None
    k = int(np.argmin(lam))
    return float(lam[k]), [[float(c.real), float(c.imag)] for c in Z[k]]


def check_weight_inequality(req):
    """Min eigenvalue of the boundary weight inequality over the grid."""
    Z, _ = _restrict(req.weight, req.boundary.z)

    def fn(Zc):
        dj = distance_jets(req.sdf, Zc, check_unique=False)
        return min_eigenvalue(weight_form(req.weight.jets(Zc), dj.jet, req.eta))

    lam = sweep(fn, Z, req.jobs)
    m, pt = _worst(lam, Z)
    return {"min_eigenvalue": m, "worst_point": pt, "n": int(len(Z)),
            "n_skipped": int(len(req.boundary) - len(Z)),
            "pass": bool(m is not None and m > req.tol), "eigenvalues": lam}


def theta_matrix(djet, phi, eta, exterior=False):
    """Interior (or exterior) form Theta at points with distance jets djet."""
    d = djet.value
    g = djet.dz
    f = phi.dz
    e = np.exp(phi.value)[:, None, None]
    if not exterior:
        s = -d[:, None, None]
        T = (djet.hess + s * phi.hess + (1 - eta) / s * wedge(g, g)
             - eta * (wedge(f, g) + wedge(g, f)) - eta * s * wedge(f, f))
    else:
        s = d[:, None, None]
        T = (djet.hess + s * phi.hess + (1 / eta - 1) / s * wedge(g, g)
             + (wedge(g, f) + wedge(f, g)) / eta + s * wedge(f, f) / eta)
    return e * T


def scaled_min_eigenvalue(T, djet, s):
    """Min eigenvalue of Theta in a (tangent, sqrt(s) normal) frame.

    The congruence preserves the signature, and it balances the O(1/s)
    normal entry against the O(s) tangential ones so that the verdict does
    not depend on rounding at the scale of the large entry.
    """
    g = djet.dz
    nrm = np.linalg.norm(g, axis=-1, keepdims=True)
    U = np.concatenate([tangent_frame(g), (np.conj(g) / nrm)[:, :, None]], axis=2)
    U[:, :, -1] *= np.sqrt(np.abs(s))[:, None]
    return min_eigenvalue(np.conj(np.swapaxes(U, -1, -2)) @ T @ U)


def _theta_shells(req, exterior):
    shells = []
    for s in req.interior_offsets:
        Zs = shell_points(req.sdf, req.boundary, -s if exterior else s)
        Z, _ = _restrict(req.weight, Zs)

        def fn(Zc):
            dj = distance_jets(req.sdf, Zc)
            T = theta_matrix(dj.jet, req.weight.jets(Zc), req.eta, exterior)
            return np.stack([min_eigenvalue(T), scaled_min_eigenvalue(T, dj.jet, dj.jet.value)], -1)

        lam = sweep(fn, Z, req.jobs).reshape(-1, 2)
        m, pt = _worst(lam[:, 0], Z)
        ms, pts = _worst(lam[:, 1], Z)
        shells.append({"offset": float(s), "min_eigenvalue": m, "worst_point": pt,
                       "min_scaled_eigenvalue": ms, "worst_scaled_point": pts,
                       "n": int(len(Z)), "n_skipped": int(len(Zs) - len(Z)),
                       "pass": bool(ms is not None and ms > req.tol), "eigenvalues": lam[:, 0],
                       "points": Z})
    return {"shells": shells, "pass": bool(shells) and all(sh["pass"] for sh in shells)}


def check_theta_interior(req):
    """Min eigenvalue of Theta on interior shells -delta = s."""
    return _theta_shells(req, exterior=False)


def check_stein_exterior(req):
    """Min eigenvalue of the exterior form on shells delta = s outside the domain."""
    return _theta_shells(req, exterior=True)


def certify(req, require_weight_inequality=False):
    """Run both checks and assemble a report."""
    t0 = time.perf_counter()
    wi = check_weight_inequality(req)
    th = check_theta_interior(req)
    ok = th["pass"] and (wi["pass"] or not require_weight_inequality)
    return {"eta": req.eta, "weight_inequality": wi, "theta": th, "pass": bool(ok),
            "runtime": time.perf_counter() - t0}


def strip_arrays(report):
    """Copy of a report without per-point eigenvalue arrays."""
    if isinstance(report, dict):
        return {k: strip_arrays(v) for k, v in report.items() if k not in ("eigenvalues", "points")}
    if isinstance(report, list):
        return [strip_arrays(v) for v in report]
    return report


def certify_index_lower_bound(sdf, weight_builder, boundary, offsets, eta_lo=0.05, eta_hi=0.99,
                              bisection_tol=1e-2, jobs=1, require_weight_inequality=False):
    """Largest sampled-certified exponent in [eta_lo, eta_hi] by bisection.

    Parameters
    ----------
    sdf : SignedDistanceField
    weight_builder : callable
        eta -> WeightFunction.
    boundary : BoundaryPoint
        Boundary grid; interior shells are built from it.
    offsets : sequence of float
        Values of -delta for the interior shells.
    require_weight_inequality : bool
        Also require the boundary inequality to hold strictly.

    Returns
    -------
    eta, history
        The certified exponent and the list of (eta, pass) trials.
    """
    if not 0 < eta_lo < eta_hi < 1:
        raise ParamBound("need 0 < eta_lo < eta_hi < 1")
    history = []

    def ok(eta):
        try:
            w = weight_builder(eta)
            req = CertificationRequest(sdf, w, eta, boundary, tuple(offsets), jobs)
            res = certify(req, require_weight_inequality)["pass"]
        except ShellOutsideTube:
            raise
        except DflabError:
            res = False
        history.append((float(eta), bool(res)))
        return res

    if not ok(eta_lo):
        raise NoFeasibleEta(f"certification fails already at eta = {eta_lo}")
    if ok(eta_hi):
        return float(eta_hi), history
    lo, hi = eta_lo, eta_hi
    while hi - lo > bisection_tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return float(lo), history


# ------------------------------------------------------------ Weinstock check

def weinstock_matrix(sdf, Z):
    """Residual Q(z) - Q(xi) - 2(-delta)(S^T conj(S) + Q Q)(xi) as a form matrix.

    Q = d^2 delta/dz dzbar and S = d^2 delta/dz dz; xi is the foot point.
    """
    dj = distance_jets(sdf, Z)
    fj = distance_jets(sdf, dj.foot, check_unique=False).jet
    s = -dj.jet.value[:, None, None]
    Q, S = fj.dzdzbar, fj.dzdz
    corr = np.swapaxes(S, -1, -2) @ np.conj(S) + Q @ Q
    R = dj.jet.dzdzbar - Q - 2 * s * corr
    return np.swapaxes(R, -1, -2), -dj.jet.value


def weinstock_residual(sdf, Z):
    """Per-point min eigenvalue and spectral norm of the Weinstock residual."""
    R, s = weinstock_matrix(sdf, np.atleast_2d(Z))
    Rh = W.hermitian_part(R, tol=1e-6, atol=1e-12)
    ev = np.linalg.eigvalsh(Rh)
    return ev[:, 0], np.max(np.abs(ev), axis=-1), s


def weinstock_order(sdf, bp, offsets=(1e-2, 0.5e-2, 0.25e-2)):
    """Fit |residual| ~ K s^p over shells and report K for the lower bound.

    Returns a dict with the fitted order p (from the largest residual norm
    per shell), the constant K = max(-min_eig / s^2) and per-shell values.
    """
    rows = []
    for s in offsets:
        Z = shell_points(sdf, bp, s)
        lo, nrm, _ = weinstock_residual(sdf, Z)
        rows.append((s, float(lo.min()), float(nrm.max())))
    s = np.array([r[0] for r in rows])
    nrm = np.array([r[2] for r in rows])
    lo = np.array([r[1] for r in rows])
    if np.all(nrm < 1e-13):
        order = np.inf
    else:
        order = float(np.polyfit(np.log(s), np.log(np.maximum(nrm, 1e-300)), 1)[0])
    K = float(np.max(np.maximum(-lo, 0.0) / s ** 2))
    return {"order": order, "K": K,
            "shells": [{"offset": r[0], "min_eigenvalue": r[1], "max_norm": r[2]} for r in rows]}


# -------------------------------------------------- global defining function

@dataclass(frozen=True)
class GlobalDefiningFunction:
    """rho = xi chi(e^{-phi} delta / xi, (B|z|^2 - A) / xi) in the tube, B|z|^2 - A inside."""

    sdf: object
    weight: object
    A: float
    B: float
    xi: float
    tube: float
    cfg: SmoothMaxConfig = field(default_factory=SmoothMaxConfig)

    def _quadratic(self, Z):
        N, n = Z.shape
        v = self.B * np.sum(np.abs(Z) ** 2, -1) - self.A
        return WirtingerJet2(v, self.B * np.conj(Z), np.broadcast_to(self.B * np.eye(n), (N, n, n)).astype(complex),
                             np.zeros((N, n, n), complex))

    def _weighted(self, Z):
        dj = distance_jets(self.sdf, Z, check_unique=False).jet
        ph = self.weight.jets(Z)
        e = np.exp(-ph.value)
        d = dj.value
        # rho = e^{-phi} delta
        dz = e[:, None] * (dj.dz - d[:, None] * ph.dz)
        o = lambda a, b: a[:, :, None] * b[:, None, :]
        Q = e[:, None, None] * (dj.dzdzbar - o(ph.dz, np.conj(dj.dz)) - o(dj.dz, np.conj(ph.dz))
                                - d[:, None, None] * ph.dzdzbar
                                + d[:, None, None] * o(ph.dz, np.conj(ph.dz)))
        S = e[:, None, None] * (dj.dzdz - o(ph.dz, dj.dz) - o(dj.dz, ph.dz)
                                - d[:, None, None] * ph.dzdz + d[:, None, None] * o(ph.dz, ph.dz))
        return WirtingerJet2(e * d, dz, Q, S), d

    def jets(self, Z):
        Z = np.atleast_2d(np.asarray(Z, complex))
        q = self._quadratic(Z)
        out = WirtingerJet2(q.value.copy(), q.dz.copy(), q.dzdzbar.copy(), q.dzdz.copy())
        dist = distance_jets(self.sdf, Z, check_unique=False).jet.value
        near = np.flatnonzero(np.abs(dist) < self.tube)
        if len(near):
            w, _ = self._weighted(Z[near])
            qn = q[near]
            cv, cg, ch = smooth_max(np.stack([w.value, qn.value], -1) / self.xi, self.cfg)
            parts = [w, qn]
            o = lambda a, b: a[:, :, None] * b[:, None, :]
            g = sum(cg[:, j, None] * parts[j].dz for j in range(2))
            Q = sum(cg[:, j, None, None] * parts[j].dzdzbar for j in range(2))
            S = sum(cg[:, j, None, None] * parts[j].dzdz for j in range(2))
            for j in range(2):
                for k in range(2):
                    b = ch[:, j, k, None, None] / self.xi
                    Q = Q + b * o(parts[j].dz, np.conj(parts[k].dz))
                    S = S + b * o(parts[j].dz, parts[k].dz)
            out.value[near] = self.xi * cv
            out.dz[near] = g
            out.dzdzbar[near] = Q
            out.dzdz[near] = S
        return out

    def value(self, Z):
        return self.jets(Z).value

    def exponent_form(self, Z, eta):
        """Form of i ddbar(-(-rho)^eta) divided by eta(-rho)^{eta-1}."""
        j = self.jets(Z)
        return j.hess + (1 - eta) / (-j.value)[:, None, None] * wedge(j.dz, j.dz)


def global_defining_function(sdf, weight, eta, boundary_z, A=None, B=None, tube=None):
    """Assemble a global defining function from a weight valid near the boundary.

    ``A`` defaults to -sup e^{-phi} delta on the inner tube boundary and ``B`` to
    half the largest value keeping B|z|^2 - A negative on the boundary samples.
    """
    if not 0 < eta < 1:
        raise ParamBound("eta must lie in (0, 1)")
    tube = sdf.tube if tube is None else tube
    Zb = np.atleast_2d(boundary_z)
    bp_dj = distance_jets(sdf, Zb, check_unique=False).jet
    inner = Zb - tube * 2.0 * np.conj(bp_dj.dz)
    if A is None:
        A = float(-np.max(np.exp(-weight.value(inner)) * -tube))
    if not A > 0:
        raise SignCondition("A must be positive")
    r2 = np.sum(np.abs(Zb) ** 2, -1)
    if B is None:
        B = 0.5 * A / float(r2.max())
    if np.any(B * r2 - A >= 0):
        raise SignCondition("B|z|^2 - A is not negative on the boundary samples")
    gap = B * np.sum(np.abs(inner) ** 2, -1) - A - np.exp(-weight.value(inner)) * -tube
    xi = 0.5 * float(min(gap.min(), A))
    return GlobalDefiningFunction(sdf, weight, A, B, xi, tube)
