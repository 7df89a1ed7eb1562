"""Explicit example domains: balls, worm-like domains and their mu families."""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import wirtinger as W
from .domain import ImplicitDomain, SignedDistanceField, boundary_points, distance_jets
from .forms import pi10_from_jet
from .errors import HypothesisFailure, NoCollarFound, ParamBound, WrongStratum


# ---------------------------------------------------------------- mu families

@dataclass(frozen=True)
class MuTwoCircles:
    """mu(z) = (|z|^2 - 1)^2 - s^2 |z - 1|^4; {mu <= 0} is a lune between two circles."""

    s: float = 0.5
    name = "two_circles"

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ParamBound(f"s must lie in (0, 1), got {self.s}")

    def __call__(self, w):
        return (W.abs2(w) - 1) ** 2 - self.s ** 2 * W.abs2(w - 1) ** 2

    @property
    def gamma(self):
        return 0.5

    def params(self):
        return {"family": self.name, "s": self.s}


@dataclass(frozen=True)
class MuCuspFamily:
    """mu(z) = (|z|^2-1)^{2j} - |z-1|^{4(j-k)} (2 Im z)^{2k} - s^2 |z-1|^{4j}."""

    j: int = 4
    k: int = 3
    s: float = 0.5
    name = "cusp"

    def __post_init__(self):
        if not (self.j > 3 and self.j > self.k and 3 * self.k >= 2 * self.j):
            raise ParamBound(f"need j > 3 and j > k >= 2j/3, got j={self.j}, k={self.k}")
        if not 0 < self.s < 1:
            raise ParamBound(f"s must lie in (0, 1), got {self.s}")

    def __call__(self, w):
        j, k = self.j, self.k
        d2 = W.abs2(w - 1)
        return ((W.abs2(w) - 1) ** (2 * j) - d2 ** (2 * (j - k)) * (2 * W.imag(w)) ** (2 * k)
                - self.s ** 2 * d2 ** (2 * j))

    @property
    def gamma(self):
        return self.j / (2 * self.j - self.k)

    def params(self):
        return {"family": self.name, "j": self.j, "k": self.k, "s": self.s}


@dataclass(frozen=True)
class MuExperimental:
    """Interior-cone variant |z-1|^{4(k-j)}(|z|^2-1)^{2j} - (2 Im z)^{2k} - s|z-1|^{4k}.

    Carried without any acceptance contract; its index is not known.
    """

    j: int = 1
    k: int = 1
    s: float = 0.5
    name = "experimental"

    def __post_init__(self):
        if not (self.k >= self.j > 0):
            raise ParamBound("need k >= j > 0")

    def __call__(self, w):
        d2 = W.abs2(w - 1)
        return (d2 ** (2 * (self.k - self.j)) * (W.abs2(w) - 1) ** (2 * self.j)
                - (2 * W.imag(w)) ** (2 * self.k) - self.s * d2 ** (2 * self.k))

    @property
    def gamma(self):
        return None

    def params(self):
        return {"family": self.name, "j": self.j, "k": self.k, "s": self.s}


def mu_from_params(d):
    d = dict(d)
    fam = d.pop("family")
    cls = {"two_circles": MuTwoCircles, "cusp": MuCuspFamily,
           "experimental": MuExperimental}[fam]
    return cls(**d)


def mu_jets(mu, w):
    """mu, dmu/dz and d^2mu/dz dzbar at points w (1D array)."""
    jet = W.jet2(lambda z: mu(z[0]), np.asarray(w, complex)[:, None])
    return jet.value, jet.dz[:, 0], jet.dzdzbar[:, 0, 0].real


def mu_hypothesis_report(mu, eps_hat=0.1, m=None, n_theta=720, seed=0):
    """Grid check of the four hypotheses on mu required by the worm-like construction.

    Hypothesis (4) is checked on samples with 0 < mu < eps_hat; eps_hat is
    halved until the check passes (at most 12 times).
    """
    if m is None:
        m = 2.0 if isinstance(mu, MuTwoCircles) else 1.0
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    mu0 = float(np.real(mu(np.array([0j])))[0])
    big = np.real(mu(60.0 * np.exp(1j * th)))
    circ = np.real(mu(np.exp(1j * th)))
    rep = {"mu0": mu0, "h1_mu0_positive": mu0 > 0,
           "h2_min_on_large_circle": float(big.min()), "h2_large_circle_positive": bool(big.min() > 0),
           "h3_max_on_unit_circle": float(circ.max()), "h3_unit_circle_nonpositive": bool(circ.max() <= 1e-12)}
    w = collar_samples(mu, seed=seed)
    val, dmu, lap = mu_jets(mu, w)
    ok4 = False
    e = eps_hat
    for _ in range(13):
        sel = (val > 0) & (val < e)
        if sel.sum() == 0:
            break
        v, g, L = val[sel], np.abs(dmu[sel]), lap[sel]
        c1 = v ** m * L + g ** 2
        c2 = g - v ** m / np.abs(w[sel])
        if np.all(c1 > 0) and np.all(c2 > 0):
            ok4 = True
            rep.update({"h4_eps_hat": e, "h4_m": m, "h4_samples": int(sel.sum()),
                        "h4_min_first": float(c1.min()), "h4_min_second": float(c2.min())})
            break
        e *= 0.5
    rep["h4_pass"] = ok4
    rep["pass"] = bool(rep["h1_mu0_positive"] and rep["h2_large_circle_positive"]
                       and rep["h3_unit_circle_nonpositive"] and ok4)
    return rep


def collar_samples(mu, n=40000, seed=0, radius=20.0):
    """Points of C concentrated near {mu = 0}, including a refined patch at z = 1."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 7])))
    r = np.exp(rng.uniform(np.log(0.05), np.log(radius), n))
    w = r * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    loc = 1 + 10.0 ** rng.uniform(-4, -0.5, n) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    return np.concatenate([w, loc])


def mu_two_circles(s=0.5):
    mu = MuTwoCircles(s)
    return mu, mu_hypothesis_report(mu)


def mu_cusp(j=4, k=3, s=0.5):
    mu = MuCuspFamily(j, k, s)
    return mu, mu_hypothesis_report(mu)


def nonisotropic_collar_check(family, c, samples=None, seed=0):
    """Check the cusp-shape inequalities near z = 1 with shrinking gauge radius.

    (a) |Im z| < |Re z - 1|^{j/(2j-k)} and d(z) < r_hat imply mu > 0;
    (b) |Re z - 1| <= c |Im z|^{(2j-k)/j} and d(z) < r_c imply mu <= 0.
    """
    j, k = family.j, family.k
    cmax = 2.0 ** (-(j - k) / j)
    if not 0 < c < cmax:
        raise ParamBound(f"c must lie in (0, {cmax:.6g})")
    if samples is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 11])))
        y = np.sign(rng.uniform(-1, 1, 20000)) * 10.0 ** rng.uniform(-3, 0, 20000)
        x = 1 + np.sign(rng.uniform(-1, 1, 20000)) * 10.0 ** rng.uniform(-4, 0, 20000)
        samples = x + 1j * y
    z = np.asarray(samples, complex)
    X, Y = z.real - 1, z.imag
    d = X ** (2 * j) + Y ** (4 * j - 2 * k)
    mu = np.real(family(z))
    ga = j / (2 * j - k)
    cone_a = np.abs(Y) < np.abs(X) ** ga
    cone_b = np.abs(X) <= c * np.abs(Y) ** (1 / ga)

    def shrink(cond):
        r = float(d.max()) if len(d) else 1.0
        for _ in range(200):
            sel = d < r
            if not np.any(cond[sel] & ~_ok[sel]):
                return r
            r *= 0.7
        return None

    _ok = mu > 0
    r_hat = shrink(cone_a)
    _ok = mu <= 0
    r_c = shrink(cone_b)
    if r_hat is None or r_c is None:
        raise NoCollarFound("no gauge radius found for the cusp inequalities")
    lead = 2.0 ** (2 * j) * X ** (2 * j) - 2.0 ** (2 * k) * Y ** (4 * j - 2 * k)
    ratios = []
    for scale in (1e-2, 1e-4, 1e-6, 1e-8):
        sel = (d < scale) & (d > scale * 1e-2) & (np.abs(lead) > 1e-3 * d)
        if np.any(sel):
            ratios.append(float(np.median(mu[sel] / lead[sel])))
    return {"gamma": ga, "r_hat": r_hat, "r_c": r_c, "c": c,
            "n_cone_a": int(cone_a.sum()), "n_cone_b": int(cone_b.sum()),
            "leading_term_ratios": ratios}


# ---------------------------------------------------------------- domains

def baseline_ball(n=2):
    """Unit ball rho = |z|^2 - 1."""

    def rho(z):
        return sum(W.abs2(c) for c in z) - 1.0

    rho.dim = n

    def sampler(count, rng):
        g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    bbox = np.array([[-1.2, 1.2]] * (2 * n))
    return ImplicitDomain(rho, n, bbox, name=f"ball{n}", diameter=2.0, sampler=sampler)


def half_space(n=2):
    """Half-space Re z_1 < 0 restricted to a box."""

    def rho(z):
        return W.real(z[0]) + 0.0 * W.abs2(z[-1])

    rho.dim = n
    bbox = np.array([[-1.0, 1.0]] * (2 * n))
    return ImplicitDomain(rho, n, bbox, name=f"halfspace{n}", diameter=2.0)


@dataclass(frozen=True)
class WormLikeParams:
    """Parameters of the worm-like family.

    rho = |z1 + exp(i log|z2|^2)|^2 - 1 + exp((B/A)^{m-1}) chi(mu(z2)/B) with the
    flat cutoff chi(t) = exp(-1/t^{m-1}).  B defaults to 1.1 times its lower bound.
    """

    mu: object = field(default_factory=MuTwoCircles)
    m: float = 2.0
    A: float = 0.05
    B: Optional[float] = None
    t_min: float = 1e-3

    def __post_init__(self):
        if not self.m > 1:
            raise ParamBound("m must exceed 1")
        if not self.A > 0:
            raise ParamBound("A must be positive")
        if self.B is None:
            object.__setattr__(self, "B", 1.1 * self.B_bound)
        if not self.B > self.B_bound:
            raise ParamBound(f"B must exceed {self.B_bound:.6g}")
        mu0 = float(np.real(self.mu(np.array([0j])))[0])
        if not mu0 > self.A:
            raise ParamBound(f"need mu(0) = {mu0:.4g} > A")

    @property
    def B_bound(self):
        m, A = self.m, self.A
        return ((m * A ** (m - 1) + 3) / (m - 1)) ** (1 / (m - 1))

    def cut(self, mu):
        """exp((B/A)^{m-1}) chi(mu/B), clamped to 0 for mu/B <= t_min."""
        m, A, B = self.m, self.A, self.B
        mv = np.real(W.value_of(mu))
        on = mv > self.t_min * B
        safe = W.where(on, mu, B)
        val = W.exp((B / A) ** (m - 1) - (B * W.power(safe, -1.0)) ** (m - 1) if m != 2
                    else (B / A) - B / safe)
        return W.where(on, val, 0.0)

    @property
    def clamp_error(self):
        """Bound on the dropped cutoff term below t_min."""
        return float(np.exp((self.B / self.A) ** (self.m - 1) - self.t_min ** (1 - self.m)))

    def r_of(self, mu):
        return np.sqrt(np.maximum(1.0 - np.real(self.cut(np.asarray(mu, float))), 0.0))

    def to_dict(self):
        return {"mu": self.mu.params(), "m": self.m, "A": self.A, "B": self.B, "t_min": self.t_min}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["mu"] = mu_from_params(d["mu"])
        return cls(**d)


def _region_extent(mu, level):
    th = np.linspace(0, 2 * np.pi, 721)
    r = np.exp(np.linspace(np.log(0.02), np.log(80.0), 1200))
    w = r[:, None] * np.exp(1j * th[None, :])
    inside = np.real(mu(w.ravel())).reshape(w.shape) < level
    if not inside.any():
        raise HypothesisFailure("sublevel set of mu is empty")
    if inside[-1].any():
        raise HypothesisFailure("sublevel set of mu is not bounded on the scan")
    pts = w[inside]
    pad = 0.1 * (1 + np.abs(pts).max() / 10)
    return (pts.real.min() - pad, pts.real.max() + pad, pts.imag.min() - pad, pts.imag.max() + pad)


def worm_like_domain(p):
    """The worm-like domain in C^2 built from p.mu."""
    mu = p.mu
    ext = _region_extent(mu, p.A)

    def rho(z):
        z1, z2 = z[0], z[1]
        e = W.exp(1j * W.log(W.abs2(z2)))
        return W.abs2(z1 + e) - 1.0 + p.cut(mu(z2))

    rho.dim = 2

    def draw_z2(count, rng, level):
        out = []
        while sum(len(o) for o in out) < count:
            w = rng.uniform(ext[0], ext[1], 4 * count) + 1j * rng.uniform(ext[2], ext[3], 4 * count)
            w = w[(np.abs(w) >= 0.05) & (np.real(mu(w)) < level)]
            out.append(w)
        return np.concatenate(out)[:count]

    def sampler(count, rng):
        nk = count // 3
        wk = draw_z2(nk, rng, 0.0)
        wa = draw_z2(count - nk, rng, p.A)
        th = rng.uniform(0, 2 * np.pi, count - nk)
        r = p.r_of(np.real(mu(wa)))
        z1 = np.exp(1j * np.log(np.abs(wa) ** 2)) * (r * np.exp(1j * th) - 1)
        Z = np.concatenate([np.stack([np.zeros(nk, complex), wk], 1), np.stack([z1, wa], 1)])
        return Z

    def k_predicate(Z):
        Z = np.atleast_2d(Z)
        return (np.abs(Z[:, 0]) < 1e-9) & (np.real(mu(Z[:, 1])) <= 0)

    def excluded(Z):
        return np.abs(np.atleast_2d(Z)[:, 1]) < 0.05

    bbox = np.array([[-2.1, 2.1], [ext[0], ext[1]], [-2.1, 2.1], [ext[2], ext[3]]])
    diam = float(np.hypot(4.2, np.hypot(ext[1] - ext[0], ext[3] - ext[2])))
    return ImplicitDomain(rho, 2, bbox, name=f"worm_like_{mu.name}", diameter=diam,
                          sampler=sampler, k_predicate=k_predicate, excluded=excluded)


def worm_boundary_point(p, z2, theta):
    """Boundary point z1 = e^{i log|z2|^2} (r(z2) e^{i theta} - 1)."""
    z2 = np.asarray(z2, complex)
    r = p.r_of(np.real(p.mu(z2)))
    z1 = np.exp(1j * np.log(np.abs(z2) ** 2)) * (r * np.exp(1j * theta) - 1)
    return np.stack([z1, z2], -1)


def _r_derivatives(p, z2):
    """r, dr/dz2 and d^2 r/dz2 dz2bar from the cutoff's closed-form derivatives."""
    m, B = p.m, p.B
    mu, mz, mzz = mu_jets(p.mu, z2)
    cut = np.real(p.cut(mu))
    r = np.sqrt(1.0 - cut)
    # 1/r - r = cut/r avoids cancellation where the cutoff is tiny
    c = -(m - 1) * B ** (m - 1) * (cut / r) / (2 * mu ** m)
    rz = c * mz
    rzz = c * (((m - 1) * B ** (m - 1) * (r ** -2 + 1) / (2 * mu ** m) - m / mu) * np.abs(mz) ** 2 + mzz)
    return mu, r, rz, rzz


def worm_levi_closed_form(z2, theta, p):
    """Levi form L(L, Lbar) of rho on the intermediate stratum 0 < mu(z2) < A.

    Returns (levi, boundary points, L vectors).
    """
    z2 = np.atleast_1d(np.asarray(z2, complex))
    theta = np.broadcast_to(np.asarray(theta, float), z2.shape)
    mu, r, rz, rzz = _r_derivatives(p, z2)
    if np.any(mu <= 0) or np.any(mu >= p.A):
        raise WrongStratum("points must satisfy 0 < mu(z2) < A")
    e = np.exp(1j * theta)
    rzb = np.conj(rz)
    a2 = np.abs(z2) ** 2
    lev = (2j * e / z2 * rzb - 2j / (e * np.conj(z2)) * rz + 2 / a2
           - 2 * np.cos(theta) * r / a2 - 2 * r * rzz + 2 * np.abs(rz) ** 2)
    phase = np.exp(1j * (theta + np.log(a2)))
    Lvec = np.stack([phase * (1j * (e - 1 / e) / z2 + 2 * rz), np.ones_like(z2)], -1)
    Z = worm_boundary_point(p, z2, theta)
    return lev.real, Z, Lvec


def worm_levi_ad(p, Z, Lvec):
    """L* (complex Hessian of delta) L scaled by |grad rho|, via the signed distance."""
    dom = worm_like_domain(p)
    bp = boundary_points(SignedDistanceField(dom), Z)
    v, G, _ = dom.rho_jets(Z)
    gn = np.linalg.norm(G, axis=-1)
    H = bp.delta_jet.hess
    val = np.einsum("ni,nij,nj->n", np.conj(Lvec), H, Lvec).real
    tang = np.abs(np.einsum("ni,ni->n", bp.delta_jet.dz, Lvec))
    return val * gn, tang


# ------------------------------------------------------- worm-like leaf data

TWO_PI = 2 * math.pi


def worm_leaf_h(z):
    """h = -arg(-z2) in (-pi, pi]; dh/dz2 = i/(2 z2) matches alpha on the leaf.

    The branch cut is the positive real axis of z2, which meets the weak set
    only at the cusp vertex z2 = 1 for the cusp family.
    """
    return -W.atan2(-W.imag(z[1]), -W.real(z[1]))


worm_leaf_h.dim = 2


def _worm_f(z):
    return [z[0]]


def on_cut(Z, tol=0.0):
    Z = np.atleast_2d(Z)
    return (np.abs(Z[:, 1].imag) <= tol) & (Z[:, 1].real > 0)


@dataclass(frozen=True)
class WormLeafPackage:
    """Leaf data of a worm-like domain: the dimension-1 leaf and the vertex p."""

    leaf: object
    vertex: np.ndarray
    vertex_membership: Callable
    vertex_witness: object
    gamma: Optional[float]
    h_residual: float
    f_residual: float
    C_measured: float
    report: dict


def worm_k_grid(p, n_r=24, n_theta=96, vertex_exclusion=0.0):
    """Deterministic polar grid of the weak set {z1 = 0, mu(z2) <= 0}.

    Points with |z2 - 1| <= vertex_exclusion are dropped.
    """
    rad = np.linspace(0.3, 2.0, n_r)
    th = (np.arange(n_theta) + 0.5) * TWO_PI / n_theta
    w = (rad[:, None] * np.exp(1j * th[None, :])).ravel()
    keep = (np.real(p.mu(w)) <= 0) & (np.abs(w - 1) > vertex_exclusion) & (np.abs(w) >= 0.05)
    w = w[keep]
    return np.stack([np.zeros_like(w), w], 1)


def worm_vertex_samples(p, zeta, gamma, n_y=40, n_x=9):
    """Weak-set points in the blending zone zeta <= |Im z2| <= 2 zeta near z2 = 1.

    Horizontal offsets are |Re z2 - 1| <= |Im z2|^{1/gamma}, i.e. inside the cusp.
    """
    t = np.linspace(0.8, 1.9, n_y)
    s = np.linspace(-1.0, 1.0, n_x)
    y = np.concatenate([t, -t]) * zeta
    x = s[None, :] * np.abs(y[:, None]) ** (1 / gamma)
    w = (1.0 + x + 1j * y[:, None]).ravel()
    w = w[np.real(p.mu(w)) <= 0]
    return np.stack([np.zeros_like(w), w], 1)


def leaf_package_for_worm_like(p, K_samples=None, witness_M=1.0, witness_r=0.1,
                               vertex_exclusion=0.2):
    """Leaf data f = z1, h = -arg(-z2), memberships and the vertex witness.

    ``K_samples`` are boundary points of the weak set used to verify
    dh = alpha on the leaf and f = 0; by default a polar grid away from the
    vertex is used.
    """
    from .weights import LeafData, annulus_witness, cusp_containment

    dom = worm_like_domain(p)
    sdf = SignedDistanceField(dom)
    Z = worm_k_grid(p, vertex_exclusion=vertex_exclusion) if K_samples is None else K_samples
    Z = np.atleast_2d(Z)
    hj = W.jet2(worm_leaf_h, Z)
    a = pi10_from_jet(distance_jets(sdf, Z, check_unique=False).jet)
    # on the leaf only the z2 component of dh - alpha is tangential
    h_res = float(np.max(np.abs(hj.dz[:, 1] - a[:, 1])))
    f_res = float(np.max(np.abs(Z[:, 0])))
    C_meas = float(np.exp(2 * np.max(np.abs(hj.value))))
    C = math.exp(TWO_PI)
    leaf = LeafData(_worm_f, worm_leaf_h, dom.k_predicate, 2, 1, C, name=f"{dom.name}_leaf")
    vertex = np.array([0j, 1 + 0j])
    gamma = getattr(p.mu, "gamma", None)

    def vertex_membership(Zq, tol=1e-12):
        Zq = np.atleast_2d(Zq)
        return np.linalg.norm(Zq - vertex, axis=1) <= tol

    rep = {"h_residual": h_res, "f_residual": f_res, "C": C, "C_measured": C_meas,
           "n_samples": int(len(Z))}
    witness = None
    if gamma is not None and isinstance(p.mu, MuCuspFamily):
        witness = annulus_witness(witness_M, witness_r, gamma, n=2, coord=1)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([0, 13])))
        yy = witness.R * rng.uniform(-1, 1, 4000)
        xx = rng.uniform(-1, 1, 4000) * np.abs(yy) ** (1 / gamma)
        probe = np.stack([witness.R * 1e-3 * rng.uniform(-1, 1, 4000) + 0j, 1 + xx + 1j * yy], 1)
        frac, cnt = cusp_containment(witness, gamma, probe, coord=1)
        rep.update({"vertex_witness": {"M": witness.M, "r": witness.r, "R": witness.R},
                    "cusp_containment": frac, "cusp_points": cnt})
    return WormLeafPackage(leaf, vertex, vertex_membership, witness, gamma, h_res, f_res,
                           C_meas, rep)


def worm_leaf_weight_builder(pkg, sdf, leaf_samples, A=1.0, r0=0.5):
    """eta -> leaf weight with B_tilde = A + 2 log C + 1 and the largest valid r."""
    from .weights import LeafWeightParams, disc_witness, leaf_weight, search_leaf_radius

    leaf = pkg.leaf
    D = 1.05 * float(np.max(np.linalg.norm(leaf_samples, axis=1)))
    Bt = A + 2 * math.log(leaf.C) + 1.0

    def build(eta):
        prm = LeafWeightParams(eta, A, Bt, leaf.C, D)
        r = search_leaf_radius(leaf, prm, sdf, leaf_samples, r0=r0)
        return leaf_weight(leaf, disc_witness(prm.M, r), prm, r=r, sdf=sdf,
                           leaf_samples=leaf_samples)

    return build


def worm_base_field(eps=0.1, offset=0.0):
    """Field 2 e^{i log|z2|^2} e^{offset + 2h} d/dz1 on the weak set minus the cut.

    On the weak set X delta = e^{offset + 2h} > 0 and the commutator pairing
    with d/dzbar_2 vanishes because d(2h)/dzbar_2 = -i/zbar_2.
    """
    from .gvf import field_from_callbacks

    def x1(z):
        return 2.0 * W.exp(1j * W.log(W.abs2(z[1])) + offset + 2.0 * worm_leaf_h(z))

    def x2(z):
        return 0.0 * W.real(z[0])

    x1.dim = x2.dim = 2

    def region(Z):
        Z = np.atleast_2d(Z)
        return ~on_cut(Z) & (np.abs(Z[:, 1]) >= 0.05)

    C = 2.0 * math.exp(TWO_PI + abs(offset))
    return field_from_callbacks([x1, x2], 2, region=region, epsilon=eps, C=C,
                                name="worm_winding", params={"eps": eps, "offset": offset})


# ---------------------------------------------------------------- registry

@dataclass(frozen=True)
class ExampleEntry:
    name: str
    domain: object
    params: dict
    grids: dict
    worm: Optional[WormLikeParams] = None
    has_contract: bool = True


def _worm_entry(name, mu, overrides, contract=True):
    kw = {k: v for k, v in overrides.items() if k in ("m", "A", "B", "t_min")}
    wp = WormLikeParams(mu=mu, **kw)
    grids = {"boundary_budget": 1000, "k_grid": {"n_r": 24, "n_theta": 96},
             "shells": [2e-9, 1e-9, 5e-10]}
    return ExampleEntry(name, worm_like_domain(wp), wp.to_dict(), grids, wp, contract)


def _mu_kwargs(overrides, keys):
    return {k: overrides[k] for k in keys if k in overrides}


def get_example(name, overrides=None):
    """Build a registered example from its name and JSON parameter overrides."""
    o = dict(overrides or {})
    if name == "ball":
        n = int(o.get("n", 2))
        return ExampleEntry(name, baseline_ball(n), {"n": n},
                            {"boundary_budget": 1000, "shells": [1e-2, 3e-3, 1e-3]})
    if name == "worm_like_two_circles":
        return _worm_entry(name, MuTwoCircles(**_mu_kwargs(o, ("s",))), o)
    if name == "worm_like_cusp":
        return _worm_entry(name, MuCuspFamily(**_mu_kwargs(o, ("j", "k", "s"))), o)
    if name == "worm_like_experimental":
        return _worm_entry(name, MuExperimental(**_mu_kwargs(o, ("j", "k", "s"))), o,
                           contract=False)
    raise KeyError(f"unknown example {name!r}")


EXAMPLES = ("ball", "worm_like_two_circles", "worm_like_cusp", "worm_like_experimental")
