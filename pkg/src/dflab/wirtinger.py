"""Second-order jet calculus over C^n with Wirtinger derivatives.

Scalar fields are written as callbacks ``f(z)`` where ``z`` is a list of n
complex coordinates.  Each coordinate is either a plain complex ndarray of
shape (N,) or a :class:`Jet`; the module-level functions (``exp``, ``log``,
``conj`` ...) dispatch on both, so the same callback serves the forward-mode
scheme and the finite-difference oracle.

Hermitian forms follow the convention ``H(v) = v* H v`` for a form
``i sum a_jk dz_j ^ dzbar_k``, which gives ``H = a^T``.  Complex Hessians of a
real function f therefore enter forms as ``hess = dzdzbar.T``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFinite, NonHermitian, RankDeficient


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet:
    """Truncated second-order Taylor jet over d real variables.

    ``v`` has shape (N,), ``g`` shape (N, d) and ``h`` shape (N, d, d).  All
    three may be complex; derivatives are with respect to real coordinates.
    """

    __slots__ = ("v", "g", "h")
    __array_priority__ = 1000

    def __init__(self, v, g, h):
        self.v = v
        self.g = g
        self.h = h

    @property
    def shape(self):
        return self.v.shape

    def _chain(self, f0, f1, f2):
        g = f1[..., None] * self.g
        h = f1[..., None, None] * self.h + f2[..., None, None] * _outer(self.g, self.g)
        return Jet(f0, g, h)

    def __neg__(self):
        return Jet(-self.v, -self.g, -self.h)

    def __pos__(self):
        return self

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v + o.v, self.g + o.g, self.h + o.h)
        return Jet(self.v + o, self.g, self.h)

    __radd__ = __add__

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Jet):
            a, b = self, o
            v = a.v * b.v
            g = a.v[..., None] * b.g + b.v[..., None] * a.g
            h = (a.v[..., None, None] * b.h + b.v[..., None, None] * a.h
                 + _outer(a.g, b.g) + _outer(b.g, a.g))
            return Jet(v, g, h)
        c = np.asarray(o)
        return Jet(self.v * c, self.g * c[..., None], self.h * c[..., None, None])

    __rmul__ = __mul__

    def reciprocal(self):
        r = 1.0 / self.v
        return self._chain(r, -r * r, 2.0 * r * r * r)

    def __truediv__(self, o):
        if isinstance(o, Jet):
            return self * o.reciprocal()
        return self * (1.0 / np.asarray(o))

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def __pow__(self, p):
        return power(self, p)

    def conj(self):
        return Jet(np.conj(self.v), np.conj(self.g), np.conj(self.h))

    @property
    def real(self):
        return Jet(self.v.real, self.g.real, self.h.real)

    @property
    def imag(self):
        return Jet(self.v.imag, self.g.imag, self.h.imag)

    def take(self, mask):
        return Jet(self.v[mask], self.g[mask], self.h[mask])


def constant_like(c, like):
    """Lift an array of values to a jet with zero derivatives."""
    c = np.broadcast_to(np.asarray(c), like.v.shape).copy()
    return Jet(c, np.zeros(like.g.shape, c.dtype), np.zeros(like.h.shape, c.dtype))


def where(mask, a, b):
    """Per-sample selection between two jets or arrays."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.where(mask, a, b)
    like = a if isinstance(a, Jet) else b
    if not isinstance(a, Jet):
        a = constant_like(a, like)
    if not isinstance(b, Jet):
        b = constant_like(b, like)
    m = np.asarray(mask)
    return Jet(np.where(m, a.v, b.v), np.where(m[..., None], a.g, b.g),
               np.where(m[..., None, None], a.h, b.h))


def power(a, p):
    """Real power; non-negative integer powers are safe at zero."""
    if isinstance(a, Jet):
        if float(p).is_integer() and p >= 0:
            p = int(p)
            if p == 0:
                return constant_like(np.ones_like(a.v), a)
            out = a
            for _ in range(p - 1):
                out = out * a
            return out
        v = a.v
        return a._chain(v ** p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))
    return np.asarray(a) ** p


def exp(a):
    if isinstance(a, Jet):
        e = np.exp(a.v)
        return a._chain(e, e, e)
    return np.exp(a)


def log(a):
    if isinstance(a, Jet):
        r = 1.0 / a.v
        return a._chain(np.log(a.v), r, -r * r)
    return np.log(a)


def sqrt(a):
    if isinstance(a, Jet):
        s = np.sqrt(a.v)
        return a._chain(s, 0.5 / s, -0.25 / (s * a.v))
    return np.sqrt(a)


def sin(a):
    if isinstance(a, Jet):
        s, c = np.sin(a.v), np.cos(a.v)
        return a._chain(s, c, -s)
    return np.sin(a)


def cos(a):
    if isinstance(a, Jet):
        s, c = np.sin(a.v), np.cos(a.v)
        return a._chain(c, -s, -c)
    return np.cos(a)


def conj(a):
    return a.conj() if isinstance(a, Jet) else np.conj(a)


def real(a):
    return a.real if isinstance(a, Jet) else np.real(a)


def imag(a):
    return a.imag if isinstance(a, Jet) else np.imag(a)


def abs2(a):
    """|a|^2 as a real quantity."""
    return real(a * conj(a))


def atan2(y, x):
    """Two-argument arctangent of real jets (derivatives of arg(x + iy))."""
    if isinstance(y, Jet) or isinstance(x, Jet):
        w = x + 1j * y
        if not isinstance(w, Jet):
            raise TypeError("atan2 expects at least one jet")
        lg = log(w).imag
        return Jet(np.arctan2(real(y).v if isinstance(y, Jet) else y,
                              real(x).v if isinstance(x, Jet) else x), lg.g, lg.h)
    return np.arctan2(y, x)


def value_of(a):
    return a.v if isinstance(a, Jet) else np.asarray(a)


@dataclass(frozen=True)
class WirtingerJet2:
    """Value and Wirtinger derivatives of a real function, possibly batched.

    Unbatched: ``dz`` has shape (n,), ``dzdzbar`` and ``dzdz`` shape (n, n).
    Batched arrays carry a leading sample axis.  ``dzdzbar[j, k]`` is
    d^2 f / dz_j dzbar_k.
    """

    value: np.ndarray
    dz: np.ndarray
    dzdzbar: np.ndarray
    dzdz: np.ndarray

    @property
    def dzbar(self):
        return np.conj(self.dz)

    @property
    def hess(self):
        """Complex Hessian as a Hermitian form matrix (v* hess v = Levi value)."""
        return np.swapaxes(self.dzdzbar, -1, -2)

    @property
    def grad_norm2(self):
        """Squared Euclidean norm of the real gradient, 4 sum |f_z|^2."""
        return 4.0 * np.sum(np.abs(self.dz) ** 2, axis=-1)

    def __getitem__(self, idx):
        return WirtingerJet2(self.value[idx], self.dz[idx], self.dzdzbar[idx], self.dzdz[idx])

    def __len__(self):
        return len(self.value)


@dataclass(frozen=True)
class HermitianForm:
    matrix: np.ndarray


def _points(z):
    z = np.asarray(z)
    single = z.ndim == 1
    return np.atleast_2d(z), single


def seed_coordinates(Z):
    """Seed jets for the complex coordinates of points Z with shape (N, n)."""
    N, n = Z.shape
    d = 2 * n
    out = []
    for j in range(n):
        g = np.zeros((N, d), complex)
        g[:, j] = 1.0
        g[:, n + j] = 1j
        out.append(Jet(Z[:, j].astype(complex), g, np.zeros((N, d, d), complex)))
    return out


def _call(f, coords, n):
    dim = getattr(f, "dim", None)
    if dim is not None and dim != n:
        raise DimensionMismatch(f"field has dimension {dim}, point has {n}")
    try:
        return f(coords)
    except IndexError as exc:
        raise DimensionMismatch(str(exc)) from exc


def real_jet(f, z):
    """Real-coordinate value, gradient and Hessian of f by forward mode.

    Coordinates are ordered (x_1..x_n, y_1..y_n).
    """
    Z, _ = _points(z)
    N, n = Z.shape
    out = _call(f, seed_coordinates(Z), n)
    if not isinstance(out, Jet):
        v = np.broadcast_to(np.asarray(out, complex), (N,))
        return v.real.copy(), np.zeros((N, 2 * n)), np.zeros((N, 2 * n, 2 * n))
    return out.v, out.g, out.h


def assemble(value, G, Hr):
    """Wirtinger jets from a real gradient G (N, 2n) and Hessian Hr (N, 2n, 2n)."""
    n = G.shape[-1] // 2
    dz = 0.5 * (G[:, :n] - 1j * G[:, n:])
    Hxx, Hyy = Hr[:, :n, :n], Hr[:, n:, n:]
    Hxy, Hyx = Hr[:, :n, n:], Hr[:, n:, :n]
    dzdzbar = 0.25 * (Hxx + Hyy + 1j * (Hxy - Hyx))
    dzdz = 0.25 * (Hxx - Hyy - 1j * (Hxy + Hyx))
    return WirtingerJet2(np.asarray(value), dz, dzdzbar, dzdz)


def _fd_real(f, Z, h):
    N, n = Z.shape
    d = 2 * n
    Zl = Z.astype(np.clongdouble)
    steps = np.zeros((d, n), np.clongdouble)
    for j in range(n):
        steps[j, j] = 1
        steps[n + j, j] = 1j

    def ev(dz):
        return np.real(np.asarray(_call(f, [Zl[:, j] + dz[j] for j in range(n)], n)))

    h = np.longdouble(h)
    f0 = ev(np.zeros(n, np.clongdouble))
    fp = [ev(h * steps[i]) for i in range(d)]
    fm = [ev(-h * steps[i]) for i in range(d)]
    G = np.stack([(fp[i] - fm[i]) / (2 * h) for i in range(d)], axis=-1)
    H = np.zeros((N, d, d), np.longdouble)
    for i in range(d):
        H[:, i, i] = (fp[i] - 2 * f0 + fm[i]) / (h * h)
        for k in range(i + 1, d):
            s = ((ev(h * (steps[i] + steps[k])) - ev(h * (steps[i] - steps[k]))
                  - ev(h * (steps[k] - steps[i])) + ev(-h * (steps[i] + steps[k])))
                 / (4 * h * h))
            H[:, i, k] = H[:, k, i] = s
    return (np.asarray(f0, float), np.asarray(G, float), np.asarray(H, float))


def jet2(f, z, scheme="AD", h=1e-5):
    """Value and first/second Wirtinger derivatives of a real scalar field.

    Parameters
    ----------
    f : callable
        Field ``f(z)`` taking a list of n complex coordinates.
    z : array_like
        Point of shape (n,) or batch of shape (N, n).
    scheme : {"AD", "FD"}
        Forward-mode jets, or central differences in extended precision.
    h : float
        Finite-difference step for ``scheme="FD"``.

    Returns
    -------
    WirtingerJet2
        Unbatched when ``z`` is one point.
    """
    Z, single = _points(z)
    if not np.all(np.isfinite(Z)):
        raise NonFinite("non-finite input point")
    if scheme == "AD":
        v, G, Hr = real_jet(f, Z)
        v, G, Hr = np.real(v), np.real(G), np.real(Hr)
    elif scheme == "FD":
        if not h > 0:
            raise ValueError("FD step must be positive")
        v, G, Hr = _fd_real(f, Z, h)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    for a in (v, G, Hr):
        if not np.all(np.isfinite(a)):
            raise NonFinite("non-finite derivative")
    jet = assemble(v, G, Hr)
    return jet[0] if single else jet


def complex_jet1(f, z):
    """Value, d/dz and d/dzbar of a complex-valued field at points (N, n)."""
    Z, single = _points(z)
    N, n = Z.shape
    out = _call(f, seed_coordinates(Z), n)
    if not isinstance(out, Jet):
        v = np.broadcast_to(np.asarray(out, complex), (N,)).copy()
        res = (v, np.zeros((N, n), complex), np.zeros((N, n), complex))
    else:
        G = out.g
        res = (out.v, 0.5 * (G[:, :n] - 1j * G[:, n:]), 0.5 * (G[:, :n] + 1j * G[:, n:]))
    return tuple(a[0] for a in res) if single else res


def _mat(H):
    return np.asarray(H.matrix if isinstance(H, HermitianForm) else H)


def hermitian_part(H, tol=1e-9, atol=1e-13):
    """Return (H + H*)/2 after checking the relative asymmetry.

    Matrices whose entries are all at rounding level (below ``atol``) pass.
    """
    A = _mat(H)
    Ah = np.conj(np.swapaxes(A, -1, -2))
    asym = np.linalg.norm(A - Ah, axis=(-2, -1))
    scale = np.maximum(np.linalg.norm(A, axis=(-2, -1)), 1e-300)
    if np.any(asym > tol * scale + atol):
        raise NonHermitian(f"relative asymmetry {float(np.max(asym / scale)):.3e}")
    return 0.5 * (A + Ah)


def min_eigenvalue(H, tol=1e-9):
    """Smallest eigenvalue of the Hermitianized matrix (batched over leading axes)."""
    return np.linalg.eigvalsh(hermitian_part(H, tol))[..., 0]


def restrict_form(H, basis):
    """Restriction B* H B of a form to the span of the basis vectors."""
    A = _mat(H)
    B = np.column_stack([np.asarray(b, complex) for b in basis])
    if np.linalg.cond(B.conj().T @ B) > 1e12:
        raise RankDeficient("basis vectors are (nearly) dependent")
    out = B.conj().T @ A @ B
    return HermitianForm(out) if isinstance(H, HermitianForm) else out


def wedge(u, w):
    """Form matrix of i u ^ conj(w) for (1,0) covectors u, w (batched)."""
    return np.conj(w)[..., :, None] * u[..., None, :]
