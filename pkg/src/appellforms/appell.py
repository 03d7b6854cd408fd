"""Appell functions of positive-definite lattices as exact formal series.

The elliptic variables ``u`` and ``v`` are affine forms in formal variables
z_1..z_n::

    u = lin . z + tau_part * tau + const

so ``e^{2 pi i B(x, u)}`` is the monomial ``q^{B(x, tau_part)} w^{B(x, lin)}
e(B(x, const))``.  The expansion chamber is fixed by ``z_im``, the vector of
Im(z_j)/Im(tau); together with the tau parts it determines a = Im(u)/Im(tau).
"""

from dataclasses import dataclass, replace
from fractions import Fraction as F
from itertools import product
import math

import numpy as np

from . import _exact as ex
from .fseries import FSeries, series_compare, symmetric_box
from .lattice import DVectorSet, Lattice, cartan_an, dual_vectors, projection_matrix, weyl_reflection


class GenericityError(ValueError):
    """A lattice point sits on a wall B(d_r, k + a) = 0 of the sign kernel."""


@dataclass(frozen=True)
class AffineForm:
    lin: tuple    # N rows, one column per formal variable
    tau: tuple    # N
    const: tuple  # N

    @classmethod
    def zero(cls, n, nvars):
        return cls(tuple((F(0),) * nvars for _ in range(n)), (F(0),) * n, (F(0),) * n)

    @classmethod
    def linear(cls, direction, var, nvars):
        """direction * z_var."""
        direction = ex.vec(direction)
        lin = tuple(tuple(x if j == var else F(0) for j in range(nvars)) for x in direction)
        return cls(lin, (F(0),) * len(direction), (F(0),) * len(direction))

    @property
    def nvars(self):
        return len(self.lin[0]) if self.lin else 0

    def __neg__(self):
        return AffineForm(tuple(tuple(-x for x in row) for row in self.lin),
                          tuple(-x for x in self.tau), tuple(-x for x in self.const))

    def plus(self, tau=None, const=None):
        t = self.tau if tau is None else ex.add(self.tau, ex.vec(tau))
        c = self.const if const is None else ex.add(self.const, ex.vec(const))
        return AffineForm(self.lin, t, c)

    def transform(self, g):
        g = ex.mat(g)
        return AffineForm(ex.mat_mul(g, self.lin), ex.mat_vec(g, self.tau), ex.mat_vec(g, self.const))

    def imaginary_over_y(self, z_im):
        return tuple(sum((row[j] * z_im[j] for j in range(len(z_im))), F(0)) + t
                     for row, t in zip(self.lin, self.tau))

    def numeric(self, tau, zs):
        lin = np.array([[float(x) for x in row] for row in self.lin]).reshape(len(self.tau), -1)
        z = np.array(zs, dtype=complex)
        return lin @ z + np.array([float(x) for x in self.tau]) * tau + np.array([float(x) for x in self.const])


@dataclass(frozen=True)
class AppellSpec:
    """Data of Phi_{mu,nu}(tau, u, v, {d_r}); ``nu`` holds the components nu_r."""

    ds: DVectorSet
    mu: tuple
    nu: tuple
    u: AffineForm
    v: AffineForm
    z_im: tuple

    def __post_init__(self):
        n, m = self.ds.lattice.rank, self.ds.depth
        object.__setattr__(self, "mu", ex.vec(self.mu))
        object.__setattr__(self, "nu", ex.vec(self.nu))
        object.__setattr__(self, "z_im", ex.vec(self.z_im))
        if len(self.mu) != n:
            raise ValueError("mu has wrong length")
        if len(self.nu) != m:
            raise ValueError("nu needs one component per d-vector")
        for f in (self.u, self.v):
            if len(f.tau) != n or len(f.const) != n or len(f.lin) != n:
                raise ValueError("elliptic variable has wrong length")
            if f.nvars != len(self.z_im):
                raise ValueError("z_im needs one entry per formal variable")

    @property
    def lattice(self):
        return self.ds.lattice

    @property
    def nvars(self):
        return len(self.z_im)

    @property
    def nu_vector(self):
        return self.ds.combine(self.nu)

    @property
    def a_direction(self):
        return self.u.imaginary_over_y(self.z_im)

    def sigma_im(self):
        """Components of Im(sigma)/y, sigma = D^-1 C^T (v - u)."""
        if self.ds.depth == 0:
            return ()
        diff = ex.sub(self.v.imaginary_over_y(self.z_im), self.a_direction)
        return self.ds.d_coordinates(diff)

    def nu_tilde(self):
        """nu_r - floor(nu_r + Im(sigma_r)/y): the chamber-adapted characteristic."""
        return tuple(n - math.floor(n + s) for n, s in zip(self.nu, self.sigma_im()))

    def with_(self, **kw):
        return replace(self, **kw)


def make_spec(gram_or_lattice, dvectors, mu=None, nu=None, u=None, v=None, z_im=None):
    lat = gram_or_lattice if isinstance(gram_or_lattice, Lattice) else Lattice(tuple(map(tuple, gram_or_lattice)))
    ds = DVectorSet(lat, tuple(tuple(d) for d in dvectors))
    n = lat.rank
    nvars = len(z_im) if z_im is not None else (u.nvars if u is not None else 0)
    return AppellSpec(ds, mu if mu is not None else (0,) * n, nu if nu is not None else (0,) * ds.depth,
                      u if u is not None else AffineForm.zero(n, nvars),
                      v if v is not None else AffineForm.zero(n, nvars),
                      z_im if z_im is not None else ())


# -- pairing of a vector with an affine form ----------------------------

class _Pairing:
    def __init__(self, lattice, form):
        a = ex.mat(lattice.gram)
        self.tau = ex.mat_vec(a, form.tau)
        self.const = ex.mat_vec(a, form.const)
        self.lin = tuple(ex.mat_vec(a, col) for col in ex.transpose(form.lin)) if form.nvars else ()

    def __call__(self, x):
        return ex.dot(x, self.tau), tuple(ex.dot(x, c) for c in self.lin), ex.dot(x, self.const)


def pair(lattice, x, form):
    """(q, w, phase) exponents of e^{2 pi i B(x, form)}."""
    return _Pairing(lattice, form)(ex.vec(x))


def _box_grade_max(wbox, z_im):
    return sum((max(lo * z, hi * z) for (lo, hi), z in zip(wbox, z_im)), F(0))


def _expand(spec, cutoff, wbox):
    """Sign-kernel lattice sum of Phi_{mu,nu} truncated to q^cutoff and the w-box."""
    cutoff = F(cutoff)
    lat, ds = spec.lattice, spec.ds
    n, m = lat.rank, ds.depth
    a = ex.mat(lat.gram)
    ainv = lat.inverse
    z_im = spec.z_im
    nvars = spec.nvars
    wbox = None if wbox is None else tuple((F(lo), F(hi)) for lo, hi in wbox)
    pu, pv = _Pairing(lat, spec.u), _Pairing(lat, spec.v)
    nu_vec = spec.nu_vector
    q0, w0, p0 = pu(nu_vec)
    ell = ex.add(nu_vec, spec.v.tau)
    radius = cutoff - q0 + lat.quadratic(ell) / 2
    out = FSeries(nvars=nvars, qcut=cutoff, wbox=wbox)
    if radius < 0:
        return out
    # per-factor data independent of k
    dvecs = [ex.vec(d) for d in ds.vectors]
    fac_tau = [pu(d)[0] for d in dvecs]
    fac_w = [pu(d)[1] for d in dvecs]
    fac_p = [pu(d)[2] for d in dvecs]
    fac_g = [sum((x * z for x, z in zip(w, z_im)), F(0)) for w in fac_w]
    offset = ex.sub(spec.mu, nu_vec)
    ranges = []
    for i in range(n):
        half = math.sqrt(2 * float(radius) * float(ainv[i][i])) + 1e-9
        center = -ell[i] - offset[i]
        lo, hi = math.ceil(float(center) - half - 1), math.floor(float(center) + half + 1)
        ranges.append(range(lo, hi + 1))
    aell = ex.mat_vec(a, ell)
    terms = out.terms
    for shift in product(*ranges):
        k = tuple(o + s for o, s in zip(offset, shift))
        ak = ex.mat_vec(a, k)
        qk = ex.dot(k, ak) / 2 + ex.dot(k, aell) + q0
        if qk > cutoff:
            continue
        wk = tuple(x + ex.dot(k, c) for x, c in zip(w0, pv.lin)) if nvars else ()
        pk = p0 + ex.dot(k, pv.const)
        factors = []
        for r in range(m):
            s = ex.dot(ak, dvecs[r]) + fac_tau[r]
            weight = s + fac_g[r]
            if weight == 0:
                raise GenericityError(f"B(d_{r + 1}, k + a) = 0 at k = {tuple(str(x) for x in k)}")
            if weight > 0:
                if s < 0:
                    raise ValueError("chamber too large: expansion direction disagrees with the q-grading")
                factors.append((F(0), (F(0),) * nvars, F(0), 1, s, fac_w[r], fac_p[r], weight))
            else:
                if s > 0:
                    raise ValueError("chamber too large: expansion direction disagrees with the q-grading")
                step_w = tuple(-x for x in fac_w[r])
                factors.append((-s, step_w, -fac_p[r], -1, -s, step_w, -fac_p[r], -weight))
            if factors[-1][4] == 0 and wbox is None:
                raise ValueError("a w-window is needed: some geometric factor has zero q-slope")
        _sum_factors(terms, factors, qk, wk, pk, cutoff, wbox, z_im)
    return out


_SCALE_CAP = F(10 ** 6)


def _sum_factors(terms, factors, q, w, p, cutoff, wbox, z_im):
    """Expand the product of geometric factors, pruning on a monotone grade.

    Every step raises q + lam * (w . z_im) as long as no factor changes its
    expansion direction, so ``lam`` is pushed as far as the factors allow; a
    large ``lam`` makes the grade track the w-window tightly.
    """
    if wbox is None:
        _accumulate(terms, factors, 0, q, w, p, 1, cutoff, None, z_im, wbox, F(1))
        return
    lam = _SCALE_CAP
    for f in factors:
        dq, slope = f[4], _grade(f[5], z_im)
        if slope < 0:
            lam = min(lam, (1 + dq / -slope) / 2)
    gmax = cutoff + lam * _box_grade_max(wbox, z_im)
    _accumulate(terms, factors, 0, q, w, p, 1, cutoff, gmax, z_im, wbox, lam)


def _grade(w, z_im):
    return sum((x * z for x, z in zip(w, z_im)), F(0))


def _accumulate(terms, factors, r, q, w, p, coeff, cutoff, gmax, z_im, wbox, lam):
    if r == len(factors):
        if wbox is not None and not all(lo <= x <= hi for x, (lo, hi) in zip(w, wbox)):
            return
        key = (q, w, p - (p.numerator // p.denominator))
        c = terms.get(key, 0) + coeff
        if c:
            terms[key] = c
        else:
            terms.pop(key, None)
        return
    sq, sw, sp, sign, dq, dw, dp, dg = factors[r]
    q, w, p = q + sq, tuple(x + y for x, y in zip(w, sw)), p + sp
    coeff *= sign
    while q <= cutoff and (gmax is None or q + lam * _grade(w, z_im) <= gmax):
        _accumulate(terms, factors, r + 1, q, w, p, coeff, cutoff, gmax, z_im, wbox, lam)
        q, w, p = q + dq, tuple(x + y for x, y in zip(w, dw)), p + dp


def default_box(spec, wwin):
    return symmetric_box(spec.nvars, wwin) if spec.nvars else ()


def phi(spec, cutoff, wwin=None):
    """Phi_{mu,nu}: sign-kernel sum with sgn(x_r + epsilon)."""
    box = None if wwin is None else default_box(spec, wwin)
    return _expand(spec, cutoff, box)


def phi_plus(spec, cutoff, wwin=None):
    """Holomorphic part Phi^+ = Phi_{mu, nu~} in the chamber fixed by z_im."""
    return phi(spec.with_(nu=spec.nu_tilde()), cutoff, wwin)


def s_func(spec, cutoff, wwin=None):
    return phi_plus(spec, cutoff, wwin) - phi(spec, cutoff, wwin)


def theta_series(lattice, mu, cutoff, v=None, z_im=()):
    """sum_{k in Lambda + mu} q^{Q(k)/2} e^{2 pi i B(v, k)} (depth zero)."""
    n = lattice.rank
    nvars = len(z_im)
    v = v if v is not None else AffineForm.zero(n, nvars)
    spec = AppellSpec(DVectorSet(lattice, ()), mu, (), AffineForm.zero(n, nvars), v, z_im)
    return _expand(spec, cutoff, None)


# -- numerical values ---------------------------------------------------

def _lattice_points(lattice, center, radius):
    """Integer vectors n with Q(n - center)/2 <= radius (numpy array, rows)."""
    ainv = np.array([[float(x) for x in row] for row in lattice.inverse])
    a = np.array(lattice.gram, dtype=float)
    center = np.asarray(center, dtype=float)
    half = np.sqrt(2 * max(radius, 0.0) * np.diag(ainv)) + 1e-9
    axes = [np.arange(math.ceil(c - h), math.floor(c + h) + 1) for c, h in zip(center, half)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes)).astype(float)
    y = grid - center
    keep = 0.5 * np.einsum("ij,jk,ik->i", y, a, y) <= radius
    return grid[keep]


def phi_numeric(ds, mu, nu, u, v, tau, tol=1e-12):
    """Phi_{mu,nu}(tau, u, v) by direct summation of the denominator form.

    ``mu`` and ``nu`` may be float sequences (nu in d-components); ``u``, ``v``
    are complex vectors in lattice coordinates.
    """
    lat = ds.lattice
    a = np.array(lat.gram, dtype=float)
    y = tau.imag
    if y <= 0:
        raise ValueError("Im(tau) must be positive")
    d = np.array(ds.vectors, dtype=float).reshape(ds.depth, lat.rank)
    nu_vec = d.T @ np.asarray(nu, dtype=float) if ds.depth else np.zeros(lat.rank)
    u, v = np.asarray(u, dtype=complex), np.asarray(v, dtype=complex)
    offset = np.asarray(mu, dtype=float) - nu_vec
    ell = nu_vec + v.imag / y
    radius = 0.5 * ell @ a @ ell + (math.log(1 / tol) + 8) / (2 * math.pi * y)
    pts = _lattice_points(lat, -ell - offset, radius) + offset
    ak = pts @ a
    expo = 0.5 * np.einsum("ij,ij->i", pts, ak) + ak @ nu_vec
    terms = np.exp(2j * np.pi * (tau * expo + ak @ v))
    if ds.depth:
        bdk = ak @ d.T
        bdu = d @ a @ u
        denom = 1 - np.exp(2j * np.pi * (bdu[None, :] + tau * bdk))
        if np.min(np.abs(denom)) < 1e-10:
            raise GenericityError("evaluation point is on a pole of the Appell function")
        terms = terms / np.prod(denom, axis=1)
    return complex(np.exp(2j * np.pi * (nu_vec @ a @ u)) * terms.sum())


def numeric_point(spec, tau, zs):
    return spec.u.numeric(tau, zs), spec.v.numeric(tau, zs)


def nu_tilde_numeric(ds, nu, u, v, tau):
    if ds.depth == 0:
        return np.zeros(0)
    y = tau.imag
    a = np.array(ds.lattice.gram, dtype=float)
    d = np.array(ds.vectors, dtype=float)
    dmat = d @ a @ d.T
    sig = np.linalg.solve(dmat, d @ a @ (np.imag(v) - np.imag(u)) / y)
    nu = np.asarray(nu, dtype=float)
    return nu - np.floor(nu + sig)


def phi_plus_numeric(spec_or_ds, mu, nu, u, v, tau, tol=1e-12):
    ds = spec_or_ds
    return phi_numeric(ds, mu, nu_tilde_numeric(ds, nu, u, v, tau), u, v, tau, tol)


# -- identities -----------------------------------------------------------

IDENTITIES = ("mu_shift", "nu_shift", "mu_nu_shift", "dual_shift", "inversion",
              "u_shift", "v_shift", "uv_tau_shift", "g_invariance")


@dataclass
class IdentityReport:
    name: str
    passed: bool
    first_difference: dict | None
    cutoff: F
    wwin: int | None


def _prefactored(spec, cutoff, wwin, pref):
    """pref * Phi(spec) known up to q^cutoff on the symmetric window."""
    q, w, p, c = pref
    box = None
    if wwin is not None and spec.nvars:
        box = tuple((F(-wwin) - x, F(wwin) - x) for x in w)
    elif wwin is not None:
        box = ()
    series = _expand(spec, F(cutoff) - q, box)
    return series.shift(q, w, p, c)


def _mono(lattice, x, form, sign=1):
    q, w, p = pair(lattice, x, form)
    return sign * q, tuple(sign * t for t in w), sign * p


def identity_sides(name, spec, params=None):
    """Left spec, right spec and right prefactor (q, w, phase, coeff) for one identity."""
    params = params or {}
    lat, ds = spec.lattice, spec.ds
    n = lat.rank
    zero_w = (F(0),) * spec.nvars
    one = (F(0), zero_w, F(0), F(1))
    if name == "mu_shift":
        ell = ex.vec(params.get("ell", (1,) + (0,) * (n - 1)))
        if not lat.contains(ell):
            raise ValueError("ell must be a lattice vector")
        return spec.with_(mu=ex.add(spec.mu, ell)), spec, one
    if name == "nu_shift":
        coeffs = ex.vec(params.get("ell_d", (1,) + (0,) * (ds.depth - 1)))
        if any(x.denominator != 1 for x in coeffs):
            raise ValueError("ell_d must have integer d-components")
        vec_ = ds.combine(coeffs)
        q, w, p = _mono(lat, vec_, spec.u)
        return (spec.with_(nu=ex.add(spec.nu, coeffs)), spec.with_(v=spec.v.plus(tau=vec_)), (q, w, p, F(1)))
    if name == "mu_nu_shift":
        m = ex.vec(params["m"]) if "m" in params else dual_vectors(ds)[0]
        coeffs = ds.d_coordinates(m)
        if ds.combine(coeffs) != m:
            raise ValueError("m must lie in the span of the d-vectors")
        if any(lat.bilinear(m, d).denominator != 1 for d in ds.vectors):
            raise ValueError("m must lie in the dual of Lambda_d")
        q, w, p = _mono(lat, m, spec.u)
        return (spec.with_(mu=ex.add(spec.mu, m), nu=ex.add(spec.nu, coeffs)),
                spec.with_(v=spec.v.plus(tau=m)), (q, w, p, F(1)))
    if name == "dual_shift":
        m = ex.vec(params["m"]) if "m" in params else lat.inverse[0]
        if not lat.in_dual(m):
            raise ValueError("m must lie in the dual lattice")
        m_par = ex.mat_vec(projection_matrix(ds), m) if ds.depth else (F(0),) * n
        m_perp = ex.sub(m, m_par)
        q1, w1, p1 = _mono(lat, m_par, spec.u)
        q2, w2, p2 = _mono(lat, m_perp, spec.v)
        pref = (q1 + q2 + lat.quadratic(m_perp) / 2, tuple(x + y for x, y in zip(w1, w2)), p1 + p2, F(1))
        return (spec.with_(mu=ex.add(spec.mu, m), nu=ex.add(spec.nu, ds.d_coordinates(m_par) if ds.depth else ())),
                spec.with_(v=spec.v.plus(tau=m)), pref)
    if name == "inversion":
        total = ds.combine((1,) * ds.depth)
        q, w, p = _mono(lat, total, spec.u, -1)
        left = spec.with_(mu=tuple(-x for x in spec.mu), nu=tuple(-x for x in spec.nu))
        right = spec.with_(u=-spec.u, v=(-spec.v).plus(tau=total))
        return left, right, (q, w, p, F((-1) ** ds.depth))
    if name == "u_shift":
        m = ex.vec(params["m"]) if "m" in params else dual_vectors(ds)[0]
        if ds.combine(ds.d_coordinates(m)) != m or any(lat.bilinear(m, d).denominator != 1 for d in ds.vectors):
            raise ValueError("m must lie in the dual of Lambda_d")
        phase = lat.bilinear(m, spec.nu_vector)
        return spec.with_(u=spec.u.plus(const=m)), spec, (F(0), zero_w, phase, F(1))
    if name == "v_shift":
        m = ex.vec(params["m"]) if "m" in params else lat.inverse[0]
        if not lat.in_dual(m):
            raise ValueError("m must lie in the dual lattice")
        phase = lat.bilinear(m, ex.sub(spec.mu, spec.nu_vector))
        return spec.with_(v=spec.v.plus(const=m)), spec, (F(0), zero_w, phase, F(1))
    if name == "uv_tau_shift":
        coeffs = ex.vec(params.get("ell_d", (1,) + (0,) * (ds.depth - 1)))
        if any(x.denominator != 1 for x in coeffs):
            raise ValueError("ell_d must have integer d-components")
        ell = ds.combine(coeffs)
        q, w, p = _mono(lat, ell, spec.v, -1)
        pref = (q - lat.quadratic(ell) / 2, w, p, F(1))
        return spec.with_(u=spec.u.plus(tau=ell), v=spec.v.plus(tau=ell)), spec, pref
    if name == "g_invariance":
        g = params.get("g")
        if g is None:
            g = weyl_reflection(n, 1)
        g = ex.mat(g)
        if ex.mat_mul(ex.mat_mul(ex.transpose(g), ex.mat(lat.gram)), g) != ex.mat(lat.gram):
            raise ValueError("g must preserve the Gram matrix")
        new_ds = DVectorSet(lat, tuple(tuple(int(x) for x in ex.mat_vec(g, d)) for d in ds.vectors))
        right = AppellSpec(new_ds, ex.mat_vec(g, spec.mu), spec.nu, spec.u.transform(g),
                           spec.v.transform(g), spec.z_im)
        return spec, right, one
    if name == "phi_mu0":
        q, w, p = _mono(lat, spec.nu_vector, spec.u)
        right = spec.with_(mu=ex.sub(spec.mu, spec.nu_vector), nu=(F(0),) * ds.depth,
                           v=spec.v.plus(tau=spec.nu_vector))
        return spec, right, (q, w, p, F(1))
    raise ValueError(f"unknown identity {name!r}")


def verify_identity(name, spec, params=None, cutoff=6, wwin=None):
    """Check one transformation identity exactly up to q^cutoff and |w-exponent| <= wwin."""
    left, right, pref = identity_sides(name, spec, params)
    one = (F(0), (F(0),) * spec.nvars, F(0), F(1))
    lhs = _prefactored(left, cutoff, wwin, one)
    rhs = _prefactored(right, cutoff, wwin, pref)
    box = symmetric_box(spec.nvars, wwin) if wwin is not None else None
    ok, diff = series_compare(lhs, rhs, F(cutoff), box)
    return IdentityReport(name, ok, diff, F(cutoff), wwin)


# -- the BPS building blocks ----------------------------------------------

def psi_direct(r, a, b, cutoff, wwin=None, chamber=None):
    """Expansion of Psi_{(r_1..r_l),(a,b)} straight from its defining sum.

    Variables b_1..b_{l-1} are summed, b_l is fixed by sum r_i b_i = b; each
    denominator 1 - w^{2(r_i + r_{i-1})} q^{b_{i-1} - b_i} is expanded towards
    small |w^. q^.| with Im(z)/Im(tau) = ``chamber``.
    """
    r = tuple(int(x) for x in r)
    ell, rtot = len(r), sum(r)
    if ell < 2:
        raise ValueError("need at least two parts")
    cutoff = F(cutoff)
    chamber = F(chamber) if chamber is not None else F(-1, 40 * rtot)
    frac = [None] + [_frac(F(a, rtot) * sum(r[i - 1:])) for i in range(1, ell + 1)]
    # frac[i] = {a/r sum_{k >= i} r_k} for 1-based i
    box = ((F(-wwin), F(wwin)),) if wwin is not None else None
    out = FSeries(nvars=1, qcut=cutoff, wbox=box)

    def qform(bs):
        quad = sum(F(ri * (rtot - ri), 2 * rtot) * x * x for ri, x in zip(r, bs))
        quad -= F(1, rtot) * sum(bs[i] * bs[j] * r[i] * r[j] for i in range(ell) for j in range(i + 1, ell))
        lin = sum((bs[i - 2] - bs[i - 1]) * frac[i] for i in range(2, ell + 1))
        return quad + lin

    def wexp(bs):
        first = sum(r[i] * r[j] * (bs[i] - bs[j]) for i in range(ell) for j in range(i))
        r_prev = [0] + list(r)
        second = sum(2 * (r[i - 1] + r_prev[i - 1]) * frac[i] for i in range(1, ell + 1))
        return first + second

    # bound the free variables through the smallest eigenvalue of the quadratic part
    free = ell - 1
    mat = np.zeros((free, free))
    rl = r[-1]
    for i in range(free):
        for j in range(free):
            ei = np.zeros(ell)
            ej = np.zeros(ell)
            ei[i], ei[-1] = 1, -r[i] / rl
            ej[j], ej[-1] = 1, -r[j] / rl
            mat[i, j] = _quad_bilinear(r, rtot, ei, ej)
    lam = np.linalg.eigvalsh(mat).min()
    reach = math.sqrt(max(float(cutoff) + 4 * rtot * rtot + 10, 1) / lam) + abs(b) + 2
    span = range(-int(reach) - 1, int(reach) + 2)
    for head in product(span, repeat=free):
        rest = F(b - sum(ri * x for ri, x in zip(r, head)), rl)
        if rest.denominator != 1:
            continue
        bs = tuple(F(x) for x in head) + (rest,)
        q0 = qform(bs)
        if q0 > cutoff:
            continue
        w0 = wexp(bs)
        factors = []
        for i in range(2, ell + 1):
            s = bs[i - 2] - bs[i - 1]
            c = F(2 * (r[i - 1] + r[i - 2]))
            weight = s + c * chamber
            if weight == 0:
                raise GenericityError("denominator on the chamber wall")
            if weight > 0:
                if s < 0:
                    raise ValueError("chamber too large")
                factors.append((F(0), (F(0),), F(0), 1, s, (c,), F(0), weight))
            else:
                if s > 0:
                    raise ValueError("chamber too large")
                factors.append((-s, (-c,), F(0), -1, -s, (-c,), F(0), -weight))
        _sum_factors(out.terms, factors, q0, (w0,), F(0), cutoff, box, (chamber,))
    return out


def _quad_bilinear(r, rtot, x, y):
    ell = len(r)
    total = 0.0
    for i in range(ell):
        total += r[i] * (rtot - r[i]) / (2 * rtot) * x[i] * y[i]
        for j in range(ell):
            if i != j:
                total -= r[i] * r[j] / (2 * rtot) * x[i] * y[j]
    return total


def _frac(x):
    return x - (x.numerator // x.denominator)


def psi_substitution(n):
    """Integer matrix T with b = T k + (b/(N+1)) (1, .., 1) for all r_i = 1."""
    rows = []
    for i in range(1, n + 2):
        row = [0] * n
        if i == 1:
            if n >= 2:
                row[1] += 1
            row[0] -= 1
        elif i == 2:
            row[0] += 1
        else:
            row[i - 1 - 1] -= 1
            if i - 1 < n:
                row[i - 1] += 1
        rows.append(tuple(row))
    return tuple(rows)


def psi_spec(n, a=0, b=0, chamber=None):
    """AppellSpec of Psi_{(1,..,1),(a,b)} on A_n, derived from the substitution b = T k + beta."""
    lat = cartan_an(n)
    ell = n + 1
    t = ex.mat(psi_substitution(n))
    amat = ex.mat(lat.gram)
    if ex.mat_mul(ex.transpose(t), t) != amat:
        raise ArithmeticError("substitution does not produce the A_N form")
    ainv = lat.inverse
    dvecs = []
    for i in range(ell - 1):
        diff = ex.sub(t[i], t[i + 1])
        d = ex.mat_vec(ainv, diff)
        if any(x.denominator != 1 for x in d):
            raise ArithmeticError("non-integral d-vector")
        dvecs.append(tuple(int(x) for x in d))
    ds = DVectorSet(lat, tuple(dvecs))
    beta = F(b, ell)
    nu = tuple(_frac(F(-a * (r + 1), ell)) for r in range(ell - 1))
    offset = tuple(-(j + 1) * beta for j in range(n))
    mu = ex.add(ds.combine(nu), offset)
    coeff = tuple(F(2 * i - ell - 1) for i in range(1, ell + 1))
    v_lin = ex.mat_vec(ainv, ex.mat_vec(ex.transpose(t), coeff))
    duals = dual_vectors(ds)
    u_lin = tuple(4 * sum(dv[i] for dv in duals) for i in range(n))
    chamber = F(chamber) if chamber is not None else F(-1, 40 * ell)
    u = AffineForm.linear(u_lin, 0, 1)
    v = AffineForm.linear(v_lin, 0, 1)
    return AppellSpec(ds, mu, nu, u, v, (chamber,))


def psi_build(n, a=0, b=0, cutoff=5, wwin=30, chamber=None):
    """Direct expansion of Psi on A_n and its Phi-form; returns (direct, phi_form, spec)."""
    spec = psi_spec(n, a, b, chamber)
    direct = psi_direct((1,) * (n + 1), a, b, cutoff, wwin, spec.z_im[0])
    form = phi(spec, cutoff, wwin)
    return direct, form, spec


def alpha_gamma_elliptic(spec):
    """z-underline = (rho, sigma) in the alpha-gamma basis, as linear forms in z.

    rho = v - sum_r sigma_r d_r and sigma = D^-1 C^T (v - u); returned as
    coefficient vectors of the formal variables (lin parts only).
    """
    ds = spec.ds
    cols = []
    for j in range(spec.nvars):
        u = tuple(row[j] for row in spec.u.lin)
        v = tuple(row[j] for row in spec.v.lin)
        sigma = ds.d_coordinates(ex.sub(v, u))
        rho = ex.sub(v, ds.combine(sigma))
        cols.append(rho + sigma)
    return cols
