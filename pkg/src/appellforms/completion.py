"""Non-holomorphic completion of the Appell functions, evaluated numerically.

The completed function is Phi^ = Phi^+ + R.  ``r_direct`` sums the remainder
kernel over the full lattice; ``r_structural`` assembles it from the
sublattice factors R_{L, nu} times holomorphic Appell functions of lower
depth.  Both work on complex values ``u``, ``v`` in lattice coordinates.

Pairs (n, w) with n in Lambda + mu and w in nu + Lambda_d index the terms
q^{Q(n)/2 - Q(w)/2} e^{2 pi i (B(v, n - w) + B(u, w))}; for Phi^+ the kernel
is prod_r (sgn(T_r) + sgn(B(d_r, n - w + a))) / 2 where T_r are the
d-coordinates of w + Im(sigma)/y.
"""

from dataclasses import dataclass, field
from fractions import Fraction as F
from itertools import combinations, product
import cmath
import math

import numpy as np

from . import _exact as ex
from .appell import (AppellSpec, GenericityError, alpha_gamma_elliptic, phi, phi_plus, phi_plus_numeric,
                     psi_spec, theta_series)
from .errfun import DEFAULT_CONFIG, e_frame, m_frame
from .fseries import series_equal
from .lattice import DVectorSet, c_coefficients, glue_vectors, sublattice_basis


@dataclass(frozen=True)
class NumericPoint:
    tau: complex
    zs: tuple = ()
    tol: float = 1e-10

    def __post_init__(self):
        if complex(self.tau).imag <= 0:
            raise ValueError("Im(tau) must be positive")


@dataclass
class CompletionTerm:
    v_subset: tuple
    s_subset: tuple
    glue: tuple          # d-coordinates of the glue representative
    r_value: complex
    phi_value: complex

    @property
    def size(self):
        return len(self.v_subset)

    @property
    def value(self):
        return 2.0 ** (-self.size) * self.r_value * self.phi_value


class _Geometry:
    """Float copies of the lattice data needed in the sums."""

    def __init__(self, ds):
        self.ds = ds
        self.a = np.array(ds.lattice.gram, dtype=float)
        self.d = np.array(ds.vectors, dtype=float).reshape(ds.depth, ds.lattice.rank)
        self.dmat = self.d @ self.a @ self.d.T
        self.dinv = np.linalg.inv(self.dmat) if ds.depth else np.zeros((0, 0))

    def coords(self, x):
        """d-coordinates of the projection of x onto span{d_r}."""
        return self.dinv @ (self.d @ self.a @ x)

    def sigma_im(self, u, v, y):
        return self.coords((np.imag(v) - np.imag(u)) / y)


def _ellipsoid(gram, center, radius):
    """Integer vectors n with (n - center)^T gram (n - center) / 2 <= radius."""
    gram = np.atleast_2d(np.asarray(gram, dtype=float))
    center = np.asarray(center, dtype=float)
    if radius < 0:
        return np.zeros((0, len(center)))
    inv = np.linalg.inv(gram)
    half = np.sqrt(2 * radius * np.diag(inv)) + 1e-9
    axes = [np.arange(math.ceil(c - h), math.floor(c + h) + 1) for c, h in zip(center, half)]
    if any(len(ax) == 0 for ax in axes):
        return np.zeros((0, len(center)))
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes)).astype(float)
    y = grid - center
    return grid[0.5 * np.einsum("ij,jk,ik->i", y, gram, y) <= radius]


def _log_budget(tol):
    return math.log(1 / tol) + 6


# -- R_{L, nu} ------------------------------------------------------------

def r_factor(ds, v_subset, nu_perp, u, v, tau, tol=1e-10, cfg=DEFAULT_CONFIG):
    """sum over k in Lambda_d({d_v*}) + nu_perp of M_L(sqrt(2y)(k + Im(sigma)/y)) q^{-Q(k)/2} e^{2 pi i B(sigma, k)}.

    ``nu_perp`` is a vector in lattice coordinates inside span{d_v*}; sigma is
    the component of u - v there.
    """
    geo = _Geometry(ds)
    y = tau.imag
    v_subset = tuple(v_subset)
    basis = sublattice_basis(ds, v_subset)
    bvecs = np.array([[float(x) for x in ds.combine(b)] for b in basis]).reshape(len(basis), -1)
    g_dual = geo.dinv[np.ix_(v_subset, v_subset)]
    sig = geo.sigma_im(u, v, y)
    nu_perp = np.array([float(x) for x in nu_perp])
    # k + beta in d-coordinates restricted to V: T_V(k) = coords(k)_V + sig_V
    base_t = geo.coords(nu_perp)[list(v_subset)] + sig[list(v_subset)]
    step_t = np.array([geo.coords(b)[list(v_subset)] for b in bvecs]).reshape(len(bvecs), -1)
    # Q(k + beta_perp) = T_V^T (D^-1_VV)^-1 T_V ; choose n so that it stays below the budget
    qform = np.linalg.inv(g_dual)
    gram_n = step_t @ qform @ step_t.T
    center = -np.linalg.solve(step_t @ qform @ step_t.T, step_t @ qform @ base_t)
    radius = _log_budget(tol) / (math.pi * y) / 2 + 1
    total = 0j
    sqrt2y = math.sqrt(2 * y)
    diff = np.asarray(u, dtype=complex) - np.asarray(v, dtype=complex)
    for n in _ellipsoid(2 * gram_n, center, radius):
        k = nu_perp + n @ bvecs
        t = base_t + n @ step_t
        m = sqrt2y * t
        if np.all(np.abs(m) < 1e-13):
            m = np.zeros_like(m)
        mval = m_frame(g_dual, m, cfg)
        phase = cmath.exp(2j * math.pi * (-tau * (k @ geo.a @ k) / 2 + k @ geo.a @ diff))
        total += mval * phase
    return total


def _perp_and_par(ds, s_subset, vector):
    """Split a vector in span{d_r} into its span{d_s} part (coords) and the rest."""
    vector = ex.vec(vector)
    if not s_subset:
        return vector, ()
    sub = ds.subset(s_subset)
    coords = sub.d_coordinates(vector)
    return ex.sub(vector, sub.combine(coords)), coords


def completion_terms(ds, mu, nu, u, v, tau, tol=1e-10, cfg=DEFAULT_CONFIG, glue_shift=None):
    """Every (V, glue) contribution of the structural formula.

    ``nu`` holds exact d-components; ``glue_shift`` optionally maps (V, index)
    to an extra Lambda_d({d_s}) + Lambda_d({d_v*}) vector (d-coordinates) added
    to the representative, for checking independence of the choice.
    """
    m = ds.depth
    nu_vec = ds.combine(nu)
    mu_f = [float(x) for x in mu]
    terms = []
    for size in range(1, m + 1):
        for v_subset in combinations(range(m), size):
            s_subset = tuple(r for r in range(m) if r not in v_subset)
            glue = glue_vectors(ds, s_subset)
            sub = DVectorSet(ds.lattice, tuple(ds.vectors[s] for s in s_subset))
            for idx, rep in enumerate(glue.representatives):
                coords = list(rep.d_coords)
                if glue_shift and (v_subset, idx) in glue_shift:
                    coords = [a + b for a, b in zip(coords, glue_shift[(v_subset, idx)])]
                vector = ex.add(nu_vec, ds.combine(coords))
                perp, par = _perp_and_par(ds, s_subset, vector)
                r_val = r_factor(ds, v_subset, perp, u, v, tau, tol, cfg)
                phi_val = phi_plus_numeric(sub, mu_f, [float(x) for x in par], u, v, tau, tol)
                terms.append(CompletionTerm(v_subset, s_subset, tuple(coords), r_val, phi_val))
    return terms


def r_structural(ds, mu, nu, u, v, tau, tol=1e-10, cfg=DEFAULT_CONFIG):
    return sum((t.value for t in completion_terms(ds, mu, nu, u, v, tau, tol, cfg)), 0j)


# -- direct kernel sum -----------------------------------------------------

def _projected_norm(geo, t, subset):
    idx = list(subset)
    return float(t[idx] @ np.linalg.solve(geo.dinv[np.ix_(idx, idx)], t[idx]))


def _strata(geo, t, y, budget, cfg, only=None):
    """[(U, rest, 2^-|U| M_U, sgn of the components orthogonal to U)] for non-negligible U.

    The remainder kernel equals sum_U 2^-|U| M_U prod_{s not in U} (sgn(perp_s) + s'_s) / 2,
    which has no cancellation between strata.
    """
    m = len(t)
    out = []
    scaled = math.sqrt(2 * y) * t
    for size in range(1, m + 1):
        for uset in combinations(range(m), size):
            if only is not None and uset not in only:
                continue
            if math.pi * y * _projected_norm(geo, t, uset) > budget:
                continue
            idx = list(uset)
            rest = [s for s in range(m) if s not in uset]
            g = geo.dinv[np.ix_(idx, idx)]
            coef = np.linalg.solve(g, scaled[idx])
            perp = np.array([scaled[s] - geo.dinv[s, idx] @ coef for s in rest])
            if np.any(perp == 0):
                raise GenericityError("an orthogonal component of w + Im(sigma)/y vanishes")
            mval = m_frame(g, scaled[idx], cfg)
            if mval != 0:
                out.append((uset, rest, mval * 2.0 ** (-size), np.sign(perp)))
    return out


def remainder_kernel(ds, t, sprime, y, form="strata", cfg=DEFAULT_CONFIG):
    """Pointwise K^ - K^+ at d-coordinates t of w + Im(sigma)/y and signs s'_r.

    ``form="literal"`` evaluates 2^-M sum_V (E_V - prod_V sgn t) prod_{s not in V} s'_s
    straight from E_P; ``form="strata"`` uses the M_U decomposition.
    """
    geo = _Geometry(ds)
    t = np.asarray(t, dtype=float)
    sprime = np.asarray(sprime, dtype=float)
    m = len(t)
    if form == "literal":
        total = 0.0
        for size in range(1, m + 1):
            for vset in combinations(range(m), size):
                idx = list(vset)
                g = geo.dinv[np.ix_(idx, idx)]
                e = e_frame(g, math.sqrt(2 * y) * t[idx], cfg)
                signs = float(np.prod(np.where(t[idx] >= 0, 1.0, -1.0)))
                rest = [s for s in range(m) if s not in vset]
                total += (e - signs) * float(np.prod(sprime[rest]))
        return total * 2.0 ** (-m)
    if form == "strata":
        total = 0.0
        for _, rest, c, perp in _strata(geo, t, y, math.inf, cfg):
            total += c * float(np.prod((perp + sprime[rest]) / 2))
        return total
    raise ValueError(f"unknown kernel form {form!r}")


def r_direct(ds, mu, nu, u, v, tau, tol=1e-10, cfg=DEFAULT_CONFIG, max_shell=400, only=None):
    """Remainder R summed over (n, w) with the pointwise kernel K^ - K^+ (see ``remainder_kernel``).

    ``only`` restricts the kernel to the listed strata U (tuples of indices).
    """
    geo = _Geometry(ds)
    y = tau.imag
    m = ds.depth
    if m == 0:
        return 0j
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    a_im = u.imag / y
    b_im = v.imag / y
    sig = geo.sigma_im(u, v, y)
    nu = np.array([float(x) for x in nu])
    mu = np.array([float(x) for x in mu])
    budget = _log_budget(tol)
    nshift = -(b_im) - mu  # centre of the n-ellipsoid in the integer offset
    beta_vec = sig @ geo.d
    const = math.pi * y * float(b_im @ geo.a @ b_im - beta_vec @ geo.a @ beta_vec)
    center_x = np.round(-(nu + sig))
    margin = _absolute_margin(geo, mu, nu, a_im)
    if margin == 0:
        raise GenericityError("the point lies on a wall B(d_r, k + a) = 0")
    if budget / (2 * math.pi * y * margin) > max_shell:
        raise ArithmeticError(f"point too close to a wall (margin {margin:.2e}): the direct sum would need "
                              f"more than {max_shell} shells")
    total = 0j
    quiet = 0
    for shell in range(max_shell + 1):
        shell_abs = 0.0
        rng = range(-shell, shell + 1)
        for off in product(rng, repeat=m):
            if max((abs(o) for o in off), default=0) != shell:
                continue
            x = center_x + np.array(off, dtype=float)
            t = nu + x + sig
            strata = _strata(geo, t, y, budget + 5 + max(const, 0.0), cfg, only)
            if not strata:
                continue
            w = (nu + x) @ geo.d
            wb = w + beta_vec
            q_wb = float(wb @ geo.a @ wb)
            peak = max(abs(c) for _, _, c, _ in strata)
            radius = q_wb + (math.log(max(peak, 1e-300) / tol) + const + 8) / (math.pi * y)
            pts = _ellipsoid(geo.a, nshift, radius / 2)
            if len(pts) == 0:
                continue
            nvec = pts + mu
            # s'_s = sgn B(d_s, n - w + a)
            walls = (nvec - w + a_im) @ geo.a @ geo.d.T
            if np.any(walls == 0):
                raise GenericityError("B(d_s, n - w + a) vanishes for a lattice point")
            sprime = np.sign(walls)
            kern = np.zeros(len(nvec))
            for _, rest, c, perp in strata:
                kern += c * np.prod((perp + sprime[:, rest]) / 2, axis=1) if rest else c
            keep = kern != 0
            nvec, kern = nvec[keep], kern[keep]
            expo = 2j * math.pi * (tau * (0.5 * np.einsum("ij,jk,ik->i", nvec, geo.a, nvec) - 0.5 * w @ geo.a @ w)
                                   + (nvec - w) @ geo.a @ v + w @ geo.a @ u)
            # the kernel is tiny exactly where q^{-Q(w)/2} is huge: combine in log space
            terms = np.sign(kern) * np.exp(expo + np.log(np.abs(kern)))
            total += terms.sum()
            shell_abs += float(np.abs(terms).sum())
        if shell_abs < tol * 1e-2:
            quiet += 1
            if quiet >= 2 and shell >= 2:
                return total
        else:
            quiet = 0
    raise ArithmeticError(f"direct remainder sum did not converge within {max_shell} shells")


def _absolute_margin(geo, mu, nu, a_im):
    offset = np.asarray(mu, dtype=float) - np.asarray(nu, dtype=float) @ geo.d
    out = math.inf
    for r in range(len(geo.d)):
        row = geo.a @ geo.d[r]
        spacing = float(math.gcd(*[int(round(x)) for x in row]))
        value = float(row @ (offset + a_im))
        out = min(out, abs(value - spacing * round(value / spacing)))
    return out


def wall_margin(ds, mu, nu, u, v, tau):
    """Smallest |B(d_r, k + a)| over k in Lambda + mu - nu, relative to its spacing.

    Direct sums converge like exp(-2 pi y margin) per step along the cones,
    so points with a tiny margin make ``r_direct`` slow.
    """
    geo = _Geometry(ds)
    a_im = np.imag(np.asarray(u, dtype=complex)) / complex(tau).imag
    mu = [float(x) for x in mu]
    nu = [float(x) for x in nu]
    spacing = min(float(math.gcd(*[int(round(x)) for x in geo.a @ d])) for d in geo.d)
    return _absolute_margin(geo, mu, nu, a_im) / spacing


# -- completed function ----------------------------------------------------

def numeric_arguments(spec, point):
    tau = complex(point.tau)
    u, v = spec.u.numeric(tau, point.zs), spec.v.numeric(tau, point.zs)
    return tau, u, v


def phi_plus_value(ds, mu, nu, u, v, tau, tol=1e-12):
    return phi_plus_numeric(ds, [float(x) for x in mu], [float(x) for x in nu], u, v, tau, tol)


def phi_hat(spec, point, route="structural", cfg=DEFAULT_CONFIG):
    """Completed Appell function at a numeric point; ``route`` is structural or direct."""
    tau, u, v = numeric_arguments(spec, point)
    return phi_hat_raw(spec.ds, spec.mu, spec.nu, u, v, tau, point.tol, route, cfg)


def phi_hat_raw(ds, mu, nu, u, v, tau, tol=1e-10, route="structural", cfg=DEFAULT_CONFIG):
    base = phi_plus_value(ds, mu, nu, u, v, tau, tol)
    if ds.depth == 0:
        return base
    if route == "structural":
        return base + r_structural(ds, mu, nu, u, v, tau, tol, cfg)
    if route == "direct":
        return base + r_direct(ds, mu, nu, u, v, tau, tol, cfg)
    raise ValueError(f"unknown route {route!r}")


@dataclass
class RouteComparison:
    direct: complex
    structural: complex
    terms: list = field(default_factory=list)

    @property
    def difference(self):
        return abs(self.direct - self.structural)

    def largest_term(self):
        return max(self.terms, key=lambda t: abs(t.value)) if self.terms else None


def compare_routes(spec, point, cfg=DEFAULT_CONFIG):
    tau, u, v = numeric_arguments(spec, point)
    terms = completion_terms(spec.ds, spec.mu, spec.nu, u, v, tau, point.tol, cfg)
    structural = sum((t.value for t in terms), 0j)
    direct = r_direct(spec.ds, spec.mu, spec.nu, u, v, tau, point.tol, cfg)
    return RouteComparison(direct, structural, terms)


# -- modular behaviour -----------------------------------------------------

def level(ds):
    """n = |det(Lambda) det(Lambda_d)|; the probe uses Gamma(4n)."""
    det_d = abs(ex.det(ds.d_matrix)) if ds.depth else 1
    return int(abs(ds.lattice.det) * det_d)


def elliptic_norm(ds, u, v):
    """Q(v) - Q(P(v - u)) on complex vectors: the norm of the elliptic variable of the indefinite lattice."""
    geo = _Geometry(ds)
    diff = np.asarray(v) - np.asarray(u)
    if ds.depth:
        proj = (geo.dinv @ (geo.d @ geo.a @ diff)) @ geo.d
    else:
        proj = np.zeros_like(diff)
    return complex(v @ geo.a @ v - proj @ geo.a @ proj)


@dataclass
class ModularReport:
    residual: float
    value: complex
    image_value: complex
    predicted: complex
    weight: float


def modular_residual(spec, point, gamma, route="structural", cfg=DEFAULT_CONFIG):
    """Relative deviation of Phi^ from weight (M+N)/2 transformation under ``gamma``."""
    (a, b), (c, d) = gamma
    if a * d - b * c != 1:
        raise ValueError("gamma must have determinant 1")
    tau, u, v = numeric_arguments(spec, point)
    value = phi_hat_raw(spec.ds, spec.mu, spec.nu, u, v, tau, point.tol, route, cfg)
    if abs(value) < point.tol:
        raise ArithmeticError("|Phi^| is below the tolerance; the relative residual is meaningless")
    j = c * tau + d
    tau2 = (a * tau + b) / j
    u2, v2 = u / j, v / j
    image = phi_hat_raw(spec.ds, spec.mu, spec.nu, u2, v2, tau2, point.tol, route, cfg)
    weight = (spec.ds.depth + spec.lattice.rank) / 2
    factor = cmath.exp(weight * cmath.log(j)) * cmath.exp(1j * math.pi * c * elliptic_norm(spec.ds, u, v) / j)
    predicted = factor * value
    return ModularReport(abs(image - predicted) / abs(value), value, image, predicted, weight)


def holomorphic_limit(spec, zs_over_tau, ys=(2, 4, 8, 16), real_part=0.1, tol=1e-12, cfg=DEFAULT_CONFIG):
    """|Phi^ - Phi^+| along tau = real_part + i y with Im(z)/Im(tau) held fixed."""
    out = []
    for y in ys:
        tau = complex(real_part, y)
        zs = tuple(complex(0.13 * (i + 1), 0) + r * tau for i, r in enumerate(zs_over_tau))
        _, u, v = numeric_arguments(spec, NumericPoint(tau, zs, tol))
        out.append(abs(r_structural(spec.ds, spec.mu, spec.nu, u, v, tau, tol, cfg)))
    return out


# -- the A_3 worked example --------------------------------------------------

def _fr(*xs):
    return tuple(F(x) for x in xs)


# Per case: V (0-based), nu-parallel generators modulo the lattice and the
# chamber-reduced characteristics nu~, all in simple-root coordinates.
A3_CASES = (
    ((0,), [_fr(0, 0, 0), _fr(F(1, 3), F(-2, 3), F(-1, 3)), _fr(F(2, 3), F(-4, 3), F(-2, 3))],
     [_fr(0, 0, 0), _fr(F(1, 3), F(1, 3), F(2, 3)), _fr(F(2, 3), F(2, 3), F(1, 3))]),
    ((1,), [_fr(0, 0, 0), _fr(F(-1, 2), -1, F(-1, 2))],
     [_fr(0, 0, 0), _fr(F(-1, 2), 0, F(1, 2))]),
    ((2,), [_fr(0, 0, 0), _fr(F(-1, 3), F(-2, 3), 0), _fr(F(-2, 3), F(-4, 3), 0)],
     [_fr(0, 0, 0), _fr(F(-1, 3), F(1, 3), 0), _fr(F(1, 3), F(2, 3), 0)]),
    ((1, 2), [_fr(0, 0, 0), _fr(F(1, 2), 0, 0)], [_fr(0, 0, 0), _fr(F(-1, 2), 0, 0)]),
    ((0, 2), [_fr(0, 0, 0), _fr(F(1, 2), F(1, 2), 0)], [_fr(0, 0, 0), _fr(F(1, 2), F(1, 2), 0)]),
    ((0, 1), [_fr(0, 0, 0), _fr(0, 0, F(1, 2))], [_fr(0, 0, 0), _fr(0, 0, F(1, 2))]),
)

# c_{s,v} keyed (s, v), for single-element V and for two-element V.
A3_C_SINGLE = {(1, 0): F(2, 3), (2, 0): F(1, 3), (0, 1): F(1, 2), (2, 1): F(1, 2), (0, 2): F(1, 3), (1, 2): F(2, 3)}
A3_C_PAIR = {(2, 0): F(0), (2, 1): F(1, 2), (1, 0): F(1, 2), (1, 2): F(1, 2), (0, 1): F(1, 2), (0, 2): F(0)}

# Sign arguments of the partial kernels: coefficients of (t_1, t_2, t_3) and of a,
# where t_r = k_{3+r} are the d-coordinates of w; keyed (V, s).
A3_PERP_FORMS = {
    ((0,), 1): _fr(F(-2, 3), 1, 0, -6), ((0,), 2): _fr(F(-1, 3), 0, 1, -6),
    ((1,), 0): _fr(1, F(-1, 2), 0, -3), ((1,), 2): _fr(0, F(-1, 2), 1, -3),
    ((2,), 0): _fr(1, 0, F(-1, 3), -6), ((2,), 1): _fr(0, 1, F(-2, 3), -6),
    ((1, 2), 0): _fr(1, F(-1, 2), 0, -3), ((0, 2), 1): _fr(F(-1, 2), 1, F(-1, 2), -3),
    ((0, 1), 2): _fr(0, F(-1, 2), 1, -3),
}
A3_ELLIPTIC = _fr(2, 8, 6, -9, -12, -9)


def _mod_one(vector):
    return tuple(x - math.floor(x) for x in vector)


@dataclass
class A3Case:
    v_subset: tuple
    s_subset: tuple
    glue_count: int
    nu_parallel: list
    nu_tilde: list
    series_equal: bool = True
    direct: complex = 0j
    structural: complex = 0j
    failures: list = field(default_factory=list)

    @property
    def size(self):
        return len(self.v_subset)


@dataclass
class A3Report:
    cases: list
    failures: list

    @property
    def passed(self):
        return not self.failures


def a3_decomposition_check(point, order=4, wwin=12, tol=1e-5, numeric=True, cfg=DEFAULT_CONFIG):
    """Check the partial-kernel decomposition of Psi on A_3, case by case.

    Exact parts: c-coefficients, the sign arguments of the partial kernels,
    the extended elliptic vector, the glue data per case, equality of the
    Phi^+ factors with Phi_{0, nu~} to q-order ``order`` and of the empty-set
    factor with the A_3 theta series.  With ``numeric`` each partial-kernel
    sum is compared at ``point`` with its factorized form (relative tolerance
    ``tol``).
    """
    spec = psi_spec(3)
    ds, lat = spec.ds, spec.lattice
    failures = []

    def check(ok, message):
        if not ok:
            failures.append(message)
        return ok

    elliptic = alpha_gamma_elliptic(spec)[0]
    check(tuple(elliptic) == A3_ELLIPTIC, f"elliptic vector {elliptic}")
    beta_per_a = elliptic[3:]
    dinv = ds.d_inverse
    for v_subset in combinations(range(3), 1):
        s_subset = tuple(r for r in range(3) if r not in v_subset)
        coeffs, _ = c_coefficients(ds, v_subset, s_subset)
        for key, val in coeffs.items():
            check(A3_C_SINGLE[key] == val, f"c{key} = {val} for V={v_subset}")
    for s in range(3):
        v_subset = tuple(r for r in range(3) if r != s)
        coeffs, _ = c_coefficients(ds, v_subset, (s,))
        for key, val in coeffs.items():
            check(A3_C_PAIR[key] == val, f"c{key} = {val} for V={v_subset}")
    for (v_subset, s), expected in A3_PERP_FORMS.items():
        # perp_s = t_s - sum_v c_{s,v} t_v with t = k + beta, beta = a * beta_per_a
        s_subset = tuple(r for r in range(3) if r not in v_subset)
        coeffs, _ = c_coefficients(ds, v_subset, s_subset)
        row = [F(int(r == s)) - coeffs.get((s, r), F(0)) for r in range(3)]
        block = ex.inverse(ex.submatrix(dinv, list(v_subset), list(v_subset)))
        direct_row = ex.mat_vec(block, tuple(dinv[v][s] for v in v_subset))
        check(all(row[v] == -c for v, c in zip(v_subset, direct_row)), f"perp row mismatch for V={v_subset}, s={s}")
        form = tuple(row) + (ex.dot(row, beta_per_a),)
        check(form == expected, f"kernel sign argument for V={v_subset}, s={s}: {form}")

    if numeric:
        tau, u, v = numeric_arguments(spec, point)
        terms = completion_terms(ds, spec.mu, spec.nu, u, v, tau, point.tol, cfg)

    cases = []
    for index, (v_subset, par_expected, tilde_expected) in enumerate(A3_CASES, 1):
        s_subset = tuple(r for r in range(3) if r not in v_subset)
        glue = glue_vectors(ds, s_subset)
        sub = ds.subset(s_subset)
        pars = [rep.parallel for rep in glue.representatives]
        tildes = []
        case = A3Case(v_subset, s_subset, glue.count, pars, tildes)
        label = f"case {index} (L={len(v_subset)})"
        check(glue.count == len(par_expected), f"{label}: glue count {glue.count}")
        if sorted(map(_mod_one, pars)) != sorted(map(_mod_one, par_expected)):
            case.failures.append("nu-parallel list")
        for rep in glue.representatives:
            sub_spec = AppellSpec(sub, (F(0),) * 3, rep.parallel_coords, spec.u, spec.v, spec.z_im)
            tilde_coords = sub_spec.nu_tilde()
            tildes.append(sub.combine(tilde_coords))
            if any(not 0 <= x < 1 for x in tilde_coords):
                case.failures.append("nu~ outside [0,1) in the chamber")
            expected = [t for t in tilde_expected if sub.combine(sub.d_coordinates(t)) == t
                        and _mod_one(sub.d_coordinates(t)) == _mod_one(rep.parallel_coords)]
            if len(expected) != 1:
                case.failures.append(f"no listed nu~ matches glue {rep.d_coords}")
                continue
            left = phi_plus(sub_spec, order, wwin)
            right = phi(sub_spec.with_(nu=sub.d_coordinates(expected[0])), order, wwin)
            if not series_equal(left, right, order):
                case.series_equal = False
                case.failures.append(f"Phi^+ differs from Phi_(0, nu~) for glue {rep.d_coords}")
        if sorted(tildes) != sorted(tilde_expected):
            case.failures.append("nu~ list")
        if numeric:
            case.structural = sum((t.value for t in terms if t.v_subset == v_subset), 0j)
            case.direct = r_direct(ds, spec.mu, spec.nu, u, v, tau, point.tol, cfg, only=(v_subset,))
            if abs(case.direct - case.structural) > tol * max(abs(case.structural), point.tol):
                case.failures.append(f"kernel sum {case.direct} vs factorized {case.structural}")
        failures.extend(f"{label}: {msg}" for msg in case.failures)
        cases.append(case)

    # the term with all three M's multiplies the plain A_3 theta series
    full = tuple(range(3))
    empty = AppellSpec(ds.subset(()), (F(0),) * 3, (), spec.u, spec.v, spec.z_im)
    theta = theta_series(lat, (F(0),) * 3, order, spec.v, spec.z_im)
    check(series_equal(phi_plus(empty, order), theta, order), "empty-set factor differs from the theta series")
    case = A3Case(full, (), 1, [(F(0),) * 3], [(F(0),) * 3])
    if numeric:
        case.structural = sum((t.value for t in terms if t.v_subset == full), 0j)
        case.direct = r_direct(ds, spec.mu, spec.nu, u, v, tau, point.tol, cfg, only=(full,))
        if abs(case.direct - case.structural) > tol * max(abs(case.structural), point.tol):
            case.failures.append(f"kernel sum {case.direct} vs factorized {case.structural}")
            failures.append(f"case 7 (L=3): {case.failures[-1]}")
    cases.append(case)
    return A3Report(cases, failures)
