"""Generalized error functions E_P and their complements M_P for P <= 3.

Everything is reduced to the frame of the vectors c_1..c_P: the Gram matrix
G_ij = B(c_i, c_j) (sign-flipped when the c's span a negative-definite plane)
and the pairings m_j = B(c_j, x).  Then E_P is the expectation of
prod_j sgn(Z_j) for a Gaussian Z with mean m and covariance G / (2 pi), and
M_P is E_P with the sign products of lower strata removed.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
import math

import numpy as np
from scipy.special import erf, erfc, erfcx

MAX_DEPTH = 3
SINGULAR_GUARD = 1e-6


@dataclass(frozen=True)
class QuadratureConfig:
    radius: float = 9.0         # in standard deviations
    points_per_dim: int = 48    # per panel
    tol_floor: float = 1e-11


DEFAULT_CONFIG = QuadratureConfig()


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ErrSpec:
    """c-vectors in a quadratic space with Gram ``gram`` and argument ``x``."""

    c_vectors: tuple
    gram: tuple
    x: tuple

    def __post_init__(self):
        p = len(self.c_vectors)
        if not 1 <= p <= MAX_DEPTH:
            raise ValueError(f"need 1 <= P <= {MAX_DEPTH}, got {p}")

    @property
    def depth(self):
        return len(self.c_vectors)

    def frame(self):
        """(G, m) with G positive definite; raises if the c's span an indefinite plane."""
        a = np.array(self.gram, dtype=float)
        c = np.array(self.c_vectors, dtype=float)
        g = c @ a @ c.T
        m = c @ a @ np.array(self.x, dtype=float)
        eig = np.linalg.eigvalsh(g)
        if np.all(eig > 0):
            return g, m
        if np.all(eig < 0):
            return -g, m
        raise ValueError("the c-vectors must span a definite plane")


def frame_spec(g, m):
    """ErrSpec whose frame is (g, m) exactly: c_j = e_j in the space with Gram g."""
    g = np.asarray(g, dtype=float)
    x = np.linalg.solve(g, np.asarray(m, dtype=float))
    p = len(g)
    return ErrSpec(tuple(tuple(float(i == j) for j in range(p)) for i in range(p)),
                   tuple(map(tuple, g)), tuple(x))


def reduce_to_positive(dual_vectors, gram, x):
    """E_P over the indefinite plane of the C's equals E_P of the duals d_r* in Lambda."""
    return ErrSpec(tuple(tuple(float(t) for t in d) for d in dual_vectors),
                   tuple(tuple(float(t) for t in row) for row in gram), tuple(float(t) for t in x))


@lru_cache(maxsize=None)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _panels(breaks, lo, hi, n):
    """Gauss-Legendre nodes/weights on [lo, hi] split at the given breakpoints.

    ``breaks`` has shape (..., k); output nodes and weights have shape (..., (k+1) n).
    """
    x0, w0 = _legendre(n)
    b = np.sort(np.clip(breaks, lo, hi), axis=-1)
    shape = b.shape[:-1]
    edges = np.concatenate([np.full(shape + (1,), lo), b, np.full(shape + (1,), hi)], -1)
    half = (edges[..., 1:] - edges[..., :-1]) / 2
    nodes = edges[..., :-1, None] + half[..., None] * (x0 + 1)
    weights = half[..., None] * w0
    return nodes.reshape(shape + (-1,)), weights.reshape(shape + (-1,))


def _crossing(offset, slope):
    """Zero of offset + slope * t, pushed out of range when the slope vanishes."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -offset / slope
    return np.where(np.abs(slope) > 1e-300, t, np.inf)


_GAUSS = 1 / math.sqrt(2 * math.pi)


def _e_frame(g, m, n, radius):
    p = len(m)
    if p == 1:
        return float(erf(m[0] * math.sqrt(math.pi / g[0, 0])))
    chol = np.linalg.cholesky(g / (2 * math.pi))
    # break the outer line where sgn(Z_1) jumps and where each later mean crosses zero
    outer = [_crossing(m[0], chol[0, 0])] + [_crossing(m[j], chol[j, 0]) for j in range(1, p)]
    x1, w1 = _panels(np.array(outer, dtype=float), -radius, radius, n)
    z1 = m[0] + chol[0, 0] * x1
    w1 = w1 * _GAUSS * np.exp(-x1 ** 2 / 2) * np.sign(z1)
    if p == 2:
        inner = erf((m[1] + chol[1, 0] * x1) / (math.sqrt(2) * chol[1, 1]))
        return float(np.sum(w1 * inner))
    a2 = m[1] + chol[1, 0] * x1
    a3 = m[2] + chol[2, 0] * x1
    breaks = np.stack([_crossing(a2, chol[1, 1]), _crossing(a3, np.full_like(a3, chol[2, 1]))], -1)
    x2, w2 = _panels(breaks, -radius, radius, n)
    z2 = a2[:, None] + chol[1, 1] * x2
    inner = erf((a3[:, None] + chol[2, 1] * x2) / (math.sqrt(2) * chol[2, 2]))
    dens2 = w2 * _GAUSS * np.exp(-x2 ** 2 / 2) * np.sign(z2) * inner
    return float(np.sum(w1 * dens2.sum(-1)))


def e_p_estimate(spec, cfg=DEFAULT_CONFIG):
    """(value, error estimate) for E_P; the estimate compares two node counts plus the cut-off tail."""
    g, m = spec.frame()
    return _e_estimate(g, m, cfg)


def _e_estimate(g, m, cfg):
    fine = _e_frame(g, m, cfg.points_per_dim, cfg.radius)
    if len(m) == 1:
        return fine, 0.0
    coarse = _e_frame(g, m, 2 * cfg.points_per_dim // 3, cfg.radius)
    err = abs(fine - coarse) + len(m) * math.erfc(cfg.radius / math.sqrt(2))
    if err > max(10 * cfg.tol_floor, 1e-7):
        raise QuadratureError(f"E_{len(m)} quadrature did not converge (estimate {err:.2e})")
    return fine, err


def e_p(spec, cfg=DEFAULT_CONFIG):
    """E_P({c_j}; x) normalized so that the Gaussian has unit mass on the plane."""
    return e_p_estimate(spec, cfg)[0]


# -- complementary functions ---------------------------------------------

def _log_half_line(alpha, beta):
    """log of int_0^inf exp(-alpha s - beta s^2) ds for beta > 0, any real alpha."""
    t = alpha / (2 * np.sqrt(beta))
    pos = np.log(erfcx(np.maximum(t, 0.0)))
    neg = t * t + np.log(erfc(np.minimum(t, 0.0)))
    return 0.5 * np.log(np.pi / (4 * beta)) + np.where(t >= 0, pos, neg)


def _orthant_integral(babs, h, n):
    """int over s in R_+^P of exp(-sum s_j |b_j| - s^T H s / (4 pi))."""
    p = len(babs)
    hh = h / (4 * math.pi)
    if p == 1:
        return float(np.exp(_log_half_line(np.array(babs[0]), hh[0, 0])))
    lam = np.linalg.eigvalsh(hh).min()
    top = math.sqrt(46 / lam) + 1
    x0, w0 = _legendre(n)
    # panels graded towards the origin, where exp(-s |b|) concentrates for large |b|
    edges = np.concatenate([[0.0], top * np.logspace(-5, 0, 11)])
    nodes = np.concatenate([(a + b) / 2 + (b - a) / 2 * x0 for a, b in zip(edges[:-1], edges[1:])])
    weights = np.concatenate([(b - a) / 2 * w0 for a, b in zip(edges[:-1], edges[1:])])
    if p == 2:
        s1 = nodes
        outer = -babs[0] * s1 - hh[0, 0] * s1 ** 2
        alpha = babs[1] + 2 * hh[0, 1] * s1
        return float(np.sum(weights * np.exp(outer + _log_half_line(alpha, hh[1, 1]))))
    s1, s2 = np.meshgrid(nodes, nodes, indexing="ij")
    ww = np.outer(weights, weights)
    outer = (-babs[0] * s1 - babs[1] * s2 - hh[0, 0] * s1 ** 2 - hh[1, 1] * s2 ** 2 - 2 * hh[0, 1] * s1 * s2)
    alpha = babs[2] + 2 * hh[0, 2] * s1 + 2 * hh[1, 2] * s2
    return float(np.sum(ww * np.exp(outer + _log_half_line(alpha, hh[2, 2]))))


def _m_one_sided(g, m, signs, n):
    """M_P at m (every dual component nonzero), with sign vector fixed to ``signs``."""
    ginv = np.linalg.inv(g)
    b = ginv @ m
    eps = np.asarray(signs, dtype=float)
    h = np.outer(eps, eps) * ginv
    p = len(m)
    pref = (-1) ** p * np.prod(eps) * math.sqrt(abs(np.linalg.det(ginv))) * math.pi ** (-p)
    return pref * math.exp(-math.pi * float(m @ b)) * _orthant_integral(np.abs(b), h, n)


def _m_frame(g, m, n):
    m = np.asarray(m, dtype=float)
    b = np.linalg.solve(g, m)
    if np.all(m == 0):
        # special value: average of the one-sided limits over all sign patterns
        vals = [_m_one_sided(g, m, s, n) for s in product((1, -1), repeat=len(m))]
        return float(np.mean(vals))
    scale = max(1.0, float(np.max(np.abs(b))))
    if np.min(np.abs(b)) < SINGULAR_GUARD * scale:
        raise ValueError("argument too close to a singular wall of M_P (a dual component vanishes)")
    return _m_one_sided(g, m, np.sign(b), n)


def m_p_estimate(spec, cfg=DEFAULT_CONFIG):
    g, m = spec.frame()
    return _m_estimate(g, m, cfg)


def _m_estimate(g, m, cfg):
    fine = _m_frame(g, m, cfg.points_per_dim)
    if len(m) == 1:
        return fine, 0.0
    coarse = _m_frame(g, m, 2 * cfg.points_per_dim // 3)
    err = abs(fine - coarse)
    if err > max(10 * cfg.tol_floor, 1e-7):
        raise QuadratureError(f"M_{len(m)} quadrature did not converge (estimate {err:.2e})")
    return fine, err


def m_p(spec, cfg=DEFAULT_CONFIG):
    """Complementary error function M_P({c_j}; x) (decays like a Gaussian in x)."""
    return m_p_estimate(spec, cfg)[0]


def m_frame(g, m, cfg=DEFAULT_CONFIG):
    return _m_estimate(np.asarray(g, dtype=float), np.asarray(m, dtype=float), cfg)[0]


def e_frame(g, m, cfg=DEFAULT_CONFIG):
    return _e_estimate(np.asarray(g, dtype=float), np.asarray(m, dtype=float), cfg)[0]


def _sgn(x):
    return 0.0 if x == 0 else math.copysign(1.0, x)


def e_via_m(spec, cfg=DEFAULT_CONFIG):
    """E_P rebuilt from the M_L of every subset times signs of orthogonal components."""
    g, m = spec.frame()
    return e_via_m_frame(g, m, cfg)


def e_via_m_frame(g, m, cfg=DEFAULT_CONFIG):
    g = np.asarray(g, dtype=float)
    m = np.asarray(m, dtype=float)
    p = len(m)
    total = 0.0
    for size in range(p + 1):
        for vset in combinations(range(p), size):
            rest = [w for w in range(p) if w not in vset]
            signs = 1.0
            if vset:
                gv = g[np.ix_(vset, vset)]
                coef = np.linalg.solve(gv, m[list(vset)])
                for w in rest:
                    signs *= _sgn(m[w] - g[w, list(vset)] @ coef)
            else:
                for w in rest:
                    signs *= _sgn(m[w])
            if signs == 0:
                continue
            mval = _m_estimate(gv, m[list(vset)], cfg)[0] if vset else 1.0
            total += mval * signs
    return total


def arctan_value(g):
    """(2/pi) arctan(alpha), alpha = G_12 / sqrt(det G): the value M_2(0)."""
    g = np.asarray(g, dtype=float)
    return 2 / math.pi * math.atan(g[0, 1] / math.sqrt(np.linalg.det(g)))


