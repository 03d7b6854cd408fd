"""Truncated formal series in q with formal elliptic variables w_1..w_n.

A term is keyed by ``(q_exp, w_exps, phase)`` and carries a rational
coefficient; it stands for ``c * q^q_exp * prod w_j^w_j * exp(2 pi i phase)``
with ``phase`` reduced to [0, 1).  Exponents are exact rationals.

Truncation has two parts.  ``qcut`` is the largest q-exponent up to which all
coefficients are known.  ``wbox`` is either ``None`` (nothing was dropped in
the w-directions) or one ``(lo, hi)`` pair per variable: coefficients are
known for w-exponents inside the box.
"""

import cmath
import math
from fractions import Fraction as F
from functools import reduce


def _frac_part(x):
    return x - (x.numerator // x.denominator)


class FSeries:
    __slots__ = ("terms", "nvars", "qcut", "wbox")

    def __init__(self, terms=None, nvars=0, qcut=None, wbox=None):
        self.nvars = nvars
        self.qcut = None if qcut is None else F(qcut)
        self.wbox = None if wbox is None else tuple((F(lo), F(hi)) for lo, hi in wbox)
        if self.wbox is not None and len(self.wbox) != nvars:
            raise ValueError("w-window must have one bound per variable")
        self.terms = {}
        for key, c in (terms or {}).items():
            q, w, p = key
            key = (F(q), tuple(F(x) for x in w), _frac_part(F(p)))
            if len(key[1]) != nvars:
                raise ValueError("w-exponent length does not match variable count")
            if self._inside(key):
                c = self.terms.get(key, 0) + F(c)
                if c:
                    self.terms[key] = c
                else:
                    self.terms.pop(key, None)

    # ------------------------------------------------------------------
    def _inside(self, key):
        if self.qcut is not None and key[0] > self.qcut:
            return False
        if self.wbox is not None:
            return all(lo <= x <= hi for x, (lo, hi) in zip(key[1], self.wbox))
        return True

    def copy(self):
        out = FSeries(nvars=self.nvars, qcut=self.qcut, wbox=self.wbox)
        out.terms = dict(self.terms)
        return out

    def __repr__(self):
        return f"FSeries({len(self.terms)} terms, nvars={self.nvars}, qcut={self.qcut}, wbox={self.wbox})"

    def __len__(self):
        return len(self.terms)

    @property
    def qmin(self):
        return min((k[0] for k in self.terms), default=None)

    def wrange(self):
        """Per-variable (min, max) of the stored w-exponents."""
        if not self.terms:
            return tuple((F(0), F(0)) for _ in range(self.nvars))
        keys = list(self.terms)
        return tuple((min(k[1][j] for k in keys), max(k[1][j] for k in keys)) for j in range(self.nvars))

    def truncate(self, qcut=None, wbox=None):
        q = _min_cut(self.qcut, qcut)
        box = _intersect(self.wbox, wbox)
        out = FSeries(nvars=self.nvars, qcut=q, wbox=box)
        out.terms = {k: c for k, c in self.terms.items() if out._inside(k)}
        return out

    # arithmetic --------------------------------------------------------
    def __add__(self, other):
        return series_add(self, other)

    def __sub__(self, other):
        return series_add(self, other.scale(-1))

    def __neg__(self):
        return self.scale(-1)

    def __mul__(self, other):
        return series_mul(self, other)

    def scale(self, c):
        c = F(c)
        out = FSeries(nvars=self.nvars, qcut=self.qcut, wbox=self.wbox)
        if c:
            out.terms = {k: v * c for k, v in self.terms.items()}
        return out

    def shift(self, q=0, w=None, phase=0, coeff=1):
        """Multiply by the monomial coeff * q^q * w^w * e(phase)."""
        q, phase, coeff = F(q), F(phase), F(coeff)
        w = tuple(F(x) for x in w) if w is not None else (F(0),) * self.nvars
        qcut = None if self.qcut is None else self.qcut + q
        box = None if self.wbox is None else tuple((lo + d, hi + d) for (lo, hi), d in zip(self.wbox, w))
        out = FSeries(nvars=self.nvars, qcut=qcut, wbox=box)
        if coeff:
            for (kq, kw, kp), c in self.terms.items():
                key = (kq + q, tuple(a + b for a, b in zip(kw, w)), _frac_part(kp + phase))
                out.terms[key] = c * coeff
        return out

    # serialization -----------------------------------------------------
    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: kv[0])

    def to_json(self):
        def r(x):
            return [x.numerator, x.denominator]
        terms = []
        for (q, w, p), c in self.sorted_terms():
            t = {"q": r(q), "w": [r(x) for x in w], "c": r(c)}
            if p:
                t["p"] = r(p)
            terms.append(t)
        return {"qcut": None if self.qcut is None else r(self.qcut),
                "wwin": None if self.wbox is None else [[r(lo), r(hi)] for lo, hi in self.wbox],
                "nvars": self.nvars, "terms": terms}

    @classmethod
    def from_json(cls, doc):
        def r(x):
            return F(x[0], x[1])
        nvars = doc.get("nvars")
        if nvars is None:
            nvars = len(doc["terms"][0]["w"]) if doc["terms"] else 0
        terms = {}
        for t in doc["terms"]:
            key = (r(t["q"]), tuple(r(x) for x in t["w"]), r(t.get("p", [0, 1])))
            terms[key] = terms.get(key, 0) + r(t["c"])
        qcut = None if doc.get("qcut") is None else r(doc["qcut"])
        wbox = None if doc.get("wwin") is None else [(r(lo), r(hi)) for lo, hi in doc["wwin"]]
        return cls(terms, nvars, qcut, wbox)

    def to_text(self, digits=15):
        lines = []
        for (q, w, p), c in self.sorted_terms():
            mono = [f"q^({q})"] + [f"w{j + 1}^({x})" for j, x in enumerate(w) if x]
            if p:
                mono.append(f"e({p})")
            lines.append(f"{c} * " + " * ".join(mono))
        return "\n".join(lines)


def _min_cut(a, b):
    if a is None:
        return None if b is None else F(b)
    return a if b is None else min(a, F(b))


def _intersect(a, b):
    if a is None:
        return None if b is None else tuple((F(lo), F(hi)) for lo, hi in b)
    if b is None:
        return a
    return tuple((max(x[0], F(y[0])), min(x[1], F(y[1]))) for x, y in zip(a, b))


def _check_shapes(a, b):
    if a.nvars != b.nvars:
        raise ValueError(f"incompatible variable counts {a.nvars} and {b.nvars}")


def zero(nvars=0, qcut=None, wbox=None):
    return FSeries(nvars=nvars, qcut=qcut, wbox=wbox)


def monomial(q=0, w=None, phase=0, coeff=1, nvars=None, qcut=None, wbox=None):
    w = tuple(F(x) for x in (w or ()))
    nvars = len(w) if nvars is None else nvars
    w = w or (F(0),) * nvars
    return FSeries({(F(q), w, F(phase)): F(coeff)}, nvars, qcut, wbox)


def series_add(a, b):
    _check_shapes(a, b)
    out = FSeries(nvars=a.nvars, qcut=_min_cut(a.qcut, b.qcut), wbox=_intersect(a.wbox, b.wbox))
    terms = {k: c for k, c in a.terms.items() if out._inside(k)}
    for k, c in b.terms.items():
        if out._inside(k):
            s = terms.get(k, 0) + c
            if s:
                terms[k] = s
            else:
                terms.pop(k, None)
    out.terms = terms
    return out


def series_mul(a, b):
    """Product with precision bookkeeping.

    At most one factor may be truncated in w; the other must be exact in w,
    and its w-range narrows the window in which the product is known.
    """
    _check_shapes(a, b)
    if a.wbox is not None and b.wbox is not None:
        raise ValueError("cannot multiply two series that are both truncated in w")
    if not a.terms or not b.terms:
        qcut = _min_cut(a.qcut, b.qcut)
        return FSeries(nvars=a.nvars, qcut=qcut, wbox=_intersect(a.wbox, b.wbox))
    cuts = []
    if a.qcut is not None:
        cuts.append(a.qcut + b.qmin)
    if b.qcut is not None:
        cuts.append(b.qcut + a.qmin)
    qcut = min(cuts) if cuts else None
    box = None
    if a.wbox is not None or b.wbox is not None:
        trunc, exact = (a, b) if a.wbox is not None else (b, a)
        rng = exact.wrange()
        box = tuple((lo + r[1], hi + r[0]) for (lo, hi), r in zip(trunc.wbox, rng))
    out = FSeries(nvars=a.nvars, qcut=qcut, wbox=box)
    terms = {}
    for (q1, w1, p1), c1 in a.terms.items():
        for (q2, w2, p2), c2 in b.terms.items():
            q = q1 + q2
            if qcut is not None and q > qcut:
                continue
            key = (q, tuple(x + y for x, y in zip(w1, w2)), _frac_part(p1 + p2))
            if box is not None and not out._inside(key):
                continue
            s = terms.get(key, 0) + c1 * c2
            if s:
                terms[key] = s
            else:
                terms.pop(key, None)
    out.terms = terms
    return out


def geometric_expand(q, w, direction, qcut, wbox=None, phase=0, nvars=None):
    """Expansion of 1 / (1 - X) with X = q^q w^w e(phase).

    ``direction = +1`` gives sum_{n >= 0} X^n, ``direction = -1`` gives
    -sum_{n >= 1} X^-n.  The direction must make the q-exponent grow, or keep
    it fixed while moving every nonzero w-exponent out of a finite window.
    """
    q, phase = F(q), F(phase)
    w = tuple(F(x) for x in (w or ()))
    nvars = len(w) if nvars is None else nvars
    w = w or (F(0),) * nvars
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    step_q = direction * q
    step_w = tuple(direction * x for x in w)
    if step_q < 0 or (step_q == 0 and (wbox is None or not any(step_w))):
        raise ValueError(f"expansion of 1/(1 - q^{q} w^{w}) in direction {direction} does not terminate")
    out = FSeries(nvars=nvars, qcut=qcut, wbox=wbox)
    n = 0 if direction == 1 else 1
    sign = F(1) if direction == 1 else F(-1)
    while True:
        key = (step_q * n, tuple(x * n for x in step_w), _frac_part(direction * phase * n))
        if qcut is not None and key[0] > qcut:
            break
        if wbox is not None and step_q == 0 and not all(lo <= x <= hi for x, (lo, hi) in zip(key[1], wbox)):
            break
        if out._inside(key):
            out.terms[key] = out.terms.get(key, 0) + sign
        n += 1
        if qcut is None and step_q > 0 and n > 10 ** 6:
            raise ValueError("geometric expansion needs a q-cutoff")
    return out


# -- equality with root-of-unity phases ---------------------------------

def _cyclotomic(n):
    from sympy import Poly, cyclotomic_poly, symbols
    x = symbols("x")
    return [F(int(c)) for c in reversed(Poly(cyclotomic_poly(n, x), x).all_coeffs())]


def _reduce_cyclotomic(coeffs, n):
    """Reduce sum_k coeffs[k] zeta_n^k modulo the n-th cyclotomic polynomial."""
    phi = _cyclotomic(n)
    deg = len(phi) - 1
    c = list(coeffs) + [F(0)] * max(0, deg - len(coeffs))
    for k in range(len(c) - 1, deg - 1, -1):
        lead = c[k]
        if lead:
            for j in range(deg + 1):
                c[k - deg + j] -= lead * phi[j]
    return tuple(c[:deg])


def canonical_coefficients(series):
    """Map (q, w) -> canonical element of Q(zeta_n) for the phases present."""
    groups = {}
    for (q, w, p), c in series.terms.items():
        groups.setdefault((q, w), []).append((p, c))
    out = {}
    for key, items in groups.items():
        n = reduce(lambda a, b: a * b // math.gcd(a, b), (p.denominator for p, _ in items), 1)
        coeffs = [F(0)] * n
        for p, c in items:
            coeffs[int(p * n)] += c
        red = _reduce_cyclotomic(coeffs, n) if n > 1 else tuple(coeffs)
        if any(red):
            out[key] = (n, red)
    return out


def _in_window(key, q_upto, wbox):
    q, w = key
    if q_upto is not None and q > q_upto:
        return False
    if wbox is not None:
        return all(lo <= x <= hi for x, (lo, hi) in zip(w, wbox))
    return True


def series_compare(a, b, q_upto=None, wbox=None):
    """Exact comparison on a window; returns (equal, first differing key or None).

    The window is clipped to the region where both series are known.
    """
    _check_shapes(a, b)
    q_upto = _min_cut(_min_cut(a.qcut, b.qcut), q_upto)
    wbox = _intersect(_intersect(a.wbox, b.wbox), wbox)
    d = series_add(a, b.scale(-1))
    canon = canonical_coefficients(d)
    bad = sorted(k for k in canon if _in_window(k, q_upto, wbox))
    if bad:
        key = bad[0]
        return False, {"q": key[0], "w": key[1], "difference": canon[key]}
    return True, None


def series_equal(a, b, q_upto=None, wbox=None):
    return series_compare(a, b, q_upto, wbox)[0]


def symmetric_box(nvars, width):
    return tuple((F(-width), F(width)) for _ in range(nvars))


def eval_numeric(series, tau, zs=()):
    """Numerical value and a tail estimate.

    The tail estimate assumes the omitted coefficients grow no faster than
    the retained ones in the last unit q-interval and sums them geometrically.
    """
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("Im(tau) must be positive")
    zs = tuple(complex(z) for z in zs)
    if len(zs) != series.nvars:
        raise ValueError(f"need {series.nvars} elliptic values, got {len(zs)}")
    total = 0j
    top = 0.0
    qcut = series.qcut
    for (q, w, p), c in series.terms.items():
        arg = float(q) * tau + sum(float(x) * z for x, z in zip(w, zs)) + float(p)
        term = float(c) * cmath.exp(2j * math.pi * arg)
        total += term
        if qcut is not None and q > qcut - 1:
            top += abs(term)
    bound = 0.0
    if qcut is not None and series.terms:
        r = math.exp(-2 * math.pi * tau.imag)
        bound = top * r / (1 - r)
    return total, bound
