"""Exact lattice data: Gram matrices, d-vector sets, glue vectors.

All arithmetic here is over ``Fraction``.  Vectors are coordinate tuples in
the basis of the lattice generators; indices of d-vectors are 0-based.
"""

from dataclasses import dataclass, field
from fractions import Fraction as F
from itertools import product
from math import isqrt
import json

from . import _exact as ex


@dataclass(frozen=True)
class Lattice:
    """Integral positive-definite lattice given by its Gram matrix.

    Odd lattices are accepted (``is_even`` reports parity) because the rank
    one example ``Z`` with ``Q(k) = k^2`` is useful as a test bed.
    """

    gram: tuple
    label: str | None = None
    _inv: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        g = tuple(tuple(int(x) for x in row) for row in self.gram)
        n = len(g)
        if n == 0 or any(len(row) != n for row in g):
            raise ValueError("gram must be a non-empty square matrix")
        if any(g[i][j] != g[j][i] for i in range(n) for j in range(n)):
            raise ValueError("gram must be symmetric")
        for k in range(1, n + 1):
            if ex.det(ex.submatrix(ex.mat(g), range(k), range(k))) <= 0:
                raise ValueError("gram must be positive definite")
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "_inv", ex.inverse(ex.mat(g)))

    @property
    def rank(self):
        return len(self.gram)

    @property
    def is_even(self):
        return all(self.gram[i][i] % 2 == 0 for i in range(self.rank))

    @property
    def det(self):
        return ex.det(ex.mat(self.gram))

    @property
    def inverse(self):
        return self._inv

    def bilinear(self, x, y):
        if len(x) != self.rank or len(y) != self.rank:
            raise ValueError("vector length does not match lattice rank")
        return sum((F(x[i]) * self.gram[i][j] * F(y[j])
                    for i in range(self.rank) for j in range(self.rank) if self.gram[i][j]), F(0))

    def quadratic(self, x):
        return self.bilinear(x, x)

    def pairing(self, x):
        """Row vector gram.x, so that B(x, y) = pairing(x) . y."""
        return ex.mat_vec(self.gram, ex.vec(x))

    def contains(self, x):
        return all(F(t).denominator == 1 for t in x)

    def in_dual(self, x):
        return all(t.denominator == 1 for t in self.pairing(x))


@dataclass(frozen=True)
class DVectorSet:
    """Linearly independent vectors d_1..d_M of a lattice (integer coordinates)."""

    lattice: Lattice
    vectors: tuple

    def __post_init__(self):
        vs = tuple(tuple(int(x) for x in v) for v in self.vectors)
        for v in vs:
            if len(v) != self.lattice.rank:
                raise ValueError("d-vector length does not match lattice rank")
        object.__setattr__(self, "vectors", vs)
        if vs and ex.det(self.d_matrix) == 0:
            raise ValueError("d-vectors are linearly dependent")

    @property
    def depth(self):
        return len(self.vectors)

    @property
    def c_matrix(self):
        """N x M matrix with entries B(alpha_i, d_r)."""
        cols = [self.lattice.pairing(d) for d in self.vectors]
        return tuple(tuple(col[i] for col in cols) for i in range(self.lattice.rank))

    @property
    def d_matrix(self):
        b = self.lattice.bilinear
        return tuple(tuple(b(s, r) for r in self.vectors) for s in self.vectors)

    @property
    def d_inverse(self):
        return ex.inverse(self.d_matrix)

    def combine(self, coeffs):
        """Sum_r coeffs[r] d_r as a coordinate vector."""
        out = [F(0)] * self.lattice.rank
        for c, d in zip(coeffs, self.vectors):
            if c:
                for i, x in enumerate(d):
                    out[i] += F(c) * x
        return tuple(out)

    def d_coordinates(self, x):
        """Coefficients t_r of the projection of x onto span{d_r}: D^-1 (B(d_r, x))_r."""
        return ex.mat_vec(self.d_inverse, tuple(self.lattice.bilinear(d, x) for d in self.vectors))

    def subset(self, indices):
        return DVectorSet(self.lattice, tuple(self.vectors[i] for i in indices))

    def to_json(self):
        return {"rank": self.lattice.rank, "gram": [list(r) for r in self.lattice.gram],
                "dvectors": [list(v) for v in self.vectors]}

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        unknown = set(doc) - {"rank", "gram", "dvectors", "label"}
        if unknown:
            raise ValueError(f"unknown lattice keys: {sorted(unknown)}")
        gram = [[ex.parse_rational(x) for x in row] for row in doc["gram"]]
        if any(x.denominator != 1 for row in gram for x in row):
            raise ValueError("gram entries must be integers")
        lat = Lattice(tuple(tuple(int(x) for x in row) for row in gram), doc.get("label"))
        if "rank" in doc and int(doc["rank"]) != lat.rank:
            raise ValueError("rank does not match gram size")
        dv = [[ex.parse_rational(x) for x in v] for v in doc.get("dvectors", [])]
        if any(x.denominator != 1 for v in dv for x in v):
            raise ValueError("d-vectors must have integer coordinates")
        return cls(lat, tuple(tuple(int(x) for x in v) for v in dv))


def cartan_an(n):
    if int(n) != n or n < 1:
        raise ValueError(f"invalid rank {n!r}: need N >= 1")
    n = int(n)
    gram = tuple(tuple(2 if i == j else -1 if abs(i - j) == 1 else 0 for j in range(n)) for i in range(n))
    return Lattice(gram, f"A{n}")


def inverse_cartan(n):
    if int(n) != n or n < 1:
        raise ValueError(f"invalid rank {n!r}: need N >= 1")
    return tuple(tuple(F(min(j, l)) - F(j * l, n + 1) for l in range(1, n + 1)) for j in range(1, n + 1))


def bilinear(lattice, x, y):
    return lattice.bilinear(x, y)


def quadratic(lattice, x):
    return lattice.quadratic(x)


def dual_vectors(ds):
    dinv = ds.d_inverse
    return [ds.combine(dinv[r]) for r in range(ds.depth)]


def projection_matrix(ds):
    """P = A^-1 C D^-1 C^T, the orthogonal projection onto span{d_r}."""
    n = ds.lattice.rank
    if ds.depth == 0:
        return ex.zeros(n)
    c = ds.c_matrix
    return ex.mat_mul(ex.mat_mul(ex.mat_mul(ds.lattice.inverse, c), ds.d_inverse), ex.transpose(c))


def schur_complement(m, split):
    """m / m[split:, split:] = A - B D^-1 C for the block split at ``split``."""
    m = ex.mat(m)
    n = len(m)
    if not 0 < split < n:
        return m[:split] if split == n else ()
    head, tail = range(split), range(split, n)
    a = ex.submatrix(m, head, head)
    b = ex.submatrix(m, head, tail)
    c = ex.submatrix(m, tail, head)
    d = ex.submatrix(m, tail, tail)
    try:
        dinv = ex.inverse(d)
    except ZeroDivisionError:
        raise ValueError("lower-right block is singular") from None
    bdc = ex.mat_mul(ex.mat_mul(b, dinv), c)
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, bdc))


@dataclass(frozen=True)
class IndefiniteEmbedding:
    ul_gram: tuple
    ul_gram_inv: tuple
    g_matrix: tuple
    null_vectors: tuple
    c_vectors: tuple
    c_prime_vectors: tuple
    det: F

    def bilinear(self, x, y):
        return ex.dot(ex.mat_vec(self.ul_gram, ex.vec(x)), ex.vec(y))


def embed_indefinite(ds):
    """Lattice of signature (N, M) spanned by the alpha_i and the d_r with B(d, d) = 0."""
    lat = ds.lattice
    n, m = lat.rank, ds.depth
    a, c = lat.gram, ds.c_matrix
    ul = tuple(tuple(a[i]) + tuple(c[i]) for i in range(n)) + tuple(
        tuple(c[i][r] for i in range(n)) + (F(0),) * m for r in range(m))
    ul = ex.mat(ul)
    value = ex.det(ul)
    if value == 0:
        raise ValueError("d-vectors are dependent: the embedded lattice is degenerate")
    inv = ex.inverse(ul)
    ainv_c = ex.mat_mul(lat.inverse, c)
    # columns of G: the alpha_i, then gamma_r - P(gamma_r) which is orthogonal to every alpha
    g = tuple(tuple(F(int(i == j)) for j in range(n)) + tuple(-ainv_c[i][r] for r in range(m))
              for i in range(n)) + tuple((F(0),) * n + tuple(F(int(r == s)) for s in range(m))
                                         for r in range(m))
    nulls = tuple(tuple(F(int(j == n + r)) for j in range(n + m)) for r in range(m))
    cprime = tuple(tuple(F(int(j == n + r)) for j in range(n + m)) for r in range(m))
    cvec = tuple(ex.mat_vec(inv, cp) for cp in cprime)
    return IndefiniteEmbedding(ul, inv, g, nulls, cvec, cprime, value)


def c_coefficients(ds, v_subset, s_subset):
    """Coefficients c_{s,v} and the vectors d_v^{perp S} = d_v + sum_s c_{s,v} d_s.

    Returns ``(coeffs, perps)`` with ``coeffs[(s, v)]`` and ``perps[v]``.  The
    coefficients solve B(d_s', d_v^{perp S}) = 0 for every s' in S, which is
    equivalent to c_{s,.} = (D^-1_{VV})^-1 D^-1_{V,s}.
    """
    v_subset, s_subset = list(v_subset), list(s_subset)
    if set(v_subset) & set(s_subset):
        raise ValueError("V and S must be disjoint")
    if sorted(v_subset + s_subset) != list(range(ds.depth)):
        raise ValueError("V and S must partition the d-vector indices")
    if not v_subset or not s_subset:
        return {}, {v: ex.vec(ds.vectors[v]) for v in v_subset}
    dinv = ds.d_inverse
    block = ex.inverse(ex.submatrix(dinv, v_subset, v_subset))
    coeffs = {}
    for s in s_subset:
        col = ex.mat_vec(block, tuple(dinv[v][s] for v in v_subset))
        for v, c in zip(v_subset, col):
            coeffs[(s, v)] = c
    perps = {}
    for v in v_subset:
        w = list(ex.vec(ds.vectors[v]))
        for s in s_subset:
            c = coeffs[(s, v)]
            w = [x + c * y for x, y in zip(w, ds.vectors[s])]
        perps[v] = tuple(w)
    return coeffs, perps


def sublattice_basis(ds, v_subset):
    """Integer basis (in d-coordinates) of Lambda_d({d_v*}) = Lambda_d meet span{d_v*}.

    An element sum n_r d_r lies in the span of the duals d_v* (v in V) exactly
    when it is orthogonal to every d_s with s outside V.
    """
    s_subset = [r for r in range(ds.depth) if r not in v_subset]
    if not s_subset:
        return [tuple(int(i == j) for j in range(ds.depth)) for i in range(ds.depth)]
    rows = [ds.d_matrix[s] for s in s_subset]
    return ex.integer_kernel(rows)


def _discriminant(ds, basis):
    vecs = [ds.combine(b) for b in basis]
    g = tuple(tuple(ds.lattice.bilinear(x, y) for y in vecs) for x in vecs)
    return abs(ex.det(g)) if g else F(1)


@dataclass(frozen=True)
class GlueVector:
    vector: tuple        # coordinates in the lattice basis
    d_coords: tuple      # integer coefficients n_v of sum_v n_v d_v
    parallel: tuple      # projection onto span{d_s}
    perp: tuple          # projection onto span{d_v*}
    parallel_coords: tuple  # coefficients of ``parallel`` in the d_s basis


@dataclass(frozen=True)
class GlueData:
    count: int
    representatives: tuple
    v_basis: tuple       # basis of Lambda_d({d_v*}) in d-coordinates
    s_subset: tuple
    v_subset: tuple


def glue_vectors(ds, s_subset):
    """Coset representatives of Lambda_d / (Lambda_d({d_s}) + Lambda_d({d_v*})).

    The count is cross-checked against the discriminant formula.  Candidates
    sum_v n_v d_v with 0 <= n_v < count are tried in order of total weight,
    lowest index first, and the first member of each new class is kept.
    """
    m = ds.depth
    s_subset = tuple(sorted(set(s_subset)))
    if len(s_subset) >= m and m > 0:
        raise ValueError("S must be a proper subset of the d-vector indices")
    v_subset = tuple(r for r in range(m) if r not in s_subset)
    v_basis = sublattice_basis(ds, v_subset)
    s_basis = [tuple(int(r == s) for r in range(m)) for s in s_subset]
    combined = [tuple(F(x) for x in b) for b in s_basis + list(v_basis)]
    if len(combined) != m:
        raise ValueError("internal error: sublattice ranks do not add up")
    index = abs(ex.det(combined)) if m else F(1)
    disc_total = abs(ex.det(ds.d_matrix)) if m else F(1)
    ratio = _discriminant(ds, v_basis) * _discriminant(ds, s_basis) / disc_total
    root = isqrt(ratio.numerator) if ratio.denominator == 1 else -1
    if root < 0 or root * root != ratio or root != index:
        raise ArithmeticError(f"glue count mismatch: index {index}, discriminant ratio {ratio}")
    count = int(index)
    to_basis = ex.inverse(ex.transpose(combined)) if m else ()

    def key(n_full):
        coords = ex.mat_vec(to_basis, n_full)
        return tuple(c - (c.numerator // c.denominator) for c in coords)

    seen, reps = set(), []
    candidates = sorted(product(range(count), repeat=len(v_subset)), key=lambda n: (sum(n), [-x for x in n]))
    for n in candidates:
        full = [0] * m
        for v, x in zip(v_subset, n):
            full[v] = x
        k = key(tuple(F(x) for x in full))
        if k in seen:
            continue
        seen.add(k)
        vector = ds.combine(full)
        if s_subset:
            sub = ds.subset(s_subset)
            pcoords = sub.d_coordinates(vector)
            parallel = sub.combine(pcoords)
        else:
            pcoords, parallel = (), (F(0),) * ds.lattice.rank
        perp = ex.sub(vector, parallel)
        reps.append(GlueVector(vector, tuple(full), parallel, perp, pcoords))
        if len(reps) == count:
            break
    if len(reps) != count:
        raise ArithmeticError("coset search did not find every glue class")
    return GlueData(count, tuple(reps), tuple(v_basis), s_subset, v_subset)


def weyl_reflection(n, m):
    """Matrix of the simple reflection in alpha_m (1-based) acting on A_n coordinates."""
    if not 1 <= m <= n:
        raise ValueError(f"reflection index {m} out of range 1..{n}")
    rows = []
    for i in range(1, n + 1):
        if i == m:
            rows.append(tuple(-1 if j == m else 1 if abs(j - m) == 1 else 0 for j in range(1, n + 1)))
        else:
            rows.append(tuple(int(i == j) for j in range(1, n + 1)))
    return tuple(rows)


def conjugacy_classes(n, mod_inversion=False):
    """Classes j*mu_1 of the A_n discriminant group, canonical coordinates in [0, 1)."""
    if n < 1:
        raise ValueError("need N >= 1")
    out = []
    for j in range(n + 1):
        out.append(tuple(F(j * l, n + 1) - (j * l) // (n + 1) for l in range(1, n + 1)))
    if mod_inversion:
        kept = []
        for mu in out:
            neg = tuple((-x) % 1 for x in mu)
            if neg not in kept:
                kept.append(mu)
        out = kept
    return out


def lattice_info(ds):
    """Summary used by the command line."""
    lat = ds.lattice
    info = {"rank": lat.rank, "det": lat.det, "even": lat.is_even, "depth": ds.depth}
    if ds.depth:
        info["d_matrix"] = ds.d_matrix
        info["det_d"] = ex.det(ds.d_matrix)
        info["duals"] = dual_vectors(ds)
        info["level"] = abs(lat.det * info["det_d"])
    return info
