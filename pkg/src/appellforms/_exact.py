"""Small exact linear algebra over the rationals.

Matrices are tuples of row tuples of ``Fraction``; vectors are tuples.  The
matrices in this package are tiny (rank at most a handful), so plain Python
elimination beats converting to and from a symbolic matrix type.
"""

from fractions import Fraction as F
from math import gcd

Vector = tuple
Matrix = tuple


def parse_rational(value):
    """Accept int, Fraction, "p/q" strings or {"num", "den"} mappings."""
    if isinstance(value, bool):
        raise ValueError(f"not a rational: {value!r}")
    if isinstance(value, (int, F)):
        return F(value)
    if isinstance(value, str):
        return F(value.strip())
    if isinstance(value, dict) and set(value) == {"num", "den"}:
        den = int(value["den"])
        if den == 0:
            raise ValueError("zero denominator")
        return F(int(value["num"]), den)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(t, int) for t in value):
        return F(value[0], value[1])
    raise ValueError(f"not a rational: {value!r}")


def rational_json(x):
    x = F(x)
    return int(x) if x.denominator == 1 else {"num": x.numerator, "den": x.denominator}


def vec(values):
    return tuple(F(t) for t in values)


def mat(rows):
    return tuple(tuple(F(t) for t in row) for row in rows)


def identity(n):
    return tuple(tuple(F(int(i == j)) for j in range(n)) for i in range(n))


def zeros(n, m=None):
    return tuple(tuple(F(0) for _ in range(n if m is None else m)) for _ in range(n))


def transpose(a):
    return tuple(zip(*a)) if a else ()


def mat_mul(a, b):
    bt = transpose(b)
    return tuple(tuple(sum((x * y for x, y in zip(row, col)), F(0)) for col in bt) for row in a)


def mat_vec(a, x):
    return tuple(sum((p * q for p, q in zip(row, x)), F(0)) for row in a)


def dot(x, y):
    return sum((p * q for p, q in zip(x, y)), F(0))


def add(x, y):
    return tuple(p + q for p, q in zip(x, y))


def sub(x, y):
    return tuple(p - q for p, q in zip(x, y))


def scale(c, x):
    return tuple(c * p for p in x)


def det(a):
    n = len(a)
    m = [list(row) for row in a]
    sign, result = 1, F(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return F(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            sign = -sign
        result *= m[col][col]
        for r in range(col + 1, n):
            f = m[r][col] / m[col][col]
            if f:
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return sign * result


def inverse(a):
    n = len(a)
    m = [list(row) + [F(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return tuple(tuple(row[n:]) for row in m)


def submatrix(a, rows, cols):
    return tuple(tuple(a[i][j] for j in cols) for i in rows)


def integer_kernel(a):
    """Basis of {n in Z^m : a n = 0} for an integer matrix ``a`` (k x m).

    Column operations on [a; I] bring ``a`` to column echelon form; the
    identity block then holds a unimodular transform whose trailing columns
    span the integer kernel.
    """
    k = len(a)
    m = len(a[0]) if a else 0
    cols = [[int(a[i][j]) for i in range(k)] + [int(i == j) for i in range(m)] for j in range(m)]
    pivot_col = 0
    for row in range(k):
        # gcd-reduce entries in this row among the remaining columns
        while True:
            nz = [j for j in range(pivot_col, m) if cols[j][row] != 0]
            if len(nz) <= 1:
                break
            j0 = min(nz, key=lambda j: abs(cols[j][row]))
            for j in nz:
                if j != j0:
                    q = cols[j][row] // cols[j0][row]
                    cols[j] = [x - q * y for x, y in zip(cols[j], cols[j0])]
        nz = [j for j in range(pivot_col, m) if cols[j][row] != 0]
        if nz:
            j = nz[0]
            cols[pivot_col], cols[j] = cols[j], cols[pivot_col]
            pivot_col += 1
    return [tuple(c[k:]) for c in cols[pivot_col:]]


def lcm_denominator(values):
    out = 1
    for x in values:
        d = F(x).denominator
        out = out * d // gcd(out, d)
    return out
