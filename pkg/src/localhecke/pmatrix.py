"""p-local matrix layer.

A value is ``p^(-dexp) * data`` where ``data`` is a matrix over Z[i] (stored
as (re, im) int pairs) and ``dexp >= 0``; only p ever divides denominators.
Rational contexts (GL4 / P121 / GL2) simply require zero imaginary parts.

Contexts:

* ``U2``        degree-2 unitary similitude group for J = [[0,-I],[I,0]],
                integral points as the distinguished subgroup;
* ``KLINGEN11`` same group, subgroup = integral points of the parabolic that
                fixes the last coordinate line (last row (0,0,0,*));
* ``U1``        the 2x2 unitary group (the "tau block" layer);
* ``GL4``       4x4 over Q, subgroup GL4(Z_p);
* ``P121``      block upper-triangular (1,2,1) pattern inside GL4;
* ``GL2``       2x2 over Q, subgroup GL2(Z_p).

``canonicalize`` picks one representative per left coset (subgroup acting on
the left); for the unitary contexts it is defined on the parabolic semigroup
support, which is where every representative produced by this package lives.
Correctness is certified against ``left_equivalent`` by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor

from . import gaussian as ga
from .gaussian import G, ZERO, ONE

Row = tuple[G, ...]
Data = tuple[Row, ...]


# ---------------------------------------------------------------------------
# contexts
# ---------------------------------------------------------------------------

UNITARY_KINDS = ("U2", "KLINGEN11", "U1")
RATIONAL_KINDS = ("GL4", "P121", "GL2")


@dataclass(frozen=True)
class GroupContext:
    kind: str
    p: int
    first_identification: bool = True  # split-prime component ordering choice

    def __post_init__(self):
        if self.kind not in UNITARY_KINDS + RATIONAL_KINDS:
            raise ValueError(f"unknown context kind {self.kind}")

    @property
    def n(self) -> int:
        return 2 if self.kind in ("U1", "GL2") else 4

    @property
    def splitting(self) -> str:
        return ga.prime_kind(self.p)

    @property
    def pi(self) -> G:
        s = self.splitting
        if s == "split":
            return ga.split_prime(self.p)
        if s == "ramified":
            return (1, 1)
        return (self.p, 0)

    @property
    def pibar(self) -> G:
        return ga.gconj(self.pi)


def _as_g(x) -> G:
    if isinstance(x, tuple):
        return (int(x[0]), int(x[1]))
    return (int(x), 0)


J1: Data = (((0, 0), (-1, 0)), ((1, 0), (0, 0)))
J2: Data = tuple(
    tuple((1, 0) if (i, j) in ((2, 0), (3, 1)) else (-1, 0) if (i, j) in ((0, 2), (1, 3)) else (0, 0)
          for j in range(4))
    for i in range(4)
)


def _mat_mul(a: Data, b: Data) -> Data:
    n = len(a)
    bt = tuple(zip(*b))
    out = []
    for row in a:
        orow = []
        for col in bt:
            re = im = 0
            for (xr, xi), (yr, yi) in zip(row, col):
                re += xr * yr - xi * yi
                im += xr * yi + xi * yr
            orow.append((re, im))
        out.append(tuple(orow))
    return tuple(out)


def _conj_t(a: Data) -> Data:
    return tuple(tuple((a[j][i][0], -a[j][i][1]) for j in range(len(a))) for i in range(len(a)))


def _det(a: Data) -> G:
    n = len(a)
    if n == 1:
        return a[0][0]
    if n == 2:
        return ga.gsub(ga.gmul(a[0][0], a[1][1]), ga.gmul(a[0][1], a[1][0]))
    total = ZERO
    for j in range(n):
        if a[0][j] == ZERO:
            continue
        minor = tuple(tuple(row[k] for k in range(n) if k != j) for row in a[1:])
        term = ga.gmul(a[0][j], _det(minor))
        total = ga.gadd(total, term) if j % 2 == 0 else ga.gsub(total, term)
    return total


def _adjugate(a: Data) -> Data:
    n = len(a)
    if n == 2:
        return ((a[1][1], ga.gneg(a[0][1])), (ga.gneg(a[1][0]), a[0][0]))
    cof = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = tuple(tuple(a[r][c] for c in range(n) if c != j) for r in range(n) if r != i)
            d = _det(minor)
            cof[i][j] = d if (i + j) % 2 == 0 else ga.gneg(d)
    # adjugate = transpose of cofactor matrix
    return tuple(tuple(cof[j][i] for j in range(n)) for i in range(n))


def _all_div_p(data: Data, p: int) -> bool:
    return all(e[0] % p == 0 and e[1] % p == 0 for row in data for e in row)


class PLocalMatrix:
    """Immutable matrix p^(-dexp)*data over Z[i], tied to a GroupContext."""

    __slots__ = ("context", "data", "dexp", "_hash")

    def __init__(self, context: GroupContext, rows, dexp: int = 0):
        data = tuple(tuple(_as_g(x) for x in row) for row in rows)
        n = context.n
        if len(data) != n or any(len(r) != n for r in data):
            raise ValueError(f"expected {n}x{n} matrix")
        if dexp < 0:
            data = tuple(tuple(ga.gscale(e, context.p ** (-dexp)) for e in row) for row in data)
            dexp = 0
        p = context.p
        while dexp > 0 and _all_div_p(data, p):
            data = tuple(tuple((e[0] // p, e[1] // p) for e in row) for row in data)
            dexp -= 1
        if context.kind in RATIONAL_KINDS and any(e[1] for row in data for e in row):
            raise ValueError("rational context requires real entries")
        self.context = context
        self.data = data
        self.dexp = dexp
        self._hash = hash((context, data, dexp))

    # -- basics ---------------------------------------------------------
    def __eq__(self, other):
        return (isinstance(other, PLocalMatrix) and self.context == other.context
                and self.dexp == other.dexp and self.data == other.data)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        scale = f"p^-{self.dexp} * " if self.dexp else ""
        return f"<{self.context.kind} {scale}{self.data}>"

    @property
    def n(self) -> int:
        return len(self.data)

    @property
    def is_integral(self) -> bool:
        return self.dexp == 0

    def entry(self, i: int, j: int) -> G:
        """Integer-layer entry (the value times p^dexp)."""
        return self.data[i][j]

    def __mul__(self, other: "PLocalMatrix") -> "PLocalMatrix":
        if self.context != other.context:
            raise ValueError("context mismatch")
        return PLocalMatrix(self.context, _mat_mul(self.data, other.data),
                            self.dexp + other.dexp)

    def scale_p(self, k: int) -> "PLocalMatrix":
        """Multiply the value by p^k."""
        return PLocalMatrix(self.context, self.data, self.dexp - k)

    def det(self) -> tuple[G, int]:
        """Determinant of the value as (gaussian, dexp'): det = p^-dexp' * g."""
        return _det(self.data), self.n * self.dexp

    def inverse(self) -> "PLocalMatrix":
        d = _det(self.data)
        nd = ga.gnorm(d)
        if nd == 0:
            raise ZeroDivisionError("singular matrix")
        m = _p_power_exponent(nd, self.context.p)
        # value^-1 = p^(dexp) * adj(data) * conj(d) / p^m
        num = tuple(tuple(ga.gmul(e, ga.gconj(d)) for e in row) for row in _adjugate(self.data))
        return PLocalMatrix(self.context, num, m - self.dexp)

    def conj_transpose(self) -> "PLocalMatrix":
        return PLocalMatrix(self.context, _conj_t(self.data), self.dexp)


def _p_power_exponent(n: int, p: int) -> int:
    """v_p(n), insisting n = p^v exactly (group-theoretic determinants only)."""
    if n <= 0:
        raise ValueError("expected a positive p-power")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    if n != 1:
        raise ValueError(f"not a p-power (residual factor {n})")
    return v


def mat(context: GroupContext, rows, dexp: int = 0) -> PLocalMatrix:
    return PLocalMatrix(context, rows, dexp)


def identity(context: GroupContext) -> PLocalMatrix:
    n = context.n
    return PLocalMatrix(context, [[1 if i == j else 0 for j in range(n)] for i in range(n)])


def diag(context: GroupContext, entries) -> PLocalMatrix:
    n = context.n
    es = [_as_g(e) for e in entries]
    if len(es) != n:
        raise ValueError("diagonal length mismatch")
    return PLocalMatrix(context, [[es[i] if i == j else 0 for j in range(n)] for i in range(n)])


def heisenberg(context: GroupContext, l, q, r) -> PLocalMatrix:
    """Unipotent element with parameters (l, q, r); needs Im(r) = Im(conj(l)q)."""
    l, q, r = _as_g(l), _as_g(q), _as_g(r)
    if r[1] != ga.gmul(ga.gconj(l), q)[1]:
        raise ValueError("imaginary part of r must equal Im(conj(l)*q)")
    lbar, qbar = ga.gconj(l), ga.gconj(q)
    return PLocalMatrix(context, [
        [(1, 0), ZERO, ZERO, l],
        [ga.gneg(qbar), (1, 0), lbar, r],
        [ZERO, ZERO, (1, 0), q],
        [ZERO, ZERO, ZERO, (1, 0)],
    ])


def z_unit(context: GroupContext, u) -> PLocalMatrix:
    """diag(1, u, 1, u) for a unit u — rescales the two corner entries."""
    u = _as_g(u)
    if not ga.is_unit(u):
        raise ValueError("u must be a unit")
    return diag(context, [(1, 0), u, (1, 0), u])


def embed_tau(context: GroupContext, t: Data | PLocalMatrix) -> PLocalMatrix:
    """Embed a 2x2 matrix into coordinates {1,3} of the 4x4 group."""
    if isinstance(t, PLocalMatrix):
        if t.dexp:
            raise ValueError("embed requires an integral 2x2 matrix")
        t = t.data
    (a, b), (c, d) = t
    return PLocalMatrix(context, [
        [a, ZERO, b, ZERO],
        [ZERO, (1, 0), ZERO, ZERO],
        [c, ZERO, d, ZERO],
        [ZERO, ZERO, ZERO, (1, 0)],
    ])


def tau_block(g: PLocalMatrix) -> Data:
    d = g.data
    return ((d[0][0], d[0][2]), (d[2][0], d[2][2]))


def is_parabolic_shape(g: PLocalMatrix) -> bool:
    r = g.data[3]
    return r[0] == ZERO and r[1] == ZERO and r[2] == ZERO


# ---------------------------------------------------------------------------
# similitude / membership
# ---------------------------------------------------------------------------

def _j_of(n: int) -> Data:
    return J1 if n == 2 else J2


def similitude_exponent(g: PLocalMatrix) -> int:
    """delta with J[g] = p^delta J; raises if g is not a similitude."""
    J = _j_of(g.n)
    m = _mat_mul(_conj_t(g.data), _mat_mul(J, g.data))
    mu = m[g.n // 2][0]  # position of the +1 block of J
    if mu[1] != 0 or mu[0] <= 0:
        raise ValueError("not a (positive) similitude")
    for i in range(g.n):
        for j in range(g.n):
            if m[i][j] != ga.gscale(J[i][j], mu[0]):
                raise ValueError("similitude relation fails")
    return _p_power_exponent(mu[0], g.context.p) - 2 * g.dexp


def is_unitary_similitude(g: PLocalMatrix) -> bool:
    try:
        similitude_exponent(g)
        return True
    except ValueError:
        return False


def is_in_gamma(g: PLocalMatrix) -> bool:
    """Membership in the context's distinguished subgroup."""
    kind = g.context.kind
    p = g.context.p
    if kind in RATIONAL_KINDS:
        if not g.is_integral:
            return False
        d = _det(g.data)
        if d == ZERO:
            return False
        if d[0] % p == 0:
            return False
        if kind == "P121" and not _p121_shape(g.data):
            return False
        return True
    # unitary kinds: integral with similitude exponent 0 (so inverse integral)
    if not g.is_integral:
        return False
    try:
        delta = similitude_exponent(g)
    except ValueError:
        return False
    if delta != 0:
        return False
    if kind == "KLINGEN11" and not is_parabolic_shape(g):
        return False
    return True


def _p121_shape(data: Data) -> bool:
    zero_at = ((1, 0), (2, 0), (3, 0), (3, 1), (3, 2))
    return all(data[i][j] == ZERO for i, j in zero_at)


def left_equivalent(g: PLocalMatrix, h: PLocalMatrix) -> bool:
    """Right-coset equality: Gamma*g == Gamma*h."""
    if g.context != h.context:
        raise ValueError("context mismatch")
    return is_in_gamma(g * h.inverse())


# ---------------------------------------------------------------------------
# canonical forms
# ---------------------------------------------------------------------------

def hnf_int(rows: list[list[int]]) -> list[list[int]]:
    """Row-style Hermite form of a nonsingular integer matrix.

    Upper triangular, positive pivots, entries above each pivot reduced into
    [0, pivot).  Left multiplication by GL_n(Z) only.
    """
    a = [list(r) for r in rows]
    n = len(a)
    for j in range(n):
        piv = None
        for i in range(j, n):
            if a[i][j]:
                piv = i
                break
        if piv is None:
            raise ValueError("singular matrix")
        a[j], a[piv] = a[piv], a[j]
        for i in range(j + 1, n):
            while a[i][j]:
                q = a[j][j] // a[i][j]
                a[j] = [x - q * y for x, y in zip(a[j], a[i])]
                a[j], a[i] = a[i], a[j]
        if a[j][j] < 0:
            a[j] = [-x for x in a[j]]
        for i in range(j):
            q = a[i][j] // a[j][j]
            if q:
                a[i] = [x - q * y for x, y in zip(a[i], a[j])]
    return a


def _hnf_with_transform(rows: list[list[int]]) -> tuple[list[list[int]], list[list[int]]]:
    """(H, U) with U unimodular, U*rows = H in Hermite form."""
    n = len(rows)
    aug = [list(r) + [1 if i == j else 0 for j in range(n)] for i, r in enumerate(rows)]
    a = [r[:n] for r in aug]
    u = [r[n:] for r in aug]
    for j in range(n):
        piv = None
        for i in range(j, n):
            if a[i][j]:
                piv = i
                break
        if piv is None:
            raise ValueError("singular matrix")
        a[j], a[piv] = a[piv], a[j]
        u[j], u[piv] = u[piv], u[j]
        for i in range(j + 1, n):
            while a[i][j]:
                q = a[j][j] // a[i][j]
                a[j] = [x - q * y for x, y in zip(a[j], a[i])]
                u[j] = [x - q * y for x, y in zip(u[j], u[i])]
                a[j], a[i] = a[i], a[j]
                u[j], u[i] = u[i], u[j]
        if a[j][j] < 0:
            a[j] = [-x for x in a[j]]
            u[j] = [-x for x in u[j]]
        for i in range(j):
            q = a[i][j] // a[j][j]
            if q:
                a[i] = [x - q * y for x, y in zip(a[i], a[j])]
                u[i] = [x - q * y for x, y in zip(u[i], u[j])]
    return a, u


def canonicalize(g: PLocalMatrix) -> PLocalMatrix:
    kind = g.context.kind
    if kind == "GL4" or kind == "GL2":
        ints = [[e[0] for e in row] for row in g.data]
        return PLocalMatrix(g.context, hnf_int(ints), g.dexp)
    if kind == "P121":
        return _canonicalize_p121(g)
    if kind in ("U2", "KLINGEN11"):
        if not is_parabolic_shape(g):
            raise ValueError("canonical form defined on the parabolic support only")
        return _canonicalize_klingen(g)
    if kind == "U1":
        t, _ = _canonical_tau(g.data)
        return PLocalMatrix(g.context, t, g.dexp)
    raise AssertionError(kind)


def _canonicalize_p121(g: PLocalMatrix) -> PLocalMatrix:
    if not _p121_shape(g.data):
        raise ValueError("matrix outside the 1-2-1 parabolic support")
    p = g.context.p
    a = g.data[0][0][0]
    b = g.data[3][3][0]
    _p_power_exponent(abs(a), p)
    _p_power_exponent(abs(b), p)
    rows = [[e[0] for e in row] for row in g.data]
    if a < 0:
        rows[0] = [-x for x in rows[0]]
    if b < 0:
        rows[3] = [-x for x in rows[3]]
    b = abs(b)
    A = [rows[1][1:3], rows[2][1:3]]
    C = [rows[1][3], rows[2][3]]
    H, U = _hnf_with_transform(A)
    C = [U[0][0] * C[0] + U[0][1] * C[1], U[1][0] * C[0] + U[1][1] * C[1]]
    B = rows[0][1:3]
    D = rows[0][3]
    # reduce B modulo the row lattice of the (triangular) middle block
    k1 = B[0] // H[0][0]
    B = [B[0] - k1 * H[0][0], B[1] - k1 * H[0][1]]
    D -= k1 * C[0]
    k2 = B[1] // H[1][1]
    B[1] -= k2 * H[1][1]
    D -= k2 * C[1]
    C = [C[0] % b, C[1] % b]
    D %= b
    out = [
        [abs(a), B[0], B[1], D],
        [0, H[0][0], H[0][1], C[0]],
        [0, H[1][0], H[1][1], C[1]],
        [0, 0, 0, b],
    ]
    return PLocalMatrix(g.context, out, g.dexp)


def _canonical_tau(t: Data) -> tuple[Data, Data]:
    """Canonical representative of U1(O)*t; returns (canonical, transform)."""
    (a, b2), (c, d2) = t
    gamma: Data = (((1, 0), ZERO), (ZERO, (1, 0)))

    def apply(m: Data, cur: Data, tr: Data) -> tuple[Data, Data]:
        return _mat_mul(m, cur), _mat_mul(m, tr)

    cur = t
    if cur[1][0] != ZERO:
        if cur[0][0] == ZERO:
            sw: Data = ((ZERO, (-1, 0)), ((1, 0), ZERO))
            cur, gamma = apply(sw, cur, gamma)
        else:
            ratio = ga.as_fraction_ratio(cur[1][0], cur[0][0])
            m, n = ratio.numerator, ratio.denominator
            f, e = _bezout_pair(n, m)
            el: Data = (((f, 0), (e, 0)), ((-m, 0), (n, 0)))
            cur, gamma = apply(el, cur, gamma)
            assert cur[1][0] == ZERO
    t1, t4 = cur[0][0], cur[1][1]
    _, u = ga.canonical_associate(t1)
    if u != ONE:
        um: Data = ((u, ZERO), (ZERO, u))
        cur, gamma = apply(um, cur, gamma)
    frac = ga.as_fraction_ratio(cur[0][1], cur[1][1])
    m = frac.numerator // frac.denominator
    if m:
        sh: Data = (((1, 0), (-m, 0)), (ZERO, (1, 0)))
        cur, gamma = apply(sh, cur, gamma)
    return cur, gamma


def _bezout_pair(n: int, m: int) -> tuple[int, int]:
    """(f, e) with f*n + e*m = 1 for coprime (n, m)."""
    old_r, r = n, m
    old_s, s = 1, 0
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
    if old_r == -1:
        old_r, old_s = 1, -old_s
    assert old_r == 1
    e = (1 - n * old_s) // m if m else 0
    return old_s, e


def _canonicalize_klingen(g: PLocalMatrix) -> PLocalMatrix:
    ctx = g.context
    work = PLocalMatrix(ctx, g.data)  # integral layer; dexp reattached at the end
    # 1. canonicalize the tau block
    _, gamma2 = _canonical_tau(tau_block(work))
    work = embed_tau(ctx, gamma2) * work
    # 2. corner unit
    b = work.data[3][3]
    if b == ZERO:
        raise ValueError("degenerate parabolic matrix")
    bc, u = ga.canonical_associate(b)
    if u != ONE:
        work = z_unit(ctx, u) * work
    # 3./4. translate the (1,4) and (3,4) entries modulo b
    rs = ga.ResidueSystem(bc)
    l = ga.gdiv_exact(ga.gsub(rs.reduce(work.data[0][3]), work.data[0][3]), bc)
    if l != ZERO:
        work = heisenberg(ctx, l, ZERO, ZERO) * work
    q = ga.gdiv_exact(ga.gsub(rs.reduce(work.data[2][3]), work.data[2][3]), bc)
    if q != ZERO:
        work = heisenberg(ctx, ZERO, q, ZERO) * work
    # 5. translate the real part of the (2,4) ratio modulo 1
    t = ga.gmul(work.data[1][3], ga.gconj(bc))
    r = -floor(Fraction(t[0], ga.gnorm(bc)))
    if r:
        work = heisenberg(ctx, ZERO, ZERO, (r, 0)) * work
    return PLocalMatrix(ctx, work.data, g.dexp)


# ---------------------------------------------------------------------------
# extractors
# ---------------------------------------------------------------------------

def corner_entries(g: PLocalMatrix) -> tuple[G, G]:
    """(a, b) = ((2,2), (4,4)) integer-layer entries of a parabolic matrix."""
    if not is_parabolic_shape(g):
        raise ValueError("non-parabolic shape")
    return g.data[1][1], g.data[3][3]


def signature_ratio(g: PLocalMatrix) -> Fraction:
    """b/a for a parabolic similitude matrix; always a positive rational."""
    a, b = corner_entries(g)
    s = ga.as_fraction_ratio(b, a)
    if s <= 0:
        raise ValueError("signature must be positive")
    return s
