"""Spherical images of local Hecke operators.

Every right coset in the block-triangular pairs carries a torus valuation
profile: the diagonal exponents of any triangular form of a representative.
Mapping a coset to a monomial in those exponents and summing over a
decomposition takes double cosets into a Laurent ring; on the unitary side
the monomial also records the similitude exponent.  Multiplicativity and
Weyl-orbit invariance of these images are *checked* by the test suite (the
identity suites use them as an independent route), never assumed.

The prime stays numeric here: counts such as box sizes are folded into the
rational coefficients, and the alphabet's own ``p`` slot is left untouched.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

from . import gaussian as ga
from . import hecke as hk
from . import pmatrix as pm
from . import ring
from .gaussian import ZERO

UNITARY = ring.satake_unitary_alphabet()
RATIONAL = ring.satake_gl4_alphabet()

_INF = 10 ** 9


def _v(z, place) -> int:
    return _INF if z == ZERO else ga.v_gauss(z, place)


# ---------------------------------------------------------------------------
# valuation profiles
# ---------------------------------------------------------------------------


def column_profile(g: pm.PLocalMatrix, place=None) -> tuple[int, ...]:
    """Diagonal exponents of a triangular form, read off leading columns.

    The minimum valuation over the k x k minors of the first k columns is
    unchanged by integral row operations, so the successive differences
    recover the diagonal of the (left-equivalent) triangular form without
    computing one.  Works for any nonsingular matrix in any context.
    """
    ctx = g.context
    if place is None:
        place = hk._places(ctx)[0]
    data = g.data
    n = len(data)
    cum = [0]
    for k in range(1, n):
        best = _INF
        for rows in combinations(range(n), k):
            sub = tuple(tuple(data[i][j] for j in range(k)) for i in rows)
            d = pm._det(sub)
            if d == ZERO:
                continue
            v = ga.v_gauss(d, place)
            if v < best:
                best = v
                if best == cum[-1]:
                    break
        if best == _INF:
            raise ValueError("rank-deficient leading columns")
        cum.append(best)
    cum.append(ga.v_gauss(pm._det(data), place))
    return tuple(cum[i + 1] - cum[i] - g.dexp for i in range(n))


def unitary_profile(g: pm.PLocalMatrix) -> tuple[int, int, int, int]:
    """Torus exponents of a coset in the 4x4 unitary parabolic pair.

    The pair's block shape is not upper-triangular in these coordinates
    (the unipotent radical has a below-diagonal slot), so plain column
    minors read the wrong diagonal on some cosets.  The block structure
    itself is what is invariant: the corner entry gives the last exponent,
    the first column of the outer 2x2 block gives the third one through
    the similitude exponent, and the outer block's determinant valuation
    must equal that exponent (checked, as it certifies the shape).
    """
    ctx = g.context
    if ctx.kind not in pm.UNITARY_KINDS:
        raise ValueError("unitary_profile expects a unitary-context matrix")
    d = g.data
    if not (d[3][0] == ZERO and d[3][1] == ZERO and d[3][2] == ZERO
            and d[0][1] == ZERO and d[2][1] == ZERO):
        raise ValueError("representative is not in the parabolic block shape")
    place = hk._places(ctx)[0]
    e = g.dexp
    delta = pm.similitude_exponent(g)
    m2 = _v(d[3][3], place) - e
    k1 = min(_v(d[0][0], place), _v(d[2][0], place)) - e
    tdet = ga.gsub(ga.gmul(d[0][0], d[2][2]), ga.gmul(d[0][2], d[2][0]))
    if _v(tdet, place) - 2 * e != delta:
        raise ArithmeticError("outer-block determinant does not match the similitude")
    return (k1, delta - m2, delta - k1, m2)


# ---------------------------------------------------------------------------
# unitary side: images in the x0/x1/x2 ring
# ---------------------------------------------------------------------------


def _unitary_monomial(p: int, delta: int, m1: int, m2: int, count=1) -> ring.SymbolicScalar:
    # residue field size q = p^2 at an inert prime; the j-th slot ships q^-j
    coeff = Fraction(count, p ** (2 * m1 + 4 * m2))
    return ring.SymbolicScalar.monomial(UNITARY, coeff, {"x0": delta, "x1": m1, "x2": m2})


def spherical_unitary(t: hk.OpTemplate) -> ring.SymbolicScalar:
    """Image of one class: sum of profile monomials over its right cosets.

    For a triangular-pair template the profile slots that the image reads
    (the outer-block and corner exponents) do not depend on the unipotent
    box coordinates, only on the 2x2 transversal factor, so the box
    contributes a bare count; the enumeration cross-check at small primes
    lives in the test suite.
    """
    ctx = t.ctx
    if ctx.kind == "U2":
        total = ring.SymbolicScalar.const(UNITARY, 0)
        for piece in hk.embedding_pieces(t):
            total = total + spherical_unitary(piece)
        return total
    if ctx.kind != "KLINGEN11" or ctx.splitting != "inert":
        raise ValueError("spherical_unitary expects an inert unitary template")
    p = ctx.p
    if t.kind == "ctwist":
        return _unitary_monomial(p, 2, 1, 1, p - 1)
    a = t.aexp
    place = hk._places(ctx)[0]
    box = (len(hk._residues(ctx, a[3] - a[0], a[3] - a[0]))
           * len(hk._residues(ctx, a[3] - a[2], a[3] - a[2]))
           * p ** max(a[3] - a[1], 0))
    c2 = hk.tau_context(ctx)
    taus = hk.decompose2(c2, a[0], a[2])
    M = t.basepoint()
    d2 = pm.mat(c2, ((M.data[0][0], ZERO), (ZERO, M.data[2][2])))
    total = ring.SymbolicScalar.const(UNITARY, 0)
    count = 0
    for u in hk._tau_transversal(c2, d2, len(taus)):
        if _v(pm._det(u.data), place) != 0:
            raise ArithmeticError("transversal factor is not unimodular")
        k = min(a[0] + _v(u.data[0][0], place), a[2] + _v(u.data[1][0], place))
        total = total + _unitary_monomial(p, t.delta, a[0] + a[2] - k, a[3], box)
        count += box
    if count != hk.template_degree(t):
        raise ArithmeticError("image lost cosets against the degree formula")
    return total


def spherical_unitary_element(el: hk.HeckeElement) -> ring.SymbolicScalar:
    """Linear extension of the image to formal coset sums (product outputs)."""
    if el.context.kind not in pm.UNITARY_KINDS:
        raise ValueError("unitary element expected")
    total = ring.SymbolicScalar.const(UNITARY, 0)
    p = el.context.p
    for g, c in el.terms.items():
        _, _, m1, m2 = unitary_profile(g)
        delta = pm.similitude_exponent(g)
        coeff = c if isinstance(c, Fraction) else Fraction(c)
        total = total + _unitary_monomial(p, delta, m1, m2, coeff)
    return total


# ---------------------------------------------------------------------------
# rational side: images in the x1..x4 ring
# ---------------------------------------------------------------------------


def _rational_monomial(p: int, d: tuple[int, ...], count=1) -> ring.SymbolicScalar:
    coeff = Fraction(count) / Fraction(p) ** sum((j + 1) * d[j] for j in range(4))
    return ring.SymbolicScalar.monomial(
        RATIONAL, coeff, {f"x{j + 1}": d[j] for j in range(4)})


def _rational_profile(g: pm.PLocalMatrix) -> tuple[int, ...]:
    data = g.data
    place = hk._places(g.context)[0]
    if all(data[i][j] == ZERO for i in range(1, 4) for j in range(i)):
        return tuple(_v(data[i][i], place) - g.dexp for i in range(4))
    return column_profile(g, place)


def spherical_rational(t: hk.OpTemplate) -> ring.SymbolicScalar:
    """Image of a 4x4 rational-side class, from its enumerated cosets."""
    ctx = t.ctx
    if ctx.kind == "GL4":
        reps = []
        for piece in hk.embedding_pieces(t):
            reps.extend(hk.decompose(piece))
    elif ctx.kind == "P121":
        reps = hk.decompose(t)
    else:
        raise ValueError("spherical_rational expects a rational-side template")
    total = ring.SymbolicScalar.const(RATIONAL, 0)
    for g in reps:
        total = total + _rational_monomial(ctx.p, _rational_profile(g))
    return total


def spherical_rational_element(el: hk.HeckeElement) -> ring.SymbolicScalar:
    if el.context.kind not in pm.RATIONAL_KINDS:
        raise ValueError("rational-side element expected")
    total = ring.SymbolicScalar.const(RATIONAL, 0)
    for g, c in el.terms.items():
        coeff = c if isinstance(c, Fraction) else Fraction(c)
        total = total + _rational_monomial(el.context.p, _rational_profile(g), coeff)
    return total


# ---------------------------------------------------------------------------
# invariance checks
# ---------------------------------------------------------------------------


def weyl_swap(expr: ring.SymbolicScalar, j: int, p: int) -> ring.SymbolicScalar:
    """Generator of the Weyl action on the unitary image ring (inert prime).

    Sends x0 -> x0*xj/p and xj -> p^2/xj, fixing the other slot; images of
    genuine classes must be fixed by both generators.
    """
    if j not in (1, 2):
        raise ValueError("the two reflection generators are j=1 and j=2")
    out: dict[tuple[int, ...], Fraction] = {}
    for exps, coeff in expr.terms.items():
        kp, a, b1, b2 = exps
        if j == 1:
            new = (kp, a, a - b1, b2)
            factor = Fraction(p) ** (2 * b1 - a)
        else:
            new = (kp, a, b1, a - b2)
            factor = Fraction(p) ** (2 * b2 - a)
        out[new] = out.get(new, Fraction(0)) + coeff * factor
    return ring.SymbolicScalar(UNITARY, out)


def is_weyl_invariant(expr: ring.SymbolicScalar, p: int) -> bool:
    return weyl_swap(expr, 1, p) == expr and weyl_swap(expr, 2, p) == expr


def is_symmetric_rational(expr: ring.SymbolicScalar) -> bool:
    """Symmetry of a rational-side image under permuting the four x-slots."""
    idx = [RATIONAL.names.index(f"x{j}") for j in range(1, 5)]
    for a in range(3):
        i1, i2 = idx[a], idx[a + 1]
        out: dict[tuple[int, ...], Fraction] = {}
        for exps, coeff in expr.terms.items():
            e = list(exps)
            e[i1], e[i2] = e[i2], e[i1]
            out[tuple(e)] = out.get(tuple(e), Fraction(0)) + coeff
        if ring.SymbolicScalar(RATIONAL, out) != expr:
            return False
    return True
