from fractions import Fraction

import pytest

from localhecke import hecke as hk
from localhecke import pmatrix as pm
from localhecke import ring
from localhecke import satake as sk

S = ring.SymbolicScalar


def u(coeff, x0=0, x1=0, x2=0):
    return S.monomial(sk.UNITARY, Fraction(coeff), {"x0": x0, "x1": x1, "x2": x2})


def r(coeff, d1=0, d2=0, d3=0, d4=0):
    return S.monomial(sk.RATIONAL, Fraction(coeff),
                      {"x1": d1, "x2": d2, "x3": d3, "x4": d4})


def expected_full_images(p):
    """The three full-operator images, written out term by term."""
    c = Fraction
    t_p = (u(1, x0=1) + u(c(1, p), 1, 1, 0) + u(c(1, p), 1, 0, 1)
           + u(c(1, p * p), 1, 1, 1))
    t_1p = (u(c(1, p ** 2), 2, 1, 0) + u(c(1, p ** 2), 2, 0, 1)
            + u(c(1, p ** 4), 2, 2, 1) + u(c(1, p ** 4), 2, 1, 2)
            + u(c((p * p + 1) * (p - 1), p ** 6), 2, 1, 1))
    delta = u(c(1, p ** 6), 2, 1, 1)
    return {"hecke_p": t_p, "hecke_1p": t_1p, "center_full": delta}


# ---------------------------------------------------------------------------
# unitary side
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("p", [3, 7])
def test_full_operator_images(p):
    cat = hk.catalog(pm.GroupContext("U2", p))
    for name, want in expected_full_images(p).items():
        assert sk.spherical_unitary(cat[name]) == want, name


@pytest.mark.parametrize("p", [3, 7])
def test_full_operator_images_weyl_invariant(p):
    cat = hk.catalog(pm.GroupContext("U2", p))
    for name in ("hecke_p", "hecke_1p", "center_full"):
        assert sk.is_weyl_invariant(sk.spherical_unitary(cat[name]), p), name
    # a bare monomial is moved by both generators
    assert not sk.is_weyl_invariant(u(1, 1, 1, 0), p)


def test_template_images_match_enumeration_p3():
    """The box-collapsed image equals the coset-by-coset sum, per template."""
    p = 3
    cat = hk.catalog(pm.GroupContext("KLINGEN11", p))
    for name, t in cat.items():
        brute = S.const(sk.UNITARY, 0)
        for g in hk.decompose(t):
            prof = sk.unitary_profile(g)
            brute = brute + sk._unitary_monomial(
                p, pm.similitude_exponent(g), prof[2], prof[3])
        assert brute == sk.spherical_unitary(t), name


def test_element_route_agrees_with_template_route():
    ctx = pm.GroupContext("KLINGEN11", 3)
    cat = hk.catalog(ctx)
    el = hk.named_element(ctx, "index_raise")
    assert sk.spherical_unitary_element(el) == sk.spherical_unitary(cat["index_raise"])
    assert sk.spherical_unitary_element(hk.HeckeElement.one(ctx)) == S.const(sk.UNITARY, 1)


def test_profile_pairs_against_similitude():
    ctx = pm.GroupContext("KLINGEN11", 3)
    for t in hk.catalog(ctx).values():
        for g in hk.decompose(t):
            d1, d2, d3, d4 = sk.unitary_profile(g)
            delta = pm.similitude_exponent(g)
            assert d1 + d3 == delta and d2 + d4 == delta


def test_profile_rejects_foreign_input():
    with pytest.raises(ValueError):
        sk.unitary_profile(pm.identity(pm.GroupContext("GL4", 3)))
    bad = pm.mat(pm.GroupContext("KLINGEN11", 3),
                 [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 3]])
    with pytest.raises(ValueError):
        sk.unitary_profile(bad)  # parabolic shape but not a similitude


@pytest.mark.parametrize("p,pairs", [
    (3, [("index_lower", "index_raise"), ("index_lower", "index_fix"),
         ("index_lower2", "index_raise2"), ("center", "index_fix"),
         ("index_lower2", "index_fix"), ("center_twist", "index_lower")]),
    (7, [("index_lower", "index_raise")]),
])
def test_unitary_image_is_multiplicative(p, pairs):
    ctx = pm.GroupContext("KLINGEN11", p)
    cat = hk.catalog(ctx)
    for a, b in pairs:
        prod = hk.hecke_mul(hk.named_element(ctx, a), hk.named_element(ctx, b))
        assert (sk.spherical_unitary_element(prod)
                == sk.spherical_unitary(cat[a]) * sk.spherical_unitary(cat[b])), (a, b)


def test_full_image_requires_inert_context():
    cat = hk.catalog(pm.GroupContext("KLINGEN11", 5))
    with pytest.raises(ValueError):
        sk.spherical_unitary(cat["raise_a"])


# ---------------------------------------------------------------------------
# rational side
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("p", [3, 5])
def test_rational_closed_forms(p):
    cat = hk.catalog(pm.GroupContext("GL4", p))
    e1 = sum((S.symbol(sk.RATIONAL, f"x{j}") for j in range(1, 5)),
             S.const(sk.RATIONAL, 0))
    assert sk.spherical_rational(cat["gl_e1"]) == S.const(sk.RATIONAL, Fraction(1, p)) * e1
    assert sk.spherical_rational(cat["gl_center"]) == r(Fraction(1, p ** 10), 1, 1, 1, 1)


def test_rational_images_symmetric_p3():
    cat = hk.catalog(pm.GroupContext("GL4", 3))
    for name in ("gl_e1", "gl_e2", "gl_e3", "gl_center"):
        assert sk.is_symmetric_rational(sk.spherical_rational(cat[name])), name
    assert not sk.is_symmetric_rational(r(1, 1, 0, 0, 0))


def test_rational_image_agrees_with_direct_enumeration_p3():
    """Piece-sum route against the one-shot full-class enumeration."""
    ctx = pm.GroupContext("GL4", 3)
    cat = hk.catalog(ctx)
    for name in ("gl_e1", "gl_center"):
        direct = S.const(sk.RATIONAL, 0)
        for g in hk.decompose(cat[name]):
            direct = direct + sk._rational_monomial(3, sk._rational_profile(g))
        assert direct == sk.spherical_rational(cat[name]), name


@pytest.mark.parametrize("p", [3, 5])
def test_rational_image_is_multiplicative(p):
    ctx = pm.GroupContext("P121", p)
    cat = hk.catalog(ctx)
    pairs = [("blk_1000", "blk_0010"), ("blk_0010", "blk_0001"),
             ("blk_1111", "blk_0110"), ("blk_1000", "blk_0111")]
    for a, b in pairs:
        prod = hk.hecke_mul(hk.named_element(ctx, a), hk.named_element(ctx, b))
        assert (sk.spherical_rational_element(prod)
                == sk.spherical_rational(cat[a]) * sk.spherical_rational(cat[b])), (a, b)
