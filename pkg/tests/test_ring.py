"""Exact scalar ring: reduction, equality, series, and the numeric oracle."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from localhecke.ring import (
    RationalFunction,
    SymbolAlphabet,
    SymbolicScalar,
    TruncatedSeries,
    eigen_alphabet,
    eigen_expressions,
    random_assignment,
    random_substitute,
    rf_equal,
    satake_gl4_alphabet,
    satake_unitary_alphabet,
)

A = eigen_alphabet(split=False)
AS = eigen_alphabet(split=True)


def S(name, exp=1, alphabet=A):
    return SymbolicScalar.symbol(alphabet, name, exp)


def mono(coeff, exps, alphabet=A):
    return SymbolicScalar.monomial(alphabet, coeff, exps)


def test_declared_relation_is_applied():
    assert S("alpha1") * S("alpha2") == S("N")
    assert S("P1") * S("P2") == S("p") * S("N")


def test_sign_in_quadratic_character_relation():
    # inert: alpha_f*beta_f = -N/p ; split: +N/p
    assert S("alpha_f") * S("beta_f") == mono(-1, {"N": 1, "p": -1})
    s = SymbolicScalar.symbol(AS, "alpha_f") * SymbolicScalar.symbol(AS, "beta_f")
    assert s == SymbolicScalar.monomial(AS, 1, {"N": 1, "p": -1})


def test_no_relation_applies():
    a1, a2 = S("alpha1"), S("alpha2")
    assert (a1 + a2) * (a1 - a2) == a1 * a1 - a2 * a2


def test_laurent_representatives_agree():
    # alpha2^-1 and alpha1/N are the same ring element; so are P2^-2 and P1^2/(pN)^2
    assert S("alpha2", -1) == mono(1, {"alpha1": 1, "N": -1})
    assert mono(1, {"alpha1": 2, "alpha2": -1}) == mono(1, {"alpha1": 3, "N": -1})
    assert S("P2", -2) == mono(1, {"P1": 2, "p": -2, "N": -2})


def test_eliminated_symbols():
    assert S("lam_pi") == mono(1, {"N": 2, "p": -2, "P1": -2})
    # P2^-2 inside the elimination target gets pair-reduced further
    assert S("lam_pibar") == mono(1, {"P1": 2, "p": -4})


def test_x1_exponent_bookkeeping():
    e = eigen_expressions(A)
    assert e["X1"] == S("alpha1") * S("p", 2) * S("N", -1) * S("X")
    # X1*X2 collapses through alpha1*alpha2 = N
    assert e["X1"] * e["X2"] == mono(1, {"p": 4, "N": -1, "X": 2})


def test_constant_arithmetic_and_power():
    two = SymbolicScalar.const(A, 2)
    x = S("X")
    assert (two + x) - x == two
    assert x**0 == SymbolicScalar.const(A, 1)
    assert x**3 * x**-3 == 1
    assert (x + 1) ** 2 == x * x + 2 * x + 1


def test_alphabet_mismatch_raises():
    with pytest.raises(ValueError):
        S("X") + SymbolicScalar.symbol(satake_unitary_alphabet(), "x0")


def test_non_monomial_inverse_raises():
    with pytest.raises(ZeroDivisionError):
        (S("X") + 1).inverse()


_exps = st.integers(min_value=-3, max_value=3)
_coeff = st.fractions(min_value=-10, max_value=10).filter(bool)


@st.composite
def scalars(draw, alphabet=A):
    n = len(alphabet.names)
    terms = {}
    for _ in range(draw(st.integers(min_value=0, max_value=4))):
        vec = tuple(draw(_exps) for _ in range(n))
        terms[vec] = draw(_coeff)
    return SymbolicScalar(alphabet, terms)


@settings(max_examples=100, deadline=None)
@given(scalars(), scalars(), scalars())
def test_ring_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a


@settings(max_examples=100, deadline=None)
@given(
    st.tuples(*[st.integers(min_value=-4, max_value=4)] * len(A.names)),
    st.randoms(use_true_random=False),
)
def test_reduction_is_order_independent(vec, rng):
    pair_order = list(range(len(A.pair_rules)))
    elim_order = list(range(len(A.elim_rules)))
    baseline = A.reduce_monomial(vec)
    for _ in range(4):
        rng.shuffle(pair_order)
        rng.shuffle(elim_order)
        assert A.reduce_monomial(vec, order=pair_order, elim_order=elim_order) == baseline


def test_reduced_forms_never_mix_pair_symbols():
    rng = random.Random(7)
    for _ in range(200):
        vec = tuple(rng.randint(-4, 4) for _ in A.names)
        _, red = A.reduce_monomial(vec)
        for i, j, _c, _r in A.pair_rules:
            assert red[i] >= 0 and red[j] >= 0
            assert red[i] == 0 or red[j] == 0
        for i, _c, _r in A.elim_rules:
            assert red[i] == 0


# ---------------------------------------------------------------------------
# rational functions
# ---------------------------------------------------------------------------

def test_rf_equal_telescoping():
    a, x = S("alpha1"), S("X")
    one = SymbolicScalar.const(A, 1)
    f = RationalFunction(one, one - a * x)
    g = RationalFunction(one + a * x, one - a * a * x * x)
    assert rf_equal(f, g)


def test_rf_equal_zeros():
    one = SymbolicScalar.const(A, 1)
    zero = SymbolicScalar(A)
    y = eigen_expressions(A)["Y"]
    assert rf_equal(RationalFunction(zero, one), RationalFunction(zero, one - y))


def test_rf_zero_denominator_rejected():
    with pytest.raises(ZeroDivisionError):
        RationalFunction(S("X"), SymbolicScalar(A))


@settings(max_examples=50, deadline=None)
@given(scalars(), scalars(), scalars().filter(bool), scalars().filter(bool))
def test_rf_equal_is_an_equivalence(n1, n2, d1, d2):
    f = RationalFunction(n1, d1)
    g = RationalFunction(n2, d2)
    h = RationalFunction(n1 * d2, d1 * d2)  # same value as f
    assert rf_equal(f, f)
    assert rf_equal(f, h) and rf_equal(h, f)
    if rf_equal(f, g):
        assert rf_equal(g, h)


def test_rf_arithmetic_matches_substitution():
    e = eigen_expressions(A)
    one = SymbolicScalar.const(A, 1)
    f = RationalFunction(S("alpha1"), one - e["Y"])
    g = RationalFunction(S("alpha2"), one + e["Y"])
    combo = f * g - f / g + (f + g)
    for seed in (3, 11):
        v = random_assignment(A, seed)
        fv = f.substitute(v)
        gv = g.substitute(v)
        assert combo.substitute(v) == fv * gv - fv / gv + (fv + gv)


# ---------------------------------------------------------------------------
# random substitution oracle
# ---------------------------------------------------------------------------

def test_substitution_respects_relations():
    rel = S("alpha1") * S("alpha2") - S("N")
    for seed in range(10):
        assert random_substitute(rel, seed) == 0
    relf = SymbolicScalar.symbol(AS, "alpha_f") * SymbolicScalar.symbol(AS, "beta_f") \
        - SymbolicScalar.monomial(AS, 1, {"N": 1, "p": -1})
    assert random_substitute(relf, 5) == 0


def test_substitution_deterministic_and_nondegenerate():
    for alphabet in (A, AS, satake_unitary_alphabet(), satake_gl4_alphabet()):
        v1 = random_assignment(alphabet, 42)
        v2 = random_assignment(alphabet, 42)
        assert v1 == v2
        assert all(x != 0 for x in v1.values())
    assert random_substitute(S("p"), 0) == random_substitute(S("p"), 0) != 0


@settings(max_examples=40, deadline=None)
@given(scalars(), scalars(), st.integers(min_value=0, max_value=1000))
def test_substitution_is_multiplicative(s1, s2, seed):
    assert random_substitute(s1 * s2, seed) == random_substitute(s1, seed) * random_substitute(s2, seed)


def _fraction_oracle_assignment(seed):
    """Independent re-derivation of the sampling schedule with bare Fractions."""
    rng = random.Random(seed)

    def nz():
        return Fraction(rng.randint(1, 40) * rng.choice((1, -1)), rng.randint(1, 17))

    v = {}
    v["p"] = Fraction(rng.randint(2, 50), rng.randint(1, 7))
    v["N"] = v["p"] ** (rng.randint(3, 9) - 1)
    v["X"] = nz()
    v["alpha1"] = nz()
    v["alpha2"] = v["N"] / v["alpha1"]
    v["P1"] = nz()
    v["P2"] = v["p"] * v["N"] / v["P1"]
    v["lam_p"] = nz()
    v["lam_t1p"] = nz()
    v["lam_pi"] = v["N"] ** 2 / (v["p"] ** 2 * v["P1"] ** 2)
    v["lam_pibar"] = v["N"] ** 2 / (v["p"] ** 2 * v["P2"] ** 2)
    v["alpha_f"] = nz()
    v["beta_f"] = -v["N"] / (v["p"] * v["alpha_f"])
    return v


def test_schedule_matches_independent_rederivation():
    for seed in range(6):
        assert random_assignment(A, seed) == _fraction_oracle_assignment(seed)


def test_quartic_numerator_identity_20_seeds():
    # Numeric pre-build oracle for the quartic-denominator cancellation: the
    # bracket numerator factors as (alpha1-alpha2)(1-Y)D(Y).  Evaluated with
    # bare Fractions, independently of the symbolic ring.
    for seed in range(20):
        v = _fraction_oracle_assignment(seed)
        p, N, X = v["p"], v["N"], v["X"]
        a1, a2, lp, lt = v["alpha1"], v["alpha2"], v["lam_p"], v["lam_t1p"]
        X1 = a1 * p**2 * X / N
        X2 = a2 * p**2 * X / N
        Y = p**2 * N * X**2
        A2 = p * lt + (p**3 + p**2 - p + 1) * N**2 / p**5

        def Q(t):
            return 1 - lp * t + A2 * t**2 - lp * N**2 / p**2 * t**3 + N**4 / p**4 * t**4

        num = ((a1 + a1**3 * N * p**4 * X**4) * (1 + Y) - a1**2 * p**4 * X**3 * lp) * Q(X2) \
            - ((a2 + a2**3 * N * p**4 * X**4) * (1 + Y) - a2**2 * p**4 * X**3 * lp) * Q(X1)
        B1 = A2 * p**2 / N**2 - 2
        B2 = p**2 / N**2 * lp**2 - 2 * A2 * p**2 / N**2 + 2
        D = 1 - B1 * Y + B2 * Y**2 - B1 * Y**3 + Y**4
        assert num == (a1 - a2) * (1 - Y) * D, f"seed {seed}"


def test_quartic_numerator_identity_symbolic():
    # Same identity, now as an exact cancellation in the reduced ring.
    e = eigen_expressions(A)
    one = SymbolicScalar.const(A, 1)
    a1, a2, lp = S("alpha1"), S("alpha2"), S("lam_p")
    p4x3 = mono(1, {"p": 4, "X": 3})
    np4x4 = mono(1, {"N": 1, "p": 4, "X": 4})
    X1, X2, Y, A2 = e["X1"], e["X2"], e["Y"], e["A2"]

    def Q(t):
        return (one - lp * t + A2 * t**2
                - lp * mono(1, {"N": 2, "p": -2}) * t**3
                + mono(1, {"N": 4, "p": -4}) * t**4)

    num = ((a1 + a1**3 * np4x4) * (one + Y) - a1**2 * p4x3 * lp) * Q(X2) \
        - ((a2 + a2**3 * np4x4) * (one + Y) - a2**2 * p4x3 * lp) * Q(X1)
    B1 = A2 * mono(1, {"p": 2, "N": -2}) - 2
    B2 = mono(1, {"p": 2, "N": -2}) * lp**2 - 2 * A2 * mono(1, {"p": 2, "N": -2}) + 2
    D = one - B1 * Y + B2 * Y**2 - B1 * Y**3 + Y**4
    assert num == (a1 - a2) * (one - Y) * D


# ---------------------------------------------------------------------------
# truncated series
# ---------------------------------------------------------------------------

def _series(coeffs, D=6):
    return TruncatedSeries.scalar_series(A, "t", coeffs, D)


def test_geometric_inverse():
    lam = S("lam_p")
    one = SymbolicScalar.const(A, 1)
    f = _series([one, -lam])
    g = _series([lam**k for k in range(7)])
    product = f * g
    assert product.coeffs[0] == one
    assert all(c.is_zero for c in product.coeffs[1:])
    assert f.invert() == g


def test_series_mul_zero():
    zero = _series([])
    f = _series([S("X"), S("alpha1"), S("p", -2)])
    assert (f * zero).is_zero


def test_series_truncation_discards_high_degrees():
    x = S("X")
    f = _series([SymbolicScalar.const(A, 1), x], D=3)
    g = f * f * f * f  # (1+x t)^4, truncated at t^3
    assert g.coeffs[3] == 4 * x**3
    assert len(g.coeffs) == 4


def test_series_mismatched_truncation_rejected():
    with pytest.raises(ValueError):
        _series([S("X")], D=3) * _series([S("X")], D=6)


def test_series_with_fraction_coefficients():
    f = TruncatedSeries("u", [Fraction(1), Fraction(2)], 4, Fraction(0), "q")
    g = f.invert()
    assert (f * g).coeffs == (Fraction(1), 0, 0, 0, 0) or (f * g).coeffs[0] == 1
    assert all(c == 0 for c in (f * g).coeffs[1:])
