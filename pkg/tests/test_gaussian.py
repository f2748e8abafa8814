import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from localhecke import gaussian as ga

ints = st.integers(min_value=-60, max_value=60)
gints = st.tuples(ints, ints)
nonzero = gints.filter(lambda z: z != (0, 0))


@given(gints, gints, gints)
def test_commutative_ring(a, b, c):
    assert ga.gmul(a, b) == ga.gmul(b, a)
    assert ga.gmul(a, ga.gadd(b, c)) == ga.gadd(ga.gmul(a, b), ga.gmul(a, c))
    assert ga.gmul(ga.gmul(a, b), c) == ga.gmul(a, ga.gmul(b, c))


@given(gints, gints)
def test_norm_multiplicative(a, b):
    assert ga.gnorm(ga.gmul(a, b)) == ga.gnorm(a) * ga.gnorm(b)


@given(nonzero)
def test_canonical_associate(z):
    w, u = ga.canonical_associate(z)
    assert ga.gmul(u, z) == w
    assert w[0] > 0 and w[1] >= 0
    # idempotent, and constant on the associate class
    assert ga.canonical_associate(w)[0] == w
    for v in ga.UNITS:
        assert ga.canonical_associate(ga.gmul(v, z))[0] == w


@given(gints, nonzero)
def test_division_with_remainder(a, b):
    q, r = ga.gdivmod(a, b)
    assert ga.gadd(ga.gmul(q, b), r) == a
    assert 2 * ga.gnorm(r) <= ga.gnorm(b)


@given(gints, nonzero)
def test_exact_division_roundtrip(a, d):
    prod = ga.gmul(a, d)
    assert ga.gdivides(d, prod)
    assert ga.gdiv_exact(prod, d) == a


def test_gcd_examples():
    assert ga.ggcd((2, 0), (1, 1)) == (1, 1)  # 1+i divides 2
    assert ga.ggcd((5, 0), (2, 1)) == (2, 1)
    assert ga.ggcd((3, 0), (7, 0)) == (1, 0)
    assert ga.ggcd((0, 0), (0, -3)) == (3, 0)


@pytest.mark.parametrize("p,expected", [(5, (1, 2)), (13, (3, 2)), (17, (1, 4)),
                                        (29, (5, 2)), (37, (1, 6)), (41, (5, 4)),
                                        (53, (7, 2)), (61, (5, 6))])
def test_split_prime_canonical_form(p, expected):
    pi = ga.split_prime(p)
    assert pi == expected
    assert pi[0] % 2 == 1 and pi[1] % 2 == 0
    assert ga.gnorm(pi) == p


def test_split_prime_rejects_inert_and_ramified():
    for p in (2, 3, 7, 11):
        with pytest.raises(ValueError):
            ga.split_prime(p)


def test_prime_kind():
    assert ga.prime_kind(2) == "ramified"
    assert ga.prime_kind(13) == "split"
    assert ga.prime_kind(19) == "inert"


def test_valuations():
    pi = ga.split_prime(5)
    pibar = ga.gconj(pi)
    z = ga.gmul(ga.gpow(pi, 3), ga.gpow(pibar, 1))
    assert ga.v_gauss(z, pi) == 3
    assert ga.v_gauss(z, pibar) == 1
    assert ga.v_gauss((9, 0), (3, 0)) == 2
    assert ga.v_gauss((8, 8), (1, 1)) == 7  # v_{1+i} = v_2 of the norm
    assert ga.v_int(ga.gnorm((8, 8)), 2) == 7
    with pytest.raises(ValueError):
        ga.v_gauss((0, 0), pi)


def test_ratio_rationality():
    assert ga.as_fraction_ratio((6, 3), (2, 1)) == 3
    assert ga.as_fraction_ratio((-5, 0), (2, 0)) == Fraction(-5, 2)
    with pytest.raises(ValueError):
        ga.as_fraction_ratio((1, 1), (2, 1))


@pytest.mark.parametrize("m", [(3, 0), (1, 1), (2, 2), (1, 2), (5, 0),
                               (3, 4), (-2, 6), (0, 7), (4, 6)])
def test_residue_system_is_transversal(m):
    rs = ga.ResidueSystem(m)
    assert rs.count == ga.gnorm(m)
    reps = list(rs.representatives())
    assert len(reps) == rs.count
    # reduce is the identity on representatives
    for z in reps:
        assert rs.reduce(z) == z
    # reduce is constant on cosets and hits the representative set
    rng = random.Random(0)
    for _ in range(50):
        z = (rng.randint(-40, 40), rng.randint(-40, 40))
        w = (rng.randint(-5, 5), rng.randint(-5, 5))
        r = rs.reduce(z)
        assert r in set(reps)
        assert rs.reduce(ga.gadd(z, ga.gmul(w, m))) == r
        assert ga.gdivides(m, ga.gsub(z, r))


def test_residue_system_pairwise_inequivalent():
    # no two representatives differ by a multiple of m
    for m in [(1, 2), (2, 2), (3, 0)]:
        rs = ga.ResidueSystem(m)
        reps = list(rs.representatives())
        for i, a in enumerate(reps):
            for b in reps[i + 1:]:
                assert not ga.gdivides(m, ga.gsub(a, b))
