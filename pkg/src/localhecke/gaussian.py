"""Exact arithmetic in Z[i] and residue systems modulo a Gaussian integer.

Numbers are plain ``(re, im)`` integer pairs: the matrix layer multiplies a
lot of these, and tuples keep that cheap.  Everything here is elementary:
units, canonical associates, rounding division / gcd, prime selection above a
rational prime, valuations, and rectangular transversals of O/(m) used by the
coset-enumeration code.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, isqrt

G = tuple[int, int]

ZERO: G = (0, 0)
ONE: G = (1, 0)
I: G = (0, 1)
UNITS: tuple[G, ...] = ((1, 0), (0, 1), (-1, 0), (0, -1))


def gadd(a: G, b: G) -> G:
    return (a[0] + b[0], a[1] + b[1])


def gsub(a: G, b: G) -> G:
    return (a[0] - b[0], a[1] - b[1])


def gneg(a: G) -> G:
    return (-a[0], -a[1])


def gmul(a: G, b: G) -> G:
    ar, ai = a
    br, bi = b
    return (ar * br - ai * bi, ar * bi + ai * br)


def gconj(a: G) -> G:
    return (a[0], -a[1])


def gscale(a: G, k: int) -> G:
    return (a[0] * k, a[1] * k)


def gnorm(a: G) -> int:
    return a[0] * a[0] + a[1] * a[1]


def gpow(a: G, n: int) -> G:
    out = ONE
    for _ in range(n):
        out = gmul(out, a)
    return out


def is_unit(a: G) -> bool:
    return gnorm(a) == 1


def canonical_associate(z: G) -> tuple[G, G]:
    """Return ``(w, u)`` with ``w = u*z`` the associate having re > 0, im >= 0.

    Exactly one of the four associates of a nonzero z lies in that quarter
    plane (argument in [0, pi/2)).  Zero maps to itself with u = 1.
    """
    if z == ZERO:
        return ZERO, ONE
    for u in UNITS:
        w = gmul(u, z)
        if w[0] > 0 and w[1] >= 0:
            return w, u
    raise AssertionError("unreachable")


def _round_half_up(num: int, den: int) -> int:
    # den > 0; nearest integer to num/den, ties toward +inf (deterministic)
    return (2 * num + den) // (2 * den)


def gdivmod(a: G, b: G) -> tuple[G, G]:
    """Rounding division: a = q*b + r with N(r) <= N(b)/2."""
    if b == ZERO:
        raise ZeroDivisionError
    n = gnorm(b)
    t = gmul(a, gconj(b))
    q = (_round_half_up(t[0], n), _round_half_up(t[1], n))
    return q, gsub(a, gmul(q, b))


def gdivides(d: G, a: G) -> bool:
    if d == ZERO:
        return a == ZERO
    n = gnorm(d)
    t = gmul(a, gconj(d))
    return t[0] % n == 0 and t[1] % n == 0


def gdiv_exact(a: G, d: G) -> G:
    n = gnorm(d)
    t = gmul(a, gconj(d))
    if t[0] % n or t[1] % n:
        raise ValueError(f"{a} not divisible by {d}")
    return (t[0] // n, t[1] // n)


def ggcd(a: G, b: G) -> G:
    """gcd up to units, returned as the canonical associate."""
    while b != ZERO:
        _, r = gdivmod(a, b)
        a, b = b, r
    return canonical_associate(a)[0]


def content(z: G) -> int:
    return gcd(abs(z[0]), abs(z[1]))


def g_is_rational(z: G) -> bool:
    return z[1] == 0


def as_fraction_ratio(num: G, den: G) -> Fraction:
    """num/den as an exact rational; raises if the ratio is not real."""
    n = gnorm(den)
    t = gmul(num, gconj(den))
    if t[1] != 0:
        raise ValueError(f"{num}/{den} is not rational")
    return Fraction(t[0], n)


# ---------------------------------------------------------------------------
# primes and valuations
# ---------------------------------------------------------------------------

def prime_kind(p: int) -> str:
    if p == 2:
        return "ramified"
    return "split" if p % 4 == 1 else "inert"


def split_prime(p: int) -> G:
    """The canonical prime above a split p: a + bi with a odd, b even, both > 0."""
    if p % 4 != 1:
        raise ValueError(f"{p} does not split in Z[i]")
    for a in range(1, isqrt(p) + 1, 2):
        b2 = p - a * a
        b = isqrt(b2)
        if b * b == b2:
            return (a, b)  # a odd forces b even since p = 1 mod 4
    raise ValueError(f"no two-square decomposition for {p}")


def v_gauss(z: G, w: G) -> int:
    """Valuation of z != 0 at the prime w (by exact division count)."""
    if z == ZERO:
        raise ValueError("valuation of zero")
    n = gnorm(w)
    v = 0
    t = gmul(z, gconj(w))
    while t[0] % n == 0 and t[1] % n == 0:
        z = (t[0] // n, t[1] // n)
        v += 1
        t = gmul(z, gconj(w))
    return v


def v_int(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of zero")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


# ---------------------------------------------------------------------------
# residues modulo a Gaussian integer
# ---------------------------------------------------------------------------

class ResidueSystem:
    """Canonical rectangular transversal of O/(m) for m != 0.

    With g = content(m) and m = g*m' (m' primitive), the set
    {x + y*i : 0 <= x < N(m)/g, 0 <= y < g} is a transversal: g divides any
    multiple of m componentwise, and the least positive rational integer in
    (m) is N(m)/g.  ``reduce`` maps any z to its representative.
    """

    def __init__(self, m: G):
        if m == ZERO:
            raise ValueError("zero modulus")
        self.m = m
        g = content(m)
        self.g = g
        mp = (m[0] // g, m[1] // g)
        self.width = gnorm(m) // g          # x range
        self.height = g                     # y range
        # t0 with Im(m' * t0) = 1: Im((c+di)(e+fi)) = c*f + d*e
        c, d = mp
        f, e = _bezout(c, d)
        self.step = gmul(m, (e, f))         # imaginary part = g
        assert self.step[1] == g

    def reduce(self, z: G) -> G:
        x, y = z
        yr = y % self.height
        k = (y - yr) // self.height
        x -= self.step[0] * k
        return (x % self.width, yr)

    def representatives(self):
        for y in range(self.height):
            for x in range(self.width):
                yield (x, y)

    @property
    def count(self) -> int:
        return self.width * self.height


def _bezout(c: int, d: int) -> tuple[int, int]:
    """(f, e) with c*f + d*e = 1 for coprime c, d."""
    old_r, r = c, d
    old_s, s = 1, 0
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
    if old_r == -1:
        old_r, old_s = 1, -old_s
    assert old_r == 1, "inputs not coprime"
    e = (1 - c * old_s) // d if d else 0
    return old_s, e


def hensel_root(p: int, precision: int) -> int:
    """The square root of -1 in Z/p^precision matching the canonical prime.

    Returns t with t*t = -1 mod p^precision and i = t mod split_prime(p), so
    that x + y*i -> x + y*t is the residue map whose kernel is the canonical
    prime (x - y*t gives the conjugate one).  Substituting it therefore reads
    off the valuation at the canonical prime: v(z) = v_p(x + y*t) as long as
    the valuation stays below the precision.
    """
    a, b = split_prime(p)
    # i = -a/b mod (a + bi), hence t = -a * b^{-1}; lift by Newton iteration
    t = (-a * pow(b, -1, p)) % p
    mod = p
    while mod < p ** precision:
        mod = min(mod * mod, p ** precision)
        t = (t - (t * t + 1) * pow(2 * t, -1, mod)) % mod
    t %= p ** precision
    assert (t * t + 1) % p ** precision == 0
    assert (a + b * t) % p == 0  # the canonical prime maps to zero
    return t
