"""Exact scalar arithmetic.

Scalars are sparse Laurent polynomials over Q in a fixed ordered alphabet of
symbols, reduced modulo *binomial relations* of the shape

    monomial  ->  coefficient * monomial.

Two relation kinds are supported:

* pair reduction  ``s_i * s_j -> c * m``: in the Laurent ring the relation
  makes each of the two symbols a unit multiple of the other's inverse, so
  every monomial has a unique representative in which the two symbols never
  appear together and never with a negative exponent; reduction rewrites to
  that representative (``alpha1 - alpha2`` stays as written, while e.g.
  ``alpha1^2*alpha2^-1`` and ``alpha1^3*N^-1`` both normalize to the latter);
* elimination     ``s -> c * m``: the symbol ``s`` is replaced everywhere.

Left-hand supports are pairwise disjoint and eliminated symbols never occur in
a right-hand side, which makes the rewriting confluent; the property tests
exercise permuted application orders.

On top of the scalar ring the module provides rational functions (equality by
cross multiplication), truncated power series with generic coefficients, and a
seeded random-substitution oracle driven by an explicit dependency schedule.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence


class SymbolAlphabet:
    """Ordered symbol list plus binomial relations and a sampling schedule.

    ``relations`` entries are ``(lhs, coeff, rhs)`` where ``lhs`` and ``rhs``
    are exponent tuples; ``lhs`` is either a single symbol or a product of two
    distinct symbols, each with exponent one.  ``schedule`` lists the symbols
    in dependency order together with either ``None`` (free, sampled) or a
    callable ``fn(values, rng)`` computing the value from the previously
    assigned ones (the dependency schedule used by the numeric oracle).
    """

    def __init__(
        self,
        names: Sequence[str],
        relations: Iterable[tuple[Mapping[str, int], Fraction, Mapping[str, int]]] = (),
        schedule: Sequence[tuple[str, Callable[..., Fraction] | None]] | None = None,
        tag: str = "",
    ):
        self.names = tuple(names)
        self.tag = tag or ",".join(self.names)
        self.index = {n: i for i, n in enumerate(self.names)}
        if len(self.index) != len(self.names):
            raise ValueError("duplicate symbol names")
        self._zero_mono = (0,) * len(self.names)
        self.pair_rules: list[tuple[int, int, Fraction, tuple[int, ...]]] = []
        self.elim_rules: list[tuple[int, Fraction, tuple[int, ...]]] = []
        seen_support: set[int] = set()
        for lhs, coeff, rhs in relations:
            lvec = self._mono(lhs)
            rvec = self._mono(rhs)
            support = [i for i, e in enumerate(lvec) if e]
            coeff = Fraction(coeff)
            if len(support) == 1 and lvec[support[0]] == 1:
                self.elim_rules.append((support[0], coeff, rvec))
            elif len(support) == 2 and all(lvec[i] == 1 for i in support):
                self.pair_rules.append((support[0], support[1], coeff, rvec))
            else:
                raise ValueError("relation left side must be s or s*t")
            for i in support:
                if i in seen_support:
                    raise ValueError("relation left sides must not overlap")
                seen_support.add(i)
        elim_idx = {i for i, _c, _r in self.elim_rules}
        for _i, _c, rvec in self.elim_rules:
            if any(rvec[j] for j in elim_idx):
                raise ValueError("eliminated symbol occurs in a right-hand side")
        self.schedule = list(schedule) if schedule is not None else [(n, None) for n in self.names]
        sched_names = [n for n, _ in self.schedule]
        if sorted(sched_names) != sorted(self.names):
            raise ValueError("schedule must cover the alphabet exactly once")

    def _mono(self, exps: Mapping[str, int]) -> tuple[int, ...]:
        vec = [0] * len(self.names)
        for name, e in exps.items():
            vec[self.index[name]] = int(e)
        return tuple(vec)

    def reduce_monomial(
        self,
        mono: tuple[int, ...],
        order: Sequence[int] | None = None,
        elim_order: Sequence[int] | None = None,
    ):
        """Return ``(coeff_factor, reduced_monomial)``.

        ``order`` / ``elim_order`` optionally permute the application order of
        the pair / elimination rules (used by the confluence property test);
        the result must not depend on them because rule supports are disjoint.
        """
        coeff = Fraction(1)
        vec = list(mono)
        elims = self.elim_rules if elim_order is None else [self.elim_rules[i] for i in elim_order]
        for idx, c, rvec in elims:
            e = vec[idx]
            if e:
                vec[idx] = 0
                coeff *= c ** e
                for j, r in enumerate(rvec):
                    if r:
                        vec[j] += r * e
        rules = self.pair_rules if order is None else [self.pair_rules[i] for i in order]
        for i, j, c, rvec in rules:
            a, b = vec[i], vec[j]
            d = a - b
            t = b if d >= 0 else a
            if t == 0:
                continue
            vec[i] = d if d >= 0 else 0
            vec[j] = 0 if d >= 0 else -d
            coeff *= c ** t
            for k, r in enumerate(rvec):
                if r:
                    vec[k] += r * t
        return coeff, tuple(vec)

    def monomial_str(self, mono: tuple[int, ...]) -> str:
        parts = []
        for name, e in zip(self.names, mono):
            if e == 1:
                parts.append(name)
            elif e:
                parts.append(f"{name}^{e}")
        return "*".join(parts) if parts else "1"


class SymbolicScalar:
    """Element of the reduced Laurent ring: dict monomial -> nonzero Fraction."""

    __slots__ = ("alphabet", "terms")

    def __init__(self, alphabet: SymbolAlphabet, terms: Mapping[tuple[int, ...], Fraction] | None = None, *, _reduced: bool = False):
        self.alphabet = alphabet
        if not terms:
            self.terms: dict[tuple[int, ...], Fraction] = {}
        elif _reduced:
            self.terms = dict(terms)
        else:
            acc: dict[tuple[int, ...], Fraction] = {}
            for mono, c in terms.items():
                c = Fraction(c)
                if not c:
                    continue
                cf, red = alphabet.reduce_monomial(mono)
                c *= cf
                prev = acc.get(red)
                if prev is None:
                    acc[red] = c
                else:
                    s = prev + c
                    if s:
                        acc[red] = s
                    else:
                        del acc[red]
            self.terms = acc

    # -- constructors -------------------------------------------------
    @classmethod
    def const(cls, alphabet: SymbolAlphabet, value) -> "SymbolicScalar":
        value = Fraction(value)
        if not value:
            return cls(alphabet)
        return cls(alphabet, {alphabet._zero_mono: value}, _reduced=True)

    @classmethod
    def symbol(cls, alphabet: SymbolAlphabet, name: str, exp: int = 1) -> "SymbolicScalar":
        vec = [0] * len(alphabet.names)
        vec[alphabet.index[name]] = exp
        return cls(alphabet, {tuple(vec): Fraction(1)})

    @classmethod
    def monomial(cls, alphabet: SymbolAlphabet, coeff, exps: Mapping[str, int]) -> "SymbolicScalar":
        return cls(alphabet, {alphabet._mono(exps): Fraction(coeff)})

    # -- ring operations ----------------------------------------------
    def _check(self, other: "SymbolicScalar"):
        if self.alphabet is not other.alphabet and self.alphabet.tag != other.alphabet.tag:
            raise ValueError("mixed alphabets")

    def __add__(self, other):
        other = self._coerce(other)
        self._check(other)
        acc = dict(self.terms)
        for mono, c in other.terms.items():
            prev = acc.get(mono)
            if prev is None:
                acc[mono] = c
            else:
                s = prev + c
                if s:
                    acc[mono] = s
                else:
                    del acc[mono]
        return SymbolicScalar(self.alphabet, acc, _reduced=True)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return SymbolicScalar(self.alphabet, {m: -c for m, c in self.terms.items()}, _reduced=True)

    def __sub__(self, other):
        return self.__add__(self._coerce(other).__neg__())

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        self._check(other)
        if not self.terms or not other.terms:
            return SymbolicScalar(self.alphabet)
        alphabet = self.alphabet
        acc: dict[tuple[int, ...], Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                c = c1 * c2
                cf, red = alphabet.reduce_monomial(mono)
                c *= cf
                prev = acc.get(red)
                if prev is None:
                    acc[red] = c
                else:
                    s = prev + c
                    if s:
                        acc[red] = s
                    else:
                        del acc[red]
        return SymbolicScalar(alphabet, acc, _reduced=True)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        result = SymbolicScalar.const(self.alphabet, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def _coerce(self, other) -> "SymbolicScalar":
        if isinstance(other, SymbolicScalar):
            return other
        if isinstance(other, (int, Fraction)):
            return SymbolicScalar.const(self.alphabet, other)
        return NotImplemented  # pragma: no cover

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = SymbolicScalar.const(self.alphabet, other)
        if not isinstance(other, SymbolicScalar):
            return NotImplemented
        return self.alphabet.tag == other.alphabet.tag and self.terms == other.terms

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __hash__(self):
        return hash((self.alphabet.tag, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def inverse(self) -> "SymbolicScalar":
        if len(self.terms) != 1:
            raise ZeroDivisionError("only monomials are invertible in the scalar ring")
        (mono, c), = self.terms.items()
        inv = tuple(-e for e in mono)
        return SymbolicScalar(self.alphabet, {inv: Fraction(1) / c})

    def constant_value(self) -> Fraction:
        """The value of a constant scalar (raises if non-constant)."""
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1 and self.alphabet._zero_mono in self.terms:
            return self.terms[self.alphabet._zero_mono]
        raise ValueError("scalar is not constant")

    def substitute(self, values: Mapping[str, Fraction]) -> Fraction:
        total = Fraction(0)
        for mono, c in self.terms.items():
            v = c
            for name, e in zip(self.alphabet.names, mono):
                if e:
                    v *= Fraction(values[name]) ** e
            total += v
        return total

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for mono in sorted(self.terms):
            c = self.terms[mono]
            ms = self.alphabet.monomial_str(mono)
            if ms == "1":
                parts.append(str(c))
            elif c == 1:
                parts.append(ms)
            elif c == -1:
                parts.append(f"-{ms}")
            else:
                parts.append(f"{c}*{ms}")
        out = " + ".join(parts)
        return out.replace("+ -", "- ")


class RationalFunction:
    """Quotient of two scalars; equality by cross multiplication."""

    __slots__ = ("num", "den")

    def __init__(self, num: SymbolicScalar, den: SymbolicScalar | None = None):
        if den is None:
            den = SymbolicScalar.const(num.alphabet, 1)
        if den.is_zero:
            raise ZeroDivisionError("zero denominator")
        self.num = num
        self.den = den

    @classmethod
    def from_scalar(cls, s: SymbolicScalar) -> "RationalFunction":
        return cls(s)

    def _coerce(self, other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, SymbolicScalar):
            return RationalFunction(other)
        if isinstance(other, (int, Fraction)):
            return RationalFunction(SymbolicScalar.const(self.num.alphabet, other))
        return NotImplemented  # pragma: no cover

    def __add__(self, other):
        other = self._coerce(other)
        return RationalFunction(self.num * other.den + other.num * self.den, self.den * other.den)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        return self.__add__(self._coerce(other).__neg__())

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        return RationalFunction(self.num * other.num, self.den * other.den)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.num.is_zero:
            raise ZeroDivisionError
        return RationalFunction(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self.num * other.den) == (other.num * self.den)

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    def __hash__(self):  # pragma: no cover - not used as dict keys
        raise TypeError("RationalFunction is unhashable")

    def inverse(self) -> "RationalFunction":
        if self.num.is_zero:
            raise ZeroDivisionError
        return RationalFunction(self.den, self.num)

    def substitute(self, values: Mapping[str, Fraction]) -> Fraction:
        return self.num.substitute(values) / self.den.substitute(values)

    def __repr__(self):
        return f"({self.num!r})/({self.den!r})"


def rf_equal(a, b) -> bool:
    """Equality of rational functions / scalars via cross multiplication."""
    if isinstance(a, SymbolicScalar):
        a = RationalFunction(a)
    if isinstance(b, (SymbolicScalar, int, Fraction)):
        b = a._coerce(b)
    return a == b


class TruncatedSeries:
    """Power series truncated at degree ``D`` with coefficients in any ring.

    Coefficients may be SymbolicScalars, RationalFunctions, or anything with
    ``+``/``*``; ``zero`` supplies the coefficient-ring zero, and ``ring_tag``
    labels the coefficient ring (series over different rings never compare
    equal).
    """

    __slots__ = ("var", "coeffs", "D", "zero", "ring_tag")

    def __init__(self, var: str, coeffs: Sequence, D: int, zero, ring_tag: str):
        self.var = var
        self.D = D
        self.zero = zero
        self.ring_tag = ring_tag
        cs = list(coeffs[: D + 1])
        while len(cs) < D + 1:
            cs.append(zero)
        self.coeffs = tuple(cs)

    @classmethod
    def scalar_series(cls, alphabet: SymbolAlphabet, var: str, coeffs: Sequence, D: int = 6):
        zero = SymbolicScalar(alphabet)
        return cls(var, coeffs, D, zero, "scalar:" + alphabet.tag)

    def _check(self, other: "TruncatedSeries"):
        if self.var != other.var or self.ring_tag != other.ring_tag:
            raise ValueError("incompatible series")
        if self.D != other.D:
            raise ValueError("mixed truncation depths")

    def __add__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        self._check(other)
        return TruncatedSeries(self.var, [a + b for a, b in zip(self.coeffs, other.coeffs)], self.D, self.zero, self.ring_tag)

    def __neg__(self):
        return TruncatedSeries(self.var, [self.zero - c for c in self.coeffs], self.D, self.zero, self.ring_tag)

    def __sub__(self, other):
        return self.__add__(-other)

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        self._check(other)
        out = [self.zero] * (self.D + 1)
        for i, a in enumerate(self.coeffs):
            if _is_zero_coeff(a):
                continue
            for j in range(self.D + 1 - i):
                b = other.coeffs[j]
                if _is_zero_coeff(b):
                    continue
                out[i + j] = out[i + j] + a * b
        return TruncatedSeries(self.var, out, self.D, self.zero, self.ring_tag)

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        if self.var != other.var or self.ring_tag != other.ring_tag or self.D != other.D:
            return False
        return all(a == b for a, b in zip(self.coeffs, other.coeffs))

    def __ne__(self, other):
        eq = self.__eq__(other)
        return NotImplemented if eq is NotImplemented else not eq

    @property
    def is_zero(self) -> bool:
        return all(_is_zero_coeff(c) for c in self.coeffs)

    def invert(self) -> "TruncatedSeries":
        """Multiplicative inverse; requires an invertible degree-0 coefficient."""
        b0 = _coeff_inverse(self.coeffs[0])
        out = [b0] + [self.zero] * self.D
        for k in range(1, self.D + 1):
            acc = self.zero
            for i in range(1, k + 1):
                a = self.coeffs[i]
                if _is_zero_coeff(a):
                    continue
                acc = acc + a * out[k - i]
            out[k] = self.zero - b0 * acc
        return TruncatedSeries(self.var, out, self.D, self.zero, self.ring_tag)

    def __repr__(self):
        parts = [f"({c!r})*{self.var}^{i}" for i, c in enumerate(self.coeffs) if not _is_zero_coeff(c)]
        return " + ".join(parts) if parts else "0"


def _is_zero_coeff(c) -> bool:
    z = getattr(c, "is_zero", None)
    if z is not None:
        return bool(z)
    return c == 0


def _coeff_inverse(c):
    inv = getattr(c, "inverse", None)
    if inv is not None:
        return inv()
    return 1 / Fraction(c)


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    return a * b


# ---------------------------------------------------------------------------
# Shipped alphabets and the dependency schedule
# ---------------------------------------------------------------------------

def _rand_nonzero(rng: random.Random) -> Fraction:
    num = rng.randint(1, 40) * rng.choice((1, -1))
    den = rng.randint(1, 17)
    return Fraction(num, den)


def _rand_positive(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(2, 50), rng.randint(1, 7))


def eigen_alphabet(split: bool) -> SymbolAlphabet:
    """Scalar alphabet for eigenvalue computations.

    Free symbols: p, X, alpha1, P1, lam_p, lam_t1p, alpha_f.  Dependent:
    N = p^(w-1) for a sampled integer w, alpha2 = N/alpha1, P2 = pN/P1,
    beta_f = chi*N/(p*alpha_f) with chi = +1 split / -1 inert, and the
    eliminated symbols lam_pi = N^2 p^-2 P1^-2, lam_pibar = N^2 p^-2 P2^-2.
    The weight parameter never appears as a symbol: every weight power is
    folded into N, so all identities are Laurent statements in this alphabet.
    Use :func:`eigen_expressions` for the dependent quantities that are
    polynomial (not monomial) in these symbols.
    """
    chi = Fraction(1 if split else -1)
    names = ["p", "N", "X", "alpha1", "alpha2", "P1", "P2",
             "lam_p", "lam_t1p", "lam_pi", "lam_pibar", "alpha_f", "beta_f"]
    relations = [
        ({"alpha1": 1, "alpha2": 1}, Fraction(1), {"N": 1}),
        ({"P1": 1, "P2": 1}, Fraction(1), {"p": 1, "N": 1}),
        ({"alpha_f": 1, "beta_f": 1}, chi, {"N": 1, "p": -1}),
        ({"lam_pi": 1}, Fraction(1), {"N": 2, "p": -2, "P1": -2}),
        ({"lam_pibar": 1}, Fraction(1), {"N": 2, "p": -2, "P2": -2}),
    ]
    schedule = [
        ("p", None),
        ("N", lambda v, rng: v["p"] ** (rng.randint(3, 9) - 1)),
        ("X", None),
        ("alpha1", None),
        ("alpha2", lambda v, rng: v["N"] / v["alpha1"]),
        ("P1", None),
        ("P2", lambda v, rng: v["p"] * v["N"] / v["P1"]),
        ("lam_p", None),
        ("lam_t1p", None),
        ("lam_pi", lambda v, rng: v["N"] ** 2 / (v["p"] ** 2 * v["P1"] ** 2)),
        ("lam_pibar", lambda v, rng: v["N"] ** 2 / (v["p"] ** 2 * v["P2"] ** 2)),
        ("alpha_f", None),
        ("beta_f", lambda v, rng, _chi=chi: _chi * v["N"] / (v["p"] * v["alpha_f"])),
    ]
    return SymbolAlphabet(names, relations, schedule, tag="eigen-split" if split else "eigen-inert")


def eigen_expressions(alphabet: SymbolAlphabet) -> dict[str, SymbolicScalar]:
    """Dependent quantities of the eigen alphabet, as reduced scalars.

    Monomial dependents (X1, X2, Y, Y1, Y2) and polynomial ones (A2 and the
    classical pair sum a_p) are returned as expressions rather than extra
    symbols, keeping the relation system purely binomial.
    """
    def mono(coeff, exps):
        return SymbolicScalar.monomial(alphabet, coeff, exps)

    return {
        "X1": mono(1, {"alpha1": 1, "p": 2, "N": -1, "X": 1}),
        "X2": mono(1, {"alpha2": 1, "p": 2, "N": -1, "X": 1}),
        "Y": mono(1, {"p": 2, "N": 1, "X": 2}),
        "Y1": mono(1, {"P1": 1, "p": 2, "N": -1, "X": 1}),
        "Y2": mono(1, {"P2": 1, "p": 2, "N": -1, "X": 1}),
        "A2": (mono(1, {"p": 1, "lam_t1p": 1})
               + mono(1, {"N": 2, "p": -2}) + mono(1, {"N": 2, "p": -3})
               + mono(-1, {"N": 2, "p": -4}) + mono(1, {"N": 2, "p": -5})),
        "a_p": mono(1, {"alpha_f": 1}) + mono(1, {"beta_f": 1}),
    }


def satake_unitary_alphabet() -> SymbolAlphabet:
    """Satake variables for the degree-2 unitary group at a non-split prime."""
    return SymbolAlphabet(["p", "x0", "x1", "x2"], tag="satake-u2")


def satake_gl4_alphabet() -> SymbolAlphabet:
    """Satake variables for GL4 plus the central tracking variable x."""
    return SymbolAlphabet(["p", "x1", "x2", "x3", "x4", "x"], tag="satake-gl4")


def random_assignment(alphabet: SymbolAlphabet, seed: int) -> dict[str, Fraction]:
    """Sample the free symbols and fill in dependents per the schedule."""
    rng = random.Random(seed)
    values: dict[str, Fraction] = {}
    for name, fn in alphabet.schedule:
        if fn is None:
            values[name] = _rand_positive(rng) if name == "p" else _rand_nonzero(rng)
        else:
            values[name] = fn(values, rng)
    # every relation must hold numerically
    for i, j, c, rvec in alphabet.pair_rules:
        lhs = values[alphabet.names[i]] * values[alphabet.names[j]]
        rhs = c
        for k, e in enumerate(rvec):
            if e:
                rhs *= values[alphabet.names[k]] ** e
        if lhs != rhs:
            raise AssertionError(f"schedule breaks relation on {alphabet.names[i]}*{alphabet.names[j]}")
    for idx, c, rvec in alphabet.elim_rules:
        rhs = c
        for k, e in enumerate(rvec):
            if e:
                rhs *= values[alphabet.names[k]] ** e
        if values[alphabet.names[idx]] != rhs:
            raise AssertionError(f"schedule breaks elimination of {alphabet.names[idx]}")
    return values


def random_substitute(obj, seed: int) -> Fraction:
    """Evaluate a scalar or rational function at a seeded random point.

    If a rational function's denominator happens to vanish at the sampled
    point, the point is resampled deterministically (derived sub-seeds), so
    the result is still a pure function of ``seed``.
    """
    alphabet = obj.alphabet if isinstance(obj, SymbolicScalar) else obj.num.alphabet
    last: ZeroDivisionError | None = None
    for attempt in range(32):
        try:
            return obj.substitute(random_assignment(alphabet, seed + 1000003 * attempt))
        except ZeroDivisionError as exc:
            last = exc
    raise ZeroDivisionError("denominator vanished on 32 consecutive sampled points") from last
