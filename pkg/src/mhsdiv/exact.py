"""Exact rationals, valuation-tracked p-adic approximations, and Bernoulli numbers mod p.

Rationals are plain :class:`fractions.Fraction` values (always reduced, positive
denominator, zero is ``0/1``).  :class:`PadicApprox` stores a nonzero element of
Q_p as ``p**valuation * unit`` where the unit is known modulo ``p**precision``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Union

Rational = Union[int, Fraction]


class PrecisionUnderflow(ArithmeticError):
    """Raised when fewer than one significant p-adic digit survives an operation."""

    def __init__(self, message: str, valuations: tuple = ()):
        super().__init__(message)
        self.valuations = valuations


class BernoulliDomainError(ValueError):
    pass


def vp_int(n: int, p: int) -> int:
    """Exponent of p in the nonzero integer n."""
    if n == 0:
        raise ValueError("valuation of zero undefined")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp(q: Rational, p: int) -> int:
    """p-adic valuation of a nonzero rational."""
    q = Fraction(q)
    if q == 0:
        raise ValueError("valuation of zero undefined")
    v = 0
    num, den = q.numerator, q.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def split_unit(q: Rational, p: int) -> tuple[int, Fraction]:
    """Return (v, q / p**v) for nonzero q."""
    q = Fraction(q)
    v = vp(q, p)
    if v >= 0:
        return v, q / p**v
    return v, q * p ** (-v)


def rational_mod(q: Rational, m: int) -> int:
    """Residue of a rational whose denominator is a unit modulo m."""
    q = Fraction(q)
    return q.numerator * pow(q.denominator, -1, m) % m


@dataclass(frozen=True)
class ModResidue:
    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 2:
            raise ValueError("modulus must be >= 2")
        if not 0 <= self.value < self.modulus:
            raise ValueError(f"residue {self.value} out of range for modulus {self.modulus}")

    def __int__(self) -> int:
        return self.value

    def __eq__(self, other):
        if isinstance(other, ModResidue):
            return self.value == other.value and self.modulus == other.modulus
        if isinstance(other, int):
            return (self.value - other) % self.modulus == 0
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.modulus))


@dataclass(frozen=True)
class PadicApprox:
    """An element of Q_p: either exact zero or ``p**valuation * unit``.

    ``unit`` is coprime to p and known modulo ``p**precision``.  When the value
    came from an exact rational, ``exact`` keeps that rational so a total
    cancellation can be recognised as a true zero rather than guessed.
    """

    prime: int
    valuation: Optional[int]
    unit: int
    precision: int
    exact: Optional[Fraction] = None

    def __post_init__(self):
        if self.precision < 1:
            raise PrecisionUnderflow("fewer than one significant digit", (self.valuation,))
        if self.valuation is None:
            if self.unit != 0:
                raise ValueError("exact zero must carry unit 0")
            return
        mod = self.prime**self.precision
        if not 0 <= self.unit < mod:
            object.__setattr__(self, "unit", self.unit % mod)
        if self.unit % self.prime == 0:
            raise ValueError("unit must be coprime to p")

    @classmethod
    def zero(cls, p: int, precision: int = 1) -> "PadicApprox":
        return cls(p, None, 0, precision, Fraction(0))

    @property
    def is_zero(self) -> bool:
        return self.valuation is None

    @property
    def absolute_precision(self) -> float:
        if self.is_zero:
            return float("inf")
        return self.valuation + self.precision

    def residue(self, k: int) -> int:
        """The value modulo p**k; requires a p-integral value known to that precision."""
        if self.is_zero:
            return 0
        if self.valuation < 0:
            raise ValueError("value is not p-integral")
        if k > self.absolute_precision:
            raise PrecisionUnderflow(f"value known only modulo p^{self.absolute_precision}",
                                     (self.valuation,))
        return self.prime**self.valuation * self.unit % self.prime**k

    def rational_reconstruct(self) -> Fraction:
        """Smallest fraction a/b congruent to the value (Wang's half-gcd bound)."""
        if self.is_zero:
            return Fraction(0)
        m = self.prime**self.precision
        a, b = _reconstruct(self.unit, m)
        scale = Fraction(self.prime) ** self.valuation
        return Fraction(a, b) * scale

    def __add__(self, other):
        return padic_add(self, other)

    def __neg__(self):
        return padic_neg(self)

    def __sub__(self, other):
        return padic_add(self, padic_neg(other))

    def __mul__(self, other):
        return padic_mul(self, other)

    def __str__(self):
        if self.is_zero:
            return "0"
        return f"v={self.valuation} unit={self.unit} (mod {self.prime}^{self.precision})"


def _reconstruct(u: int, m: int) -> tuple[int, int]:
    bound = int((m // 2) ** 0.5)
    r0, r1 = m, u % m
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if s1 == 0 or abs(s1) > bound:
        raise ValueError("no small rational reconstruction")
    if s1 < 0:
        r1, s1 = -r1, -s1
    return r1, s1


def padic_of_rational(q: Rational, p: int, k: int) -> PadicApprox:
    if k < 1:
        raise ValueError("precision must be >= 1")
    q = Fraction(q)
    if q == 0:
        return PadicApprox.zero(p, k)
    v, u = split_unit(q, p)
    return PadicApprox(p, v, rational_mod(u, p**k), k, q)


def _check_same_prime(a: PadicApprox, b: PadicApprox):
    if a.prime != b.prime:
        raise ValueError(f"mixed primes {a.prime} and {b.prime}")


def _exact_pair(a, b, op):
    if a.exact is None or b.exact is None:
        return None
    return op(a.exact, b.exact)


def padic_neg(a: PadicApprox) -> PadicApprox:
    if a.is_zero:
        return a
    mod = a.prime**a.precision
    exact = None if a.exact is None else -a.exact
    return PadicApprox(a.prime, a.valuation, (-a.unit) % mod, a.precision, exact)


def padic_add(a: PadicApprox, b: PadicApprox) -> PadicApprox:
    _check_same_prime(a, b)
    # zeros only ever arise exactly, so they are the additive identity
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    p = a.prime
    exact = _exact_pair(a, b, lambda x, y: x + y)
    if a.valuation > b.valuation:
        a, b = b, a
    va, vb = a.valuation, b.valuation
    top = min(va + a.precision, vb + b.precision)
    width = top - va
    mod = p**width
    x = (a.unit + b.unit * p ** (vb - va)) % mod
    if x == 0:
        if exact == 0:
            return PadicApprox.zero(p, max(a.precision, b.precision))
        if exact is not None:
            return padic_of_rational(exact, p, max(a.precision, b.precision))
        raise PrecisionUnderflow(
            f"cancellation of all {width} digits (valuations {va}, {vb})", (va, vb))
    c = 0
    while x % p == 0:
        x //= p
        c += 1
    return PadicApprox(p, va + c, x, width - c, exact)


def padic_mul(a: PadicApprox, b: PadicApprox) -> PadicApprox:
    _check_same_prime(a, b)
    if a.is_zero or b.is_zero:
        return PadicApprox.zero(a.prime, max(a.precision, b.precision))
    exact = _exact_pair(a, b, lambda x, y: x * y)
    prec = min(a.precision, b.precision)
    mod = a.prime**prec
    return PadicApprox(a.prime, a.valuation + b.valuation, a.unit * b.unit % mod, prec, exact)


def padic_inv(a: PadicApprox) -> PadicApprox:
    if a.is_zero:
        raise ZeroDivisionError("inverse of p-adic zero")
    mod = a.prime**a.precision
    exact = None if a.exact is None else 1 / a.exact
    return PadicApprox(a.prime, -a.valuation, pow(a.unit, -1, mod), a.precision, exact)


def padic_pow_p(p: int, e: int, k: int) -> PadicApprox:
    """The exact element p**e."""
    return PadicApprox(p, e, 1, k, Fraction(p) ** e)


# ---------------------------------------------------------------- Bernoulli


@lru_cache(maxsize=None)
def _bernoulli_table(m: int) -> tuple[Fraction, ...]:
    if m == 0:
        return (Fraction(1),)
    prev = _bernoulli_table(m - 1)
    # sum_{j=0}^{m} C(m+1, j) B_j = 0
    acc = Fraction(0)
    c = 1
    for j in range(m):
        acc += c * prev[j]
        c = c * (m + 1 - j) // (j + 1)
    return prev + (-acc / (m + 1),)


def bernoulli_exact(m: int) -> Fraction:
    """B_m with B_1 = -1/2, by the defining recurrence."""
    if m < 0:
        raise ValueError("negative index")
    # grow the cache in steps to keep recursion shallow
    for start in range(0, m + 1, 200):
        _bernoulli_table(start)
    return _bernoulli_table(m)[m]


def bernoulli_mod_p(m: int, p: int) -> ModResidue:
    """B_m mod p for even 2 <= m <= p-3 via sum_{a<p} a^m = p*B_m (mod p^2)."""
    if m % 2 or m <= 0 or m % (p - 1) == 0:
        raise BernoulliDomainError("von Staudt pole / vanishing case")
    if m > p - 3:
        raise BernoulliDomainError(f"index {m} outside [2, p-3] for p={p}")
    p2 = p * p
    s = 0
    for a in range(1, p):
        s += pow(a, m, p2)
    s %= p2
    if s % p:
        raise ArithmeticError("power sum not divisible by p; is p prime?")
    return ModResidue(s // p % p, p)


def bernoulli_mod_p_exact(m: int, p: int) -> ModResidue:
    """Oracle/fallback: reduce the exact rational B_m modulo p."""
    if m % 2 or m <= 0 or m % (p - 1) == 0:
        raise BernoulliDomainError("von Staudt pole / vanishing case")
    return ModResidue(rational_mod(bernoulli_exact(m), p), p)


def bernoulli_residues(p: int) -> dict[int, int]:
    """B_k mod p for every even k in [2, p-3], all power sums computed at once."""
    import numpy as np

    p2 = p * p
    if p < 5:
        return {}
    if p2 * p2 >= 2**62:
        return {k: bernoulli_mod_p(k, p).value for k in range(2, p - 2, 2)}
    a = np.arange(1, p, dtype=np.int64)
    sq = a * a % p2
    cur = sq.copy()
    out = {}
    for k in range(2, p - 2, 2):
        s = int(cur.sum() % p2)
        out[k] = s // p % p
        cur = cur * sq % p2
    return out


def irregular_indices(p: int) -> list[int]:
    """Even k in [2, p-3] with p | numerator(B_k); empty for regular primes."""
    return sorted(k for k, r in bernoulli_residues(p).items() if r == 0)
