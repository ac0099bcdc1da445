"""Multiple harmonic sums H(s;n) = sum_{1<=k1<...<kl<=n} k1^-s1 ... kl^-sl.

Two evaluation routes share one forward sweep over n that keeps the l+1 prefix
accumulators H(s1..sj; n):

* exact rationals (:func:`mhs_exact`, :func:`prefix_table`);
* a p-adic sweep (:class:`PadicSweep`) in which every prefix value is held as
  ``p**scale_j * H(s1..sj; n)`` modulo a single ``p**M``.  With ``scale_j`` equal
  to the prefix weight times the largest p-power exponent of any index, every
  scaled value is a p-adic integer, so the residues are exact and valuations
  come out without any precision bookkeeping inside the loop.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .errors import BudgetExceeded, PrecisionUnderflow
from .exact import PadicApprox, padic_of_rational

DEFAULT_MAX_EXACT_N = 10**6

_REPEAT = re.compile(r"^\{([0-9,\s]+)\}\^(\d+)$")


@dataclass(frozen=True)
class Composition:
    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(x) for x in self.parts)
        if not parts:
            raise ValueError("composition must be non-empty")
        if any(x < 1 for x in parts):
            raise ValueError(f"parts must be positive: {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def of(cls, value) -> "Composition":
        if isinstance(value, Composition):
            return value
        if isinstance(value, int):
            return cls((value,))
        if isinstance(value, str):
            return cls.parse(value)
        return cls(tuple(value))

    @classmethod
    def parse(cls, text: str) -> "Composition":
        """Parse ``"1,2,1"``, ``"{2}^3"`` or mixtures such as ``"1,{2,1}^2"``."""
        parts: list[int] = []
        for token in _split_top(text.strip()):
            m = _REPEAT.match(token)
            if m:
                block = [int(x) for x in m.group(1).split(",") if x.strip()]
                parts.extend(block * int(m.group(2)))
            elif token:
                parts.append(int(token))
        return cls(tuple(parts))

    @classmethod
    def repeat(cls, s: int, l: int) -> "Composition":
        return cls((s,) * l)

    @property
    def weight(self) -> int:
        return sum(self.parts)

    @property
    def length(self) -> int:
        return len(self.parts)

    @property
    def min_part(self) -> int:
        return min(self.parts)

    def prefix(self, j: int) -> "Composition":
        return Composition(self.parts[:j])

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)

    def __str__(self):
        return ",".join(map(str, self.parts))


def _split_top(text: str) -> list[str]:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    out.append(cur.strip())
    return out


@dataclass(frozen=True)
class LevelIndex:
    """The p-power block G_t = [p^(t-1), p^t), with G_0 = {0}."""

    prime: int
    level: int

    @property
    def start(self) -> int:
        return 0 if self.level == 0 else self.prime ** (self.level - 1)

    @property
    def stop(self) -> int:
        return 1 if self.level == 0 else self.prime**self.level

    def __contains__(self, n: int) -> bool:
        return self.start <= n < self.stop

    def __iter__(self):
        return iter(range(self.start, self.stop))

    @classmethod
    def of(cls, n: int, p: int) -> "LevelIndex":
        return cls(p, level_of(n, p))


def level_of(n: int, p: int) -> int:
    """The t with n in G_t."""
    if n < 0:
        raise ValueError("negative index")
    if n == 0:
        return 0
    t = 1
    while n >= p**t:
        t += 1
    return t


def max_index_valuation(n_max: int, p: int) -> int:
    """Largest v with p**v <= n_max (0 when n_max < p)."""
    v = 0
    while p ** (v + 1) <= n_max:
        v += 1
    return v


def _coerce(s) -> Composition:
    return Composition.of(s)


# ----------------------------------------------------------------- exact route


def iter_exact(s, n_max: int, skip_prime: int | None = None,
               max_exact_n: int = DEFAULT_MAX_EXACT_N) -> Iterator[tuple[int, tuple[Fraction, ...]]]:
    """Yield ``(n, (H(s1;n), H(s1,s2;n), ..., H(s;n)))`` for n = 0..n_max.

    With ``skip_prime`` the sums are restricted to indices coprime to that prime.
    """
    s = _coerce(s)
    if n_max > max_exact_n:
        raise BudgetExceeded(
            f"exact evaluation to n={n_max} exceeds {max_exact_n}; use the p-adic route",
            cost=n_max)
    acc = [Fraction(1)] + [Fraction(0)] * s.length
    yield 0, tuple(acc[1:])
    for n in range(1, n_max + 1):
        if skip_prime is None or n % skip_prime:
            for j in range(s.length, 0, -1):
                acc[j] += acc[j - 1] / Fraction(n) ** s.parts[j - 1]
        yield n, tuple(acc[1:])


def prefix_table(s, n_max: int, skip_prime: int | None = None) -> list[tuple[Fraction, ...]]:
    """All prefix values for m = 0..n_max; row m holds H(s1..sj; m) for j = 1..l."""
    return [vals for _, vals in iter_exact(s, n_max, skip_prime)]


def mhs_exact(s, n: int, max_exact_n: int = DEFAULT_MAX_EXACT_N) -> Fraction:
    s = _coerce(s)
    if n < 0:
        raise ValueError("negative index")
    last = Fraction(0)
    for _, vals in iter_exact(s, n, max_exact_n=max_exact_n):
        last = vals[-1]
    return last


def mhs_star_exact(s, n: int, p: int) -> Fraction:
    """H*(s;n): the sum restricted to indices coprime to p."""
    s = _coerce(s)
    last = Fraction(0)
    for _, vals in iter_exact(s, n, skip_prime=p):
        last = vals[-1]
    return last


def mhs_naive(s, n: int) -> Fraction:
    """Direct evaluation over all index tuples; exponential, for oracles only."""
    from itertools import combinations

    s = _coerce(s)
    total = Fraction(0)
    for ks in combinations(range(1, n + 1), s.length):
        den = 1
        for k, e in zip(ks, s.parts):
            den *= k**e
        total += Fraction(1, den)
    return total


# ----------------------------------------------------------------- p-adic route


@dataclass
class ScanResult:
    """What a scanning sweep saw: p-divisible indices and, per level t, the
    largest v_p(H) over the observed part of G_t with a witness index."""

    hits: list = None
    level_max: dict = None

    def __post_init__(self):
        self.hits = [] if self.hits is None else self.hits
        self.level_max = {} if self.level_max is None else self.level_max

    def f(self, t: int) -> int:
        """min over n in G_t of -v_p(H(s;n))."""
        return -self.level_max[t][0]


class PadicSweep:
    """Forward sweep of all prefix sums of ``s`` inside Z/p^M with a common scale.

    Prefix j is stored as ``A_j = p**scale_j * H(s1..sj; n) mod p**M`` where
    ``scale_j = (s1+..+sj) * V`` and V bounds v_p of every index up to ``n_max``.
    ``digits`` is how many p-adic digits survive above the scale of the full sum.
    """

    def __init__(self, s, p: int, n_max: int, digits: int, coprime_only: bool = False):
        self.s = _coerce(s)
        self.p = p
        self.n_max = n_max
        self.digits = digits
        self.coprime_only = coprime_only
        V = 0 if coprime_only else max_index_valuation(n_max, p)
        self.V = V
        w = [0]
        for part in self.s.parts:
            w.append(w[-1] + part)
        self.scale = [x * V for x in w]
        self.M = self.scale[-1] + digits
        self.modulus = p**self.M
        self.acc = [1] + [0] * self.s.length
        self.n = 0
        self._scan = None
        self._shift = [None] + [
            [p ** ((V - v) * part) for v in range(V + 1)] for part in self.s.parts]

    def advance(self, stop: int) -> None:
        """Move the sweep forward to index ``stop``."""
        self._run(stop, observe=False)

    def scan(self, stop: int) -> "ScanResult":
        """Advance to ``stop`` recording p-divisible indices and per-level valuation maxima.

        Only indices n >= l are observed (H vanishes identically below the length).
        """
        if self.coprime_only:
            raise ValueError("scan is defined for full sums only")
        if self._scan is None:
            self._scan = ScanResult()
        self._run(stop, observe=True)
        return self._scan

    def _run(self, stop: int, observe: bool) -> None:
        if stop > self.n_max:
            raise ValueError(f"sweep was sized for n <= {self.n_max}")
        if stop < self.n:
            raise ValueError("sweeps only move forward")
        p, mod, acc = self.p, self.modulus, self.acc
        parts = self.s.parts
        l = len(parts)
        shift = self._shift
        distinct = sorted(set(parts))
        uniform = len(distinct) == 1
        e0 = distinct[0]
        coprime_only = self.coprime_only
        n = self.n
        if observe:
            res = self._scan
            top = self.scale[l]
            hit_mod = p ** (top + 1)
            level = level_of(n, p) if n else 0
            next_level = p**level if n else 1
            cur = res.level_max.get(level)
            thr = p ** (top + cur[0] + 1) if cur else 1
        while n < stop:
            n += 1
            if n % p:
                u, v = n, 0
            elif coprime_only:
                continue
            else:
                u, v = n // p, 1
                while u % p == 0:
                    u //= p
                    v += 1
            if l == 1:
                acc[1] = (acc[1] + pow(u, -e0, mod) * shift[1][v]) % mod
            elif uniform:
                ie = pow(u, -e0, mod)
                for j in range(l, 0, -1):
                    acc[j] = (acc[j] + acc[j - 1] * ie * shift[j][v]) % mod
            else:
                inv = pow(u, -1, mod)
                pw = {e: pow(inv, e, mod) for e in distinct}
                for j in range(l, 0, -1):
                    acc[j] = (acc[j] + acc[j - 1] * pw[parts[j - 1]] * shift[j][v]) % mod
            if observe:
                if n >= next_level:
                    level += 1
                    next_level *= p
                    cur = None
                    thr = 1
                if n < l:
                    continue
                a = acc[l]
                if a % thr == 0:
                    if a == 0:
                        raise PrecisionUnderflow(
                            f"H vanishes modulo p^{self.digits} at n={n}", (self.digits,))
                    val = 0
                    while a % p == 0:
                        a //= p
                        val += 1
                    cur = (val - top, n)
                    res.level_max[level] = cur
                    thr = p ** (val + 1)
                if acc[l] % hit_mod == 0:
                    res.hits.append(n)
        self.n = n

    def __iter__(self) -> Iterator[int]:
        """Step one index at a time, yielding n (state readable in between)."""
        while self.n < self.n_max:
            self.advance(self.n + 1)
            yield self.n

    # -- readers

    def scaled(self, j: int | None = None) -> int:
        return self.acc[self.s.length if j is None else j]

    def is_exact_zero(self, j: int | None = None) -> bool:
        j = self.s.length if j is None else j
        return self.n < j

    def valuation(self, j: int | None = None) -> int:
        """v_p of the current prefix value; raises on total loss of precision."""
        j = self.s.length if j is None else j
        a = self.acc[j]
        if self.is_exact_zero(j):
            raise ValueError("valuation of zero undefined")
        if a == 0:
            raise PrecisionUnderflow(
                f"H vanishes modulo p^{self.M - self.scale[j]} at n={self.n}",
                (self.M - self.scale[j],))
        v = 0
        p = self.p
        while a % p == 0:
            a //= p
            v += 1
        return v - self.scale[j]

    def divisible(self, e: int = 1, j: int | None = None) -> bool:
        """True when p^e divides H (as a p-adic number; numerator test for n >= j)."""
        j = self.s.length if j is None else j
        if self.scale[j] + e > self.M:
            raise PrecisionUnderflow(f"need {e} digits, sweep keeps {self.M - self.scale[j]}")
        return self.acc[j] % self.p ** (self.scale[j] + e) == 0

    def padic(self, j: int | None = None, k: int | None = None) -> PadicApprox:
        j = self.s.length if j is None else j
        if self.is_exact_zero(j):
            return PadicApprox.zero(self.p, k or self.digits)
        v = self.valuation(j)
        raw_v = v + self.scale[j]
        rel = self.M - raw_v
        if k is not None:
            if rel < k:
                raise PrecisionUnderflow(f"only {rel} digits survive, {k} requested", (v,))
            rel = k
        unit = (self.acc[j] // self.p**raw_v) % self.p**rel
        return PadicApprox(self.p, v, unit, rel)

    def residue(self, e: int, j: int | None = None) -> int:
        """H mod p^e for a p-integral value."""
        j = self.s.length if j is None else j
        if self.scale[j] + e > self.M:
            raise PrecisionUnderflow(f"need {e} digits, sweep keeps {self.M - self.scale[j]}")
        a = self.acc[j] % self.p ** (self.scale[j] + e)
        if a % self.p ** self.scale[j]:
            raise ValueError("value is not p-integral")
        return a // self.p ** self.scale[j]


def default_precision(s) -> int:
    return 3 * _coerce(s).weight + 3


def mhs_padic(s, n: int, p: int, k: int | None = None, retries: int = 1) -> PadicApprox:
    """H(s;n) in Q_p with k significant digits (default 3|s|+3)."""
    s = _coerce(s)
    k = default_precision(s) if k is None else k
    if k < 1:
        raise ValueError("precision must be >= 1")
    if n < s.length:
        return PadicApprox.zero(p, k)
    digits = k
    for attempt in range(retries + 1):
        sweep = PadicSweep(s, p, n, digits)
        sweep.advance(n)
        try:
            return sweep.padic(k=k)
        except PrecisionUnderflow:
            if attempt == retries:
                raise
            digits *= 2
    raise AssertionError("unreachable")


def iter_padic(s, p: int, n_max: int, digits: int, coprime_only: bool = False):
    """Yield ``(n, sweep)`` for n = 1..n_max; read values off the sweep object."""
    sweep = PadicSweep(s, p, n_max, digits, coprime_only)
    for n in sweep:
        yield n, sweep


def mhs_star_residue(s, n: int, p: int, e: int) -> int:
    """H*(s;n) mod p^e (all indices coprime to p, so the value is p-integral)."""
    sweep = PadicSweep(s, p, max(n, 1), e, coprime_only=True)
    sweep.advance(n)
    return sweep.acc[sweep.s.length] % p**e


def mhs_residue(s, n: int, p: int, e: int) -> int:
    """H(s;n) mod p^e for p-integral H(s;n)."""
    sweep = PadicSweep(s, p, max(n, 1), e)
    sweep.advance(n)
    return sweep.residue(e)


# ----------------------------------------------------------------- identities


def level_decompose_check(s: int, l: int, n: int, p: int) -> bool:
    """Exact check of H(s;n) = H*(s;n) + p^-s H(s;n~) and its {s}^l analogue."""
    comp = Composition.repeat(s, l)
    nt = n // p
    full = prefix_table(comp, n)
    star = prefix_table(comp, n, skip_prime=p)

    def H(k, m):
        return Fraction(1) if k == 0 else full[m][k - 1]

    def Hs(k, m):
        return Fraction(1) if k == 0 else star[m][k - 1]

    ok = H(1, n) == Hs(1, n) + Fraction(1, p**s) * H(1, nt)
    rhs = sum((Fraction(1, p ** (k * s)) * H(k, nt) * Hs(l - k, n) for k in range(l + 1)),
              Fraction(0))
    return ok and H(l, n) == rhs


def partitions(n: int, largest: int | None = None) -> Iterator[tuple[int, ...]]:
    """Partitions of n as non-increasing tuples."""
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in partitions(n - first, first):
            yield (first,) + rest


def newton_coefficients(l: int) -> dict[tuple[int, ...], int]:
    """Integers c_lambda with l! e_l = sum_lambda c_lambda prod_j p_{lambda_j}.

    Built from the Newton-Girard recursion k e_k = sum_i (-1)^(i-1) e_(k-i) p_i.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    e: list[dict[tuple[int, ...], Fraction]] = [{(): Fraction(1)}]
    for k in range(1, l + 1):
        ek: dict[tuple[int, ...], Fraction] = {}
        for i in range(1, k + 1):
            sign = 1 if i % 2 else -1
            for lam, c in e[k - i].items():
                key = tuple(sorted(lam + (i,), reverse=True))
                ek[key] = ek.get(key, Fraction(0)) + sign * c / k
        e.append({lam: c for lam, c in ek.items() if c})
    fact = math.factorial(l)
    out = {}
    for lam, c in e[l].items():
        val = c * fact
        if val.denominator != 1:
            raise ArithmeticError("non-integral Newton coefficient")
        out[lam] = int(val)
    return dict(sorted(out.items(), reverse=True))


def newton_decomposition(s: int, l: int, n: int | None = None) -> list[tuple[tuple[int, ...], int]]:
    """(lambda, c_lambda) pairs expressing l! H({s}^l;n) through products of H(j s;n)."""
    return list(newton_coefficients(l).items())


def newton_identity_holds(s: int, l: int, n: int) -> bool:
    comp = Composition.repeat(s, l)
    lhs = math.factorial(l) * mhs_exact(comp, n)
    single = {}
    for j in range(1, l + 1):
        single[j] = mhs_exact((j * s,), n)
    rhs = Fraction(0)
    for lam, c in newton_coefficients(l).items():
        term = Fraction(c)
        for part in lam:
            term *= single[part]
        rhs += term
    return lhs == rhs


def stuffle_holds(a: int, b: int, n: int) -> bool:
    """H(a;n) H(b;n) = H(a,b;n) + H(b,a;n) + H(a+b;n)."""
    return (mhs_exact((a,), n) * mhs_exact((b,), n)
            == mhs_exact((a, b), n) + mhs_exact((b, a), n) + mhs_exact((a + b,), n))


def padic_from_exact(s, n: int, p: int, k: int) -> PadicApprox:
    return padic_of_rational(mhs_exact(s, n), p, k)


def numerator_valuation(q: Fraction, p: int) -> int:
    """v_p of the numerator in lowest terms (0 when p divides the denominator)."""
    num = q.numerator
    if num == 0:
        raise ValueError("valuation of zero undefined")
    v = 0
    while num % p == 0:
        num //= p
        v += 1
    return v


def fractional_part(q: Fraction) -> Fraction:
    return q - (q.numerator // q.denominator)


def compositions_up_to(weight: int) -> Iterable[Composition]:
    """Every composition of total weight 1..weight."""
    def rec(w):
        if w == 0:
            yield ()
            return
        for first in range(1, w + 1):
            for rest in rec(w - first):
                yield (first,) + rest
    for w in range(1, weight + 1):
        for parts in rec(w):
            yield Composition(parts)

