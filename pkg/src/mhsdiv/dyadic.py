"""2-adic tracks of H(s,1;n), closed-form v_2 profiles of H({s}^l;n), and the
critical branching process behind the finiteness heuristic."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import InconsistencyError, NotApplicable
from .exact import (PadicApprox, PrecisionUnderflow, bernoulli_exact, padic_of_rational,
                    padic_pow_p, rational_mod)
from .mhs import Composition, level_of, max_index_valuation, mhs_padic


def parity_exponent(m: int) -> int:
    return 1 if m % 2 else 2


# ---------------------------------------------------------------- odd harmonic sums


def h1star_mod4(n: int) -> int:
    """H_1*(n) = sum of 1/k over odd k <= n, reduced mod 4 (closed form)."""
    if n < 1:
        raise ValueError("n must be positive")
    return 0 if n % 4 in (0, 3) else 1


def h1star_mod4_direct(n: int) -> int:
    acc = 0
    for k in range(1, n + 1, 2):
        acc += pow(k, -1, 4)
    return acc % 4


# ---------------------------------------------------------------- tracks


@dataclass(frozen=True)
class DyadicTerm:
    t: int
    n: int
    w: Optional[int]
    r: int
    case: Optional[str] = None


@dataclass
class DyadicTrack:
    s: int
    terms: list[DyadicTerm]
    successor: DyadicTerm
    method: str
    case_labels: dict[int, str] = field(default_factory=dict)

    def term(self, t: int) -> DyadicTerm:
        if t == self.successor.t:
            return self.successor
        return self.terms[t - self.terms[0].t]

    @property
    def n_values(self) -> list[int]:
        return [x.n for x in self.terms]

    @property
    def w_values(self) -> list[int]:
        return [x.w for x in self.terms]

    @property
    def bits(self) -> str:
        """r_1 r_2 ... through the successor: the binary digits of its index."""
        return format(self.successor.n, "b")

    def gaps(self) -> list[int]:
        """(t-1) - w_t along the track."""
        return [x.t - 1 - x.w for x in self.terms]

    def to_bfile(self, which: str = "n", include_successor: bool = True) -> str:
        terms = self.terms + ([self.successor] if include_successor and which == "n" else [])
        rows = [f"{x.t} {x.n if which == 'n' else x.w}" for x in terms]
        return "\n".join(rows) + "\n"

    def to_rows(self) -> list[dict]:
        return [{"t": x.t, "n": x.n, "w": x.w, "r": x.r, "case": x.case}
                for x in self.terms + [self.successor]]


def _from_residue(x: int, K: int) -> PadicApprox:
    x %= 2**K
    if x == 0:
        raise PrecisionUnderflow(f"2-adic value vanishes modulo 2^{K}", (K,))
    v = (x & -x).bit_length() - 1
    return PadicApprox(2, v, x >> v, K - v)


@lru_cache(maxsize=32)
def _odd_sum_poly(e: int, K: int) -> tuple[tuple[int, ...], int]:
    """Coefficients of N -> 2^G * sum_{m<N} (2m+1)^-e modulo 2^(K+G).

    Expands (1+2m)^-e = sum_i C(-e,i) 2^i m^i and sums each power with Faulhaber's
    formula; the Bernoulli denominators cost at most 1 + log2(i+1) bits, which the
    guard G absorbs, and terms past i_max vanish modulo 2^(K+G).
    """
    i_max = K + 2 + 2 * K.bit_length()
    G = 2 + (i_max + 1).bit_length()
    mod = 2 ** (K + G)
    coeffs = [Fraction(0)] * (i_max + 2)
    for i in range(i_max + 1):
        w = Fraction((-1) ** i * math.comb(e + i - 1, i) * 2 ** (i + G), i + 1)
        for j in range(i + 1):
            b = bernoulli_exact(j)
            if b:
                coeffs[i + 1 - j] += w * math.comb(i + 1, j) * b
    return tuple(rational_mod(c, mod) for c in coeffs), G


def odd_power_sum(e: int, n: int, K: int) -> int:
    """sum of k^-e over odd k <= n, modulo 2^K, in O(K^2) operations."""
    coeffs, G = _odd_sum_poly(e, K)
    mod = 2 ** (K + G)
    N = (n + 1) // 2
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * N + c) % mod
    if acc % 2**G:
        raise InconsistencyError("odd power sum expansion is not 2-integral")
    return acc >> G


def odd_power_sum_direct(e: int, n: int, K: int) -> int:
    mod = 2**K
    return sum(pow(k, -e, mod) for k in range(1, n + 1, 2)) % mod


def _track_pairs(t_max: int, K: int):
    """Follow H_2(n) = H_2*(n) + H_1(n~) H_1*(n)/2 + H_2(n~)/4 along the unique track."""
    mod = 2**K
    half = padic_pow_p(2, -1, K)
    quarter = padic_pow_p(2, -2, K)
    # level 2: H_1(3) = 11/6 and H_2(3) = 1; the other member of G_2 is H_2(2) = 1/2
    n_t, h1, h2 = 3, padic_of_rational(Fraction(11, 6), 2, K), padic_of_rational(1, 2, K)
    yield 2, n_t, h2, None
    for t in range(2, t_max + 1):
        children = []
        for r in (0, 1):
            n = 2 * n_t + r
            o1 = odd_power_sum(1, n, K)
            o2 = odd_power_sum(2, n, K)
            h1s = _from_residue(o1, K)
            h2s = _from_residue((o1 * o1 - o2) % mod, K) * half
            h2n = h2s + half * h1 * h1s + quarter * h2
            h1n = h1s + half * h1
            children.append((n, h1n, h2n))
        v_t = h2.valuation
        label = _case_label(n_t, v_t, t)
        winners = [c for c in children if c[2].is_zero or c[2].valuation >= 1 - t]
        if len(winners) != 1:
            raise InconsistencyError(
                f"uniqueness fails at level {t + 1}: candidates {[c[0] for c in winners]}")
        n_next, h1, h2 = winners[0]
        predicted = 2 * n_t + (1 if label in ("a", "c") else 0)
        if predicted != n_next:
            raise InconsistencyError(f"case ({label}) predicts {predicted}, found {n_next}")
        yield t + 1, n_next, h2, label
        n_t = n_next


def _case_label(n_t: int, v: int, t: int) -> str:
    if v < 2 - t:
        raise InconsistencyError(f"v_2(H_2(n_{t})) = {v} is below 2-t")
    sharp = v == 2 - t
    if n_t % 2 == 0:
        return "a" if sharp else "b"
    return "d" if sharp else "c"


def dyadic_level_scan(s: int, t_max: int, digits: int | None = None) -> dict[int, list[tuple[int, int]]]:
    """For each level t <= t_max: every n in G_t with v_2(H(s,1;n)) >= -s(t-1)+1, with the valuation.

    One 2-adic sweep over all n < 2^t_max, independent of any track recursion.
    """
    digits = 3 * (s + 1) + 3 if digits is None else digits
    n_max = 2**t_max - 1
    V = max_index_valuation(n_max, 2)
    sc1, sc2 = s * V, (s + 1) * V
    M = sc2 + digits
    mod = 2**M
    mask = mod - 1
    shift1 = [1 << (s * (V - v)) for v in range(V + 1)]
    shift2 = [1 << (V - v) for v in range(V + 1)]
    a1 = a2 = 0
    out: dict[int, list[tuple[int, int]]] = {}
    level, next_level = 0, 1
    thr_raw = 0
    for n in range(1, n_max + 1):
        if n >= next_level:
            level += 1
            next_level <<= 1
            out[level] = []
            # raw threshold for v >= -s(t-1)+1
            thr_raw = sc2 - s * (level - 1) + 1
        v = (n & -n).bit_length() - 1
        u = n >> v
        inv = pow(u, -1, mod)
        a2 = (a2 + a1 * inv * shift2[v]) & mask
        a1 = (a1 + pow(inv, s, mod) * shift1[v]) & mask
        if n < 2:
            continue
        if a2 == 0:
            raise PrecisionUnderflow(f"H({s},1;{n}) vanishes modulo 2^{digits}", (digits,))
        raw = (a2 & -a2).bit_length() - 1
        if raw >= thr_raw:
            out[level].append((n, raw - sc2))
    return out


def track_dyadic(s: int, t_max: int, method: str = "auto") -> DyadicTrack:
    """The unique n_t in G_t with v_2(H(s,1;n_t)) >= -s(t-1)+1, for t = 2..t_max, plus n_{t_max+1}.

    ``method="recursion"`` (s = 1 only) follows the two children of each n_t through the
    level identity; ``method="scan"`` checks every member of every level.
    """
    if t_max < 2:
        raise ValueError("t_max must be >= 2")
    if s < 1:
        raise ValueError("s must be positive")
    if method == "auto":
        method = "recursion" if s == 1 else "scan"
    terms: list[DyadicTerm] = []
    labels: dict[int, str] = {}
    if method == "recursion":
        if s != 1:
            raise ValueError("the recursion route is implemented for s = 1")
        K = 2 * t_max + 16
        for attempt in range(3):
            try:
                rows = list(_track_pairs(t_max, K))
                break
            except PrecisionUnderflow:
                K *= 2
        else:
            raise PrecisionUnderflow("track recursion lost all precision", (K,))
        for t, n, h2, label in rows:
            if label is not None:
                labels[t - 1] = label
            w = None if h2.is_zero else -h2.valuation
            terms.append(DyadicTerm(t, n, w, n & 1))
        terms = [DyadicTerm(x.t, x.n, x.w, x.r, labels.get(x.t)) for x in terms]
    elif method == "scan":
        levels = dyadic_level_scan(s, t_max + 1)
        for t in range(2, t_max + 2):
            hits = levels[t]
            if len(hits) != 1:
                raise InconsistencyError(
                    f"level {t} of H({s},1;.) has {len(hits)} indices above the bound")
            n, v = hits[0]
            terms.append(DyadicTerm(t, n, -v, n & 1))
        for a, b in zip(terms, terms[1:]):
            if b.n >> 1 != a.n:
                raise InconsistencyError(f"n_{b.t} = {b.n} is not a child of n_{a.t} = {a.n}")
    else:
        raise ValueError(f"unknown method {method!r}")
    if s >= 2 and terms[0].n != 2:
        raise InconsistencyError(f"n_2 = {terms[0].n}, expected 2")
    return DyadicTrack(s, terms[:-1], terms[-1], method, labels)


@dataclass(frozen=True)
class CloitreConstant:
    binary: str
    decimal: str
    lower: Fraction
    upper: Fraction
    floor_checks: dict[int, bool]

    def rounded(self, places: int = 6) -> str:
        """c rounded half-up to ``places`` decimals; refuses if the bracket straddles a cut."""
        q = 10**places
        lo = (self.lower * q + Fraction(1, 2)).__floor__()
        hi = (self.upper * q + Fraction(1, 2)).__floor__()
        if lo != hi:
            raise PrecisionUnderflow(f"bracket too wide to round c to {places} places", (places,))
        whole, frac = divmod(lo, q)
        return f"{whole}.{frac:0{places}d}"


def cloitre_constant(digits: int = 21, extra_bits: int = 40,
                     track: DyadicTrack | None = None) -> CloitreConstant:
    """c = (r_1.r_2 r_3 ...)_2 from the (1,1) track.

    ``binary`` shows ``digits`` places after the point. The bracket [lower, upper) and
    the decimal prefix come from ``digits + extra_bits`` places, so every decimal digit
    reported is shared by the whole bracket.
    """
    places = digits + extra_bits
    if track is None:
        track = track_dyadic(1, max(places, 2))
    bits = track.bits
    if len(bits) < digits + 1:
        raise ValueError(f"track too short for {digits} binary digits")
    places = min(places, len(bits) - 1)
    n_top = int(bits[: places + 1], 2)
    lower = Fraction(n_top, 2**places)
    upper = Fraction(n_top + 1, 2**places)
    decimal = _common_decimal_prefix(lower, upper)
    checks = {}
    for term in track.terms + [track.successor]:
        checks[term.t] = (lower * 2 ** (term.t - 1)).__floor__() == term.n
    shown = bits[: digits + 1]
    return CloitreConstant(shown[0] + "." + shown[1:], decimal, lower, upper, checks)


def _common_decimal_prefix(lo: Fraction, hi: Fraction, max_places: int = 30) -> str:
    """Decimal digits shared by every number in [lo, hi)."""
    a, b = int(lo), int(hi)
    if a != b:
        return str(a)
    out = str(a) + "."
    lo, hi = lo - a, hi - a
    for _ in range(max_places):
        lo, hi = lo * 10, hi * 10
        da, db = int(lo), int(hi - Fraction(1, 10**40))
        if da != db:
            break
        out += str(da)
        lo, hi = lo - da, hi - da
    return out.rstrip(".")


# ---------------------------------------------------------------- v_2 profiles

# Each branch: (lower, upper, label); x = n * 2^a / 2^t lies in [lower, upper).
_V24_RANGES = [(32, 48, 1), (48, 56, 2), (56, 57, 3), (57, 58, 4), (58, 60, 5), (60, 64, 6)]
# merged branches per t: label -> label that replaces it
V24_MERGES = {1: {3: 6, 4: 6, 5: 6}, 2: {4: 3, 5: 3}, 3: {4: 3}}
V24_DELTA = {2: 5}
V24_DELTA_DEFAULT = 6
_V34_RANGES = [(8, 12, 1), (12, 14, 2), (14, 15, 3), (15, 16, 4)]
V34_MERGES = {1: {3: 4}}
_VS4_RANGES = [(4, 6, 1), (6, 7, 2), (7, 8, 3)]
V25_MERGE_FROM = 4
_V25_RANGES = [(16, 17, 1), (17, 18, 2), (18, 20, 3), (20, 24, 4), (24, 28, 5), (28, 32, 6)]


@dataclass(frozen=True)
class ProfileRecord:
    s: int
    l: int
    n: int
    t: int
    branch: str
    predicted: int
    observed: int

    @property
    def match(self) -> bool:
        return self.predicted == self.observed


def _branch(x: Fraction, ranges) -> int:
    for lo, hi, label in ranges:
        if lo <= x < hi:
            return label
    raise AssertionError(f"{x} outside the profile ranges")


def predicted_v2(s: int, l: int, n: int) -> tuple[int, int, str]:
    """(t, predicted v_2(H({s}^l;n)), branch label) from the closed-form tables."""
    if s < 1 or l < 1 or l > 5:
        raise NotApplicable("profiles are tabulated for 1 <= l <= 5")
    if n < l:
        raise NotApplicable("H vanishes for n < l")
    if l == 1:
        t = level_of(n, 2)
        return t, -(t - 1) * s, "G_t"
    if s < 2:
        raise NotApplicable("profiles for l >= 2 need s >= 2")
    t = level_of(n, 2) - 2
    eps = parity_exponent(s - 1)
    if l == 2:
        x = Fraction(n, 2**t)
        if 2 <= x < 3:
            return t, -(2 * t + 1) * s, "1"
        return t, eps - (2 * t + 1) * s, "2"
    if l == 3:
        x = Fraction(2 * n, 2**t)
        if 4 <= x < 5:
            return t, eps - 3 * t * s, "1"
        if 5 <= x < 6:
            return t, -3 * t * s, "2"
        return t, -(3 * t + 1) * s, "3"
    if t < 1:
        raise NotApplicable("l >= 4 tables start at t = 1")
    if l == 4:
        if s == 2:
            b = _branch(Fraction(16 * n, 2**t), _V24_RANGES)
            b = V24_MERGES.get(t, {}).get(b, b)
            delta = V24_DELTA.get(t, V24_DELTA_DEFAULT)
            value = {1: -2 * (4 * t - 1), 2: -8 * t, 3: -8 * t + delta, 4: -8 * t + 7,
                     5: -2 * (4 * t - 2), 6: -2 * (4 * t - 1)}[b]
            return t, value, str(b)
        if s == 3:
            b = _branch(Fraction(4 * n, 2**t), _V34_RANGES)
            b = V34_MERGES.get(t, {}).get(b, b)
            value = {1: -3 * (4 * t - 1), 2: -12 * t, 3: -3 * (4 * t - 1),
                     4: -3 * (4 * t - 1) + 1}[b]
            return t, value, str(b)
        b = _branch(Fraction(2 * n, 2**t), _VS4_RANGES)
        value = {1: -s * (4 * t - 1), 2: -4 * s * t, 3: -4 * s * t + 2 * eps}[b]
        return t, value, str(b)
    b = _branch(Fraction(8 * n, 2**t), _V25_RANGES)
    # (2) folds into (1) from s = 4 on; at s = 3 the offsets differ (4 against 3)
    if s >= V25_MERGE_FROM and b == 2:
        b = 1
    value = {1: -s * (5 * t - 3) + 2 * eps, 2: -s * (5 * t - 3) + 3, 3: -s * (5 * t - 3),
             4: -s * (5 * t - 2), 5: -s * (5 * t - 1), 6: -s * (5 * t - 1) + 1}[b]
    return t, value, str(b)


def v2_profile_check(s: int, l: int, n: int) -> ProfileRecord:
    t, predicted, branch = predicted_v2(s, l, n)
    observed = mhs_padic(Composition.repeat(s, l), n, 2).valuation
    return ProfileRecord(s, l, n, t, branch, predicted, observed)


def v2_profile_sweep(s: int, l: int, n_max: int) -> list[ProfileRecord]:
    """Every covered n <= n_max, observed through one 2-adic sweep."""
    from .mhs import PadicSweep, default_precision

    comp = Composition.repeat(s, l)
    sweep = PadicSweep(comp, 2, n_max, default_precision(comp))
    out = []
    for n in sweep:
        try:
            t, predicted, branch = predicted_v2(s, l, n)
        except NotApplicable:
            continue
        out.append(ProfileRecord(s, l, n, t, branch, predicted, sweep.valuation()))
    return out


def profile_csv(records: list[ProfileRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s", "l", "n", "t", "branch", "predicted", "observed", "match"])
    for r in records:
        writer.writerow([r.s, r.l, r.n, r.t, r.branch, r.predicted, r.observed, int(r.match)])
    return buf.getvalue()


# ---------------------------------------------------------------- branching heuristic


def offspring_law(p: int) -> tuple[Fraction, Fraction, Fraction]:
    """Probabilities of 0, 1 and 2 offspring: q, 1/p, q with q = (p-1)/(2p)."""
    q = Fraction(p - 1, 2 * p)
    return q, Fraction(1, p), q


def offspring_mean(p: int) -> Fraction:
    q0, q1, q2 = offspring_law(p)
    return q1 + 2 * q2


@dataclass
class SimulationResult:
    p: int
    generations: int
    trials: int
    seed: int
    offspring_mean: Fraction
    extinct_fraction: np.ndarray

    def summary(self, points: int = 20) -> dict:
        g = self.generations
        idx = sorted({0, g} | {round(g * k / points) for k in range(points + 1)})
        return {
            "p": self.p,
            "generations": g,
            "trials": self.trials,
            "seed": self.seed,
            "offspring_mean": str(self.offspring_mean),
            "extinct_fraction": {str(i): float(self.extinct_fraction[i]) for i in idx},
        }


SIM_BLOCK = 1000


def branching_simulation(p: int, generations: int, trials: int, seed: int = 20240601,
                         workers: int = 1) -> SimulationResult:
    """Critical Galton-Watson process from one ancestor per trial.

    Trials run in blocks of ``SIM_BLOCK``, each with its own PCG64 stream spawned from
    ``seed``, so results do not depend on how blocks are distributed over workers.
    """
    if generations < 1 or trials < 1:
        raise ValueError("generations and trials must be positive")
    probs = [float(x) for x in offspring_law(p)]
    children = np.random.SeedSequence(seed).spawn((trials + SIM_BLOCK - 1) // SIM_BLOCK)
    sizes = [min(SIM_BLOCK, trials - i * SIM_BLOCK) for i in range(len(children))]
    tasks = [(c, n, probs, generations) for c, n in zip(children, sizes)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_simulate_block, tasks))
    else:
        blocks = [_simulate_block(t) for t in tasks]
    extinct = np.sum(blocks, axis=0) / trials
    return SimulationResult(p, generations, trials, seed, offspring_mean(p), extinct)


def _simulate_block(task) -> np.ndarray:
    seq, n, probs, generations = task
    rng = np.random.Generator(np.random.PCG64(seq))
    alive = np.ones(n, dtype=np.int64)
    extinct = np.zeros(generations + 1, dtype=np.int64)
    for g in range(1, generations + 1):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            extinct[g:] = n
            break
        draws = rng.multinomial(alive[idx], probs)
        alive[idx] = draws[:, 1] + 2 * draws[:, 2]
        extinct[g] = n - np.count_nonzero(alive)
    return extinct
