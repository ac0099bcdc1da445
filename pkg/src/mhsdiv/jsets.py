"""p-divisible sets J(s|p) = {0} u {n >= l : p | numerator of H(s;n)}.

Length-one compositions are handled by a branching search over the levels G_t:
a child p*N + r can only lie in J(s|p) when its parent N lies in J(s|p^s), and
its value is ``H*(s; pN+r) + p^-s H(s;N)``.  The coprime part is evaluated for
arbitrarily large N through the expansion

    H*(s; pN + r) = sum_i C(-s,i) p^i [ S_i(N) H(s+i; p-1) + N^i H(s+i; r) ]

with S_i(N) = sum_{m<N} m^i written as a Faulhaber polynomial, truncated once the
p^i factor exceeds the working precision.  Longer compositions are certified
through the valuation criterion on a single block G_tau, computed by one sweep.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

from .errors import BudgetExceeded, InconsistencyError, PrecisionUnderflow
from .exact import bernoulli_exact, rational_mod
from .mhs import (Composition, PadicSweep, default_precision, level_of, max_index_valuation)

FINITE_CERTIFIED = "FiniteCertified"
FINITE_EMPTY_TAIL = "FiniteEmptyTail"
UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Budget:
    max_level: int = 64
    max_index: int = 10**7
    max_nodes: int = 10**5
    max_exact_n: int = 10**6

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 1:
                raise ValueError(f"budget {name} must be positive")


DEFAULT_BUDGET = Budget()


@dataclass
class JSetReport:
    composition: Composition
    prime: int
    levels: dict[int, list[int]]
    verdict: str
    certificate: dict
    budget: dict

    @property
    def elements(self) -> list[int]:
        return sorted(n for t in self.levels for n in self.levels[t])

    @property
    def is_finite(self) -> bool:
        return self.verdict in (FINITE_CERTIFIED, FINITE_EMPTY_TAIL)

    def to_dict(self) -> dict:
        return {
            "composition": list(self.composition.parts),
            "prime": self.prime,
            "verdict": self.verdict,
            "certificate": self.certificate,
            "levels": {str(t): self.levels[t] for t in sorted(self.levels)},
            "elements": self.elements,
            "budget": self.budget,
        }


@dataclass(frozen=True)
class BranchNode:
    n: int
    level: int
    psi: Optional[int]
    depth_valuation: int
    valuation_exact: bool = True


@dataclass(frozen=True)
class CriterionRecord:
    composition: Composition
    prime: int
    tau: int
    t0: int
    min_part: int
    f: int
    threshold: int
    passes: bool
    witness: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["composition"] = list(self.composition.parts)
        return d


def group_by_level(elements, p: int) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {0: [0]}
    for n in sorted(set(elements)):
        if n:
            out.setdefault(level_of(n, p), []).append(n)
    return out


# ---------------------------------------------------------------- level one


def compute_J1(s: int, p: int, e: int = 1) -> list[int]:
    """r in [1, p-1] with p^e dividing the numerator of H(s;r)."""
    mod = p**e
    acc = 0
    out = []
    for r in range(1, p):
        acc = (acc + pow(r, -s, mod)) % mod
        if acc == 0:
            out.append(r)
    return out


# ---------------------------------------------------------------- expansion tables


class StarExpansion:
    """Residues of H*(s; pN + r) and H(s; n) modulo p^K for arbitrarily large indices."""

    def __init__(self, s: int, p: int, K: int):
        if p == 2:
            raise ValueError("the coprime expansion needs an odd prime")
        self.s, self.p, self.K = s, p, K
        mod = self.mod = p**K
        # H(s+i; r) mod p^K for r < p, i < K
        inv = [0] + [pow(j, -1, mod) for j in range(1, p)]
        base = [0] + [pow(inv[j], s, mod) for j in range(1, p)]
        rows = []
        cur = base[:]
        for i in range(K):
            row = [0] * p
            acc = 0
            for r in range(1, p):
                acc += cur[r]
                row[r] = acc % mod
            rows.append(row)
            cur = [0] + [cur[j] * inv[j] % mod for j in range(1, p)]
        self.partial = rows
        binoms = [(-1) ** i * math.comb(s + i - 1, i) for i in range(K)]
        # T_r(N) = sum_i C(-s,i) p^i H(s+i;r) N^i, stored per r as coefficient lists
        self.tail = [[binoms[i] * p**i * rows[i][r] % mod for i in range(K)] for r in range(p)]
        # F(N) = sum_i C(-s,i) H(s+i;p-1) p^i S_i(N) with S_i(N) = sum_{m<N} m^i
        coeffs = [0] * (K + 1)
        for i in range(K):
            w = binoms[i] * rows[i][p - 1] % mod
            if w == 0:
                continue
            for j, c in enumerate(_faulhaber_scaled(i, p)):
                coeffs[i + 1 - j] = (coeffs[i + 1 - j] + w * rational_mod(c, mod)) % mod
        self.full = coeffs
        by_residue: dict[int, list[int]] = {}
        for r in range(p):
            by_residue.setdefault(rows[0][r] % p, []).append(r)
        self.by_residue = by_residue

    @staticmethod
    def _horner(coeffs, x, mod):
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * x + c) % mod
        return acc

    def coprime_block(self, N: int) -> int:
        """H*(s; pN) mod p^K."""
        return self._horner(self.full, N % self.mod, self.mod)

    def coprime_tail(self, N: int, r: int) -> int:
        """sum_{j<=r} (pN + j)^-s mod p^K."""
        return self._horner(self.tail[r], N % self.mod, self.mod)

    def star(self, n: int) -> int:
        N, r = divmod(n, self.p)
        return (self.coprime_block(N) + self.coprime_tail(N, r)) % self.mod


@lru_cache(maxsize=None)
def _faulhaber_scaled(i: int, p: int) -> tuple[Fraction, ...]:
    """Coefficients c_j of p^i S_i(N) = sum_j c_j N^(i+1-j); each is p-integral for odd p."""
    out = []
    for j in range(i + 1):
        c = Fraction(p**i * math.comb(i + 1, j)) * bernoulli_exact(j) / (i + 1)
        if c and c.denominator % p == 0:
            raise ArithmeticError(f"non-integral Faulhaber coefficient at i={i}, j={j}, p={p}")
        out.append(c)
    return tuple(out)


@lru_cache(maxsize=64)
def _expansion(s: int, p: int, K: int) -> StarExpansion:
    return StarExpansion(s, p, K)


def mhs1_residue(s: int, p: int, n: int, e: int) -> tuple[int, int]:
    """H(s;n) modulo p^e via H(s;n) = H*(s;n) + p^-s H(s; n//p).

    Returns ``(value mod p^e, e)``; raises ValueError if H(s;n) is not p-integral.
    """
    if n == 0:
        return 0, e
    t = level_of(n, p)
    K = e + s * t
    exp = _expansion(s, p, K)
    mod = p**K
    value = 0
    chain = []
    m = n
    while m:
        chain.append(m)
        m //= p
    # each step divides by p^s, so K - s*(steps-1) >= e digits survive
    for m in reversed(chain):
        if value % p**s:
            raise ValueError(f"H({s};{m // p}) is not divisible by {p}^{s}, "
                             f"so H({s};{n}) is not {p}-integral")
        value = (exp.star(m) + value // p**s) % mod
    return value % p**e, e


def psi(s: int, p: int, n: int) -> int:
    """The residue of p^-s H(s;n) mod p, defined for n in J(s|p^s)."""
    if n == 0:
        return 0
    try:
        value, _ = mhs1_residue(s, p, n, s + 1)
    except ValueError:
        raise ValueError(f"psi undefined: {n} not in J({s}|{p}^{s})") from None
    if value % p**s:
        raise ValueError(f"psi undefined: {n} not in J({s}|{p}^{s})")
    return value // p**s


def lemma_applies(s: int, p: int) -> bool:
    """p odd with p-1 dividing neither s nor s+1."""
    return p > 2 and s % (p - 1) != 0 and (s + 1) % (p - 1) != 0


class _NeedPrecision(Exception):
    pass


def branch_search_depth1(s: int, p: int, max_level: int | None = None,
                         budget: Budget = DEFAULT_BUDGET, verify: bool = True) -> JSetReport:
    """J(s|p) level by level through the branching process.

    Verdict FiniteEmptyTail once some level has no member of J(s|p^s); Undetermined
    when the level or node budget runs out first.
    """
    max_level = budget.max_level if max_level is None else max_level
    K = s * (min(max_level, 8) + 1) + 2
    while True:
        try:
            report, nodes = _branch(s, p, max_level, budget, K)
            break
        except _NeedPrecision:
            K *= 2
    if verify:
        _verify_emitted(Composition((s,)), p, report.elements)
    report.certificate["nodes"] = len(nodes)
    report.certificate["precision_digits"] = K
    return report


def _branch(s: int, p: int, max_level: int, budget: Budget, K: int):
    comp = Composition((s,))
    ps = p**s
    levels: dict[int, list[int]] = {0: [0]}
    nodes: list[BranchNode] = []
    check_lemma = lemma_applies(s, p)
    eps = 1 if (s - 1) % 2 else 2
    budget_info = {"max_level": max_level, "max_nodes": budget.max_nodes}
    # frontier entries: (n, H(s;n) mod p^prec, prec) for n in J(s|p^s)
    mod = p**K
    frontier: list[tuple[int, int, int]] = []
    level1 = []
    acc = 0
    for r in range(1, p):
        acc = (acc + pow(r, -s, mod)) % mod
        if acc % p == 0:
            level1.append((r, acc, K))
    t = 1
    current = level1
    exp = None
    while True:
        if current:
            levels[t] = [n for n, _, _ in current]
        frontier = []
        for n, value, prec in current:
            in_pp = prec >= s and value % ps == 0
            if value % p**prec == 0 and prec < s + 1:
                raise _NeedPrecision
            v = _val(value, p, prec)
            nodes.append(BranchNode(n, t, (value // ps) % p if in_pp and prec > s else None,
                                    v, v < prec))
            if in_pp:
                if prec < s + 1:
                    raise _NeedPrecision
                frontier.append((n, value, prec))
        if len(nodes) > budget.max_nodes:
            return JSetReport(comp, p, levels, UNDETERMINED,
                              {"reason": "node budget exhausted", "levels_complete": t},
                              budget_info), nodes
        if not frontier:
            return JSetReport(comp, p, levels, FINITE_EMPTY_TAIL,
                              {"empty_level": t, "modulus": f"{p}^{s}",
                               "method": "branching"}, budget_info), nodes
        if t >= max_level:
            return JSetReport(comp, p, levels, UNDETERMINED,
                              {"reason": "level budget exhausted", "levels_complete": t,
                               "open_nodes": len(frontier)}, budget_info), nodes
        if exp is None:
            if p == 2:
                raise InconsistencyError("J(s|2^s) has a member at level 1")
            exp = _expansion(s, p, K)
        nxt = []
        for N, value, prec in frontier:
            cprec = prec - s
            cmod = p**cprec
            block = exp.coprime_block(N)
            if check_lemma and cprec >= eps and block % p**eps:
                raise InconsistencyError(
                    f"H*({s};{p * N}) not divisible by {p}^{eps} although {p}-1 divides "
                    f"neither {s} nor {s + 1}")
            base = (block + value // ps) % cmod
            for r in exp.by_residue.get((-base) % p, ()):
                child = (base + exp.coprime_tail(N, r)) % cmod
                if check_lemma and (exp.partial[0][r] + value // ps) % p:
                    raise InconsistencyError("branching congruence violated")
                nxt.append((p * N + r, child, cprec))
        nxt.sort()
        current = nxt
        t += 1


def _val(value: int, p: int, prec: int) -> int:
    if value == 0:
        return prec
    v = 0
    while value % p == 0 and v < prec:
        value //= p
        v += 1
    return v


def _verify_emitted(comp: Composition, p: int, elements, sweep_limit: int = 200_000) -> None:
    """Recheck every reported member at higher precision by an independent route."""
    elements = [n for n in elements if n]
    if not elements:
        return
    small = [n for n in elements if n <= sweep_limit]
    if small:
        sweep = PadicSweep(comp, p, max(small), default_precision(comp) * 2)
        for n in small:
            sweep.advance(n)
            if n >= comp.length and not sweep.divisible(1):
                raise InconsistencyError(f"{n} reported in J({comp}|{p}) but fails recheck")
    if comp.length == 1:
        s = comp.parts[0]
        for n in elements:
            if n > sweep_limit:
                value, _ = mhs1_residue(s, p, n, 2)
                if value % p:
                    raise InconsistencyError(f"{n} reported in J({comp}|{p}) but fails recheck")


# ---------------------------------------------------------------- criterion


def base_level(l: int, p: int) -> int:
    """t0 with l in G_t0."""
    return level_of(l, p)


def criterion_threshold(comp: Composition, tau: int) -> int:
    m = comp.min_part
    return (comp.weight - m) * (tau - 1) - m


def criterion_check(s, p: int, tau: int, budget: Budget = DEFAULT_BUDGET,
                    digits: int | None = None) -> CriterionRecord:
    """f(s,p;tau) = min_{n in G_tau} -v_p(H(s;n)) against (|s|-m)(tau-1)-m."""
    comp = Composition.of(s)
    if comp.length < 2:
        raise ValueError("the criterion applies to length >= 2")
    t0 = base_level(comp.length, p)
    if tau <= t0:
        raise ValueError(f"tau must exceed t0={t0}")
    cost = p**tau
    if cost - 1 > budget.max_index:
        raise BudgetExceeded(f"criterion sweep needs {cost} indices (budget {budget.max_index})",
                             cost=cost)
    digits = default_precision(comp) if digits is None else digits
    res = _scan_with_retry(comp, p, cost - 1, digits)
    v, witness = res.level_max[tau]
    f = -v
    thr = criterion_threshold(comp, tau)
    return CriterionRecord(comp, p, tau, t0, comp.min_part, f, thr, f > thr, witness)


def _scan_with_retry(comp, p, n_max, digits, retries=1):
    for attempt in range(retries + 1):
        try:
            sweep = PadicSweep(comp, p, n_max, digits)
            return sweep.scan(n_max)
        except PrecisionUnderflow:
            if attempt == retries:
                raise
            digits *= 2


def enumerate_J_direct(s, p: int, n_max: int, budget: Budget = DEFAULT_BUDGET,
                       digits: int | None = None) -> list[int]:
    """All n <= n_max in J(s|p), by one sweep and a recheck of the hits."""
    comp = Composition.of(s)
    if n_max > budget.max_index:
        raise BudgetExceeded(f"enumeration to {n_max} exceeds budget {budget.max_index}",
                             cost=n_max)
    digits = default_precision(comp) if digits is None else digits
    if n_max < comp.length:
        return [0]
    res = _scan_with_retry(comp, p, n_max, digits)
    hits = list(res.hits)
    _recheck_hits(comp, p, hits, digits * 2)
    return [0] + hits


def _recheck_hits(comp, p, hits, digits):
    if not hits:
        return
    sweep = PadicSweep(comp, p, max(hits), digits)
    for n in hits:
        sweep.advance(n)
        if not sweep.divisible(1):
            raise InconsistencyError(f"hit {n} for J({comp}|{p}) fails the recheck")


def finiteness_verdict(s, p: int, budget: Budget = DEFAULT_BUDGET) -> JSetReport:
    comp = Composition.of(s)
    if comp.length == 1:
        return branch_search_depth1(comp.parts[0], p, budget=budget)
    budget_info = {"max_index": budget.max_index}
    if p == 2 and comp.length == 2 and comp.parts[1] == 1:
        # the dyadic track keeps v_2 at or above -s(t-1)+1 on every level, so f never
        # clears the threshold s(t-1)-1
        return JSetReport(comp, p, {0: [0]}, UNDETERMINED,
                          {"reason": "criterion cannot apply to (s,1) at p=2",
                           "see": "seq"}, budget_info)
    t0 = base_level(comp.length, p)
    tau_max = max_index_valuation(budget.max_index + 1, p)
    if tau_max <= t0:
        raise BudgetExceeded(f"budget {budget.max_index} cannot reach level {t0 + 1}",
                             cost=p ** (t0 + 1))
    n_max = p**tau_max - 1
    digits = default_precision(comp)
    for attempt in range(2):
        try:
            sweep = PadicSweep(comp, p, n_max, digits)
            for tau in range(1, tau_max + 1):
                res = sweep.scan(p**tau - 1)
                if tau <= t0:
                    continue
                v, witness = res.level_max[tau]
                f, thr = -v, criterion_threshold(comp, tau)
                if f > thr:
                    hits = list(res.hits)
                    _recheck_hits(comp, p, hits, digits * 2)
                    cert = {"method": "criterion", "tau": tau, "t0": t0, "f": f,
                            "threshold": thr, "witness": witness,
                            "enumerated_to": p**tau - 1}
                    return JSetReport(comp, p, group_by_level(hits, p), FINITE_CERTIFIED,
                                      cert, budget_info)
            break
        except PrecisionUnderflow:
            if attempt:
                raise
            digits *= 2
    hits = list(res.hits)
    _recheck_hits(comp, p, hits, digits * 2)
    return JSetReport(comp, p, group_by_level(hits, p), UNDETERMINED,
                      {"reason": "budget exhausted", "explored_to": n_max,
                       "last_tau": tau_max}, budget_info)


def i_set_member(s: int, p: int, n: int) -> bool:
    """n in I(s|p): p does not divide the reduced denominator of H(s;n)."""
    if n == 0:
        return True
    sweep = PadicSweep((s,), p, n, default_precision((s,)))
    sweep.advance(n)
    return sweep.valuation() >= 0
