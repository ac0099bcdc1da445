"""Wolstenholme-type congruences, halfway points and reserved-set density scans."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

from sympy import isprime, primerange

from .errors import BudgetExceeded, NotApplicable
from .exact import bernoulli_mod_p, rational_mod
from .jsets import DEFAULT_BUDGET, Budget, compute_J1, enumerate_J_direct, finiteness_verdict
from .mhs import Composition, mhs_padic, mhs_star_residue
from .reserved import reserved_set

HOLDS = "holds"
FAILS = "fails"
NOT_APPLICABLE = "not-applicable"


def parity_exponent(m: int) -> int:
    """1 for odd m, 2 for even m."""
    return 1 if m % 2 else 2


@dataclass
class CongruenceRecord:
    name: str
    params: dict
    status: str
    modulus_exponent: Optional[int] = None
    observed_valuation: Optional[int] = None
    detail: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    @property
    def applicable(self) -> bool:
        return self.status != NOT_APPLICABLE

    def to_dict(self) -> dict:
        return asdict(self)


def residues_below_p(s, p: int, n_max: int, e: int) -> list[int]:
    """H(s;r) mod p^e for r = 0..n_max; requires n_max < p so every term is a unit."""
    comp = Composition.of(s)
    if n_max >= p:
        raise ValueError("n_max must be below p")
    mod = p**e
    acc = [1] + [0] * comp.length
    out = [0]
    for k in range(1, n_max + 1):
        for j in range(comp.length, 0, -1):
            acc[j] = (acc[j] + acc[j - 1] * pow(k, -comp.parts[j - 1], mod)) % mod
        out.append(acc[comp.length])
    return out


def valuation_capped(x: int, p: int, cap: int) -> int:
    x %= p**cap
    if x == 0:
        return cap
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def homogeneous_hypothesis(s: int, l: int, p: int) -> bool:
    """p odd, p >= l+2 and p-1 dividing none of ks, ks+1 for k = 1..l."""
    if p == 2 or p < l + 2:
        return False
    return all((k * s) % (p - 1) and (k * s + 1) % (p - 1) for k in range(1, l + 1))


def wolstenholme_check(s: int, l: int, p: int) -> CongruenceRecord:
    """H({s}^l; p-1) = 0 mod p (ls even) or mod p^2 (ls odd)."""
    params = {"s": s, "l": l, "p": p}
    e = parity_exponent(l * s - 1)
    if not homogeneous_hypothesis(s, l, p):
        return CongruenceRecord("wolstenholme", params, NOT_APPLICABLE, e)
    cap = e + 3
    value = residues_below_p(Composition.repeat(s, l), p, p - 1, cap)[p - 1]
    v = valuation_capped(value, p, cap)
    return CongruenceRecord("wolstenholme", params, HOLDS if v >= e else FAILS, e, v,
                            {"valuation_capped_at": cap})


def hstar_check(s: int, l: int, p: int, n: int) -> CongruenceRecord:
    """H*({s}^l; pn) = 0 mod p^e with e = 1 for ls even, 2 for ls odd."""
    params = {"s": s, "l": l, "p": p, "n": n}
    e = parity_exponent(l * s - 1)
    if not homogeneous_hypothesis(s, l, p) or n < 1:
        return CongruenceRecord("hstar", params, NOT_APPLICABLE, e)
    cap = e + 3
    value = mhs_star_residue(Composition.repeat(s, l), p * n, p, cap)
    v = valuation_capped(value, p, cap)
    return CongruenceRecord("hstar", params, HOLDS if v >= e else FAILS, e, v,
                            {"valuation_capped_at": cap})


def j1_symmetry_check(s: int, p: int) -> CongruenceRecord:
    """r in J_1(s|p) iff p-1-r in J_1(s|p), for r in 1..p-2."""
    params = {"s": s, "p": p}
    if p == 2:
        return CongruenceRecord("j1_symmetry", params, NOT_APPLICABLE)
    members = set(compute_J1(s, p, 1))
    bad = [r for r in range(1, p - 1) if (r in members) != ((p - 1 - r) in members)]
    return CongruenceRecord("j1_symmetry", params, FAILS if bad else HOLDS,
                            detail={"J1": sorted(members), "asymmetric": bad})


# ---------------------------------------------------------------- halfway point


def reduced_exponent(s: int, p: int) -> int:
    """n in [1, p-2] with n = s mod (p-1); raises when p-1 divides s."""
    n = s % (p - 1)
    if n == 0:
        raise NotApplicable(f"{p}-1 divides {s}")
    return n


@dataclass
class HalfwayRecord:
    s: int
    p: int
    n: int
    case: str
    status: str
    congruence_value: Optional[int] = None
    direct_value: Optional[int] = None
    modulus_exponent: int = 1
    in_J1: Optional[bool] = None
    irregular_link: Optional[tuple[int, int]] = None
    wieferich: Optional[bool] = None

    @property
    def congruence_zero(self) -> bool:
        return self.congruence_value == 0

    def to_dict(self) -> dict:
        return asdict(self)


def _halfway_direct(s: int, p: int, e: int) -> int:
    return residues_below_p((s,), p, (p - 1) // 2, e)[(p - 1) // 2]


def halfway_classify(s: int, p: int) -> HalfwayRecord:
    """Compare H(s;(p-1)/2) with its Bernoulli closed form."""
    if p < 3 or not isprime(p):
        raise ValueError("p must be an odd prime")
    try:
        n = reduced_exponent(s, p)
    except NotApplicable:
        return HalfwayRecord(s, p, 0, "p-1 | s", NOT_APPLICABLE)
    if n == 1:
        case = "n=1"
    else:
        case = "odd n>1" if n % 2 else "even n"
    if n >= p - 3:
        # outside the closed form, but membership is still a plain fact
        return HalfwayRecord(s, p, n, case, NOT_APPLICABLE,
                             in_J1=_halfway_direct(s, p, 1) == 0)
    if n == 1:
        e = 1
        closed = (2 - pow(2, p, p * p)) % (p * p) // p % p
    elif n % 2:
        e = 1
        b = bernoulli_mod_p(p - n, p).value
        closed = rational_mod(Fraction(2 - 2**n, n) * b, p)
    else:
        e = 2
        b = bernoulli_mod_p(p - n - 1, p).value
        # sign as observed on every p <= 500: n(2^(n+1)-1) / (2(n+1)) * p B_(p-n-1)
        closed = p * rational_mod(Fraction(n * (2 ** (n + 1) - 1), 2 * (n + 1)) * b, p)
    direct = _halfway_direct(s, p, e)
    rec = HalfwayRecord(s, p, n, case, HOLDS if direct == closed else FAILS, closed, direct, e,
                        in_J1=direct % p == 0)
    if n == 1:
        rec.wieferich = closed == 0
    elif n % 2:
        if bernoulli_mod_p(p - n, p).value == 0:
            rec.irregular_link = (p, p - n)
    elif bernoulli_mod_p(p - n - 1, p).value == 0:
        rec.irregular_link = (p, p - n - 1)
    return rec


def halfway_p2_check(s: int, p: int) -> CongruenceRecord:
    """When does p^2 divide H(s;(p-1)/2)?  Equivalence for even n, sufficiency for odd n."""
    params = {"s": s, "p": p}
    if p < 3 or s % (p - 1) == 0:
        return CongruenceRecord("halfway_p2", params, NOT_APPLICABLE, 2)
    n = s % (p - 1)
    if n < 2 or n >= p - 4:
        return CongruenceRecord("halfway_p2", params, NOT_APPLICABLE, 2, detail={"n": n})
    value = _halfway_direct(s, p, 3)
    v = valuation_capped(value, p, 3)
    divisible = v >= 2
    detail = {"n": n, "p2_divides": divisible}
    if n % 2 == 0:
        irregular = bernoulli_mod_p(p - n - 1, p).value == 0
        mersenne = (2 ** (n + 1) - 1) % p == 0
        condition = irregular or mersenne
        detail.update(irregular_pair=irregular, p_divides_2_pow=mersenne, condition=condition)
        status = HOLDS if condition == divisible else FAILS
    else:
        fermat = (2**n - 2) % p == 0
        irregular = bernoulli_mod_p(p - n, p).value == 0
        detail.update(irregular_pair=irregular, p_divides_2_pow=fermat)
        if not (fermat and irregular):
            return CongruenceRecord("halfway_p2", params, NOT_APPLICABLE, 2, v, detail)
        status = HOLDS if divisible else FAILS
    return CongruenceRecord("halfway_p2", params, status, 2, v, detail)


def j12sd_membership(s: int, l: int, p: int) -> CongruenceRecord:
    """{p-1, j+(p-1)/2 : j < l} lies in J_1({2s}^l | p) for p > 2ls+1."""
    params = {"s": s, "l": l, "p": p}
    if p <= 2 * l * s + 1:
        return CongruenceRecord("j12sd", params, NOT_APPLICABLE)
    values = residues_below_p(Composition.repeat(2 * s, l), p, p - 1, 1)
    claimed = sorted({p - 1} | {j + (p - 1) // 2 for j in range(l)})
    members = {r: values[r] == 0 and r >= l for r in claimed}
    ok = all(members.values())
    return CongruenceRecord("j12sd", params, HOLDS if ok else FAILS, 1,
                            detail={"claimed": claimed, "members": {str(k): v for k, v in members.items()}})


def _ones_residue(l: int, n: int, p: int, e: int) -> int:
    """H(1^l; n) mod p^e; raises if the value is not p-integral."""
    if n < l:
        return 0
    x = mhs_padic(Composition.repeat(1, l), n, p, e + l + 2)
    return x.residue(e)


def h1l_2p_congruences(l: int, p: int) -> CongruenceRecord:
    """H(1^l; p-1), H(1^l; p) and H(1^l; 2p-1) against their Bernoulli forms."""
    params = {"l": l, "p": p}
    if p < l + 3 or p == 2:
        return CongruenceRecord("h1l_2p", params, NOT_APPLICABLE)
    checks = {}

    def bern(m):
        return bernoulli_mod_p(m, p).value

    # H(1^l; p-1) and the single-sum form H(l; p-1) / ((-1)^(l-1) l)
    if l % 2 == 0:
        e, target = 2, p * rational_mod(Fraction(-1, l + 1) * bern(p - l - 1), p)
    else:
        e, target = 3, p * p * rational_mod(Fraction(-(l + 1), 2 * l + 4) * bern(p - l - 2), p)
    mod = p**e
    h = _ones_residue(l, p - 1, p, e)
    single = residues_below_p((l,), p, p - 1, e)[p - 1]
    single = single * pow((-1) ** (l - 1) * l, -1, mod) % mod
    checks["p-1"] = {"modulus": f"{p}^{e}", "value": h, "closed_form": target,
                     "single_sum": single, "ok": h == target == single}
    if l >= 2:
        if l % 2 == 0:
            e, target = 2, p * rational_mod(Fraction(-(l + 2), 2 * (l + 1)) * bern(p - l - 1), p)
        else:
            e, target = 1, rational_mod(Fraction(-1, l) * bern(p - l), p)
        h = _ones_residue(l, p, p, e)
        checks["p"] = {"modulus": f"{p}^{e}", "value": h, "closed_form": target,
                       "ok": h == target}
        if l % 2 == 0:
            e, target = 2, p * rational_mod(-2 * bern(p - l - 1), p)
        else:
            e, target = 1, rational_mod(Fraction(-2, l) * bern(p - l), p)
        h = _ones_residue(l, 2 * p - 1, p, e)
        checks["2p-1"] = {"modulus": f"{p}^{e}", "value": h, "closed_form": target,
                          "ok": h == target, "divisible_by_p": h % p == 0}
    ok = all(c["ok"] for c in checks.values())
    return CongruenceRecord("h1l_2p", params, HOLDS if ok else FAILS, detail=checks)


def h121_2p_check(p: int) -> bool:
    """p divides the numerator of H(1,2,1; 2p-1)."""
    if p < 7:
        raise NotApplicable("needs p >= 7")
    x = mhs_padic((1, 2, 1), 2 * p - 1, p, 6)
    return x.is_zero or x.valuation >= 1


# ---------------------------------------------------------------- density


@dataclass
class DensityStat:
    composition: Composition
    X: int
    mode: str
    levels: Optional[int]
    reserved_count: int
    prime_count: int
    undetermined_count: int
    density: Fraction
    ledger: dict[int, dict]

    def to_dict(self) -> dict:
        return {
            "composition": list(self.composition.parts),
            "X": self.X,
            "mode": self.mode,
            "levels": self.levels,
            "reserved_count": self.reserved_count,
            "prime_count": self.prime_count,
            "undetermined_count": self.undetermined_count,
            "density": str(self.density),
            "density_float": float(self.density),
            "ledger": {str(p): self.ledger[p] for p in sorted(self.ledger)},
        }


def first_levels_set(s, p: int, m: int, budget: Budget = DEFAULT_BUDGET) -> list[int]:
    """{0} together with J_1(s|p), ..., J_m(s|p)."""
    comp = Composition.of(s)
    if m == 1:
        if comp.length == 1 and p > 2:
            return [0] + compute_J1(comp.parts[0], p, 1)
        values = residues_below_p(comp, p, p - 1, 1)
        return [0] + [r for r in range(max(comp.length, 1), p) if values[r] == 0]
    return enumerate_J_direct(comp, p, p**m - 1, budget)


def _density_entry(args):
    comp, p, mode, m, budget = args
    rs = reserved_set(comp, validate=False)
    if mode == "full":
        report = finiteness_verdict(comp, p, budget)
        expected = rs.values(p)
        if not report.is_finite:
            return p, {"J": report.elements, "RJ": expected, "match": None,
                       "verdict": report.verdict}
        return p, {"J": report.elements, "RJ": expected, "match": report.elements == expected,
                   "verdict": report.verdict}
    observed = first_levels_set(comp, p, m, budget)
    expected = rs.segment(p, m)
    return p, {"J": observed, "RJ": expected, "match": observed == expected}


def density_scan(s, X: int, mode: str = "levels", m: int = 1,
                 budget: Budget = DEFAULT_BUDGET, workers: int = 1) -> DensityStat:
    """Proportion of primes |s|+2 < p < X whose divisible set equals the reserved set.

    ``mode="levels"`` compares the first m levels with RJ_m; ``mode="full"`` uses the
    finiteness verdict and counts Undetermined primes separately.
    """
    comp = Composition.of(s)
    if mode not in ("levels", "full"):
        raise ValueError("mode must be 'levels' or 'full'")
    if mode == "levels" and m < 1:
        raise ValueError("m must be >= 1")
    reserved_set(comp)
    primes = list(primerange(comp.weight + 3, X))
    if mode == "levels" and primes and primes[-1] ** m - 1 > budget.max_index:
        raise BudgetExceeded(f"level {m} at p={primes[-1]} exceeds the index budget",
                             cost=primes[-1] ** m)
    tasks = [(comp, p, mode, m, budget) for p in primes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_density_entry, tasks, chunksize=4))
    else:
        results = [_density_entry(t) for t in tasks]
    ledger = dict(sorted(results))
    reserved = sum(1 for e in ledger.values() if e["match"] is True)
    undetermined = sum(1 for e in ledger.values() if e["match"] is None)
    density = Fraction(reserved, len(primes)) if primes else Fraction(0)
    return DensityStat(comp, X, mode, m if mode == "levels" else None, reserved, len(primes),
                       undetermined, density, ledger)


def is_reserved_prime(s, p: int, budget: Budget = DEFAULT_BUDGET) -> str:
    """'yes', 'no' or 'undetermined': whether J(s|p) equals RJ(s;p)."""
    comp = Composition.of(s)
    rs = reserved_set(comp)
    report = finiteness_verdict(comp, p, budget)
    try:
        expected = rs.values(p)
    except ValueError:
        # below the range where the catalog polynomials are integer-valued
        return "no"
    if not report.is_finite:
        # a known extra element already rules equality out
        if not set(report.elements) <= set(expected):
            return "no"
        return "undetermined"
    return "yes" if report.elements == expected else "no"

