"""Acceptance criteria 1-12, one pass/fail line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.  Every tolerance and time limit is pinned
below; a criterion passes only when its check holds and it finishes in time.
"""
from __future__ import annotations

import os
import random
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
from sympy import primerange

from mhsdiv.congruences import (HOLDS, halfway_classify, h121_2p_check, hstar_check,
                                density_scan, j1_symmetry_check, wolstenholme_check)
from mhsdiv.dyadic import (branching_simulation, cloitre_constant, offspring_mean,
                           track_dyadic, v2_profile_sweep)
from mhsdiv.exact import irregular_indices, padic_of_rational
from mhsdiv.jsets import (FINITE_CERTIFIED, FINITE_EMPTY_TAIL, branch_search_depth1,
                          compute_J1, criterion_check, finiteness_verdict)
from mhsdiv.mhs import (fractional_part, iter_exact, level_decompose_check,
                        mhs_padic, newton_identity_holds)

WORKERS = max(1, min(4, os.cpu_count() or 1))

# ---------------------------------------------------------------- pinned values

J_SETS = {
    ((1, 1), 3): [0, 5],
    ((1, 1), 7): [0, 4, 6, 7, 13],
    ((1, 1), 13): [0, 12, 13, 25],
    ((1, 1), 31): [0, 17, 22, 30, 31, 61],
    ((1, 1, 1), 3): [0, 8],
    ((1,), 5): [0, 4, 20, 24],
}
LISTED_N = [3, 6, 13, 27, 54, 109, 219, 439, 879, 1759, 3518, 7037, 14075, 28151, 56303,
            112606, 225212, 450424, 900848, 1801696, 3603393]
LISTED_W = [0, 1, 3, 4, 3, 3, 5, 7, 9, 10, 9, 10, 12, 14, 13, 13, 15, 17, 19, 19]
CLOITRE_BINARY = "1.101101111101111000001"
CLOITRE_DECIMAL = "1.718232"
LISTED_FRACTIONS = [Fraction(1, 2), Fraction(1), Fraction(11, 24), Fraction(7, 8),
                    Fraction(23, 90), Fraction(109, 180), Fraction(9371, 10080),
                    Fraction(467, 2016), Fraction(25933, 50400), Fraction(25933, 50400),
                    Fraction(39353, 50400), Fraction(13501, 415800), Fraction(4027, 14850)]
REMARK_SETS = {1: [0, 6, 9, 12, 18, 24, 27, 30, 36], 2: [0, 6, 36]}
CRITERION_CASES = [((1, 1), 3, 6, 5), ((1, 1), 7, 4, 3), ((1, 1), 13, 4, None),
                   ((1, 1), 31, 4, None)]
F3_CASE = ((1, 1, 1), 3, 9, 15, 17770)
WIEFERICH = {1093, 3511}
WIEFERICH_BOUND = 4000
DENSITY_SINGLE = ((2,), 1000, 1, (0.53, 0.69))
DENSITY_DOUBLE = ((1, 1), 500, 2, (0.29, 0.45))
BOYD_BOUND = 550
BOYD_ALLOWED = {83, 127, 397}
ORACLE_CASES = 10_000
ORACLE_SEED = 20240601
LEVEL_CASES = 1_000
SIM_P, SIM_G, SIM_N, SIM_SEED, SIM_FLOOR = 5, 10_000, 10_000, 20240601, 0.95

LIMITS = {1: 120, 2: 30, 3: 1, 4: 1, 5: 300, 6: 600, 7: 120, 8: 300, 9: 900, 10: 1800,
          11: 300, 12: 60}

CRITERIA: dict[int, tuple[str, object]] = {}


def criterion(number: int, title: str):
    def register(fn):
        CRITERIA[number] = (title, fn)
        return fn
    return register


# ---------------------------------------------------------------- criteria


@criterion(1, "J-set regression")
def c1():
    bad = []
    for (s, p), expected in J_SETS.items():
        got = finiteness_verdict(s, p)
        if got.elements != expected or not got.is_finite:
            bad.append(f"J({','.join(map(str, s))}|{p})={got.elements} {got.verdict}")
    return not bad, "all 6 sets exact" if not bad else "; ".join(bad)


@criterion(2, "dyadic sequences and Cloitre constant")
def c2():
    track = track_dyadic(1, 21)
    n_values = track.n_values + [track.successor.n]
    w_values = track.w_values
    c = cloitre_constant(21)
    problems = []
    if n_values != LISTED_N:
        problems.append(f"n_t differs: {n_values}")
    if w_values != LISTED_W:
        first = next(i for i, (a, b) in enumerate(zip(w_values, LISTED_W)) if a != b)
        note = f"w_t first differs at t={first + 2}: computed {w_values}"
        extended = w_values + [track.successor.w]
        if extended[:first] + extended[first + 1:] == LISTED_W:
            note += f"; the listed values equal the computed w_2..w_22 without w_{first + 2}"
        problems.append(note)
    if c.binary != CLOITRE_BINARY:
        problems.append(f"binary {c.binary}")
    if c.rounded(6) != CLOITRE_DECIMAL:
        problems.append(f"decimal {c.rounded(6)} (bracket prefix {c.decimal})")
    return not problems, "n_t, w_t, binary and decimal exact" if not problems else "; ".join(problems)


@criterion(3, "fractional parts of H(1,1;n), n = 2..14")
def c3():
    values = {}
    for n, vals in iter_exact((1, 1), 14):
        values[n] = vals[-1]
    # the listed "1" at n = 3 names the integer class, so compare modulo 1
    bad = [(n, str(fractional_part(values[n])), str(listed))
           for n, listed in zip(range(2, 15), LISTED_FRACTIONS)
           if fractional_part(values[n]) != fractional_part(listed)]
    detail = "13/13 exact"
    if bad:
        detail = f"{13 - len(bad)}/13 match; (n, computed, listed): {bad}"
        shifted = all(fractional_part(values[n - 1]) == fractional_part(LISTED_FRACTIONS[n - 2])
                      for n, _, _ in bad)
        if shifted:
            detail += f"; listed entries for n={bad[0][0]}..14 equal computed n-1"
    return not bad, detail


@criterion(4, "J_1 sets of H(5;r) at p = 37")
def c4():
    got = {e: [0] + compute_J1(5, 37, e) for e in (1, 2)}
    return got == REMARK_SETS, f"e=1: {got[1]}, e=2: {got[2]}"


@criterion(5, "criterion instances")
def c5():
    problems = []
    for s, p, tau, f in CRITERION_CASES:
        rec = criterion_check(s, p, tau)
        if not rec.passes or (f is not None and rec.f != f):
            problems.append(f"{s},{p},{tau}: f={rec.f} thr={rec.threshold}")
    s, p, tau, f3, witness = F3_CASE
    rec = criterion_check(s, p, tau)
    if (rec.f, rec.witness) != (f3, witness):
        problems.append(f"f_3 = {rec.f} at n={rec.witness}")
    return not problems, "4 passes, f_3 = 15 at n = 17770" if not problems else "; ".join(problems)


@criterion(6, "congruence suites")
def c6():
    failures, counts = [], {}

    def tally(name, rec_ok, applicable=True):
        if applicable:
            counts[name] = counts.get(name, 0) + 1
            if not rec_ok:
                failures.append(name)

    for p in primerange(3, 201):
        for s in range(1, 7):
            for l in range(1, 5):
                r = wolstenholme_check(s, l, int(p))
                tally("wolstenholme", r.holds, r.applicable)
    for p in primerange(3, 101):
        for s in range(1, 5):
            for l in range(1, 4):
                for n in range(1, 6):
                    r = hstar_check(s, l, int(p), n)
                    tally("hstar", r.holds, r.applicable)
    for p in primerange(3, 201):
        for s in range(1, 11):
            tally("j1_symmetry", j1_symmetry_check(s, int(p)).holds)
    for p in primerange(3, 501):
        for s in range(2, 11, 2):
            if s % (int(p) - 1):
                tally("halfway_even", halfway_classify(s, int(p)).in_J1 is True)
    pairs = [(int(p), k) for p in primerange(5, 501) for k in irregular_indices(int(p))]
    for p, k in [(37, 32)] + pairs:
        r = halfway_classify(p - k, p)
        tally("halfway_odd_link", r.status == HOLDS and r.in_J1 and r.irregular_link == (p, k))
    for s in range(3, 10, 2):
        for p in primerange(2**s - 1, 501):
            p = int(p)
            if s % (p - 1) == 0:
                continue
            r = halfway_classify(s, p)
            tally("halfway_odd_iff", r.in_J1 == ((p - s) in irregular_indices(p)))
    for p in primerange(7, 201):
        tally("h121", h121_2p_check(int(p)))
    summary = ", ".join(f"{k} {v}" for k, v in counts.items())
    return not failures, f"zero failures ({summary})" if not failures else f"failures: {failures[:10]}"


@criterion(7, "Wieferich primes from the n=1 halfway branch")
def c7():
    zeros = {int(p) for p in primerange(3, WIEFERICH_BOUND + 1)
             if halfway_classify(1, int(p)).congruence_zero}
    return zeros == WIEFERICH, f"congruence zero at {sorted(zeros)}"


@criterion(8, "closed-form v_2 profiles, n <= 2^12")
def c8():
    total, mismatches = 0, []
    for s in range(1, 7):
        for l in range(1, 6):
            records = v2_profile_sweep(s, l, 2**12)
            total += len(records)
            mismatches += [(r.s, r.l, r.n) for r in records if not r.match]
    return not mismatches and total > 0, f"{total} records, {len(mismatches)} mismatches {mismatches[:5]}"


@criterion(9, "reserved-set densities")
def c9():
    out, ok = [], True
    for s, X, m, (lo, hi) in (DENSITY_SINGLE, DENSITY_DOUBLE):
        stat = density_scan(s, X, "levels", m, workers=WORKERS)
        d = float(stat.density)
        ok = ok and lo <= d <= hi
        out.append(f"{s} X={X} m={m}: {d:.4f} in [{lo}, {hi}]")
    return ok, "; ".join(out)


@criterion(10, "Boyd range for the harmonic series")
def c10():
    open_primes = []
    for p in primerange(2, BOYD_BOUND):
        report = branch_search_depth1(1, int(p))
        if report.verdict not in (FINITE_CERTIFIED, FINITE_EMPTY_TAIL):
            open_primes.append(int(p))
    return set(open_primes) <= BOYD_ALLOWED, f"not certified: {open_primes}"


@criterion(11, "oracle equivalence")
def c11():
    rng = random.Random(ORACLE_SEED)
    tables: dict[tuple, list[Fraction]] = {}
    bad = []
    for _ in range(ORACLE_CASES):
        s = tuple(rng.randint(1, 3) for _ in range(rng.randint(1, 3)))
        n = rng.randint(0, 300)
        p = rng.choice([2, 3, 5, 7, 11])
        if s not in tables:
            tables[s] = [vals[-1] for _, vals in iter_exact(s, 300)]
        exact = tables[s][n]
        got = mhs_padic(s, n, p)
        if exact == 0:
            if not got.is_zero:
                bad.append((s, n, p))
            continue
        ref = padic_of_rational(exact, p, got.precision)
        if (got.valuation, got.unit) != (ref.valuation, ref.unit):
            bad.append((s, n, p))
    newton_bad = [(s, l, n) for l in range(1, 6) for s in range(1, 4) for n in range(0, 51)
                  if not newton_identity_holds(s, l, n)]
    level_bad = []
    for _ in range(LEVEL_CASES):
        s, l = rng.randint(1, 3), rng.randint(1, 3)
        n, p = rng.randint(1, 120), rng.choice([2, 3, 5, 7])
        if not level_decompose_check(s, l, n, p):
            level_bad.append((s, l, n, p))
    ok = not (bad or newton_bad or level_bad)
    return ok, (f"p-adic/exact {ORACLE_CASES - len(bad)}/{ORACLE_CASES}, newton failures "
                f"{len(newton_bad)}, level failures {len(level_bad)}")


@criterion(12, "branching simulation")
def c12():
    means = {p: offspring_mean(p) for p in (3, 5, 7)}
    sim = branching_simulation(SIM_P, SIM_G, SIM_N, SIM_SEED)
    ext = sim.extinct_fraction
    monotone = bool(np.all(np.diff(ext) >= 0))
    final = float(ext[SIM_G])
    ok = all(m == 1 for m in means.values()) and monotone and final > SIM_FLOOR
    return ok, f"means {[str(m) for m in means.values()]}, nondecreasing={monotone}, extinct({SIM_G})={final:.4f}"


# ---------------------------------------------------------------- harness


def evaluate(number: int) -> tuple[bool, str]:
    title, fn = CRITERIA[number]
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # reported as a failing line, not a crash of the harness
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - start
    limit = LIMITS[number]
    passed = ok and elapsed < limit
    status = "PASS" if passed else "FAIL"
    timing = f"{elapsed:.1f} s < {limit} s" if elapsed < limit else f"{elapsed:.1f} s OVER {limit} s"
    return passed, f"[{status}] criterion {number:2d} {title}: {detail} ({timing})"


@pytest.fixture(scope="module")
def acceptance_lines(request):
    lines: list[str] = []
    yield lines
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_sep("-", "acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split()[2])):
            reporter.write_line(line)


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, acceptance_lines):
    passed, line = evaluate(number)
    acceptance_lines.append(line)
    print(line)
    assert passed, line


if __name__ == "__main__":
    chosen = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    results = [evaluate(n) for n in chosen]
    for _, line in results:
        print(line, flush=True)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
