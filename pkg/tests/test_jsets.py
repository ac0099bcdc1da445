from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhsdiv.errors import BudgetExceeded
from mhsdiv.exact import rational_mod
from mhsdiv.jsets import (FINITE_CERTIFIED, FINITE_EMPTY_TAIL, UNDETERMINED, Budget,
                          StarExpansion, branch_search_depth1, compute_J1, criterion_check,
                          criterion_threshold, enumerate_J_direct, finiteness_verdict,
                          group_by_level, i_set_member, lemma_applies, mhs1_residue, psi)
from mhsdiv.mhs import Composition, mhs_exact, mhs_star_residue


def exact_J(s, p, n_max):
    """Oracle: numerators of exact rationals."""
    comp = Composition.of(s)
    out = [0]
    acc = [Fraction(1)] + [Fraction(0)] * comp.length
    for n in range(1, n_max + 1):
        for j in range(comp.length, 0, -1):
            acc[j] += acc[j - 1] / Fraction(n) ** comp.parts[j - 1]
        if n >= comp.length and acc[-1].numerator % p == 0:
            out.append(n)
    return out


@pytest.mark.parametrize("s,p", [(1, 3), (1, 5), (2, 5), (2, 7), (3, 7), (1, 13)])
def test_compute_J1_against_exact(s, p):
    assert compute_J1(s, p) == [n for n in exact_J((s,), p, p - 1) if n]


def test_compute_J1_higher_power():
    assert compute_J1(5, 37, 2) == [6, 36]


@pytest.mark.parametrize("s,p,expected", [
    (1, 3, [0, 2, 7, 22]),
    (1, 5, [0, 4, 20, 24]),
    (1, 7, [0, 6, 42, 48, 295, 299, 337, 341, 2096, 2390, 14675, 16731, 16735, 102728]),
    (2, 5, [0, 2, 4]),
    (2, 7, [0, 3, 6, 26]),
    (1, 2, [0]),
])
def test_branch_search_known_sets(s, p, expected):
    report = branch_search_depth1(s, p)
    assert report.elements == expected
    assert report.verdict == FINITE_EMPTY_TAIL


@pytest.mark.parametrize("s,p", [(1, 3), (1, 5), (2, 3), (2, 5), (3, 5), (1, 7)])
def test_branch_search_against_exact_numerators(s, p):
    limit = 2500
    elements = branch_search_depth1(s, p).elements
    assert [n for n in elements if n <= limit] == exact_J((s,), p, limit)


@pytest.mark.parametrize("s,p,n_max", [(1, 11, 11**4), (2, 11, 11**4), (3, 13, 13**3),
                                       (1, 17, 17**3)])
def test_branch_search_against_sweep(s, p, n_max):
    elements = branch_search_depth1(s, p).elements
    assert [n for n in elements if n <= n_max] == enumerate_J_direct((s,), p, n_max)


def test_harmonic_eleven_size():
    report = branch_search_depth1(1, 11)
    assert len(report.elements) == 639
    assert report.certificate["empty_level"] == 30


def test_level_budget_gives_undetermined():
    report = branch_search_depth1(1, 11, max_level=5)
    assert report.verdict == UNDETERMINED
    assert "level budget" in report.certificate["reason"]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.sampled_from([3, 5, 7, 11]), st.integers(0, 5000))
def test_star_expansion_matches_sweep(s, p, n):
    exp = StarExpansion(s, p, 6)
    assert exp.star(n) == mhs_star_residue((s,), n, p, 6)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.sampled_from([3, 5, 7]), st.integers(1, 400), st.integers(1, 3))
def test_mhs1_residue_against_exact(s, p, n, e):
    exact = mhs_exact((s,), n)
    if exact.denominator % p:
        assert mhs1_residue(s, p, n, e)[0] == rational_mod(exact, p**e)
    else:
        with pytest.raises(ValueError):
            mhs1_residue(s, p, n, e)


def test_psi():
    for s, p in [(1, 5), (1, 7), (2, 7)]:
        for n in branch_search_depth1(s, p).elements:
            if n == 0 or n > 3000:
                continue
            exact = mhs_exact((s,), n)
            if exact.numerator % p**s == 0:
                assert psi(s, p, n) == rational_mod(exact / p**s, p)
            else:
                with pytest.raises(ValueError, match="psi undefined"):
                    psi(s, p, n)
    assert psi(1, 5, 0) == 0


def test_lemma_applies():
    assert lemma_applies(1, 5) and not lemma_applies(1, 3) and not lemma_applies(3, 5)
    assert not lemma_applies(1, 2)


def test_group_by_level():
    assert group_by_level([0, 4, 20, 24], 5) == {0: [0], 1: [4], 2: [20, 24]}


@pytest.mark.parametrize("s,p,expected", [
    ((1, 1), 3, [0, 5]),
    ((1, 1), 7, [0, 4, 6, 7, 13]),
    ((1, 1), 13, [0, 12, 13, 25]),
    ((1, 1, 1), 3, [0, 8]),
    ((1, 2), 2, [0]),
    ((3, 2), 2, [0]),
])
def test_finiteness_verdict_certified(s, p, expected):
    report = finiteness_verdict(s, p)
    assert report.verdict == FINITE_CERTIFIED
    assert report.elements == expected
    tau = report.certificate["tau"]
    assert report.elements == exact_J(s, p, min(p**tau - 1, 3000))[: len(report.elements)]


def test_dyadic_composition_is_undetermined():
    report = finiteness_verdict((1, 1), 2)
    assert report.verdict == UNDETERMINED
    assert report.certificate["see"] == "seq"


def test_finiteness_budget():
    with pytest.raises(BudgetExceeded):
        finiteness_verdict((1, 1), 31, Budget(max_index=20))
    report = finiteness_verdict((1, 1), 31, Budget(max_index=31**2))
    assert report.verdict == UNDETERMINED


def test_criterion_records():
    rec = criterion_check((1, 1), 3, 6)
    assert (rec.f, rec.threshold, rec.passes) == (5, 4, True)
    assert criterion_threshold(Composition((1, 1, 1)), 9) == 15
    with pytest.raises(ValueError):
        criterion_check((1,), 3, 4)
    with pytest.raises(ValueError):
        criterion_check((1, 1), 3, 1)
    with pytest.raises(BudgetExceeded):
        criterion_check((1, 1), 31, 5, Budget(max_index=1000))


def test_report_dict():
    d = finiteness_verdict((1, 1), 3).to_dict()
    assert set(d) >= {"composition", "prime", "verdict", "certificate", "levels", "budget"}
    assert d["levels"] == {"0": [0], "2": [5]}


@pytest.mark.parametrize("s,p", [(1, 3), (2, 5), (1, 7)])
def test_i_set_against_denominators(s, p):
    for n in range(0, 120):
        assert i_set_member(s, p, n) == (n == 0 or mhs_exact((s,), n).denominator % p != 0)
