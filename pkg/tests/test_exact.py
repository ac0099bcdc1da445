from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from mhsdiv.exact import (BernoulliDomainError, ModResidue, PadicApprox, PrecisionUnderflow,
                          bernoulli_exact, bernoulli_mod_p, bernoulli_mod_p_exact,
                          bernoulli_residues, irregular_indices, padic_of_rational,
                          rational_mod, split_unit, vp, vp_int)

PRIMES = [2, 3, 5, 7, 11, 13]
nonzero_fractions = st.builds(
    Fraction, st.integers(-10**6, 10**6).filter(bool), st.integers(1, 10**6))


@given(nonzero_fractions, st.sampled_from(PRIMES))
def test_vp_matches_sympy_multiplicity(q, p):
    expected = sympy.multiplicity(p, abs(q.numerator)) - sympy.multiplicity(p, q.denominator)
    assert vp(q, p) == expected


def test_vp_int_and_zero():
    assert vp_int(-48, 2) == 4
    with pytest.raises(ValueError):
        vp(0, 3)


@given(nonzero_fractions, st.sampled_from(PRIMES))
def test_split_unit_recombines(q, p):
    v, u = split_unit(q, p)
    assert u * Fraction(p) ** v == q
    assert u.numerator % p and u.denominator % p


@given(st.integers(-10**9, 10**9), st.integers(1, 10**6).filter(lambda d: d % 7), st.integers(1, 6))
def test_rational_mod_inverts_denominator(a, d, k):
    m = 7**k
    assert rational_mod(Fraction(a, d), m) * d % m == a % m


def test_mod_residue_rules():
    assert ModResidue(3, 7) == 10
    assert ModResidue(3, 7) != ModResidue(3, 11)
    with pytest.raises(ValueError):
        ModResidue(7, 7)


@given(nonzero_fractions, nonzero_fractions, st.sampled_from(PRIMES), st.integers(2, 12))
def test_padic_arithmetic_matches_exact(a, b, p, k):
    x, y = padic_of_rational(a, p, k), padic_of_rational(b, p, k)
    for op in (lambda u, v: u + v, lambda u, v: u * v, lambda u, v: u - v):
        got = op(x, y)
        want = op(a, b)
        if want == 0:
            assert got.is_zero
            continue
        ref = padic_of_rational(want, p, got.precision)
        assert (got.valuation, got.unit) == (ref.valuation, ref.unit)


@given(st.integers(-300, 300), st.integers(1, 300), st.sampled_from([3, 5, 7]))
def test_rational_reconstruction(a, b, p):
    q = Fraction(a, b)
    if q == 0:
        return
    approx = padic_of_rational(q, p, 40)
    stripped = PadicApprox(p, approx.valuation, approx.unit, approx.precision)
    assert stripped.rational_reconstruct() == q


def test_cancellation_without_history_raises():
    a = PadicApprox(5, 0, 1, 3)
    b = PadicApprox(5, 0, 124, 3)
    with pytest.raises(PrecisionUnderflow):
        a + b


def test_cancellation_with_exact_history_is_recovered():
    a = padic_of_rational(Fraction(1, 3), 5, 3)
    b = padic_of_rational(Fraction(-1, 3) + 125, 5, 3)
    total = a + b
    assert total.valuation == 3


def test_residue_needs_integrality():
    with pytest.raises(ValueError):
        padic_of_rational(Fraction(1, 5), 5, 4).residue(1)
    assert padic_of_rational(Fraction(10, 3), 5, 4).residue(2) == rational_mod(Fraction(10, 3), 25)


@pytest.mark.parametrize("m", range(0, 41))
def test_bernoulli_matches_sympy(m):
    ref = Fraction(str(sympy.bernoulli(m)))
    if m == 1:
        ref = Fraction(-1, 2)
    assert bernoulli_exact(m) == ref


@pytest.mark.parametrize("p", [int(q) for q in sympy.primerange(5, 80)])
def test_bernoulli_mod_p_routes_agree(p):
    table = bernoulli_residues(p)
    for m in range(2, p - 2, 2):
        assert bernoulli_mod_p(m, p) == bernoulli_mod_p_exact(m, p)
        assert table[m] == bernoulli_mod_p(m, p).value


def test_bernoulli_domain():
    with pytest.raises(BernoulliDomainError):
        bernoulli_mod_p(3, 11)
    with pytest.raises(BernoulliDomainError):
        bernoulli_mod_p(10, 11)


# first irregular pairs, from the standard tables
IRREGULAR = {37: [32], 59: [44], 67: [58], 101: [68], 103: [24], 131: [22], 149: [130],
             157: [62, 110]}


def test_irregular_indices():
    for p in sympy.primerange(5, 160):
        assert irregular_indices(int(p)) == IRREGULAR.get(int(p), [])
