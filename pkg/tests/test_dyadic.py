from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhsdiv.errors import NotApplicable
from mhsdiv.exact import vp
from mhsdiv.dyadic import (SIM_BLOCK, branching_simulation, cloitre_constant,
                           dyadic_level_scan, h1star_mod4, h1star_mod4_direct, odd_power_sum,
                           odd_power_sum_direct, offspring_law, offspring_mean, predicted_v2,
                           profile_csv, track_dyadic, v2_profile_check, v2_profile_sweep)
from mhsdiv.mhs import mhs_exact


@given(st.integers(1, 300))
def test_h1star_mod4(n):
    assert h1star_mod4(n) == h1star_mod4_direct(n)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(0, 4000), st.integers(1, 50))
def test_odd_power_sum(e, n, K):
    assert odd_power_sum(e, n, K) == odd_power_sum_direct(e, n, K)


def test_track_head_from_exact_values():
    track = track_dyadic(1, 9)
    for term in track.terms:
        assert term.w == -vp(mhs_exact((1, 1), term.n), 2)
        level = [n for n in range(2 ** (term.t - 1), 2**term.t)
                 if vp(mhs_exact((1, 1), n), 2) >= 2 - term.t]
        assert level == [term.n]


def test_recursion_agrees_with_scan():
    a = track_dyadic(1, 14, method="recursion")
    b = track_dyadic(1, 14, method="scan")
    assert a.n_values == b.n_values and a.w_values == b.w_values
    assert a.successor == b.successor


def test_track_structure():
    track = track_dyadic(1, 30)
    for x, y in zip(track.terms, track.terms[1:] + [track.successor]):
        assert y.n >> 1 == x.n and y.r == y.n & 1
    assert all(g >= 0 for g in track.gaps())
    assert set(track.case_labels.values()) <= set("abcd")
    assert track.bits == format(track.successor.n, "b")
    assert len(track.bits) == 31


def test_bfile_and_rows():
    track = track_dyadic(1, 5)
    assert track.to_bfile() == "2 3\n3 6\n4 13\n5 27\n6 54\n"
    assert track.to_bfile("w") == "2 0\n3 1\n4 1\n5 3\n"
    assert track.to_rows()[-1]["t"] == 6


@pytest.mark.parametrize("s", [2, 3])
def test_higher_tracks_start_at_two(s):
    track = track_dyadic(s, 10)
    assert track.terms[0].n == 2
    with pytest.raises(ValueError):
        track_dyadic(s, 10, method="recursion")


def test_level_scan_threshold():
    levels = dyadic_level_scan(2, 8)
    for t, hits in levels.items():
        if t >= 2:
            assert len(hits) == 1
            n, v = hits[0]
            assert v == vp(mhs_exact((2, 1), n), 2) and v >= -2 * (t - 1) + 1


def test_cloitre():
    c = cloitre_constant()
    assert c.binary == "1.101101111101111000001"
    assert all(c.floor_checks.values())
    assert c.lower < c.upper and c.upper - c.lower == Fraction(1, 2 ** 61)
    assert c.decimal.startswith("1.7182319365")
    assert c.rounded(6) == "1.718232"


def test_predicted_v2_domain():
    with pytest.raises(NotApplicable):
        predicted_v2(2, 6, 100)
    with pytest.raises(NotApplicable):
        predicted_v2(2, 3, 2)
    with pytest.raises(NotApplicable):
        predicted_v2(1, 2, 10)
    assert predicted_v2(2, 1, 5) == (3, -4, "G_t")


@pytest.mark.parametrize("s,l", [(2, 2), (3, 3), (2, 4), (3, 4), (5, 4), (3, 5), (4, 5)])
def test_profiles_small(s, l):
    records = v2_profile_sweep(s, l, 2**9)
    assert records and all(r.match for r in records)


def test_profile_check_against_exact():
    for n in (9, 17, 33, 40):
        rec = v2_profile_check(2, 2, n)
        assert rec.observed == vp(mhs_exact((2, 2), n), 2) and rec.match


def test_profile_csv():
    text = profile_csv(v2_profile_sweep(2, 2, 8))
    assert text.splitlines()[0] == "s,l,n,t,branch,predicted,observed,match"


def test_offspring_law():
    for p in (3, 5, 7, 11):
        assert sum(offspring_law(p)) == 1
        assert offspring_mean(p) == 1


def test_simulation_determinism():
    a = branching_simulation(5, 200, 2500, seed=7)
    b = branching_simulation(5, 200, 2500, seed=7, workers=3)
    c = branching_simulation(5, 200, 2500, seed=8)
    assert np.array_equal(a.extinct_fraction, b.extinct_fraction)
    assert not np.array_equal(a.extinct_fraction, c.extinct_fraction)
    assert np.all(np.diff(a.extinct_fraction) >= 0)
    assert a.extinct_fraction[0] == 0
    summary = a.summary()
    assert summary["trials"] == 2500 and "200" in summary["extinct_fraction"]
    assert SIM_BLOCK == 1000
