import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mefm.linalg import double_center
from mefm.rank import ScaleWarning, ratio_argmin, select_ranks, xi_penalties

from conftest import random_factor_series


def test_xi_formula():
    xi_r, xi_c = xi_penalties(T=50, p=20, q=10, c_xi=0.2)
    assert xi_r == pytest.approx(0.2 * 200 * ((50 * 10) ** -0.5 + 20**-0.5))
    assert xi_c == pytest.approx(0.2 * 200 * ((50 * 20) ** -0.5 + 10**-0.5))


def test_ratio_argmin_picks_gap():
    j, ratios = ratio_argmin([100.0, 90.0, 1.0, 0.9, 0.8], xi=0.1)
    assert j == 2
    assert ratios.shape == (4,)
    assert ratios[1] == pytest.approx(1.1 / 90.1)


def test_ratio_argmin_ties_go_to_smallest_index():
    j, ratios = ratio_argmin([8.0, 4.0, 2.0, 1.0], xi=1e-300)
    np.testing.assert_allclose(ratios, 0.5)
    assert j == 1


def test_ratio_argmin_clamps_negative():
    j, ratios = ratio_argmin([5.0, -1e-12, -2e-12], xi=1.0)
    np.testing.assert_allclose(ratios, [1 / 6, 1.0])
    assert j == 1


@pytest.mark.parametrize("vals,xi", [([1.0], 1.0), ([2.0, 1.0], 0.0)])
def test_ratio_argmin_errors(vals, xi):
    with pytest.raises(ValueError):
        ratio_argmin(vals, xi)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12).flatmap(lambda m: st.tuples(st.just(m), st.integers(1, m))))
def test_single_gap_spectrum(args):
    m, jstar = args
    lam = np.concatenate([np.full(jstar, 1e4), np.full(m + 1 - jstar, 1.0)])
    lam += np.linspace(1e-3, 0, m + 1)  # strictly decreasing
    j, _ = ratio_argmin(lam, xi=0.5)
    assert j == jstar


def test_noiseless_rank_one():
    r = np.random.default_rng(4)
    u, v = r.standard_normal(20), r.standard_normal(20)
    u -= u.mean()
    v -= v.mean()
    L = r.standard_normal(50)[:, None, None] * np.outer(u, v)
    sel = select_ranks(L)
    assert sel.ranks == (1, 1)
    # oracle spectrum by direct eigencomputation
    S = sum(Lt @ Lt.T for Lt in L) / 50
    np.testing.assert_allclose(sel.eigenvalues_row, np.clip(np.linalg.eigvalsh(S)[::-1][:11], 0, None), atol=1e-9)


def test_eigenvalue_count_and_bounds(rng):
    L = double_center(rng.standard_normal((40, 9, 7)))
    sel = select_ranks(L)
    assert sel.eigenvalues_row.shape == (9 // 2 + 1,)
    assert sel.eigenvalues_col.shape == (7 // 2 + 1,)
    assert 1 <= sel.kr_hat <= 4 and 1 <= sel.kc_hat <= 3


def test_deterministic(rng):
    L = double_center(random_factor_series(rng, T=40, p=12, q=10))
    a, b = select_ranks(L), select_ranks(L.copy())
    assert a.ranks == b.ranks
    np.testing.assert_array_equal(a.ratios_row, b.ratios_row)


def test_recovers_strong_ranks(rng):
    Y = random_factor_series(rng, T=100, p=20, q=16, kr=2, kc=3, noise=1.0)
    assert select_ranks(double_center(Y)).ranks == (2, 3)


def test_scale_warning(rng):
    L = double_center(rng.standard_normal((20, 8, 8))) * 1e5
    with pytest.warns(ScaleWarning):
        select_ranks(L)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        select_ranks(L / 1e5)


def test_bad_c_xi(rng):
    with pytest.raises(ValueError):
        select_ranks(rng.standard_normal((5, 4, 4)), c_xi=0.0)
