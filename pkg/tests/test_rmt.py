import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from fragility_lab.exceptions import DegenerateError, DimensionError, DomainError, SingularMatrixError
from fragility_lab.rmt import (
    as_generator,
    chernoff_tail_bound,
    child_seed,
    make_rng,
    matrix_from_csv,
    matrix_to_csv,
    min_pairwise_distance,
    project_onto_span,
    qr_decompose,
    sample_chi,
    sample_gaussian_matrix,
    sample_product_r,
)

# Independent closed forms, evaluated once and frozen.
CHERNOFF_HALF_10 = 0.3807029362719836  # (0.5 e^0.5)^5
CHI2_MEAN = 1.2533141373155003  # sqrt(2) Gamma(3/2) / Gamma(1)
CHILD_SEED_0_0 = 8668861027912758289  # SeedSequence(0, spawn_key=(0,)).generate_state(1, uint64)


def assert_qr_invariants(m, q, r):
    k = m.shape[1]
    assert np.max(np.abs(q.T @ q - np.eye(k))) < 1e-10
    s = np.max(np.abs(m))
    assert np.linalg.norm((q @ r - m) / s) / np.linalg.norm(m / s) < 1e-9
    assert np.all(np.tril(r, -1) == 0.0)
    assert np.all(np.diag(r) >= 0.0)


# -- rng -------------------------------------------------------------------


def test_same_seed_same_stream():
    a = sample_gaussian_matrix(make_rng(7), 3, 3)
    b = sample_gaussian_matrix(make_rng(7), 3, 3)
    assert np.array_equal(a, b)
    ref = np.random.Generator(np.random.PCG64(7)).standard_normal((3, 3))
    assert np.array_equal(a, ref)


def test_child_seed_frozen_and_distinct():
    assert child_seed(0, 0) == CHILD_SEED_0_0
    seeds = {child_seed(0, k) for k in range(1000)}
    assert len(seeds) == 1000


def test_as_generator_rejects_floats():
    with pytest.raises(TypeError):
        as_generator(1.5)
    with pytest.raises(DomainError):
        make_rng(-1)


def test_gaussian_moments():
    x = sample_gaussian_matrix(make_rng(1), 1000, 1000)
    assert abs(x.mean()) < 0.01
    y = sample_gaussian_matrix(make_rng(2), 1000, 1000, stddev=1 / math.sqrt(16))
    assert abs(y.var() - 1 / 16) < 0.002


@pytest.mark.parametrize("rows,cols,stddev", [(0, 3, 1.0), (3, 0, 1.0)])
def test_gaussian_rejects_empty(rows, cols, stddev):
    with pytest.raises(DimensionError):
        sample_gaussian_matrix(make_rng(0), rows, cols, stddev)


def test_gaussian_rejects_bad_stddev():
    with pytest.raises(DomainError):
        sample_gaussian_matrix(make_rng(0), 2, 2, 0.0)


# -- qr --------------------------------------------------------------------


def test_qr_identity():
    q, r = qr_decompose(np.eye(4))
    npt.assert_allclose(q, np.eye(4), atol=1e-15)
    npt.assert_allclose(r, np.eye(4), atol=1e-15)


def test_qr_first_pivot_is_column_norm():
    q, r = qr_decompose([[3.0, 1.0], [4.0, 2.0]])
    assert r[0, 0] == pytest.approx(5.0, abs=1e-14)
    assert_qr_invariants(np.array([[3.0, 1.0], [4.0, 2.0]]), q, r)


def test_qr_matches_lapack_up_to_signs():
    m = make_rng(3).standard_normal((7, 5))
    q, r = qr_decompose(m)
    q_ref, r_ref = np.linalg.qr(m)
    signs = np.sign(np.diag(r_ref))
    npt.assert_allclose(r, r_ref * signs[:, None], atol=1e-12)
    npt.assert_allclose(q, q_ref * signs, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 8).flatmap(
        lambda k: st.tuples(st.just(k), st.integers(k, 10)).flatmap(
            lambda kn: arrays(np.float64, (kn[1], kn[0]), elements=st.floats(-100, 100, allow_nan=False))
        )
    )
)
def test_qr_invariants_property(m):
    try:
        q, r = qr_decompose(m)
    except SingularMatrixError:
        # a rejected input really is (numerically) rank deficient
        unit = m / max(np.max(np.abs(m)), 1e-300)
        scale = np.linalg.norm(unit, axis=0).max()
        assert np.linalg.svd(unit, compute_uv=False)[-1] <= 1e-10 * max(scale, 1e-300)
        return
    assert_qr_invariants(m, q, r)


def test_qr_rank_deficiency_names_column():
    m = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0], [1.0, 2.0, 1.0]])
    with pytest.raises(SingularMatrixError) as info:
        qr_decompose(m)
    assert info.value.column == 1


def test_qr_rejects_wide_and_nonfinite():
    with pytest.raises(DimensionError):
        qr_decompose(np.ones((2, 3)))
    with pytest.raises(DomainError):
        qr_decompose(np.array([[np.nan, 1.0], [0.0, 1.0]]))


def test_qr_tiny_and_huge_scales():
    m = make_rng(10).standard_normal((4, 3))
    base = qr_decompose(m)
    for scale in (2.0**-1000, 2.0**1000):
        q, r = qr_decompose(scale * m)
        assert np.array_equal(q, base.q) and np.array_equal(r, scale * base.r)


def test_qr_deterministic():
    m = make_rng(9).standard_normal((6, 6))
    a, b = qr_decompose(m), qr_decompose(m)
    assert np.array_equal(a.q, b.q) and np.array_equal(a.r, b.r)


def test_last_pivot_is_half_normal():
    rng = make_rng(11)
    draws = [qr_decompose(rng.standard_normal((50, 50))).r[49, 49] for _ in range(2000)]
    assert stats.kstest(draws, stats.halfnorm.cdf).pvalue > 0.01


# -- chi and the product sampler -------------------------------------------


def test_chi_mean_two_degrees():
    rng = make_rng(5)
    draws = np.sqrt(rng.chisquare(2, 10**6))
    assert abs(draws.mean() - CHI2_MEAN) < 0.01
    singles = [sample_chi(make_rng(5), 2) for _ in range(3)]
    assert singles[0] == singles[1] == singles[2] >= 0.0


def test_chi_one_is_half_normal():
    rng = make_rng(6)
    draws = [sample_chi(rng, 1) for _ in range(3000)]
    assert min(draws) >= 0.0
    assert stats.kstest(draws, stats.halfnorm.cdf).pvalue > 0.01


def test_chi_rejects_zero_degrees():
    with pytest.raises(DomainError):
        sample_chi(make_rng(0), 0)


def test_product_r_upper_triangular():
    rng = make_rng(4)
    for _ in range(50):
        r = sample_product_r(rng, [4, 6, 8])
        assert np.all(np.tril(r, -1) == 0.0)
        assert np.all(np.diag(r) > 0.0)


def test_product_r_single_factor_corner_is_chi():
    rng = make_rng(8)
    d, n2 = 5, 9
    corner = [sample_product_r(rng, [d, n2])[-1, -1] for _ in range(3000)]
    assert stats.kstest(corner, stats.chi(n2 - d + 1).cdf).pvalue > 0.01


def test_product_r_corner_is_product_of_half_normals():
    rng = make_rng(12)
    ours = [sample_product_r(rng, [2, 2, 2])[1, 1] for _ in range(3000)]
    direct = np.abs(rng.standard_normal(3000)) * np.abs(rng.standard_normal(3000))
    assert stats.ks_2samp(ours, direct).pvalue > 0.01


def test_product_r_rejects_decreasing_widths():
    with pytest.raises(DomainError):
        sample_product_r(make_rng(0), [4, 3])
    with pytest.raises(DomainError):
        sample_product_r(make_rng(0), [4])


# -- chernoff --------------------------------------------------------------


def test_chernoff_closed_form():
    assert chernoff_tail_bound(0.5, 10) == pytest.approx(CHERNOFF_HALF_10, rel=1e-14)
    assert chernoff_tail_bound(1 - 1e-9, 7) == pytest.approx(1.0, abs=1e-12)


def test_chernoff_dominates_monte_carlo():
    rng = make_rng(13)
    sums = rng.chisquare(10, 10**6)
    assert np.mean(sums <= 5.0) <= chernoff_tail_bound(0.5, 10)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_chernoff_domain(alpha):
    with pytest.raises(DomainError):
        chernoff_tail_bound(alpha, 3)


@given(st.floats(0.01, 0.99), st.integers(1, 200))
def test_chernoff_is_probability_and_decreasing_in_d(alpha, d):
    b = chernoff_tail_bound(alpha, d)
    assert 0.0 < b <= 1.0
    assert chernoff_tail_bound(alpha, d + 1) <= b


# -- distances and projections ---------------------------------------------


def test_min_pairwise_distance_hand_example():
    assert min_pairwise_distance([(0, 0), (3, 4), (0, 1)]) == (1.0, (0, 2))


def test_min_pairwise_distance_duplicate_and_ties():
    assert min_pairwise_distance([(1, 1), (5, 5), (1, 1)]) == (0.0, (0, 2))
    assert min_pairwise_distance([(0, 0), (1, 0), (2, 0)]) == (1.0, (0, 1))


def test_min_pairwise_distance_errors():
    with pytest.raises(DimensionError):
        min_pairwise_distance([(0, 0), (1, 2, 3)])
    with pytest.raises(DomainError):
        min_pairwise_distance([(0, 0)])


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 4)), elements=st.floats(-50, 50)))
def test_min_pairwise_distance_brute_force(points):
    best, (i, j) = min_pairwise_distance(points)
    n = points.shape[0]
    brute = min(
        (np.sqrt(((points[a] - points[b]) ** 2).sum()), (a, b)) for a in range(n) for b in range(a + 1, n)
    )
    assert best == pytest.approx(brute[0], abs=1e-12)
    assert i < j


def test_gaussian_points_are_far_apart():
    # At d=64 the minimum over 2016 pairs sits near 0.71 sqrt(2d); the
    # (1 - eps) factor only approaches 1 as d grows.
    rng = make_rng(14)
    ratios = [min_pairwise_distance(rng.standard_normal((64, 64)))[0] / math.sqrt(128) for _ in range(500)]
    assert np.mean(np.array(ratios) >= 0.6) >= 0.99
    big = [min_pairwise_distance(rng.standard_normal((512, 512)))[0] / math.sqrt(1024) for _ in range(5)]
    assert np.mean(big) > np.mean(ratios) + 0.1


def test_project_onto_span_collinear_fallback():
    proj, dim = project_onto_span([np.array([1.0, 0, 0]), np.array([2.0, 0, 0])], np.array([3.0, 4.0, 5.0]))
    assert dim == 1
    npt.assert_allclose(proj, [3.0, 0.0, 0.0], atol=1e-14)
    with pytest.raises(DegenerateError):
        project_onto_span([np.zeros(3)], np.ones(3))


def test_project_onto_span_idempotent():
    rng = make_rng(15)
    dirs = list(rng.standard_normal((2, 9)))
    v = rng.standard_normal(9)
    p, dim = project_onto_span(dirs, v)
    p2, _ = project_onto_span(dirs, p)
    assert dim == 2
    npt.assert_allclose(p, p2, atol=1e-12)
    assert abs((v - p) @ dirs[0]) < 1e-10


def test_matrix_csv_round_trip(tmp_path):
    m = make_rng(16).standard_normal((4, 3))
    path = tmp_path / "m.csv"
    matrix_to_csv(m, path)
    assert np.array_equal(matrix_from_csv(path), m)
