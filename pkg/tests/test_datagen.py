import json
import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fragility_lab.datagen import (
    Dataset,
    GeneratorMeta,
    PathSpec,
    bit_of_class,
    boundary_pair,
    gen_generative_chain,
    gen_hypercube,
    gen_orthogonal_label,
    gray_code_signs,
    make_path,
)
from fragility_lab.exceptions import DimensionError, DomainError
from fragility_lab.rmt import make_rng, min_pairwise_distance, qr_decompose


def test_orthogonal_label_shape():
    data = gen_orthogonal_label(make_rng(0), 2)
    assert len(data) == 2 and data.d == 2
    assert set(data.labels) == {0, 1}
    npt.assert_array_equal(data.generator.a_matrix.T, data.inputs)


def test_orthogonal_label_deterministic():
    a = gen_orthogonal_label(make_rng(3), 6)
    b = gen_orthogonal_label(make_rng(3), 6)
    assert np.array_equal(a.inputs, b.inputs)
    assert np.array_equal(a.labels, b.labels)


def test_orthogonal_label_coordinate_means():
    rng = make_rng(1)
    data = gen_orthogonal_label(rng, 400)
    count, d = data.inputs.shape
    # per-coordinate means over points are N(0, 1/count); allow 4 standard errors
    assert np.all(np.abs(data.inputs.mean(axis=0)) < 4 / math.sqrt(count) + 1e-12)
    assert abs(data.inputs.mean()) < 4 / math.sqrt(count * d)


def test_orthogonal_label_min_distance_scale():
    rng = make_rng(2)
    ratios = [min_pairwise_distance(gen_orthogonal_label(rng, 64).inputs)[0] / math.sqrt(128) for _ in range(500)]
    assert np.mean(np.array(ratios) >= 0.6) >= 0.99


def test_chain_metadata_and_labels():
    data = gen_generative_chain(make_rng(4), 5, 3)
    assert data.kind == "generative_chain"
    assert len(data.generator.chain) == 3
    npt.assert_array_equal(data.labels, np.arange(5))
    prod = data.generator.chain[2] @ data.generator.chain[1] @ data.generator.chain[0]
    # x = G_t...G_1 v, so X lies in the range of the chain product
    v = np.linalg.solve(prod, data.generator.a_matrix)
    npt.assert_allclose(prod @ v, data.generator.a_matrix, atol=1e-10)


def test_chain_covariance_matches_generator():
    data = gen_generative_chain(make_rng(5), 6, 1, n_points=100_000)
    g = data.generator.chain[0]
    cov = np.cov(data.inputs.T, bias=True)
    assert np.max(np.abs(cov - g @ g.T)) < 0.05


def test_chain_distances_concentrate():
    # Squared distances average to 2d; the minimum over all pairs sits lower
    # at d=64 because the chain product has a spread of singular values.
    rng = make_rng(6)
    ratios, mean_sq = [], []
    for _ in range(100):
        x = gen_generative_chain(rng, 64, 3).inputs
        ratios.append(min_pairwise_distance(x)[0] / math.sqrt(128))
        diff = x[:, None, :] - x[None, :, :]
        sq = (diff**2).sum(-1)[np.triu_indices(64, 1)]
        mean_sq.append(sq.mean() / 128)
    assert np.mean(np.array(ratios) >= 0.35) >= 0.95
    assert abs(np.mean(mean_sq) - 1.0) < 0.05


def test_chain_rejects_bad_length():
    with pytest.raises(DomainError):
        gen_generative_chain(make_rng(0), 4, 0)


def test_gray_code_enumeration_exhaustive():
    signs = gray_code_signs(np.arange(8), 3)
    assert {tuple(s) for s in signs} == {(a, b, c) for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)}
    # neighbours in Gray order differ in exactly one coordinate
    assert np.all(np.sum(signs[1:] != signs[:-1], axis=1) == 1)


def test_hypercube_exhaustive_small():
    data = gen_hypercube(make_rng(0), 3, sample_count=8)
    codes = {tuple(z) for z in data.generator.z_codes}
    assert len(codes) == 8
    assert np.sum(data.labels == 0) == 4


def test_hypercube_defaults():
    assert len(gen_hypercube(make_rng(0), 10)) == 1024
    assert len(gen_hypercube(make_rng(0), 15)) == 2**14


def test_hypercube_labels_follow_last_bit():
    data = gen_hypercube(make_rng(1), 6)
    for label, z in zip(data.labels, data.generator.z_codes):
        assert bit_of_class(label) == z[-1]


def test_hypercube_column_scale_leaves_last_r_column():
    a = gen_hypercube(make_rng(2), 7, column_scale=1.0).generator.a_matrix
    b = gen_hypercube(make_rng(2), 7, column_scale=5.0).generator.a_matrix
    npt.assert_allclose(b[:, :-1], 5.0 * a[:, :-1])
    npt.assert_array_equal(b[:, -1], a[:, -1])
    ra, rb = qr_decompose(a).r, qr_decompose(b).r
    assert rb[-1, -1] == pytest.approx(ra[-1, -1], rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1), st.floats(0.5, 8.0))
def test_hypercube_codes_recoverable(d, seed, scale):
    data = gen_hypercube(make_rng(seed), d, column_scale=scale)
    a = data.generator.a_matrix
    assert np.linalg.cond(a) < 1e12
    z_hat = np.linalg.solve(a, data.inputs.T).T
    npt.assert_array_equal(np.sign(z_hat), data.generator.z_codes)
    assert set(np.unique(data.generator.z_codes)) <= {-1, 1}


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_hypercube_sampling_without_replacement(d, seed):
    count = min(2**d, 50)
    data = gen_hypercube(make_rng(seed), d, sample_count=count)
    assert len({tuple(z) for z in data.generator.z_codes}) == count


def test_hypercube_large_d_sampled():
    data = gen_hypercube(make_rng(3), 24, sample_count=300)
    assert len({tuple(z) for z in data.generator.z_codes}) == 300


def test_hypercube_rejects_oversampling():
    with pytest.raises(DomainError):
        gen_hypercube(make_rng(0), 3, sample_count=9)
    with pytest.raises(DomainError):
        gen_hypercube(make_rng(0), 3, column_scale=0.0)


def test_generators_bit_identical():
    a = gen_hypercube(make_rng(11), 8, column_scale=5.0)
    b = gen_hypercube(make_rng(11), 8, column_scale=5.0)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.generator.a_matrix, b.generator.a_matrix)


def test_boundary_pair_differs_in_last_bit():
    data = gen_hypercube(make_rng(4), 6)
    b1, b2 = boundary_pair(make_rng(9), data)
    a = data.generator.a_matrix
    z1, z2 = np.linalg.solve(a, b1), np.linalg.solve(a, b2)
    npt.assert_allclose(z1[:-1], z2[:-1], atol=1e-10)
    assert z1[-1] == pytest.approx(1.0) and z2[-1] == pytest.approx(-1.0)
    npt.assert_allclose(b1 - b2, 2 * a[:, -1], atol=1e-10)


def test_dataset_json_round_trip():
    for data in (gen_hypercube(make_rng(5), 4), gen_generative_chain(make_rng(5), 3, 2), gen_orthogonal_label(make_rng(5), 3)):
        data.seed = 5
        back = Dataset.from_dict(json.loads(json.dumps(data.to_dict())))
        assert np.array_equal(back.inputs, data.inputs)
        assert np.array_equal(back.labels, data.labels)
        assert back.kind == data.kind and back.seed == 5
        assert np.array_equal(back.generator.a_matrix, data.generator.a_matrix)


def test_dataset_rejects_bad_labels():
    meta = GeneratorMeta("orthogonal_label", n_classes=2, a_matrix=np.eye(2))
    with pytest.raises(DomainError):
        Dataset(np.eye(2), [0, 2], meta)
    with pytest.raises(DimensionError):
        Dataset(np.eye(2), [0], meta)


def test_meta_requires_kind_fields():
    with pytest.raises(DomainError):
        GeneratorMeta("hypercube", n_classes=2, a_matrix=np.eye(2))


def test_make_path_grid():
    path = make_path(np.zeros(2), np.ones(2), 11)
    npt.assert_allclose(path.alphas, np.arange(11) / 10, atol=1e-15)
    assert make_path(np.zeros(2), np.ones(2), 2).alphas.tolist() == [0.0, 1.0]
    npt.assert_allclose(path.point(1.0), np.ones(2))
    npt.assert_allclose(path.point(0.3), [0.3, 0.3])
    npt.assert_allclose(path.points()[3], [0.3, 0.3])
    assert path.length == pytest.approx(math.sqrt(2))


def test_make_path_errors():
    with pytest.raises(DimensionError):
        make_path(np.zeros(2), np.zeros(3), 4)
    with pytest.raises(DomainError):
        make_path(np.zeros(2), np.ones(2), 1)


def test_pathspec_requires_grid_endpoints():
    with pytest.raises(DomainError):
        PathSpec(np.zeros(2), np.ones(2), np.array([0.0, 0.5]))
    with pytest.raises(DomainError):
        PathSpec(np.zeros(2), np.ones(2), np.array([0.0, 0.6, 0.4, 1.0]))
