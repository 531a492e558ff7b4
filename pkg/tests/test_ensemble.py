import numpy as np
import pytest

from attralign.ensemble import (EnsembleWeights, SimilarityMatrix, average_pool,
                                build_svm_samples, combine, load_similarity,
                                save_similarity, similarity_matrix, standardize,
                                train_svm)
from attralign.errors import ConfigError, DegenerateInputError, GraphLookupError
from attralign.kg import AlignmentSet


def test_similarity_diagonal_is_one_for_identical_embeddings():
    emb = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    s = similarity_matrix(emb, emb, [0, 1, 2], [0, 1, 2])
    assert np.allclose(np.diag(s.scores), 1.0)


def test_similarity_orthogonal_unit_vectors():
    emb1 = np.array([[1.0, 0.0]])
    emb2 = np.array([[0.0, 1.0]])
    s = similarity_matrix(emb1, emb2, [0], [0])
    assert abs(s.scores[0, 0]) < 1e-12


def test_similarity_matches_direct_cosine():
    rng = np.random.default_rng(4)
    emb1 = rng.normal(size=(3, 4))
    emb2 = rng.normal(size=(3, 4))
    s = similarity_matrix(emb1, emb2, [0, 1, 2], [0, 1, 2])
    for i in range(3):
        for j in range(3):
            expected = emb1[i] @ emb2[j] / (np.linalg.norm(emb1[i]) * np.linalg.norm(emb2[j]))
            assert abs(s.scores[i, j] - expected) < 1e-12


def test_similarity_rejects_zero_embedding():
    emb1 = np.array([[1.0, 0.0], [0.0, 0.0]])
    emb2 = np.array([[1.0, 0.0]])
    with pytest.raises(DegenerateInputError) as exc:
        similarity_matrix(emb1, emb2, [0, 1], [0])
    assert "entity 1" in str(exc.value)


def test_similarity_candidate_subset_and_lookup():
    emb = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    s = similarity_matrix(emb, emb, [2, 0], [1])
    assert s.rows == (2, 0)
    assert s.row_index(0) == 1
    with pytest.raises(GraphLookupError):
        s.row_index(1)


def test_standardize_matches_direct_computation():
    s = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = standardize(s)
    mean, std = s.mean(), s.std()
    assert abs(mean - 2.5) < 1e-15
    assert abs(std - np.sqrt(1.25)) < 1e-15
    assert np.allclose(out, (s - mean) / std)
    assert np.allclose(out, [[-1.3416407865, -0.4472135955],
                             [0.4472135955, 1.3416407865]])
    assert abs(out.mean()) < 1e-6
    assert abs(out.std() - 1.0) < 1e-6


def test_standardize_is_idempotent():
    rng = np.random.default_rng(1)
    s = rng.normal(size=(5, 7))
    once = standardize(s)
    twice = standardize(once)
    assert np.allclose(once, twice)


def test_standardize_constant_matrix_rejected():
    with pytest.raises(DegenerateInputError):
        standardize(np.full((3, 3), 0.7))


def test_average_pool_identity_on_equal_inputs():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(3, 3))
    out = average_pool([m, m.copy(), m.copy(), m.copy()])
    assert np.allclose(out, m)


def test_average_pool_cancellation():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(2, 4))
    out = average_pool([m, -m, m, -m])
    assert np.allclose(out, 0.0)


def test_average_pool_is_elementwise_mean():
    rng = np.random.default_rng(5)
    mats = [rng.normal(size=(2, 2)) for _ in range(4)]
    assert np.allclose(average_pool(mats), np.mean(mats, axis=0))


def test_average_pool_rejects_mismatched_candidates():
    a = SimilarityMatrix(rows=(0, 1), cols=(0,), scores=np.zeros((2, 1)))
    b = SimilarityMatrix(rows=(1, 0), cols=(0,), scores=np.zeros((2, 1)))
    with pytest.raises(ConfigError):
        average_pool([a, b])
    with pytest.raises(ConfigError):
        average_pool([np.zeros((2, 2)), np.zeros((3, 2))])


def test_combine_selects_and_sums():
    rng = np.random.default_rng(6)
    mats = [rng.normal(size=(3, 3)) for _ in range(4)]
    assert np.allclose(combine(mats, [1.0, 0.0, 0.0, 0.0]), mats[0])
    m = mats[0]
    assert np.allclose(combine([m, m, m, m], [0.25] * 4), m)
    w = rng.normal(size=4)
    direct = sum(wk * mk for wk, mk in zip(w, mats))
    assert np.allclose(combine(mats, w), direct)


def test_combine_shape_mismatch():
    with pytest.raises(ConfigError):
        combine([np.zeros((2, 2)), np.zeros((2, 3))], [0.5, 0.5])


def four_channel_matrices(n=6, seed=0):
    rng = np.random.default_rng(seed)
    rows = tuple(range(n))
    cols = tuple(range(n))
    return [SimilarityMatrix(rows=rows, cols=cols, scores=rng.uniform(-1, 1, size=(n, n)))
            for _ in range(4)]


def test_build_svm_samples_counts_and_determinism():
    mats = four_channel_matrices(12, seed=7)
    seeds = AlignmentSet(pairs=tuple((i, i) for i in range(10)))
    x1, y1 = build_svm_samples(mats, seeds, negatives_per_positive=16, seed=3)
    x2, y2 = build_svm_samples(mats, seeds, negatives_per_positive=16, seed=3)
    assert x1.shape == (10 + 160, 4)
    assert int(y1.sum()) == 10
    assert np.array_equal(x1, x2)
    assert np.array_equal(y1, y2)


def test_build_svm_samples_negatives_avoid_gold_column():
    mats = four_channel_matrices(5, seed=8)
    seeds = AlignmentSet(pairs=((0, 0),))
    x, y = build_svm_samples(mats, seeds, negatives_per_positive=50, seed=0)
    gold_vec = np.array([m.scores[0, 0] for m in mats])
    negs = x[y == 0]
    gold_cols = {tuple(np.array([m.scores[0, j] for m in mats])) for j in range(1, 5)}
    for row in negs:
        assert tuple(row) in gold_cols or not np.allclose(row, gold_vec)


def test_build_svm_samples_single_column_rejected():
    rng = np.random.default_rng(9)
    mats = [SimilarityMatrix(rows=(0,), cols=(0,), scores=rng.uniform(size=(1, 1)))
            for _ in range(4)]
    seeds = AlignmentSet(pairs=((0, 0),))
    with pytest.raises(ConfigError):
        build_svm_samples(mats, seeds)


def test_train_svm_separable_1d():
    samples = np.array([[1.0]] * 8 + [[-1.0]] * 8)
    labels = np.array([1] * 8 + [0] * 8)
    weights = train_svm(samples, labels, c=0.1)
    assert weights.w[0] > 0.0
    hist = weights.objective_history
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_train_svm_regularizer_dominates_as_c_vanishes():
    samples = np.array([[1.0, 0.2]] * 5 + [[-1.0, -0.1]] * 5)
    labels = np.array([1] * 5 + [0] * 5)
    small = train_svm(samples, labels, c=1e-9)
    big = train_svm(samples, labels, c=0.1)
    assert np.linalg.norm(small.w) < 1e-6
    assert np.linalg.norm(small.w) < np.linalg.norm(big.w)


def test_train_svm_deterministic():
    rng = np.random.default_rng(11)
    samples = rng.normal(size=(40, 4))
    labels = (rng.random(40) > 0.5).astype(int)
    labels[:2] = [0, 1]  # both classes present
    w1 = train_svm(samples, labels, c=0.01)
    w2 = train_svm(samples, labels, c=0.01)
    assert w1.w == w2.w


def test_train_svm_validates_input():
    with pytest.raises(ConfigError):
        train_svm(np.ones((3, 2)), np.array([1, 1, 1]), c=0.1)
    with pytest.raises(ConfigError):
        train_svm(np.ones((2, 2)), np.array([0, 1]), c=0.0)


def test_ensemble_weights_serialization():
    w = EnsembleWeights(w=(0.1, 0.2, 0.3, 0.4), C=0.01)
    again = EnsembleWeights.from_dict(w.to_dict())
    assert again.w == w.w
    assert again.C == w.C
    with pytest.raises(ConfigError):
        EnsembleWeights(w=(float("nan"), 0, 0, 0), C=1.0)


def test_monotone_transform_keeps_per_row_argmax():
    # a strictly increasing transform of one standardized channel cannot
    # change which column that channel ranks first in any row
    rng = np.random.default_rng(13)
    s = standardize(rng.normal(size=(8, 8)))
    transformed = np.exp(s)  # strictly increasing
    assert np.array_equal(np.argmax(s, axis=1), np.argmax(transformed, axis=1))


def test_average_pool_commutes_with_candidate_permutation():
    rng = np.random.default_rng(14)
    rows, cols = (2, 0, 1), (1, 2, 0)
    mats = [rng.normal(size=(3, 3)) for _ in range(4)]
    pooled = average_pool(mats)
    perm_r, perm_c = np.array([2, 0, 1]), np.array([1, 2, 0])
    pooled_perm = average_pool([m[perm_r][:, perm_c] for m in mats])
    assert np.allclose(pooled_perm, pooled[perm_r][:, perm_c])


def test_similarity_file_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    s = SimilarityMatrix(rows=(3, 1, 2), cols=(0, 5), scores=rng.normal(size=(3, 2)))
    path = tmp_path / "sim.txt"
    save_similarity(path, s)
    again = load_similarity(path)
    assert again.rows == s.rows
    assert again.cols == s.cols
    assert np.array_equal(again.scores, s.scores)
