"""Per-channel similarity matrices and their combination.

Two combination modes: standardize each channel's matrix to zero mean and
unit variance then average, or learn one weight per channel with a
hinge-loss separator over sampled (gold, non-gold) cells and sum the raw
matrices under those weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError, DegenerateInputError, FormatError, GraphLookupError
from .kg import AlignmentSet

SVM_ITERATIONS = 1000
SVM_NEGATIVES_PER_POSITIVE = 16
SVM_C_GRID = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense scores between KG1 row candidates and KG2 column candidates."""

    rows: tuple[int, ...]
    cols: tuple[int, ...]
    scores: np.ndarray

    def __post_init__(self):
        if self.scores.shape != (len(self.rows), len(self.cols)):
            raise ConfigError(f"scores shape {self.scores.shape} does not match "
                              f"{len(self.rows)} rows x {len(self.cols)} cols")

    def row_index(self, e: int) -> int:
        try:
            return self.rows.index(e)
        except ValueError:
            raise GraphLookupError(f"entity {e} is not a row candidate") from None

    def col_index(self, e: int) -> int:
        try:
            return self.cols.index(e)
        except ValueError:
            raise GraphLookupError(f"entity {e} is not a column candidate") from None

    def with_scores(self, scores: np.ndarray) -> "SimilarityMatrix":
        return SimilarityMatrix(rows=self.rows, cols=self.cols, scores=scores)


def similarity_matrix(emb1, emb2, row_candidates, col_candidates) -> SimilarityMatrix:
    """Cosine similarity between candidate embeddings of the two graphs."""
    emb1 = emb1.data if isinstance(emb1, nn.Tensor2) else np.asarray(emb1, dtype=np.float64)
    emb2 = emb2.data if isinstance(emb2, nn.Tensor2) else np.asarray(emb2, dtype=np.float64)
    rows = tuple(int(e) for e in row_candidates)
    cols = tuple(int(e) for e in col_candidates)
    for cand, emb, side in ((rows, emb1, "KG1"), (cols, emb2, "KG2")):
        for e in cand:
            if not 0 <= e < emb.shape[0]:
                raise GraphLookupError(f"{side} candidate {e} missing from embeddings")
            if np.linalg.norm(emb[e]) == 0.0:
                raise DegenerateInputError(f"{side} entity {e} has a zero embedding")
    a = emb1[list(rows)]
    b = emb2[list(cols)]
    a = a / np.linalg.norm(a, axis=1, keepdims=True)
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    scores = np.clip(a @ b.T, -1.0, 1.0)
    return SimilarityMatrix(rows=rows, cols=cols, scores=scores)


def _scores_of(s):
    return s.scores if isinstance(s, SimilarityMatrix) else np.asarray(s, dtype=np.float64)


def _like(s, scores):
    return s.with_scores(scores) if isinstance(s, SimilarityMatrix) else scores


def standardize(s):
    """Subtract the global mean and divide by the population std."""
    scores = _scores_of(s)
    if scores.size == 0:
        raise ConfigError("cannot standardize an empty matrix")
    std = scores.std()
    if std == 0.0:
        raise DegenerateInputError("constant similarity matrix carries no signal")
    return _like(s, (scores - scores.mean()) / std)


def _check_same_candidates(mats):
    first = mats[0]
    shapes = {_scores_of(m).shape for m in mats}
    if len(shapes) != 1:
        raise ConfigError(f"matrix shapes differ: {sorted(shapes)}")
    if isinstance(first, SimilarityMatrix):
        for m in mats[1:]:
            if not isinstance(m, SimilarityMatrix) or m.rows != first.rows or m.cols != first.cols:
                raise ConfigError("candidate orderings differ between matrices")


def average_pool(standardized_mats):
    """Elementwise mean of equally shaped (standardized) matrices."""
    mats = list(standardized_mats)
    if not mats:
        raise ConfigError("average_pool needs at least one matrix")
    _check_same_candidates(mats)
    mean = np.mean([_scores_of(m) for m in mats], axis=0)
    return _like(mats[0], mean)


def combine(raw_mats, weights):
    """Weighted elementwise sum of the raw channel matrices."""
    mats = list(raw_mats)
    w = weights.w if isinstance(weights, EnsembleWeights) else tuple(weights)
    if len(mats) != len(w):
        raise ConfigError(f"{len(mats)} matrices but {len(w)} weights")
    _check_same_candidates(mats)
    total = sum(float(wk) * _scores_of(m) for wk, m in zip(w, mats))
    return _like(mats[0], total)


@dataclass(frozen=True)
class EnsembleWeights:
    """One weight per channel plus the regularization constant they were fit with."""

    w: tuple[float, ...]
    C: float
    objective_history: tuple[float, ...] = ()

    def __post_init__(self):
        if not all(np.isfinite(self.w)):
            raise ConfigError("non-finite ensemble weights")

    def to_dict(self) -> dict:
        return {"w": list(self.w), "C": self.C}

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleWeights":
        return cls(w=tuple(float(x) for x in d["w"]), C=float(d["C"]))


def build_svm_samples(raw_mats, seeds: AlignmentSet,
                      negatives_per_positive: int = SVM_NEGATIVES_PER_POSITIVE,
                      seed: int = 0):
    """Training cells for the channel-weight separator.

    One positive per seed pair (its score vector across channels) plus
    `negatives_per_positive` cells (e, e'') with e'' drawn uniformly from the
    column candidates not aligned to e.  Returns (samples, labels).
    """
    mats = [m if isinstance(m, SimilarityMatrix) else None for m in raw_mats]
    if any(m is None for m in mats):
        raise ConfigError("build_svm_samples needs SimilarityMatrix inputs")
    if len(seeds) == 0:
        raise ConfigError("need at least one seed pair")
    _check_same_candidates(mats)
    first = mats[0]
    col_ids = np.array(first.cols)
    rng = np.random.default_rng(seed)

    xs: list[np.ndarray] = []
    ys: list[int] = []
    for e1, e2 in seeds:
        i = first.row_index(e1)
        j = first.col_index(e2)
        xs.append(np.array([m.scores[i, j] for m in mats]))
        ys.append(1)
        eligible = col_ids[col_ids != e2]
        if eligible.size == 0:
            raise ConfigError(f"no non-gold column candidates to sample for entity {e1}")
        draws = rng.choice(eligible, size=negatives_per_positive, replace=True)
        for e_neg in draws:
            jn = first.col_index(int(e_neg))
            xs.append(np.array([m.scores[i, jn] for m in mats]))
            ys.append(0)
    return np.stack(xs), np.array(ys)


def _svm_objective(w, samples, labels, c):
    margins = samples @ w
    pos = np.maximum(0.0, 1.0 - margins[labels == 1]).sum()
    neg = np.maximum(0.0, 1.0 + margins[labels == 0]).sum()
    return c * (pos + neg) + 0.5 * float(w @ w)


def train_svm(samples, labels, c: float, iterations: int = SVM_ITERATIONS) -> EnsembleWeights:
    """Fit channel weights by deterministic subgradient descent from w = 0.

    Minimizes C * sum of one-sided hinges (gold cells pushed above +1,
    non-gold below -1) plus 0.5 ||w||^2.  The base step at iteration t is
    1/t; a step that would raise the objective is halved until it does not,
    which keeps the recorded objective non-increasing.
    """
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels)
    if samples.ndim != 2 or samples.shape[0] != labels.shape[0]:
        raise ConfigError("samples and labels disagree")
    if c <= 0:
        raise ConfigError(f"C must be positive, got {c}")
    present = set(np.unique(labels).tolist())
    if present != {0, 1}:
        raise ConfigError(f"need both classes present, got labels {sorted(present)}")

    w = np.zeros(samples.shape[1])
    obj = _svm_objective(w, samples, labels, c)
    history = [obj]
    pos_mask = labels == 1
    for t in range(1, iterations + 1):
        margins = samples @ w
        grad = w.copy()
        active_pos = pos_mask & (1.0 - margins > 0)
        active_neg = ~pos_mask & (1.0 + margins > 0)
        grad -= c * samples[active_pos].sum(axis=0)
        grad += c * samples[active_neg].sum(axis=0)

        step = 1.0 / t
        for _ in range(40):
            cand = w - step * grad
            cand_obj = _svm_objective(cand, samples, labels, c)
            if cand_obj <= obj:
                w, obj = cand, cand_obj
                break
            step *= 0.5
        history.append(obj)
    return EnsembleWeights(w=tuple(float(x) for x in w), C=float(c),
                           objective_history=tuple(history))


# ---------------------------------------------------------------------------
# text persistence

def save_similarity(path, s: SimilarityMatrix) -> None:
    """Header '#sim <rows> <cols>', then row ids, col ids, row-major floats."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#sim {len(s.rows)} {len(s.cols)}\n")
        fh.write(" ".join(str(e) for e in s.rows) + "\n")
        fh.write(" ".join(str(e) for e in s.cols) + "\n")
        for row in s.scores:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_similarity(path) -> SimilarityMatrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "#sim":
            raise FormatError(f"{path}: expected '#sim <rows> <cols>' header")
        n_rows, n_cols = int(header[1]), int(header[2])
        rows = tuple(int(x) for x in fh.readline().split())
        cols = tuple(int(x) for x in fh.readline().split())
        if len(rows) != n_rows or len(cols) != n_cols:
            raise FormatError(f"{path}: candidate id lines do not match header")
        scores = np.array([[float(x) for x in fh.readline().split()] for _ in range(n_rows)])
        if scores.shape != (n_rows, max(n_cols, 0)) and n_rows > 0:
            raise FormatError(f"{path}: truncated score rows")
    return SimilarityMatrix(rows=rows, cols=cols, scores=scores.reshape(n_rows, n_cols))
