"""Per-channel alignment training.

Seed pairs are pulled together under a margin ranking loss: for each pair the
cosine distance must beat every sampled negative's distance by the margin.
Negatives are the nearest same-graph entities in the current embedding space,
refreshed periodically; optimization is full-batch Adagrad.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .channels import ChannelModel, run_channel
from .errors import ConfigError, GraphLookupError, TrainingError
from .kg import AlignmentSet

LR_GRID = (0.001, 0.004, 0.007)
L2_GRID = (1e-4, 1e-3, 0.0)

ADAGRAD_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 1.0
    negatives_per_entity: int = 25
    epochs: int = 100
    learning_rate: float = 0.004
    l2: float = 1e-4
    neg_refresh_epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.negatives_per_entity < 1:
            raise ConfigError(f"negatives_per_entity must be >= 1, got {self.negatives_per_entity}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.neg_refresh_epochs < 1:
            raise ConfigError("neg_refresh_epochs must be >= 1")

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "negatives_per_entity": self.negatives_per_entity,
                "epochs": self.epochs, "learning_rate": self.learning_rate,
                "l2": self.l2, "neg_refresh_epochs": self.neg_refresh_epochs,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class NegativeSamples:
    """Per-side negatives: anchor entity id -> K same-graph entity ids."""

    left: dict[int, np.ndarray]
    right: dict[int, np.ndarray]


def _normalized(emb: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    return emb / np.where(norms > 0, norms, 1.0)


def sample_negatives(embeddings, seeds: AlignmentSet, k: int, side: str = "left") -> dict[int, np.ndarray]:
    """K nearest same-graph entities per seed entity, excluding the entity itself.

    Distance is cosine; ties break by ascending entity id, so the result is
    machine independent.  `side` picks which end of the seed pairs to anchor.
    """
    emb = embeddings.data if isinstance(embeddings, nn.Tensor2) else np.asarray(embeddings)
    n = emb.shape[0]
    if k >= n:
        raise ConfigError(f"need K < number of entities, got K={k}, n={n}")
    anchors = seeds.left if side == "left" else seeds.right
    for e in anchors:
        if not 0 <= e < n:
            raise GraphLookupError(f"seed entity {e} outside embedding matrix of {n} rows")

    unit = _normalized(emb)
    ids = np.arange(n)
    out: dict[int, np.ndarray] = {}
    for e in anchors:
        dist = 1.0 - unit @ unit[e]
        order = np.lexsort((ids, dist))
        picked = order[order != e][:k]
        out[e] = picked.astype(np.intp)
    return out


def alignment_loss(emb1, emb2, seeds: AlignmentSet, negatives: NegativeSamples,
                   gamma: float) -> nn.Tensor2:
    """Margin ranking loss over seed pairs and their sampled negatives.

    For pair (e, e') with distance d = 1 - cos: every left negative adds
    [d(e,e') - d(e-,e') + gamma]+ and every right negative adds
    [d(e,e') - d(e,e'-) + gamma]+.  Differentiable end to end.
    """
    emb1 = emb1 if isinstance(emb1, nn.Tensor2) else nn.Tensor2(np.atleast_2d(emb1))
    emb2 = emb2 if isinstance(emb2, nn.Tensor2) else nn.Tensor2(np.atleast_2d(emb2))
    if len(seeds) == 0:
        raise ConfigError("alignment loss needs at least one seed pair")
    left = np.array(seeds.left, dtype=np.intp)
    right = np.array(seeds.right, dtype=np.intp)
    if left.max() >= emb1.rows or right.max() >= emb2.rows:
        raise GraphLookupError("seed entity missing from embeddings")
    try:
        neg_left = np.stack([negatives.left[e] for e in seeds.left])
        neg_right = np.stack([negatives.right[e] for e in seeds.right])
    except KeyError as missing:
        raise GraphLookupError(f"no negatives sampled for seed entity {missing}") from None
    k = neg_left.shape[1]

    n1 = nn.normalize_rows(emb1)
    n2 = nn.normalize_rows(emb2)
    cos_pos = nn.row_sums(nn.mul(nn.gather_rows(n1, left), nn.gather_rows(n2, right)))
    pos_rep = nn.gather_rows(cos_pos, np.repeat(np.arange(len(seeds)), k))

    # d(e,e') - d(e-,e') + gamma == cos(e-,e') - cos(e,e') + gamma
    cos_neg_l = nn.row_sums(nn.mul(nn.gather_rows(n1, neg_left.ravel()),
                                   nn.gather_rows(n2, np.repeat(right, k))))
    hinge_l = nn.relu(nn.add(nn.sub(cos_neg_l, pos_rep), nn.Tensor2([[float(gamma)]])))

    cos_neg_r = nn.row_sums(nn.mul(nn.gather_rows(n1, np.repeat(left, k)),
                                   nn.gather_rows(n2, neg_right.ravel())))
    hinge_r = nn.relu(nn.add(nn.sub(cos_neg_r, pos_rep), nn.Tensor2([[float(gamma)]])))

    return nn.add(nn.sum_all(hinge_l), nn.sum_all(hinge_r))


def adagrad_step(params: nn.ParamSet, state: dict[str, np.ndarray],
                 lr: float, l2: float = 0.0) -> None:
    """One Adagrad update from the accumulated gradients.

    L2 decay folds into the gradient first; the squared-gradient accumulators
    live in `state`, keyed by parameter name.
    """
    for name, p in params.items():
        g = p.grad
        if l2:
            g = g + l2 * p.data
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        acc = state.get(name)
        if acc is None:
            acc = state[name] = np.zeros_like(g)
        acc += g * g
        p.data -= lr * g / (np.sqrt(acc) + ADAGRAD_EPS)


def train_channel(model: ChannelModel, seeds: AlignmentSet, cfg: TrainConfig,
                  value_features: tuple | None = None) -> list[float]:
    """Train one channel on its subgraph pair; returns the per-epoch loss history.

    Each epoch runs a full-batch forward on both graphs, the margin loss,
    backward, and one Adagrad step.  Negatives refresh from the current
    embeddings every `neg_refresh_epochs` epochs, starting with the untrained
    embeddings of epoch one.  Deterministic for a fixed model and config.
    """
    sub1, sub2 = model.subgraphs
    vf1, vf2 = value_features if value_features is not None else (None, None)
    state: dict[str, np.ndarray] = {}
    negatives: NegativeSamples | None = None
    history: list[float] = []

    for epoch in range(cfg.epochs):
        emb1 = run_channel(model, sub1, vf1)
        emb2 = run_channel(model, sub2, vf2)
        if negatives is None or epoch % cfg.neg_refresh_epochs == 0:
            negatives = NegativeSamples(
                left=sample_negatives(emb1.data, seeds, cfg.negatives_per_entity, "left"),
                right=sample_negatives(emb2.data, seeds, cfg.negatives_per_entity, "right"),
            )
        model.params.zero_grad()
        loss = alignment_loss(emb1, emb2, seeds, negatives, cfg.gamma)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingError(f"non-finite loss at epoch {epoch + 1}")
        nn.backward(loss)
        adagrad_step(model.params, state, cfg.learning_rate, cfg.l2)
        history.append(value)
    return history
