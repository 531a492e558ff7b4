"""Name-debiased train/valid/test splits of a gold alignment.

The gold pairs whose names are least similar form the test set, so a model
cannot score well there by name matching alone; the remaining pairs are
shuffled into train and valid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, GraphLookupError
from .featurize import ngram_feature
from .kg import AlignmentSet, KnowledgeGraph, write_alignment
from .partition import NameSource, entity_names, partition

DEFAULT_RATIOS = (0.30, 0.10, 0.60)  # train, valid, test


@dataclass(frozen=True)
class AlignmentSplit:
    train: AlignmentSet
    valid: AlignmentSet
    test: AlignmentSet
    ratios: tuple[float, float, float]
    seed: int
    scores: dict[tuple[int, int], float]

    def __post_init__(self):
        split_pairs = set(self.train) | set(self.valid) | set(self.test)
        total = len(self.train) + len(self.valid) + len(self.test)
        if len(split_pairs) != total:
            raise ConfigError("split parts overlap")
        if self.test and (set(self.train) | set(self.valid)):
            hardest_kept = min(self.scores[p] for p in list(self.train) + list(self.valid))
            easiest_test = max(self.scores[p] for p in self.test)
            if easiest_test > hardest_kept:
                raise ConfigError("test set contains a pair easier than a kept pair")


def name_scores(kg1: KnowledgeGraph, kg2: KnowledgeGraph, gold: AlignmentSet,
                name_featurizer=None, name_source: NameSource | None = None,
                dim: int = 128) -> dict[tuple[int, int], float]:
    """Cosine similarity of the paired entities' name features.

    `name_featurizer` maps a name string to a vector (n-gram hashing by
    default).  A pair scores 0 when either name featurizes to a zero vector.
    """
    featurize = name_featurizer or (lambda text: ngram_feature(text, dim))
    names1 = entity_names(partition(kg1, name_source).name)
    names2 = entity_names(partition(kg2, name_source).name)

    scores: dict[tuple[int, int], float] = {}
    for e1, e2 in gold:
        if e1 not in names1:
            raise GraphLookupError(f"entity {kg1.entity_labels[e1]!r} has no name")
        if e2 not in names2:
            raise GraphLookupError(f"entity {kg2.entity_labels[e2]!r} has no name")
        v1 = np.asarray(featurize(names1[e1]), dtype=np.float64)
        v2 = np.asarray(featurize(names2[e2]), dtype=np.float64)
        n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
        scores[(e1, e2)] = float(v1 @ v2 / (n1 * n2)) if n1 > 0 and n2 > 0 else 0.0
    return scores


def build_hard_split(gold: AlignmentSet, scores: dict[tuple[int, int], float],
                     ratios: tuple[float, float, float] = DEFAULT_RATIOS,
                     seed: int = 0) -> AlignmentSplit:
    """Lowest-scoring pairs become the test set; the rest split at random.

    Sizes follow round(ratio * n) for test and train with valid taking the
    remainder.  Score ties order by KG1 entity id; the train/valid shuffle is
    fixed by `seed`.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {ratios}")
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"need three non-negative ratios, got {ratios}")
    n = len(gold)
    if n < 10:
        raise ConfigError(f"need at least 10 gold pairs, got {n}")
    missing = [p for p in gold if p not in scores]
    if missing:
        raise ConfigError(f"no score for gold pair {missing[0]}")

    n_test = int(np.floor(ratios[2] * n + 0.5))
    n_train = min(int(np.floor(ratios[0] * n + 0.5)), n - n_test)

    by_hardness = sorted(gold, key=lambda p: (scores[p], p[0]))
    test = by_hardness[:n_test]
    rest = by_hardness[n_test:]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(rest))
    shuffled = [rest[i] for i in order]
    train = shuffled[:n_train]
    valid = shuffled[n_train:]

    return AlignmentSplit(
        train=AlignmentSet(pairs=tuple(train)),
        valid=AlignmentSet(pairs=tuple(valid)),
        test=AlignmentSet(pairs=tuple(test)),
        ratios=tuple(ratios), seed=seed, scores=dict(scores),
    )


def write_split(split: AlignmentSplit, out_dir, kg1: KnowledgeGraph,
                kg2: KnowledgeGraph) -> dict[str, str]:
    """Write train/valid/test alignment files plus per-pair scores."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for part in ("train", "valid", "test"):
        path = out_dir / f"{part}.tsv"
        write_alignment(path, getattr(split, part), kg1, kg2)
        paths[part] = str(path)
    scores_path = out_dir / "scores.tsv"
    with open(scores_path, "w", encoding="utf-8") as fh:
        for part in ("train", "valid", "test"):
            for e1, e2 in getattr(split, part):
                fh.write(f"{kg1.entity_labels[e1]}\t{kg2.entity_labels[e2]}\t"
                         f"{split.scores[(e1, e2)]!r}\n")
    paths["scores"] = str(scores_path)
    return paths
