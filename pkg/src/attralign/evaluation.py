"""Rank-based alignment metrics over a similarity matrix and gold pairs."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ensemble import SimilarityMatrix
from .errors import ConfigError
from .kg import AlignmentSet

DIRECTIONS = ("left-to-right", "right-to-left", "mean-of-both")


@dataclass(frozen=True)
class EvalReport:
    hits: dict[int, float]
    mrr: float
    direction: str
    n_test: int

    def to_dict(self) -> dict:
        return {"hits": {str(n): v for n, v in sorted(self.hits.items())},
                "mrr": self.mrr, "direction": self.direction, "n_test": self.n_test}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        """Aligned text table: hits as percentages, MRR to three decimals."""
        ns = sorted(self.hits)
        headers = [f"H@{n}" for n in ns] + ["MRR"]
        values = [f"{self.hits[n] * 100:.2f}" for n in ns] + [f"{self.mrr:.3f}"]
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
        body = "  ".join(v.rjust(w) for v, w in zip(values, widths))
        return head + "\n" + body


def rank_of(s: SimilarityMatrix, e: int, e_prime: int) -> int:
    """1-based rank of the gold column within entity e's row.

    Rank counts strictly greater scores plus tied columns with a smaller
    entity id, so results do not depend on storage order.
    """
    i = s.row_index(e)
    j = s.col_index(e_prime)
    row = s.scores[i]
    gold = row[j]
    greater = int((row > gold).sum())
    col_ids = np.array(s.cols)
    tied_smaller = int(((row == gold) & (col_ids < e_prime)).sum())
    return 1 + greater + tied_smaller


def _one_direction(s: SimilarityMatrix, pairs, ns) -> tuple[dict[int, float], float]:
    ranks = np.array([rank_of(s, e, e_prime) for e, e_prime in pairs])
    hits = {n: float((ranks <= n).mean()) for n in ns}
    mrr = float((1.0 / ranks).mean())
    return hits, mrr


def _transposed(s: SimilarityMatrix) -> SimilarityMatrix:
    return SimilarityMatrix(rows=s.cols, cols=s.rows, scores=s.scores.T.copy())


def evaluate(s: SimilarityMatrix, test_pairs: AlignmentSet, ns=(1, 10),
             direction: str = "left-to-right") -> EvalReport:
    """Hits@N and MRR for the gold test pairs.

    Every test pair must lie inside the candidate sets.  `mean-of-both`
    averages the left-to-right and right-to-left metrics.
    """
    if len(test_pairs) == 0:
        raise ConfigError("empty test set")
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    ns = tuple(sorted(set(int(n) for n in ns)))

    if direction == "left-to-right":
        hits, mrr = _one_direction(s, test_pairs, ns)
    elif direction == "right-to-left":
        flipped = [(e2, e1) for e1, e2 in test_pairs]
        hits, mrr = _one_direction(_transposed(s), flipped, ns)
    else:
        h1, m1 = _one_direction(s, test_pairs, ns)
        flipped = [(e2, e1) for e1, e2 in test_pairs]
        h2, m2 = _one_direction(_transposed(s), flipped, ns)
        hits = {n: (h1[n] + h2[n]) / 2.0 for n in ns}
        mrr = (m1 + m2) / 2.0

    return EvalReport(hits=hits, mrr=mrr, direction=direction, n_test=len(test_pairs))
