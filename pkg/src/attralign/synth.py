"""Paired synthetic knowledge graphs with a planted gold alignment.

The second graph is an isomorphic copy of the first under a random entity
permutation, with controllable corruption: a fraction of entities get
unrelated names, literal values take per-character noise, and digital values
get relative jitter.  Generation is deterministic under the seed.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .kg import AlignmentSet, KnowledgeGraph, kg_from_triples, write_alignment, write_kg

_VOWELS = "aeiou"
_CONSONANTS = "".join(c for c in string.ascii_lowercase if c not in _VOWELS)

N_RELATIONS = 4


@dataclass(frozen=True)
class SynthConfig:
    n_entities: int = 100
    avg_degree: float = 4.0
    n_literal_attrs: int = 2
    n_digital_attrs: int = 2
    p_hard_name: float = 0.0
    literal_noise: float = 0.0
    digital_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_entities < 10:
            raise ConfigError(f"need at least 10 entities, got {self.n_entities}")
        for field in ("p_hard_name", "literal_noise", "digital_jitter"):
            v = getattr(self, field)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{field} must be in [0, 1], got {v}")
        if self.avg_degree <= 0:
            raise ConfigError("avg_degree must be positive")

    def to_dict(self) -> dict:
        return {"n_entities": self.n_entities, "avg_degree": self.avg_degree,
                "n_literal_attrs": self.n_literal_attrs,
                "n_digital_attrs": self.n_digital_attrs,
                "p_hard_name": self.p_hard_name, "literal_noise": self.literal_noise,
                "digital_jitter": self.digital_jitter, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        return cls(**d)


def _word(rng, min_syllables=2, max_syllables=4) -> str:
    k = int(rng.integers(min_syllables, max_syllables + 1))
    return "".join(_CONSONANTS[rng.integers(len(_CONSONANTS))] +
                   _VOWELS[rng.integers(len(_VOWELS))] for _ in range(k))


def _unique_name(rng, taken: set) -> str:
    while True:
        name = (_word(rng).capitalize() + " " + _word(rng).capitalize())
        if name not in taken:
            taken.add(name)
            return name


def _trigrams(text: str) -> set:
    s = text.lower()
    return {s[i:i + 3] for i in range(len(s) - 2)}


def _unrelated_name(rng, original: str, taken: set) -> str:
    forbidden = _trigrams(original)
    while True:
        name = _word(rng, 3, 5).capitalize() + " " + _word(rng, 3, 5).capitalize()
        if name not in taken and not (_trigrams(name) & forbidden):
            taken.add(name)
            return name


def _corrupt(rng, text: str, p: float) -> str:
    if p <= 0:
        return text
    chars = list(text)
    for i, _ in enumerate(chars):
        if rng.random() < p:
            chars[i] = string.ascii_lowercase[rng.integers(26)]
    return "".join(chars)


def generate(cfg: SynthConfig) -> tuple[KnowledgeGraph, KnowledgeGraph, AlignmentSet]:
    """Generate (kg1, kg2, gold) for the configured corruption profile."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_entities

    taken1: set = set()
    names1 = [_unique_name(rng, taken1) for _ in range(n)]
    labels1 = [name.replace(" ", "_") for name in names1]

    # out-degree per entity: Poisson clipped to [1, n-1] so nobody is isolated
    rel_triples1 = []
    rel_pairs = []
    for i in range(n):
        degree = int(np.clip(rng.poisson(cfg.avg_degree), 1, n - 1))
        others = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        targets = rng.choice(others, size=degree, replace=False)
        for t in targets:
            r = int(rng.integers(N_RELATIONS))
            rel_pairs.append((i, r, int(t)))
            rel_triples1.append((labels1[i], f"rel_{r}", labels1[int(t)]))

    literal_attrs = [f"lit_attr_{j}" for j in range(cfg.n_literal_attrs)]
    digital_attrs = [f"dig_attr_{j}" for j in range(cfg.n_digital_attrs)]
    literal_values = [[_word(rng) + " " + _word(rng) for _ in literal_attrs] for _ in range(n)]
    digital_values = [[int(rng.integers(100, 100_000)) for _ in digital_attrs] for _ in range(n)]

    attr_triples1 = []
    for i in range(n):
        for attr, value in zip(literal_attrs, literal_values[i]):
            attr_triples1.append((labels1[i], attr, value))
        for attr, value in zip(digital_attrs, digital_values[i]):
            attr_triples1.append((labels1[i], attr, str(value)))

    # second graph: same topology, corrupted surface forms
    n_renamed = int(round(cfg.p_hard_name * n))
    renamed = set(int(i) for i in rng.choice(n, size=n_renamed, replace=False))
    taken2: set = set()
    names2 = []
    for i in range(n):
        if i in renamed:
            names2.append(_unrelated_name(rng, names1[i], taken2))
        else:
            taken2.add(names1[i])
            names2.append(names1[i])
    labels2 = [name.replace(" ", "_") for name in names2]

    rel_triples2 = [(labels2[h], f"rel_{r}", labels2[t]) for h, r, t in rel_pairs]
    attr_triples2 = []
    for i in range(n):
        for attr, value in zip(literal_attrs, literal_values[i]):
            attr_triples2.append((labels2[i], attr, _corrupt(rng, value, cfg.literal_noise)))
        for attr, value in zip(digital_attrs, digital_values[i]):
            jitter = rng.uniform(-cfg.digital_jitter, cfg.digital_jitter)
            attr_triples2.append((labels2[i], attr, str(max(1, int(round(value * (1.0 + jitter)))))))

    # shuffle kg2's line order so its id assignment is a nontrivial permutation
    rel_order = rng.permutation(len(rel_triples2))
    attr_order = rng.permutation(len(attr_triples2))
    rel_triples2 = [rel_triples2[i] for i in rel_order]
    attr_triples2 = [attr_triples2[i] for i in attr_order]

    kg1 = kg_from_triples(rel_triples1, attr_triples1)
    kg2 = kg_from_triples(rel_triples2, attr_triples2)
    gold = AlignmentSet(pairs=tuple((kg1.entity_id(labels1[i]), kg2.entity_id(labels2[i]))
                                    for i in range(n)))
    return kg1, kg2, gold


def write_synth(cfg: SynthConfig, out_dir) -> dict[str, str]:
    """Generate and write the triple files, gold alignment and config."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kg1, kg2, gold = generate(cfg)
    paths = {
        "kg1_rel": str(out_dir / "kg1_rel.tsv"),
        "kg1_attr": str(out_dir / "kg1_attr.tsv"),
        "kg2_rel": str(out_dir / "kg2_rel.tsv"),
        "kg2_attr": str(out_dir / "kg2_attr.tsv"),
        "gold": str(out_dir / "gold.tsv"),
        "config": str(out_dir / "synth_config.json"),
    }
    write_kg(kg1, paths["kg1_rel"], paths["kg1_attr"])
    write_kg(kg2, paths["kg2_rel"], paths["kg2_attr"])
    write_alignment(paths["gold"], gold, kg1, kg2)
    with open(paths["config"], "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths
