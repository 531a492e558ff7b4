"""Fixed-length initial feature vectors for values, names and entities.

The default text featurizer hashes character n-grams, so the whole pipeline
runs without any pretrained model; precomputed embeddings can be dropped in
through the embedding file format instead.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError, GraphLookupError


@dataclass
class FeatureTable:
    """Dense vectors keyed by id or surface string.

    ngram- and file-sourced vectors are unit length (or all-zero); random
    tables are reproducible from their stored seed.
    """

    dim: int
    vectors: dict = field(default_factory=dict)
    source: str = "ngram"
    seed: int | None = None

    def get(self, key) -> np.ndarray:
        vec = self.vectors.get(key)
        if vec is None:
            raise GraphLookupError(f"no feature vector for key {key!r}")
        return vec

    def __contains__(self, key) -> bool:
        return key in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def matrix(self, keys) -> np.ndarray:
        """Vectors for `keys`, stacked in order as a (len(keys), dim) array."""
        if len(keys) == 0:
            return np.zeros((0, self.dim))
        return np.stack([self.get(k) for k in keys])


def ngram_feature(text: str, dim: int) -> np.ndarray:
    """Signed hash of character 1/2/3-grams of the lowercased text.

    Deterministic across runs and platforms; the result has unit norm except
    for the empty string, which maps to the zero vector.
    """
    if dim < 1:
        raise ConfigError(f"feature dim must be >= 1, got {dim}")
    vec = np.zeros(dim)
    s = text.lower()
    for n in (1, 2, 3):
        for i in range(len(s) - n + 1):
            digest = hashlib.blake2b(s[i:i + n].encode("utf-8"), digest_size=8).digest()
            h = int.from_bytes(digest, "big")
            vec[(h >> 1) % dim] += 1.0 if h & 1 else -1.0
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec


def ngram_table(strings_by_key, dim: int) -> FeatureTable:
    """Featurize a mapping of key -> text with `ngram_feature`."""
    vectors = {key: ngram_feature(text, dim) for key, text in strings_by_key.items()}
    return FeatureTable(dim=dim, vectors=vectors, source="ngram")


def load_embeddings(path, expected_dim: int | None = None) -> FeatureTable:
    """Load a FeatureTable from the embedding file format.

    First line ``#dim <D>``; each following line ``key<TAB>f1 f2 ... fD``.
    Vectors are L2-normalized on load (all-zero rows are kept as zero).
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split()
        if len(parts) != 2 or parts[0] != "#dim":
            raise FormatError(f"{path}: expected '#dim <D>' header, got {header!r}")
        try:
            dim = int(parts[1])
        except ValueError:
            raise FormatError(f"{path}: non-integer dim in header {header!r}") from None
        if dim < 1:
            raise FormatError(f"{path}: dim must be >= 1, got {dim}")
        if expected_dim is not None and dim != expected_dim:
            raise ConfigError(f"{path}: file dim {dim} does not match expected dim {expected_dim}")

        vectors: dict = {}
        for row_no, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line:
                continue
            key, sep, rest = line.partition("\t")
            if not sep:
                raise FormatError(f"{path}, row {row_no}: missing TAB between key and floats")
            if key in vectors:
                raise FormatError(f"{path}, row {row_no}: duplicate key {key!r}")
            fields = rest.split()
            if len(fields) != dim:
                raise FormatError(f"{path}, row {row_no}: expected {dim} floats, got {len(fields)}")
            try:
                vec = np.array([float(x) for x in fields])
            except ValueError:
                raise FormatError(f"{path}, row {row_no}: non-numeric value") from None
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"{path}, row {row_no}: non-finite value")
            norm = np.linalg.norm(vec)
            if norm > 0.0:
                vec = vec / norm
            vectors[key] = vec

    return FeatureTable(dim=dim, vectors=vectors, source="file")


def write_embeddings(path, vectors, dim: int | None = None) -> None:
    """Write key -> vector pairs in the format `load_embeddings` reads."""
    items = list(vectors.items())
    if dim is None:
        if not items:
            raise ConfigError("cannot infer dim from an empty table")
        dim = len(items[0][1])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim {dim}\n")
        for key, vec in items:
            if len(vec) != dim:
                raise ConfigError(f"vector for {key!r} has length {len(vec)}, expected {dim}")
            fh.write(str(key) + "\t" + " ".join(repr(float(x)) for x in vec) + "\n")


def project_table(file_table: FeatureTable, strings_by_key) -> FeatureTable:
    """Re-key a string-keyed table by id via an id -> string mapping."""
    vectors = {}
    for key, text in strings_by_key.items():
        if text not in file_table:
            raise GraphLookupError(f"no embedding for value {text!r}")
        vectors[key] = file_table.vectors[text]
    return FeatureTable(dim=file_table.dim, vectors=vectors, source=file_table.source)


def init_random(count: int, dim: int, seed: int) -> FeatureTable:
    """`count` vectors drawn i.i.d. uniform on [-1/sqrt(dim), +1/sqrt(dim)]."""
    if count < 1 or dim < 1:
        raise ConfigError(f"count and dim must be >= 1, got {count}, {dim}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(dim)
    mat = rng.uniform(-bound, bound, size=(count, dim))
    return FeatureTable(dim=dim, vectors={i: mat[i] for i in range(count)},
                        source="random", seed=seed)


def mix_seed(seed: int, tag: str) -> int:
    """Derive a child seed from (seed, tag); stable across runs and platforms."""
    digest = hashlib.blake2b(f"{seed}:{tag}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def keyed_random_table(labels_by_key, dim: int, seed: int) -> FeatureTable:
    """Random vectors like `init_random`, but derived from (seed, label).

    Because a key's vector depends on its label rather than its position,
    the table is unchanged when ids are reassigned, e.g. after reordering
    the lines of a triple file.
    """
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    bound = 1.0 / np.sqrt(dim)
    vectors = {}
    for key, label in labels_by_key.items():
        rng = np.random.default_rng(mix_seed(seed, label))
        vectors[key] = rng.uniform(-bound, bound, size=dim)
    return FeatureTable(dim=dim, vectors=vectors, source="random", seed=seed)
