"""GNN channels over the attribute-typed subgraphs.

A channel stacks two layers.  Literal and digital channels put an attention
encoder first: each entity attends over its (attribute, value) pairs, scoring
pair j by a learned projection of [entity state; attribute feature], then
aggregates the concatenated [attribute; value] features under those weights.
The second layer (the only kind of layer in the name and structure channels)
averages the entity's state with its relation neighbors' states through a
learned matrix.  Name, literal and digital channels add skip connections at
both layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import ConfigError, DegenerateInputError, GraphLookupError, ShapeError
from .featurize import FeatureTable, keyed_random_table, mix_seed
from .partition import KINDS, Subgraph

LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class ChannelConfig:
    """Architecture of one channel; `layers` is fixed at two."""

    kind: str
    layers: int = 2
    hidden_dims: tuple[int, int] = (128, 128)
    use_encoder: bool = False
    use_residual: bool = True
    max_attr_triples: int = 20
    entity_dim: int = 128
    attr_dim: int = 128

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown channel kind {self.kind!r}")
        if self.layers != 2:
            raise ConfigError(f"channels have exactly two layers, got {self.layers}")
        if len(self.hidden_dims) != 2:
            raise ConfigError("hidden_dims must list one dim per layer")
        if self.max_attr_triples < 1:
            raise ConfigError("max_attr_triples must be >= 1")
        if self.use_residual:
            dims = (self.entity_dim,) + tuple(self.hidden_dims)
            if len(set(dims)) != 1:
                raise ConfigError(f"residual connections need equal dims, got {dims}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "layers": self.layers,
                "hidden_dims": list(self.hidden_dims),
                "use_encoder": self.use_encoder, "use_residual": self.use_residual,
                "max_attr_triples": self.max_attr_triples,
                "entity_dim": self.entity_dim, "attr_dim": self.attr_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelConfig":
        d = dict(d)
        d["hidden_dims"] = tuple(d.get("hidden_dims", (128, 128)))
        return cls(**d)


def channel_config(kind: str, dim: int = 128, max_attr_triples: int = 20) -> ChannelConfig:
    """Default per-kind configuration with one shared width."""
    return ChannelConfig(kind=kind, hidden_dims=(dim, dim),
                         use_encoder=kind in ("literal", "digital"),
                         use_residual=kind != "structure",
                         max_attr_triples=max_attr_triples,
                         entity_dim=dim, attr_dim=dim)


def _mean_adjacency(sub: Subgraph) -> np.ndarray:
    """Row i averages entity i with its relation neighbors (set semantics)."""
    n = sub.n_entities
    adj = np.zeros((n, n))
    for e in range(n):
        members = set(sub.base.adjacency[e])
        members.add(e)
        w = 1.0 / len(members)
        for j in members:
            adj[e, j] = w
    return adj


def _capped_triples(sub: Subgraph, cap: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per entity: (attribute ids, value ids), sorted by (attr, value), first `cap` kept."""
    grouped: dict[int, list[tuple[int, int]]] = {}
    for e, a, v in sub.attribute_triples:
        grouped.setdefault(e, []).append((a, v))
    out = []
    for e in range(sub.n_entities):
        pairs = sorted(grouped.get(e, ()))[:cap]
        aids = np.array([p[0] for p in pairs], dtype=np.intp)
        vids = np.array([p[1] for p in pairs], dtype=np.intp)
        out.append((aids, vids))
    return out


@dataclass
class ChannelModel:
    """Learnable state of one channel, spanning both graphs of a pair."""

    config: ChannelConfig
    params: nn.ParamSet
    subgraphs: tuple[Subgraph, Subgraph]
    adjacency: tuple[np.ndarray, np.ndarray] = field(repr=False)
    triples: tuple[list, list] = field(repr=False)

    def side_of(self, sub: Subgraph) -> int:
        if sub.kind != self.config.kind:
            raise ConfigError(f"{self.config.kind} channel got a {sub.kind} subgraph")
        for i, known in enumerate(self.subgraphs):
            if known is sub or known.base is sub.base:
                return i
        raise GraphLookupError("subgraph does not belong to this channel model")

    def load_params(self, path) -> None:
        loaded = nn.ParamSet.load(path)
        if loaded.names() != self.params.names():
            raise ConfigError(f"checkpoint parameters {loaded.names()} do not match "
                              f"model parameters {self.params.names()}")
        for name, p in self.params.items():
            if loaded[name].data.shape != p.data.shape:
                raise ConfigError(f"checkpoint parameter {name!r} has shape "
                                  f"{loaded[name].data.shape}, expected {p.data.shape}")
            p.data[...] = loaded[name].data


def _uniform_init(rng, rows, cols):
    bound = 1.0 / np.sqrt(cols)
    return rng.uniform(-bound, bound, size=(rows, cols))


def build_channel_model(config: ChannelConfig, sub1: Subgraph, sub2: Subgraph,
                        entity_init1: FeatureTable, entity_init2: FeatureTable,
                        value_dim: int | None = None, seed: int = 0) -> ChannelModel:
    """Assemble parameters and caches for a channel over a subgraph pair.

    Entity states start from the given tables (name features for the name
    channel, random elsewhere) and train by backprop, as do the per-side
    attribute features of encoder channels.  Value features stay frozen and
    are supplied to `run_channel` separately.
    """
    if sub1.kind != config.kind or sub2.kind != config.kind:
        raise ConfigError(f"channel kind {config.kind!r} does not match subgraphs "
                          f"({sub1.kind!r}, {sub2.kind!r})")
    for table, sub in ((entity_init1, sub1), (entity_init2, sub2)):
        if table.dim != config.entity_dim:
            raise ConfigError(f"entity init dim {table.dim} != configured {config.entity_dim}")
        missing = [e for e in range(sub.n_entities) if e not in table]
        if missing:
            raise GraphLookupError(f"entity init lacks vectors for entities {missing[:5]}")
    if config.use_encoder and value_dim is None:
        raise ConfigError("encoder channels need value_dim at build time")

    rng = np.random.default_rng(seed)
    d1, d2 = config.hidden_dims
    params = nn.ParamSet()
    params.add("ent1", entity_init1.matrix(range(sub1.n_entities)))
    params.add("ent2", entity_init2.matrix(range(sub2.n_entities)))
    if config.use_encoder:
        params.add("w1", _uniform_init(rng, d1, config.attr_dim + value_dim))
        params.add("u", _uniform_init(rng, config.entity_dim + config.attr_dim, 1))
        params.add("w_fb", _uniform_init(rng, d1, config.entity_dim))
        # attribute features keyed by label, so id reassignment cannot move them
        for side, sub in ((1, sub1), (2, sub2)):
            labels = {a: sub.attr_labels[a] for a in range(sub.n_attributes)} or {0: ""}
            table = keyed_random_table(labels, config.attr_dim,
                                       mix_seed(seed, f"attr{side}"))
            params.add(f"attr{side}", table.matrix(sorted(labels)))
    else:
        params.add("w1", _uniform_init(rng, d1, config.entity_dim))
    params.add("w2", _uniform_init(rng, d2, d1))

    return ChannelModel(
        config=config, params=params, subgraphs=(sub1, sub2),
        adjacency=(_mean_adjacency(sub1), _mean_adjacency(sub2)),
        triples=(_capped_triples(sub1, config.max_attr_triples),
                 _capped_triples(sub2, config.max_attr_triples)),
    )


def _encode_rows(h0_row, attrs, vals, u_e, u_a, w1t):
    """Attention over (attribute, value) rows; returns ((1, D) state, (1, n) weights)."""
    logits = nn.add(nn.matmul(attrs, u_a), nn.matmul(h0_row, u_e))
    alpha = nn.softmax(nn.transpose(nn.leaky_relu(logits, LEAKY_SLOPE)))
    av = nn.concat(attrs, vals, axis=1)
    h1_row = nn.elu(nn.matmul(nn.matmul(alpha, av), w1t))
    return h1_row, alpha


def encode_attributes(h0, attrs, vals, params: nn.ParamSet):
    """One entity's attention encoding.

    `h0` is the entity state (column), `attrs` and `vals` are equal-length
    feature matrices (one row per attribute triple) or lists of vectors.
    Returns the encoded state as a column tensor plus the attention weights.
    """
    attrs = attrs if isinstance(attrs, nn.Tensor2) else nn.Tensor2(np.atleast_2d(np.asarray(attrs, dtype=np.float64)))
    vals = vals if isinstance(vals, nn.Tensor2) else nn.Tensor2(np.atleast_2d(np.asarray(vals, dtype=np.float64)))
    if attrs.rows != vals.rows:
        raise ShapeError(f"encode_attributes: {attrs.rows} attributes vs {vals.rows} values")
    if attrs.rows == 0:
        raise ShapeError("encode_attributes: need at least one attribute triple")
    h0 = h0 if isinstance(h0, nn.Tensor2) else nn.Tensor2(h0)
    u = params["u"]
    d_e = h0.rows
    if u.rows != d_e + attrs.cols:
        raise ShapeError(f"encode_attributes: u has {u.rows} rows, expected "
                         f"{d_e} + {attrs.cols}")
    u_e = nn.slice_rows(u, 0, d_e)
    u_a = nn.slice_rows(u, d_e, u.rows)
    h1_row, alpha = _encode_rows(nn.transpose(h0), attrs, vals, u_e, u_a,
                                 nn.transpose(params["w1"]))
    return nn.transpose(h1_row), alpha.data.ravel().copy()


def mean_aggregate(h_self, h_neighbors, w_l):
    """Relation-neighbor averaging for one entity (column-vector interface)."""
    h_self = h_self if isinstance(h_self, nn.Tensor2) else nn.Tensor2(h_self)
    rows = [nn.transpose(h_self)]
    for h in h_neighbors:
        h = h if isinstance(h, nn.Tensor2) else nn.Tensor2(h)
        rows.append(nn.transpose(h))
    mean = nn.mean_rows(nn.stack_rows(rows))
    w_l = w_l if isinstance(w_l, nn.Tensor2) else nn.Tensor2(w_l)
    return nn.relu(nn.matmul(w_l, nn.transpose(mean)))


def _value_matrix(sub: Subgraph, value_features: FeatureTable, vids) -> np.ndarray:
    rows = []
    for vid in vids:
        key = int(vid)
        if key not in value_features:
            raise GraphLookupError(f"no feature vector for value "
                                   f"{sub.value_labels[key]!r} (id {key})")
        rows.append(value_features.vectors[key])
    return np.stack(rows)


def run_channel(model: ChannelModel, subgraph: Subgraph,
                value_features: FeatureTable | None = None) -> nn.Tensor2:
    """Forward pass over every entity; returns the (n_entities, dim) embeddings.

    The result stays connected to the model's parameters, so a loss built on
    it backpropagates into them.
    """
    cfg = model.config
    side = model.side_of(subgraph)
    params = model.params
    h0 = params[f"ent{side + 1}"]
    adjacency = model.adjacency[side]
    w1t = nn.transpose(params["w1"])

    if cfg.use_encoder:
        if value_features is None:
            raise ConfigError(f"{cfg.kind} channel needs value features")
        u = params["u"]
        u_e = nn.slice_rows(u, 0, cfg.entity_dim)
        u_a = nn.slice_rows(u, cfg.entity_dim, u.rows)
        w_fbt = nn.transpose(params["w_fb"])
        attr_table = params[f"attr{side + 1}"]
        rows = []
        for e in range(subgraph.n_entities):
            aids, vids = model.triples[side][e]
            h0_row = nn.slice_rows(h0, e, e + 1)
            if len(aids) == 0:
                # no triples in this subgraph: learned fallback off the entity state
                rows.append(nn.relu(nn.matmul(h0_row, w_fbt)))
                continue
            attrs = nn.gather_rows(attr_table, aids)
            vals = _value_matrix(subgraph, value_features, vids)
            h1_row, _ = _encode_rows(h0_row, attrs, nn.Tensor2(vals), u_e, u_a, w1t)
            rows.append(h1_row)
        h1_pre = nn.stack_rows(rows)
    else:
        h1_pre = nn.relu(nn.matmul(nn.matmul(adjacency, h0), w1t))
    h1 = nn.residual_add(h1_pre, h0) if cfg.use_residual else h1_pre

    h2_pre = nn.relu(nn.matmul(nn.matmul(adjacency, h1), nn.transpose(params["w2"])))
    h2 = nn.residual_add(h2_pre, h1) if cfg.use_residual else h2_pre
    return h2


def attention_weights(model: ChannelModel, subgraph: Subgraph, e: int) -> list[tuple[int, int, float]]:
    """(attribute id, value id, weight) for entity `e` under the current parameters."""
    cfg = model.config
    if not cfg.use_encoder:
        raise ConfigError(f"{cfg.kind} channel has no attention to inspect")
    side = model.side_of(subgraph)
    if not 0 <= e < subgraph.n_entities:
        raise GraphLookupError(f"unknown entity id {e}")
    aids, vids = model.triples[side][e]
    if len(aids) == 0:
        raise DegenerateInputError(
            f"entity {subgraph.base.entity_labels[e]!r} has no attribute triples "
            f"in the {cfg.kind} subgraph")
    params = model.params
    u = params["u"].data
    u_e, u_a = u[:cfg.entity_dim], u[cfg.entity_dim:]
    h0 = params[f"ent{side + 1}"].data[e:e + 1]
    attrs = params[f"attr{side + 1}"].data[aids]
    logits = attrs @ u_a + (h0 @ u_e).item()
    logits = np.where(logits > 0, logits, LEAKY_SLOPE * logits).ravel()
    z = np.exp(logits - logits.max())
    alpha = z / z.sum()
    return [(int(a), int(v), float(w)) for a, v, w in zip(aids, vids, alpha)]


def explain_entity(model: ChannelModel, subgraph: Subgraph, e: int) -> list[tuple[str, str, float]]:
    """Attention table for one entity, sorted by descending weight.

    Ties keep (attribute id, value id) order.  Weights sum to 1.
    """
    rows = attention_weights(model, subgraph, e)
    rows.sort(key=lambda t: -t[2])
    return [(subgraph.attr_labels[a], subgraph.value_labels[v], w) for a, v, w in rows]
