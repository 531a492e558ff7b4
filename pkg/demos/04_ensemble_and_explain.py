"""Combine per-channel similarity matrices by standardized averaging, and
inspect which attributes a trained channel attends to.

Run: python3 demos/04_ensemble_and_explain.py
"""

import numpy as np

from attralign.channels import build_channel_model, channel_config, explain_entity
from attralign.ensemble import average_pool, combine, standardize, train_svm
from attralign.featurize import keyed_random_table, ngram_table
from attralign.kg import AlignmentSet, kg_from_triples
from attralign.partition import partition
from attralign.training import TrainConfig, train_channel

rng = np.random.default_rng(3)

# --- standardized average pooling -----------------------------------------
# four fake channel matrices with very different scales; standardization puts
# them on one footing before averaging
mats = [rng.normal(loc=mu, scale=sc, size=(4, 4))
        for mu, sc in ((0.0, 1.0), (5.0, 0.1), (-2.0, 3.0), (0.5, 0.5))]
pooled = average_pool([standardize(m) for m in mats])
print("pooled matrix mean ~ 0:", round(pooled.mean(), 6))

# --- learned channel weights -----------------------------------------------
# a toy weighting problem: channel 0 separates gold cells from the rest,
# channel 1 is noise
gold_cells = np.column_stack([rng.uniform(0.8, 1.0, 40), rng.uniform(-1, 1, 40)])
other_cells = np.column_stack([rng.uniform(-1.0, -0.8, 40), rng.uniform(-1, 1, 40)])
samples = np.vstack([gold_cells, other_cells])
labels = np.array([1] * 40 + [0] * 40)
weights = train_svm(samples, labels, c=0.1)
print("learned channel weights:", np.round(weights.w, 3),
      "(the informative channel dominates)")
print("objective trace is non-increasing:",
      all(b <= a for a, b in zip(weights.objective_history, weights.objective_history[1:])))
print("weighted sum of matrices has shape:", combine(mats[:2], weights.w).shape)

# --- attention inspection ---------------------------------------------------
# one unique id attribute against a misleading group attribute; after
# training, the id attribute should top every entity's attention table
n = 24
uids = ["".join(rng.choice(list("bcdfglmnprstvz")) + rng.choice(list("aeiou"))
        for _ in range(3)) for _ in range(n)]
def attr_lines(labels, shift):
    rows = []
    for i, lab in enumerate(labels):
        rows.append((lab, "uid", uids[i]))
        rows.append((lab, "kind", f"group{(i + shift) % 3}"))
    return rows

labels1 = [f"L_{i:02d}" for i in range(n)]
labels2 = [f"R_{i:02d}" for i in range(n)]
kg1 = kg_from_triples([(labels1[i], "r", labels1[(i + 1) % n]) for i in range(n)],
                      attr_lines(labels1, 0))
kg2 = kg_from_triples([(labels2[i], "r", labels2[(i + 1) % n]) for i in range(n)],
                      attr_lines(labels2, 1))
p1, p2 = partition(kg1), partition(kg2)

from attralign.featurize import mix_seed

dim = 16
vf1 = ngram_table({i: s for i, s in enumerate(p1.literal.value_labels)}, dim)
vf2 = ngram_table({i: s for i, s in enumerate(p2.literal.value_labels)}, dim)
ent1 = keyed_random_table({e: kg1.entity_labels[e] for e in kg1.entities}, dim, mix_seed(3, "e1"))
ent2 = keyed_random_table({e: kg2.entity_labels[e] for e in kg2.entities}, dim, mix_seed(3, "e2"))
for table in (ent1, ent2):
    for key in table.vectors:
        table.vectors[key] = table.vectors[key] * 0.05
model = build_channel_model(channel_config("literal", dim=dim), p1.literal, p2.literal,
                            ent1, ent2, value_dim=dim, seed=mix_seed(3, "init"))
seeds = AlignmentSet(pairs=tuple((i, i) for i in range(0, n, 2)))
train_channel(model, seeds, TrainConfig(gamma=1.0, negatives_per_entity=20, epochs=150,
                                        learning_rate=0.02, l2=1e-4,
                                        neg_refresh_epochs=5, seed=0),
              value_features=(vf1, vf2))

uid_first = sum(explain_entity(model, p1.literal, e)[0][0] == "uid" for e in range(n))
print(f"\nentities whose top attention is the unique id: {uid_first}/{n}")
print("attention table for", labels1[1])
for attr, value, weight in explain_entity(model, p1.literal, 1):
    print(f"  {weight:6.3f}  {attr:<6} {value}")
