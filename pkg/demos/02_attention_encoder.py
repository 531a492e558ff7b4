"""The two layer types, by hand: the attention encoder that weighs an
entity's (attribute, value) pairs, and the neighbor-mean aggregator.

Run: python3 demos/02_attention_encoder.py
"""

import numpy as np

from attralign.channels import encode_attributes, mean_aggregate
from attralign.nn import ParamSet, Tensor2

rng = np.random.default_rng(0)

d_e = d_a = d_v = 4
params = ParamSet()
params.add("w1", rng.normal(size=(d_e, d_a + d_v)) * 0.5)   # combines [attr; value]
params.add("u", rng.normal(size=(d_e + d_a, 1)))            # scores [entity; attr]

h0 = Tensor2(rng.normal(size=d_e) * 0.3)

# three attribute triples for one entity; the attention scores depend on the
# entity state and the attribute features, not on the values
attrs = rng.normal(size=(3, d_a))
vals = rng.normal(size=(3, d_v))

h1, attention = encode_attributes(h0, attrs, vals, params)
print("attention over the three pairs:", np.round(attention, 3), "(sums to 1)")
print("encoded state:", np.round(h1.data.ravel(), 3))

# permuting the triples permutes the attention but not the encoded state
perm = [2, 0, 1]
h1p, attention_p = encode_attributes(h0, attrs[perm], vals[perm], params)
print("permuted attention:", np.round(attention_p, 3))
print("state unchanged:", np.allclose(h1.data, h1p.data))

# the aggregator averages the entity with its relation neighbors, then
# applies a learned matrix and a ReLU
w = rng.normal(size=(d_e, d_e)) * 0.5
neighbors = [Tensor2(rng.normal(size=d_e)) for _ in range(2)]
out = mean_aggregate(h0, neighbors, w)
print("aggregated state:", np.round(out.data.ravel(), 3))
print("no neighbors means self only:",
      np.round(mean_aggregate(h0, [], np.eye(d_e)).data.ravel(), 3))
