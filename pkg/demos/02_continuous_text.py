"""Relax the search to embedding space for a bag-of-tokens sentiment model.

The optimiser moves the embedding of each explained position, trading
distance against the probability of the original label. alpha controls the
trade: zero keeps the sentence where it is, a large value pushes it over the
decision boundary.
"""

import numpy as np

from cfeval import (
    EmbeddingTable,
    Explanation,
    FeatureSchema,
    FeatureSpec,
    Instance,
    LogisticModel,
    OptimizerConfig,
    continuous_search,
    encode,
    predict,
)

rng = np.random.default_rng(0)
tokens = ("great", "awful", "plot", "acting", "<unk>")
vectors = np.vstack([rng.normal(size=(4, 3)), np.zeros(3)])
table = EmbeddingTable(tokens, vectors)
schema = FeatureSchema([FeatureSpec.embedded(f"tok{j}", table) for j in range(3)])

model = LogisticModel(np.tile([1.0, -0.5, 0.3], 3), bias=0.1)
sentence = Instance((0, 2, 3))  # "great plot acting"
pred = predict(model, encode(sentence, schema))
print("tokens:", [tokens[t] for t in sentence.values], "label:", pred.label)

for alpha in (0.0, 1.0, 10.0, 100.0):
    res = continuous_search(model, schema, sentence, Explanation((0,)), OptimizerConfig(alpha=alpha, max_iters=2000))
    y = pred.label
    print(
        f"alpha={alpha:>6}: flipped={res.flipped!s:<5} p(original label)={res.p_cf[y]:.3f} "
        f"distance={res.distance:.3f} iterations={res.iterations}"
    )
