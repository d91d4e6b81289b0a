"""End-to-end tour on a corpus sampled from the model itself.

Run with ``python demos/synthetic_walkthrough.py``.  It plants five seed words
per topic, trains, lists the top terms, checks how many documents land in
their true topic and folds in a few held-out documents.
"""
import itertools

import numpy as np

from seededpf import (
    ModelSpec, PriorConfig, SeedLexicon, TrainConfig, classify, generate_synthetic, make_rng, posterior_means,
    score_new_documents, top_terms, train,
)
from seededpf.posterior import assign_topics
from seededpf.textprep import DocTermMatrix

K, V, D, HELD_OUT = 3, 500, 2000, 200

rng = make_rng(2024, "walkthrough")
lexicon = SeedLexicon([f"topic{k + 1}" for k in range(K)], [rng.choice(V, 5, replace=False) for _ in range(K)])
full_spec = ModelSpec(D + HELD_OUT, V, K, PriorConfig(), lexicon)
full, theta, _ = generate_synthetic(full_spec, rng)
dtm = DocTermMatrix(full.counts[:D])
held = DocTermMatrix(full.counts[D:])

spec = ModelSpec(D, V, K, PriorConfig(), lexicon)
params, trace = train(dtm, spec, TrainConfig(epochs=300, rng_seed=1))
epoch_elbo = trace.epoch_elbo()
print(f"ELBO estimate: first epoch {epoch_elbo[0]:.4g}, last epoch {epoch_elbo[-1]:.4g}")

model = posterior_means(params, spec, dtm)
for k, name in enumerate(lexicon.topic_names):
    terms = ", ".join(f"{t}{'*' if s else ''}" for t, _, s in top_terms(model, k, 8))
    print(f"{name}: {terms}")

truth = theta.argmax(axis=1)
pred = np.array([a.topic for a in classify(model)])
best = max(itertools.permutations(range(K)), key=lambda p: np.mean(np.asarray(p)[pred] == truth[:D]))
print(f"training documents in their true topic: {np.mean(np.asarray(best)[pred] == truth[:D]):.3f}")

new_theta = score_new_documents(model, held)
new_topic, certainty = assign_topics(new_theta)
print(f"held-out documents in their true topic: {np.mean(np.asarray(best)[new_topic] == truth[D:]):.3f}"
      f" (mean certainty {certainty.mean():.2f})")
