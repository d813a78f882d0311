# %% [markdown]
# Serendipitous learning: a class with no labels
#
# Three blobs, labels only for the first two. The class-relation matrix P5
# couples class 1 with classes 2 and 3 and leaves 2 and 3 unrelated, so a
# third response column can light up on the unlabeled cluster. A small
# class-balance term discourages piling all mass onto the labeled classes.

# %%
import numpy as np

from mavr import EigenCache, KernelSpec, SolverConfig, generate_blobs, preset, solve
from mavr.data import SplitSpec, sample_split
from mavr.graph import build_laplacian, build_similarity
from mavr.predict import predict_multiclass, serendipitous_errors

P = preset("P5")
print(P)

# %%
data = generate_blobs([[0, 0], [6, 0], [3, 5]], [30, 30, 30], sigma=0.7, seed=1000)
Q = build_laplacian(build_similarity(data, KernelSpec("gaussian", sigma=0.5)))
idx, Y = sample_split(data, SplitSpec(4, "serendipitous", {3}, seed=0))
print("labeled classes", sorted(set(data.labels[idx].tolist())))
print("column 3 of Y is empty:", not Y.entries[:, 2].any())

# %%
mask = np.ones(data.n, bool)
mask[idx] = False
for bal in (0.0, 1.0):
    cfg = SolverConfig(gamma=99.0, tau=2.0, balance_gamma=bal)
    pred = predict_multiclass(solve(P, Q, Y, cfg, cache=EigenCache()).H).labels
    scores = serendipitous_errors(pred, data.labels, mask, {3})
    counts = [np.bincount(pred[data.labels == k], minlength=4)[1:] for k in (1, 2, 3)]
    print(f"balance={bal}: known error {scores['known']:.3f}, hidden error {scores['hidden']:.3f}")
    print("  predicted class counts per true class:", [c.tolist() for c in counts])
