"""
Filling missing scores
======================

Four ways to complete a score matrix with holes: column mean, column
median, k nearest neighbours and fuzzy k-means. The last two measure
distance only over observed fields and rescale by the fraction observed.
"""

# %%
import numpy as np

from pdpl import FkmParams, fkm_cluster, impute_fkm, impute_knn, impute_mean, impute_median

rng = np.random.default_rng(0)
low = rng.normal(0.5, 0.1, size=(6, 4))
high = rng.normal(1.6, 0.1, size=(6, 4))
X = np.vstack([low, high])
truth = X.copy()
X[rng.random(X.shape) < 0.2] = np.nan
missing = np.isnan(X)
print("missing cells:", int(missing.sum()))

# %%
# Two groups of students: the column mean ignores them, the
# neighbourhood-based methods pick the right group.
fills = {
    "mean": impute_mean(X),
    "median": impute_median(X),
    "knn (k=3)": impute_knn(X, k=3),
    "fkm (K=2)": impute_fkm(X, FkmParams(n_clusters=2, seed=0)),
}
for name, filled in fills.items():
    err = np.sqrt(np.mean((filled[missing] - truth[missing]) ** 2))
    print(f"{name:>10}: rmse on hidden cells {err:.3f}")

# %%
model = fkm_cluster(X, FkmParams(n_clusters=2, seed=0))
print("centers:\n", np.round(model.centers, 3))
print("iterations:", model.iterations_run, "converged:", model.converged)
print("membership of row 0:", np.round(model.memberships[0], 4))
