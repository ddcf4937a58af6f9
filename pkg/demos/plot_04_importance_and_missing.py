"""
Variable importance and missing covariates
==========================================

Add pure-noise covariates and blank out some values. Importance singles out
the covariate that drives the hazard, and missing values follow the split
direction learned for them.
"""
import numpy as np

from hazboost import (BoostConfig, Dataset, SimConfig, build_grid, fit, predict_hazard,
                      preprocess, simulate_dataset)
from hazboost.boosting import variable_importance

ds, truth = simulate_dataset(SimConfig(hazard_id=1, num_subjects=3000, num_irrelevant=5, seed=3))

# hide 10% of the values of every covariate
rng = np.random.default_rng(0)
X = ds.X.copy()
X[rng.random(X.shape) < 0.1] = np.nan
ds = Dataset(ds.subject, ds.t_start, ds.t_end, X, ds.delta, ds.covariate_names)

model = fit(preprocess(ds, build_grid(ds)), BoostConfig(max_depth=3, num_rounds=100))
for name, imp in zip(["time", *ds.covariate_names], variable_importance(model)):
    print(f"{name:8s} {imp:.3f}")

# a query with x1 missing still gets a hazard
t = np.array([0.5, 0.5])
q = np.full((2, ds.num_covariates), 0.5)
q[1, 0] = np.nan
print(predict_hazard(model, t, q))
