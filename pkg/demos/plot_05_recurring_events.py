"""
Recurring events and gaps in the risk set
=========================================

Subjects can have several events and drop out of the risk set for whole
covariate intervals. Both show up only through the epoch table.
"""
import numpy as np

from hazboost import (BoostConfig, SimConfig, build_grid, fit, preprocess, rmse,
                      simulate_dataset)

cfg = SimConfig(hazard_id=1, num_subjects=3000, recurring=True, p_drop=0.1, seed=11)
train, truth = simulate_dataset(cfg)
test, _ = simulate_dataset(SimConfig(**{**cfg.to_dict(), "seed": 12}))

per_subject = np.array([train.delta[idx].sum() for idx in train.subject_index.values()])
print("events per subject:", np.bincount(per_subject))
print("at-risk time per subject: %.3f (horizon 1)" % (train.total_time / train.num_subjects))

# stumps suit this hazard, whose log is additive in t and x; cross-validation picks them too
model = fit(preprocess(train, build_grid(train)), BoostConfig(max_depth=1, num_rounds=300))
print("test RMSE:", round(rmse(model, test, truth), 4))
