"""
Fitting a time-varying hazard
=============================

Simulate subjects whose hazard depends on time and on one covariate that
changes over follow-up, fit a boosted estimator, and compare it with the
generating hazard.
"""
import numpy as np

from hazboost import (BoostConfig, SimConfig, build_grid, fit, predict_hazard, preprocess,
                      rmse, simulate_dataset)

train, truth = simulate_dataset(SimConfig(hazard_id=1, num_subjects=5000, seed=1))
test, _ = simulate_dataset(SimConfig(hazard_id=1, num_subjects=2000, seed=2))
print(train)

# preprocessing runs once per training set
data = preprocess(train, build_grid(train))
print(f"{len(train)} epochs became {len(data)} rows")

model = fit(data, BoostConfig(max_depth=3, num_rounds=100, learning_rate=0.1))

# the training risk never goes up
trace = np.array(model.risk_trace)
print("risk: start %.4f, end %.4f, increases: %d"
      % (trace[0], trace[-1], int(np.sum(np.diff(trace) > 0))))

# a few points on a grid of (t, x)
t = np.array([0.1, 0.5, 0.9, 0.5])
x = np.array([[0.5], [0.5], [0.5], [0.1]])
print("estimate:", np.round(predict_hazard(model, t, x), 3))
print("truth:   ", np.round(truth(t, x), 3))

print("test RMSE:", round(rmse(model, test, truth), 4))
