"""
Choosing depth and rounds by cross-validation
==============================================

Folds hold out whole subjects. Each depth is fit once per fold with the
largest round count, and every smaller count is read off the same fit.
"""
from hazboost import SimConfig, TuneGrid, fit, kfold_tune, preprocess, build_grid, rmse, simulate_dataset

train, truth = simulate_dataset(SimConfig(hazard_id=3, num_subjects=2000, seed=5))
test, _ = simulate_dataset(SimConfig(hazard_id=3, num_subjects=2000, seed=6))
data = preprocess(train, build_grid(train))

result = kfold_tune(data, TuneGrid(depths=(1, 2, 3), rounds=(25, 50, 100, 200), folds=5))
for row in result.table:
    print(row["depth"], row["rounds"], round(row["mean_risk"], 5))
print("chosen:", result.best.max_depth, result.best.num_rounds)

model = fit(data, result.best)
print("test RMSE:", round(rmse(model, test, truth), 4))
