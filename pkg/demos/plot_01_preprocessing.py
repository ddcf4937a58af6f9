"""
From raw epochs to boosting rows
================================

Walk a four-epoch toy dataset through epoch splitting, duration weights and
cell codes, and check that nothing is lost on the way.
"""
import numpy as np

from hazboost import CandidateGrid, Dataset, preprocess
from hazboost.preprocess import cell_values, split_epochs, to_weighted_rows

# two subjects, one covariate; subject 2 is not at risk on (0.10, 0.13]
ds = Dataset(["1", "1", "2", "2"], [0.01, 0.15, 0.06, 0.13], [0.13, 0.25, 0.10, 0.25],
             [[0.27], [0.51], [0.81], [0.92]], [1, 0, 1, 0])
grid = CandidateGrid(np.array([0.01, 0.10, 0.15]), (np.array([0.51, 0.81]),))

# epochs straddling a candidate time are cut there; the event stays on the last piece
mid = split_epochs(ds, grid)
for r in mid:
    print(r.subject_id, r.t_start, r.t_end, r.covariates[0], r.delta)

# the end time is replaced by the duration
rows = to_weighted_rows(mid)
print("weights:", np.round(rows.w, 12))

# every value becomes the code of its cell (c_{j-1}, c_j]
pp = preprocess(ds, grid)
print("codes:\n", pp.codes)
print("cell left edges, time:", cell_values(grid, 0, pp.t_code))
print("cell left edges, x1:  ", cell_values(grid, 1, pp.cov_codes[:, 0]))

# total at-risk time and event count survive unchanged
print("at-risk time", ds.total_time, "->", pp.total_weight)
print("events      ", ds.total_events, "->", pp.total_events)
