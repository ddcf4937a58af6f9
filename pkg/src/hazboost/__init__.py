"""Gradient-boosted nonparametric hazard estimation for counting-process data."""
from .boosting import (BoostConfig, BoostedModel, FitError, SplitCandidate, Tree,
                       accumulate_histograms, best_split, compute_F0, fit, grow_tree,
                       leaf_value, likelihood_risk, split_score, variable_importance)
from .data import (MISSING, DataError, Dataset, EpochRow, ValidationError, Violation,
                   load_csv, validate, write_csv)
from .evaluate import TuneGrid, TuneResult, kfold_tune, rmse
from .predict import load_model, predict_hazard, save_model
from .preprocess import (PreprocessedData, bin_values, load_preprocessed, preprocess,
                         remap_query, save_preprocessed, split_epochs, to_weighted_rows)
from .quantiles import RAW, WEIGHTED, CandidateGrid, build_grid, weighted_quantile
from .simulate import SimConfig, TrueHazard, simulate_dataset, simulate_subject, true_hazard

__version__ = "0.1.0"
