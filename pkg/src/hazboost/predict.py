"""Hazard evaluation at arbitrary ``(t, x)`` points and model persistence."""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .boosting import BoostConfig, BoostedModel, Tree
from .data import DataError
from .preprocess import grid_from_dict, grid_to_dict, remap_query

logger = logging.getLogger(__name__)

MODEL_FORMAT = "hazboost-model"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    pass


class VersionError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


def off_support(model: BoostedModel, t, X) -> int:
    """Number of query points outside the observed range on some axis."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    X = np.asarray(X, dtype=np.float64).reshape(t.size, -1)
    lo, hi = model.grid.support[0]
    out = (t < lo) | (t > hi)
    for k, (a, b) in enumerate(model.grid.support[1:]):
        col = X[:, k]
        with np.errstate(invalid="ignore"):
            out |= (col < a) | (col > b)
    return int(out.sum())


def predict_log_hazard(model: BoostedModel, t, X) -> np.ndarray:
    return model.log_hazard_codes(remap_query(model.grid, t, X))


def predict_hazard(model: BoostedModel, t, X) -> np.ndarray:
    """Estimated hazard ``exp(F_M(t, x))`` at each query point.

    ``t`` has shape ``(m,)`` and ``X`` shape ``(m, p)``; ``NaN`` entries of
    ``X`` are missing and follow each split's default direction. Points
    outside the training range fall into the boundary cells; their count is
    logged as a warning.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if t.size == 1 else X.reshape(t.size, -1)
    if X.shape != (t.size, model.num_covariates):
        raise DataError(f"expected queries with {model.num_covariates} covariates, "
                        f"got shape {X.shape}")
    n_off = off_support(model, t, X)
    if n_off:
        logger.warning("%d of %d query points lie outside the training support; "
                       "clamped to boundary cells", n_off, t.size)
    return np.exp(predict_log_hazard(model, t, X))


# ----------------------------------------------------------------------------
# serialization

def _hex(a) -> list:
    return [float(v).hex() for v in np.asarray(a, dtype=np.float64)]


def _unhex(a) -> np.ndarray:
    return np.array([float.fromhex(v) for v in a], dtype=np.float64)


def _tree_to_dict(t: Tree) -> dict:
    return {
        "axis": t.axis.tolist(),
        "threshold": t.threshold.tolist(),
        "missing_left": [bool(b) for b in t.missing_left],
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "value": _hex(t.value),
        "score": _hex(t.score),
        "exposure": _hex(t.exposure),
        "events": _hex(t.events),
    }


def _tree_from_dict(d: dict) -> Tree:
    return Tree(np.array(d["axis"], dtype=np.int32), np.array(d["threshold"], dtype=np.int32),
                np.array(d["missing_left"], dtype=bool), np.array(d["left"], dtype=np.int32),
                np.array(d["right"], dtype=np.int32), _unhex(d["value"]), _unhex(d["score"]),
                _unhex(d["exposure"]), _unhex(d["events"]))


def model_to_dict(model: BoostedModel) -> dict:
    return {
        "F0": float(model.F0).hex(),
        "learning_rate": float(model.learning_rate).hex(),
        "n_subjects": model.n_subjects,
        "stopped_early_at": model.stopped_early_at,
        "config": model.config.to_dict(),
        "grid": grid_to_dict(model.grid),
        "importance_raw": _hex(model.importance_raw),
        "risk_trace": _hex(model.risk_trace),
        "trees": [_tree_to_dict(t) for t in model.trees],
        "meta": model.meta,
    }


def model_from_dict(d: dict) -> BoostedModel:
    return BoostedModel(float.fromhex(d["F0"]), float.fromhex(d["learning_rate"]),
                        tuple(_tree_from_dict(t) for t in d["trees"]), grid_from_dict(d["grid"]),
                        _unhex(d["importance_raw"]), BoostConfig(**d["config"]),
                        tuple(_unhex(d["risk_trace"]).tolist()), int(d["n_subjects"]),
                        d["stopped_early_at"], dict(d.get("meta", {})))


def dumps_model(model: BoostedModel) -> str:
    """Text form: one header line ``<format> <version> sha256=<digest>``, then JSON."""
    body = json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{MODEL_FORMAT} {MODEL_VERSION} sha256={digest}\n{body}"


def loads_model(text: str) -> BoostedModel:
    header, _, body = text.partition("\n")
    parts = header.split()
    if len(parts) != 3 or parts[0] != MODEL_FORMAT or not parts[2].startswith("sha256="):
        raise ModelFormatError("not a hazboost model file")
    try:
        version = int(parts[1])
    except ValueError:
        raise ModelFormatError(f"bad version field {parts[1]!r}") from None
    if version != MODEL_VERSION:
        raise VersionError(f"model file version {version}, this library reads {MODEL_VERSION}")
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != parts[2][len("sha256="):]:
        raise ChecksumError("model checksum mismatch (truncated or corrupted file)")
    return model_from_dict(json.loads(body))


def save_model(model: BoostedModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path) -> BoostedModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
