"""Self-describing JSON serialization for every model kind.

Floats are written with Python's shortest round-trip repr, so parameters
survive a save/load cycle bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

from riskrec.errors import ModelError

FORMAT_VERSION = 1


def _registry() -> dict:
    from riskrec.indirect import KernelRegressor
    from riskrec.models.baselines import CartModel, KnnModel, LogisticClassifier, RidgeRegressor
    from riskrec.models.svm import SvmClassifier

    return {
        "rbf_svm": SvmClassifier,
        "linear_svm": SvmClassifier,
        "ridge": RidgeRegressor,
        "logistic": LogisticClassifier,
        "knn": KnnModel,
        "cart": CartModel,
        "nw_kernel": KernelRegressor,
    }


def model_to_dict(model) -> dict:
    payload = model.to_dict()
    payload["format_version"] = FORMAT_VERSION
    return payload


def model_from_dict(payload: dict):
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {version!r}")
    kind = payload.get("kind")
    registry = _registry()
    if kind not in registry:
        raise ModelError(f"unknown model kind {kind!r}")
    return registry[kind].from_dict(payload)


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
