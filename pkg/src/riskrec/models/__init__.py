"""Predictive model zoo: SVM with Platt-scaled probabilities, baseline
classifiers/regressors, ranking/regression metrics, and serialization."""

from riskrec.models.baselines import (
    CartModel,
    KnnModel,
    LogisticClassifier,
    RidgeRegressor,
    fit_baseline,
)
from riskrec.models.metrics import auc, mse
from riskrec.models.platt import fit_platt, platt_probability
from riskrec.models.serialize import load_model, model_from_dict, model_to_dict, save_model
from riskrec.models.standardize import Standardizer
from riskrec.models.svm import SvmClassifier, fit_svm

__all__ = [
    "Standardizer",
    "SvmClassifier",
    "fit_svm",
    "fit_baseline",
    "RidgeRegressor",
    "LogisticClassifier",
    "KnnModel",
    "CartModel",
    "auc",
    "mse",
    "fit_platt",
    "platt_probability",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]
