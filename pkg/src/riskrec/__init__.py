"""Longitudinal inverse classification toolkit.

Trains per-visit probabilistic risk models on multi-visit cohort data and
solves, per patient, a budgeted box-constrained minimization of predicted
risk over the directly changeable lifestyle features.
"""

__version__ = "0.1.0"

from riskrec.cohort import Cohort, FeaturePartition, FeatureSchema, VisitDataset, load_cohort
from riskrec.inverse_opt import BudgetSpec, CostModel, Recommendation, optimize, sweep_budget
from riskrec.synth import GeneratorSpec, generate

__all__ = [
    "Cohort",
    "FeatureSchema",
    "FeaturePartition",
    "VisitDataset",
    "load_cohort",
    "CostModel",
    "BudgetSpec",
    "Recommendation",
    "optimize",
    "sweep_budget",
    "GeneratorSpec",
    "generate",
]
