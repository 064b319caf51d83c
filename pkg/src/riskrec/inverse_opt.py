"""Budgeted inverse classification: asymmetric costs, feasible-set projection,
and projected gradient descent over the directly changeable features.

Costs and the budget apply to standardized deltas so one scalar budget is
commensurate across features; bounds are declared in raw units and transformed
at the solver boundary. A forbidden direction is encoded as an infinite cost
and enforced as a hard half-space clamp before projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from riskrec.errors import InfeasibleError
from riskrec.indirect import KernelRegressor
from riskrec.missing_features import EnrichedInstance

BUDGET_SLACK = 1e-9


@dataclass(frozen=True)
class CostModel:
    """Per-feature increase/decrease prices over the direct feature set.

    `d_indices` are visit-1 schema indices in ascending order; `np.inf` on a
    side forbids that direction. Every feature must keep at least one finite
    side.
    """

    d_indices: tuple[int, ...]
    c_plus: np.ndarray
    c_minus: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "c_plus", np.asarray(self.c_plus, dtype=float))
        object.__setattr__(self, "c_minus", np.asarray(self.c_minus, dtype=float))
        k = len(self.d_indices)
        if self.c_plus.shape != (k,) or self.c_minus.shape != (k,):
            raise InfeasibleError("cost arrays must align with d_indices")
        if tuple(sorted(self.d_indices)) != tuple(self.d_indices):
            raise InfeasibleError("d_indices must be ascending")
        if np.any(self.c_plus < 0) or np.any(self.c_minus < 0):
            raise InfeasibleError("costs must be non-negative")
        if np.any(~np.isfinite(self.c_plus) & ~np.isfinite(self.c_minus)):
            raise InfeasibleError("each feature needs at least one finite cost")

    @property
    def n_features(self) -> int:
        return len(self.d_indices)


@dataclass(frozen=True)
class BudgetSpec:
    """Budget plus per-feature box bounds, aligned with a CostModel's features.

    Bounds live in whatever space the caller optimizes in; the pipeline
    declares them in raw units and converts before projecting.
    """

    budget: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise InfeasibleError("bound arrays must align")
        if self.budget < 0:
            raise InfeasibleError("negative budget")
        if np.any(self.lower > self.upper):
            raise InfeasibleError("infeasible bounds: lower > upper")


@dataclass
class SolverOptions:
    max_iter: int = 1000
    tol: float = 1e-8
    armijo: float = 1e-4
    shrink: float = 0.5
    expand: float = 4.0  # growth of the next line search's starting step
    max_backtracks: int = 60
    round_binary: bool = False


@dataclass
class Recommendation:
    """Optimized direct-feature values with their cost and risk deltas."""

    feature_names: tuple[str, ...]
    before_raw: np.ndarray
    after_raw: np.ndarray
    delta_std: np.ndarray
    cost_per_feature: np.ndarray
    cost_spent: float
    budget: float
    before_probability: float
    after_probability: float
    objective_trace: list[float]
    assembled: np.ndarray
    indirect_after: Optional[np.ndarray] = None
    rounded_after_raw: Optional[np.ndarray] = None
    trajectory: Optional[dict] = None

    @property
    def changed(self) -> bool:
        return bool(np.any(self.delta_std != 0.0))

    def to_dict(self) -> dict:
        out = {
            "features": [
                {
                    "name": self.feature_names[j],
                    "before_raw": float(self.before_raw[j]),
                    "after_raw": float(self.after_raw[j]),
                    "delta_std": float(self.delta_std[j]),
                    "cost_spent": float(self.cost_per_feature[j]),
                }
                for j in range(len(self.feature_names))
            ],
            "cost_spent": self.cost_spent,
            "budget": self.budget,
            "before_probability": self.before_probability,
            "after_probability": self.after_probability,
            "objective_trace": list(self.objective_trace),
        }
        if self.rounded_after_raw is not None:
            out["rounded_after_raw"] = self.rounded_after_raw.tolist()
        if self.trajectory is not None:
            out["trajectory"] = self.trajectory
        return out


def cost_components(cost_model: CostModel, z) -> np.ndarray:
    """Per-feature priced deviation; infinite where a forbidden direction is used."""
    z = np.asarray(z, dtype=float)
    if z.shape != (cost_model.n_features,):
        raise InfeasibleError(f"delta dimension {z.shape} does not match cost model")
    pos = np.maximum(z, 0.0)
    neg = np.maximum(-z, 0.0)
    with np.errstate(invalid="ignore"):
        up = np.where(pos > 0, cost_model.c_plus * pos, 0.0)
        down = np.where(neg > 0, cost_model.c_minus * neg, 0.0)
    return up + down


def cost(cost_model: CostModel, z) -> float:
    """Weighted asymmetric deviation: sum of priced increases plus priced decreases."""
    return float(cost_components(cost_model, z).sum())


def project(cost_model: CostModel, budget: BudgetSpec, x_bar, z) -> np.ndarray:
    """Euclidean projection of z onto {w : cost(w - x_bar) <= B, lower <= w <= upper}.

    Forbidden directions are clamped first; then the box clip; if the budget is
    still exceeded, bisection on the Lagrange multiplier of the cost constraint
    shrinks each coordinate toward x_bar through the per-direction
    soft-threshold until the spent cost meets the budget within 1e-10.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    z = np.asarray(z, dtype=float)
    if x_bar.shape != z.shape or x_bar.shape != (cost_model.n_features,):
        raise InfeasibleError("x_bar/z dimensions do not match the cost model")
    lo, hi = budget.lower, budget.upper
    if np.any(x_bar < lo - 1e-9) or np.any(x_bar > hi + 1e-9):
        raise InfeasibleError("x_bar outside its bounds")
    b = budget.budget

    z = z.copy()
    up_forbidden = ~np.isfinite(cost_model.c_plus)
    dn_forbidden = ~np.isfinite(cost_model.c_minus)
    z[up_forbidden] = np.minimum(z[up_forbidden], x_bar[up_forbidden])
    z[dn_forbidden] = np.maximum(z[dn_forbidden], x_bar[dn_forbidden])

    w = np.clip(z, lo, hi)
    if cost(cost_model, w - x_bar) <= b:
        return w

    d = z - x_bar
    cp = np.where(up_forbidden, 0.0, cost_model.c_plus)
    cm = np.where(dn_forbidden, 0.0, cost_model.c_minus)

    def w_of(lam: float) -> np.ndarray:
        shrunk = np.where(
            d > 0,
            np.maximum(0.0, d - lam * cp),
            np.where(d < 0, np.minimum(0.0, d + lam * cm), 0.0),
        )
        return np.clip(x_bar + shrunk, lo, hi)

    price = np.where(d > 0, cp, cm)
    active = (np.abs(d) > 0) & (price > 0)
    if not np.any(active):
        # only free directions moved, so the clipped point already cost nothing
        return w
    lam_hi = float(np.max(np.abs(d[active]) / price[active])) + 1.0
    lam_lo = 0.0
    w_best = w_of(lam_hi)
    for _ in range(500):
        lam_mid = 0.5 * (lam_lo + lam_hi)
        w_mid = w_of(lam_mid)
        spent = cost(cost_model, w_mid - x_bar)
        if spent > b:
            lam_lo = lam_mid
        else:
            lam_hi = lam_mid
            w_best = w_mid
            if b - spent <= 1e-10:
                break
        if lam_hi - lam_lo <= 1e-16 * max(1.0, lam_hi):
            break
    return w_best


def _positions(feature_cols: Sequence[int], schema_indices: Sequence[int]) -> list[int]:
    lookup = {schema: col for col, schema in enumerate(feature_cols)}
    try:
        return [lookup[j] for j in schema_indices]
    except KeyError as exc:
        raise InfeasibleError(f"schema index {exc.args[0]} absent from the enriched layout")


def optimize(clf, H: Optional[KernelRegressor], x: EnrichedInstance, partition, cost_model: CostModel,
             budget: BudgetSpec, opts: Optional[SolverOptions] = None,
             start_d_raw=None) -> Recommendation:
    """Minimize predicted probability over the direct features of one instance.

    Projected gradient descent with Armijo backtracking; the composite gradient
    chains the classifier's input gradient through the indirect estimator's
    Jacobian. Unchangeable features and historical-risk columns are never
    modified; indirect features in the result are the estimator's outputs at
    the optimum. Bounds in `budget` are raw-unit and converted internally; the
    budget itself prices standardized deltas measured from the instance's
    current values. `start_d_raw` warm-starts the iterate (it is projected
    into the feasible set first); deltas and costs stay anchored at the
    instance.
    """
    opts = opts or SolverOptions()
    values = np.asarray(x.values, dtype=float)
    if not np.isfinite(values).all():
        raise InfeasibleError("non-finite instance values")
    p1 = len(x.feature_cols)
    d_idx = tuple(sorted(partition.direct))
    if cost_model.d_indices != d_idx:
        raise InfeasibleError("cost model features do not match the partition's direct set")
    d_pos = _positions(x.feature_cols, d_idx)
    i_pos = _positions(x.feature_cols, sorted(partition.indirect))
    u_pos = _positions(x.feature_cols, sorted(partition.unchangeable))
    ctx_pos = u_pos + list(range(p1, p1 + x.n_risk))

    std = clf.standardizer
    if std.n_features != values.size:
        raise InfeasibleError("classifier layout does not match the instance")
    mu_d = std.mean[d_pos]
    sd_d = std.std[d_pos]
    x_bar_raw = values[d_pos]
    lo_z = (budget.lower - mu_d) / sd_d
    hi_z = (budget.upper - mu_d) / sd_d
    z_bar = (x_bar_raw - mu_d) / sd_d
    if np.any(z_bar < lo_z - 1e-9) or np.any(z_bar > hi_z + 1e-9):
        raise InfeasibleError("infeasible start: current values violate their bounds")
    z_bar = np.clip(z_bar, lo_z, hi_z)
    budget_z = BudgetSpec(budget.budget, lo_z, hi_z)
    ctx = values[ctx_pos]
    use_indirect = H is not None and len(i_pos) > 0

    def assemble(z_d: np.ndarray) -> np.ndarray:
        out = values.copy()
        out[d_pos] = mu_d + sd_d * z_d
        if use_indirect:
            out[i_pos] = H.predict(ctx, out[d_pos])
        return out

    def objective(z_d: np.ndarray) -> float:
        return clf.predict_proba_one(assemble(z_d))

    def gradient(z_d: np.ndarray) -> np.ndarray:
        full = assemble(z_d)
        g = clf.grad_proba(full)
        g_d = g[d_pos].copy()
        if use_indirect:
            g_d += H.jacobian(ctx, full[d_pos]).T @ g[i_pos]
        return sd_d * g_d

    if start_d_raw is None:
        z = z_bar.copy()
        f = objective(z)
        before_probability = f
    else:
        start_z = (np.asarray(start_d_raw, dtype=float) - mu_d) / sd_d
        z = project(cost_model, budget_z, z_bar, start_z)
        f = objective(z)
        before_probability = objective(z_bar)
    trace = [f]
    step = 1.0
    for _ in range(opts.max_iter):
        g = gradient(z)
        if not np.isfinite(g).all():
            raise InfeasibleError("non-finite gradient")
        accepted = False
        for _ in range(opts.max_backtracks):
            candidate = project(cost_model, budget_z, z_bar, z - step * g)
            f_new = objective(candidate)
            if f_new <= f - opts.armijo * float(g @ (z - candidate)):
                accepted = True
                break
            step *= opts.shrink
        if not accepted:
            break
        decrease = f - f_new
        z, f = candidate, f_new
        trace.append(f)
        # probability objectives can have very small gradients, so the next
        # search starts from an expanded step instead of re-crawling from 1.0
        step = min(step * opts.expand, 1e9)
        if decrease < opts.tol:
            break

    after_raw = mu_d + sd_d * z
    delta = z - z_bar
    assembled = assemble(z)
    rounded = None
    if opts.round_binary:
        rounded = after_raw.copy()
        binary = std.std[d_pos] == 1.0
        # only relaxed 0/1 dims get snapped; continuous dims keep their values
        unit_box = binary & (budget.lower >= -1e-12) & (budget.upper <= 1.0 + 1e-12)
        rounded[unit_box] = np.round(rounded[unit_box])
    names = cost_model.names or tuple(f"d{j}" for j in d_idx)
    spent = cost_components(cost_model, delta)
    return Recommendation(
        feature_names=tuple(names),
        before_raw=x_bar_raw,
        after_raw=after_raw,
        delta_std=delta,
        cost_per_feature=spent,
        cost_spent=float(spent.sum()),
        budget=budget.budget,
        before_probability=before_probability,
        after_probability=f,
        objective_trace=trace,
        assembled=assembled,
        indirect_after=assembled[i_pos].copy() if use_indirect else None,
        rounded_after_raw=rounded,
    )


def sweep_budget(clf, H: Optional[KernelRegressor], x: EnrichedInstance, partition,
                 cost_model: CostModel, budgets: Sequence[float], bounds_lower, bounds_upper,
                 opts: Optional[SolverOptions] = None) -> list[Recommendation]:
    """One recommendation per budget, ascending, warm-started at the previous optimum.

    Feasible sets are nested and each run starts at the previous optimum, so
    the final objectives are non-increasing in the budget. Deltas and costs
    stay anchored at the instance's current values.
    """
    budgets = list(budgets)
    if any(b < 0 for b in budgets):
        raise InfeasibleError("negative budget")
    if budgets != sorted(budgets):
        raise InfeasibleError("budgets must be ascending")
    lower = np.asarray(bounds_lower, dtype=float)
    upper = np.asarray(bounds_upper, dtype=float)
    out: list[Recommendation] = []
    warm = None
    for b in budgets:
        rec = optimize(clf, H, x, partition, cost_model, BudgetSpec(b, lower, upper), opts,
                       start_d_raw=warm)
        out.append(rec)
        warm = rec.after_raw
    return out
