"""Synthetic longitudinal cohort generator.

Stands in for access-restricted registry data: configurable U/I/D structure, a
ground-truth logistic risk function with a real causal lever through the
direct features, visit-over-visit drift so learned estimators can beat
carry-forward, nested missingness, and event-driven attrition. Everything is
a pure function of the spec's seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from riskrec.cohort import (
    Bounds,
    Cohort,
    Feature,
    FeaturePartition,
    FeatureSchema,
    VisitDataset,
    validate_cohort,
)
from riskrec.errors import ConfigError
from riskrec.inverse_opt import CostModel

_U_CONT_NAMES = ("age", "height_cm", "education_years", "years_smoked",
                 "genetic_risk", "baseline_fitness")
_U_BIN_NAMES = ("statin_use", "bp_med_use", "diabetes_dx")
_I_NAMES = ("bmi", "systolic_bp", "ldl_chol", "hdl_chol", "triglycerides",
            "glucose", "waist_cm", "heart_rate", "hematocrit", "fibrinogen")
_D_CONT_NAMES = ("exercise_hours", "alcohol_units", "fiber_g", "saturated_fat_g",
                 "vegetables_serv")
_D_BIN_NAMES = ("smoker",)

# cost direction per default direct feature: +1 increase-only, -1 decrease-only,
# 0 bidirectional; signs drive both the cost sentinels and the risk lever
_D_DIRECTIONS = {"exercise_hours": +1, "alcohol_units": 0, "fiber_g": +1,
                 "saturated_fat_g": -1, "vegetables_serv": +1, "smoker": -1}


def _names(pool: tuple[str, ...], count: int, prefix: str) -> list[str]:
    out = list(pool[:count])
    out += [f"{prefix}{k}" for k in range(len(out), count)]
    return out


@dataclass(frozen=True)
class GeneratorSpec:
    """Shape and strength parameters of the synthetic cohort."""

    n1: int = 2000
    n_visits: int = 3
    n_unchangeable_continuous: int = 6
    n_unchangeable_binary: int = 2
    n_indirect: int = 10
    n_direct_continuous: int = 5
    n_direct_binary: int = 1
    event_rate: float = 0.02
    dropout_rate: float = 0.02
    drift_scale: float = 0.6
    indirect_noise: float = 0.3
    signal_scale: float = 2.5
    binary_flip_prob: float = 0.08
    missing_per_visit: int = 5
    missing_schedule: tuple[tuple[str, ...], ...] | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("n1", "n_visits", "n_unchangeable_continuous", "n_indirect",
                     "n_direct_continuous"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.n_unchangeable_binary < 0 or self.n_direct_binary < 0:
            raise ConfigError("binary feature counts must be non-negative")
        if not 0.0 < self.event_rate < 1.0:
            raise ConfigError("event_rate must lie strictly between 0 and 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if self.missing_schedule is not None:
            object.__setattr__(self, "missing_schedule",
                               tuple(tuple(s) for s in self.missing_schedule))

    @property
    def n_unchangeable(self) -> int:
        return self.n_unchangeable_continuous + self.n_unchangeable_binary

    @property
    def n_direct(self) -> int:
        return self.n_direct_continuous + self.n_direct_binary

    @property
    def n_features(self) -> int:
        return self.n_unchangeable + self.n_indirect + self.n_direct


def build_schema(spec: GeneratorSpec) -> tuple[FeatureSchema, FeaturePartition]:
    u_cont = _names(_U_CONT_NAMES, spec.n_unchangeable_continuous, "u_cont")
    u_bin = _names(_U_BIN_NAMES, spec.n_unchangeable_binary, "u_bin")
    i_names = _names(_I_NAMES, spec.n_indirect, "i_feat")
    d_cont = _names(_D_CONT_NAMES, spec.n_direct_continuous, "d_cont")
    d_bin = _names(_D_BIN_NAMES, spec.n_direct_binary, "d_bin")
    features = (
        [Feature(n, "continuous") for n in u_cont]
        + [Feature(n, "binary") for n in u_bin]
        + [Feature(n, "continuous") for n in i_names]
        + [Feature(n, "continuous") for n in d_cont]
        + [Feature(n, "binary") for n in d_bin]
    )
    schema = FeatureSchema(tuple(features))
    partition = FeaturePartition.from_names(schema, u_cont + u_bin, i_names, d_cont + d_bin)
    return schema, partition


@dataclass(frozen=True)
class _Params:
    a_u: np.ndarray          # indirect <- unchangeable-continuous map
    a_d: np.ndarray          # indirect <- direct map
    b_u: np.ndarray
    b_ubin: np.ndarray
    b_i: np.ndarray
    b_d: np.ndarray
    statin_w: np.ndarray
    statin_b: float
    intercept: float
    loc: np.ndarray          # per-feature raw offset, schema order
    scale: np.ndarray        # per-feature raw scale, schema order
    c_plus: np.ndarray
    c_minus: np.ndarray


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@lru_cache(maxsize=32)
def _derive_params(spec: GeneratorSpec) -> _Params:
    rng = np.random.default_rng([spec.seed, 7])
    nu, nb = spec.n_unchangeable_continuous, spec.n_unchangeable_binary
    ni, nd = spec.n_indirect, spec.n_direct

    a_u = rng.normal(size=(ni, nu))
    a_d = 1.3 * rng.normal(size=(ni, nd))
    # unit structural variance per indirect feature, minus the noise share
    norms = np.sqrt((a_u ** 2).sum(axis=1) + (a_d ** 2).sum(axis=1))
    target = np.sqrt(max(1.0 - spec.indirect_noise ** 2, 0.05))
    a_u *= (target / norms)[:, None]
    a_d *= (target / norms)[:, None]

    b_u = 0.6 * rng.normal(size=nu)
    b_ubin = 0.4 * rng.normal(size=nb)
    b_i = 0.8 * rng.normal(size=ni)

    # pick the net direct-feature lever first, sign-coherent with the costs,
    # then back out the direct coefficient from the indirect path
    d_names = (_names(_D_CONT_NAMES, spec.n_direct_continuous, "d_cont")
               + _names(_D_BIN_NAMES, spec.n_direct_binary, "d_bin"))
    net = np.empty(nd)
    for j, name in enumerate(d_names):
        direction = _D_DIRECTIONS.get(name, 0)
        magnitude = rng.uniform(0.5, 1.0)
        if direction == 0:
            direction = 1 if rng.random() < 0.5 else -1
            net[j] = direction * magnitude
        else:
            # increasing an increase-only feature must lower risk, and vice versa
            net[j] = -direction * magnitude
    b_d = net - b_i @ a_d

    statin_w = rng.normal(size=ni)
    statin_w *= 2.6 / max(np.linalg.norm(statin_w), 1e-9)
    statin_b = float(rng.normal(scale=0.3))

    loc = np.concatenate([
        np.round(rng.uniform(20.0, 90.0, size=nu), 1),
        np.zeros(nb),
        np.round(rng.uniform(20.0, 160.0, size=ni), 1),
        np.round(rng.uniform(2.0, 40.0, size=spec.n_direct_continuous), 1),
        np.zeros(spec.n_direct_binary),
    ])
    scale = np.concatenate([
        np.round(rng.uniform(2.0, 12.0, size=nu), 2),
        np.ones(nb),
        np.round(rng.uniform(2.0, 15.0, size=ni), 2),
        np.round(rng.uniform(1.0, 6.0, size=spec.n_direct_continuous), 2),
        np.ones(spec.n_direct_binary),
    ])

    costs = rng.integers(3, 11, size=nd).astype(float)
    c_plus = costs.copy()
    c_minus = rng.integers(3, 11, size=nd).astype(float)
    for j, name in enumerate(d_names):
        direction = _D_DIRECTIONS.get(name, 0)
        if direction > 0:
            c_minus[j] = np.inf
        elif direction < 0:
            c_plus[j] = np.inf

    params = _Params(a_u=a_u, a_d=a_d, b_u=b_u, b_ubin=b_ubin, b_i=b_i, b_d=b_d,
                     statin_w=statin_w, statin_b=statin_b, intercept=0.0,
                     loc=loc, scale=scale, c_plus=c_plus, c_minus=c_minus)

    # normalize the score spread, then calibrate the intercept for the event
    # rate on a deterministic draft of the visit-1 population
    u_c, u_b, i_z, d_z = _draw_visit1(spec, params)
    raw_score = _score(params, u_c, u_b, i_z, d_z)
    spread = float(raw_score.std())
    ratio = spec.signal_scale / max(spread, 1e-9)
    params = _Params(a_u=a_u, a_d=a_d, b_u=b_u * ratio, b_ubin=b_ubin * ratio,
                     b_i=b_i * ratio, b_d=b_d * ratio, statin_w=statin_w,
                     statin_b=statin_b, intercept=0.0, loc=loc, scale=scale,
                     c_plus=c_plus, c_minus=c_minus)
    score = _score(params, u_c, u_b, i_z, d_z)
    lo, hi = -30.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(_sigmoid(mid + score).mean()) > spec.event_rate:
            hi = mid
        else:
            lo = mid
    intercept = 0.5 * (lo + hi)
    return _Params(a_u=params.a_u, a_d=params.a_d, b_u=params.b_u, b_ubin=params.b_ubin,
                   b_i=params.b_i, b_d=params.b_d, statin_w=params.statin_w,
                   statin_b=params.statin_b, intercept=intercept, loc=loc, scale=scale,
                   c_plus=c_plus, c_minus=c_minus)


def _data_rng(spec: GeneratorSpec) -> np.ndarray:
    return np.random.default_rng([spec.seed, 11])


def _draw_visit1(spec: GeneratorSpec, params: _Params):
    rng = _data_rng(spec)
    n = spec.n1
    u_c = rng.normal(size=(n, spec.n_unchangeable_continuous))
    u_b = (rng.random(size=(n, spec.n_unchangeable_binary))
           < rng.uniform(0.3, 0.7, size=spec.n_unchangeable_binary)).astype(float)
    d_cont = rng.normal(size=(n, spec.n_direct_continuous))
    d_bin = (rng.random(size=(n, spec.n_direct_binary)) < 0.35).astype(float)
    d_z = np.hstack([d_cont, d_bin])
    i_z = _indirect_map(spec, params, u_c, d_z, rng)
    if spec.n_unchangeable_binary >= 1:
        u_b[:, 0] = (rng.random(n) < _sigmoid(i_z @ params.statin_w + params.statin_b)).astype(float)
    return u_c, u_b, i_z, d_z


def _indirect_map(spec: GeneratorSpec, params: _Params, u_c: np.ndarray, d_z: np.ndarray,
                  rng) -> np.ndarray:
    noise = rng.normal(scale=spec.indirect_noise, size=(u_c.shape[0], spec.n_indirect)) \
        if spec.indirect_noise > 0 else 0.0
    return u_c @ params.a_u.T + d_z @ params.a_d.T + noise


def _score(params: _Params, u_c, u_b, i_z, d_z) -> np.ndarray:
    return u_c @ params.b_u + u_b @ params.b_ubin + i_z @ params.b_i + d_z @ params.b_d


def _missing_schedule(spec: GeneratorSpec, schema: FeatureSchema) -> list[set[str]]:
    """Dropped feature names per visit v=2..V, nested by construction."""
    if spec.missing_schedule is not None:
        if len(spec.missing_schedule) != spec.n_visits - 1:
            raise ConfigError("missing_schedule needs one entry per visit >= 2")
        known = set(schema.names)
        drops: list[set[str]] = []
        prev: set[str] = set()
        for k, entry in enumerate(spec.missing_schedule):
            current = set(entry)
            for name in current:
                if name not in known:
                    raise ConfigError(f"missing_schedule names unknown feature {name!r}")
            stale = prev - current
            if stale:
                raise ConfigError(
                    f"missing schedule not nested: feature {sorted(stale)[0]!r} "
                    f"reappears at visit {k + 2}")
            drops.append(current)
            prev = current
        return drops

    rng = np.random.default_rng([spec.seed, 13])
    protected = set()
    if spec.n_unchangeable_binary >= 1:
        protected.add(schema.features[spec.n_unchangeable_continuous].name)  # statin analogue
    i_start = spec.n_unchangeable
    protected |= {schema.features[i_start + k].name for k in range(min(3, spec.n_indirect))}
    droppable = [n for n in schema.names if n not in protected]
    drops: list[set[str]] = []
    dropped: set[str] = set()
    for _ in range(spec.n_visits - 1):
        pool = [n for n in droppable if n not in dropped]
        take = min(spec.missing_per_visit, len(pool))
        chosen = rng.choice(len(pool), size=take, replace=False) if take else []
        dropped |= {pool[int(c)] for c in np.sort(chosen)}
        drops.append(set(dropped))
    return drops


def ground_truth_risk(spec: GeneratorSpec, x_raw) -> float:
    """Generating probability for a full visit-layout raw feature vector."""
    params = _derive_params(spec)
    x_raw = np.asarray(x_raw, dtype=float)
    if x_raw.shape != (spec.n_features,):
        raise ConfigError(f"expected {spec.n_features} features, got {x_raw.shape}")
    z = (x_raw - params.loc) / params.scale
    nu, nb, ni = spec.n_unchangeable_continuous, spec.n_unchangeable_binary, spec.n_indirect
    u_c = z[None, :nu]
    u_b = z[None, nu:nu + nb]
    i_z = z[None, nu + nb:nu + nb + ni]
    d_z = z[None, nu + nb + ni:]
    return float(_sigmoid(params.intercept + _score(params, u_c, u_b, i_z, d_z))[0])


def generate(spec: GeneratorSpec) -> Cohort:
    """Produce a validated cohort whose structure every experiment relies on."""
    schema, partition = build_schema(spec)
    params = _derive_params(spec)
    drops = _missing_schedule(spec, schema)

    u_c, u_b, i_z, d_z = _draw_visit1(spec, params)
    rng = np.random.default_rng([spec.seed, 17])
    ids = [f"p{k:05d}" for k in range(spec.n1)]

    name_to_idx = {f.name: j for j, f in enumerate(schema.features)}
    visits: list[VisitDataset] = []
    alive = np.arange(spec.n1)
    d_lo = None
    d_hi = None
    for v in range(1, spec.n_visits + 1):
        if v > 1:
            # drift, persistence, and event/dropout attrition
            y_prev = visits[-1].y_next
            survivors_mask = y_prev == 0
            if spec.dropout_rate > 0:
                survivors_mask &= rng.random(alive.size) >= spec.dropout_rate
            alive = alive[survivors_mask]
            if alive.size == 0:
                raise ConfigError("cohort died out; lower event/dropout rates")
            if spec.drift_scale > 0:
                d_z[alive, :spec.n_direct_continuous] += rng.normal(
                    scale=spec.drift_scale, size=(alive.size, spec.n_direct_continuous))
            if spec.n_direct_binary and spec.binary_flip_prob > 0:
                flips = rng.random((alive.size, spec.n_direct_binary)) < spec.binary_flip_prob
                block = d_z[alive, spec.n_direct_continuous:]
                d_z[alive, spec.n_direct_continuous:] = np.where(flips, 1.0 - block, block)
            i_z[alive] = _indirect_map(spec, params, u_c[alive], d_z[alive], rng)
            if spec.n_unchangeable_binary >= 1:
                p_med = _sigmoid(i_z[alive] @ params.statin_w + params.statin_b)
                u_b[alive, 0] = (rng.random(alive.size) < p_med).astype(float)

        z_full = np.hstack([u_c[alive], u_b[alive], i_z[alive], d_z[alive]])
        raw = z_full * params.scale + params.loc
        score = _score(params, u_c[alive], u_b[alive], i_z[alive], d_z[alive])
        y = (rng.random(alive.size) < _sigmoid(params.intercept + score)).astype(int)

        d_start = spec.n_unchangeable + spec.n_indirect
        d_block = raw[:, d_start:d_start + spec.n_direct]
        d_lo = d_block.min(axis=0) if d_lo is None else np.minimum(d_lo, d_block.min(axis=0))
        d_hi = d_block.max(axis=0) if d_hi is None else np.maximum(d_hi, d_block.max(axis=0))

        dropped = drops[v - 2] if v >= 2 else set()
        present = tuple(j for j in range(spec.n_features)
                        if schema.features[j].name not in dropped)
        visits.append(VisitDataset(
            visit=v,
            ids=tuple(ids[k] for k in alive),
            X=raw[:, present],
            y_next=y,
            present_features=present,
        ))

    d_idx = tuple(sorted(partition.direct))
    d_names = tuple(schema.features[j].name for j in d_idx)
    d_scales = params.scale[list(d_idx)]
    binary_d = ~schema.continuous_mask(d_idx)
    lower = d_lo - 1.5 * d_scales
    upper = d_hi + 1.5 * d_scales
    lower[binary_d] = 0.0
    upper[binary_d] = 1.0
    cost_model = CostModel(d_indices=d_idx, c_plus=params.c_plus.copy(),
                           c_minus=params.c_minus.copy(), names=d_names)
    bounds = Bounds(d_indices=d_idx, lower=lower, upper=upper)
    cohort = Cohort(schema=schema, partition=partition, visits=tuple(visits),
                    cost_model=cost_model, bounds=bounds)
    validate_cohort(cohort)
    return cohort


def spec_from_payload(payload: dict) -> GeneratorSpec:
    """Build a spec from parsed JSON, rejecting unknown keys."""
    allowed = {f for f in GeneratorSpec.__dataclass_fields__}
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown generator field {sorted(unknown)[0]!r}")
    if "missing_schedule" in payload and payload["missing_schedule"] is not None:
        payload = dict(payload)
        payload["missing_schedule"] = tuple(tuple(entry) for entry in payload["missing_schedule"])
    return GeneratorSpec(**payload)
