"""HTTP API over trained artifacts, consumed by the what-if UI.

Stateless JSON endpoints on stdlib threading HTTP server: models are loaded
once and immutable, so concurrent identical requests produce identical bodies.

    GET  /health            -> {"status": "ok"}
    GET  /patients          -> patient ids with visit presence
    GET  /patient/{id}      -> features by partition, per-visit risk
    POST /recommend         -> recommendation + risk trajectory
    POST /sweep             -> one recommendation summary per budget
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
import numpy as np

from riskrec.errors import InfeasibleError
from riskrec.inverse_opt import BudgetSpec, CostModel, Recommendation, optimize, sweep_budget
from riskrec.pipeline import TrainedArtifacts, _modified_rep_row
from riskrec.risk_features import estimate_risk


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class ServiceState:
    artifacts: TrainedArtifacts
    default_budget: float = 2.0

    @property
    def cohort(self):
        return self.artifacts.cohort


def _patient_visits(state: ServiceState, iid: str) -> list[int]:
    return [v for v in range(1, state.cohort.n_visits + 1)
            if iid in state.artifacts.row_index[v - 1]]


def handle_patients(state: ServiceState) -> dict:
    cohort = state.cohort
    patients = [{"id": iid, "visits": _patient_visits(state, iid)}
                for iid in cohort.visit(1).ids]
    return {"patients": patients, "count": len(patients)}


def _visit_risks(state: ServiceState, iid: str) -> list[dict]:
    arts = state.artifacts
    out = []
    for v in _patient_visits(state, iid):
        rep = arts.reps[v - 1]
        row = arts.row_index[v - 1][iid]
        prob = float(estimate_risk(arts.classifiers[v - 1], rep.matrix[row][None, :])[0])
        out.append({"visit": v, "probability": prob})
    return out


def handle_patient(state: ServiceState, iid: str) -> dict:
    cohort = state.cohort
    arts = state.artifacts
    if iid not in arts.row_index[0]:
        raise ApiError(404, f"unknown patient {iid!r}")
    rep1 = arts.reps[0]
    row = arts.row_index[0][iid]
    values = rep1.base.X[row]
    pos = {j: c for c, j in enumerate(rep1.base.feature_cols)}
    groups = {}
    for label, indices in (("unchangeable", cohort.partition.unchangeable),
                           ("indirect", cohort.partition.indirect),
                           ("direct", cohort.partition.direct)):
        groups[label] = [
            {"name": cohort.schema.features[j].name,
             "kind": cohort.schema.features[j].kind,
             "value": float(values[pos[j]])}
            for j in sorted(indices)
        ]
    d_idx = cohort.cost_model.d_indices
    costs = []
    for k, j in enumerate(d_idx):
        cp = cohort.cost_model.c_plus[k]
        cm = cohort.cost_model.c_minus[k]
        costs.append({
            "name": cohort.schema.features[j].name,
            "increase": None if not np.isfinite(cp) else float(cp),
            "decrease": None if not np.isfinite(cm) else float(cm),
            "lower": float(cohort.bounds.lower[k]),
            "upper": float(cohort.bounds.upper[k]),
        })
    return {"id": iid, "features": groups, "costs": costs,
            "risks": _visit_risks(state, iid), "default_budget": state.default_budget}


def _overridden_models(state: ServiceState, body: dict,
                       current_d: np.ndarray) -> tuple[CostModel, BudgetSpec]:
    cohort = state.cohort
    cost_model = cohort.cost_model
    budget_value = body.get("budget", state.default_budget)
    try:
        budget_value = float(budget_value)
    except (TypeError, ValueError):
        raise ApiError(400, "budget must be a number")
    if budget_value < 0:
        raise ApiError(400, "negative budget")

    c_plus = cost_model.c_plus.copy()
    c_minus = cost_model.c_minus.copy()
    lower = cohort.bounds.lower.copy()
    upper = cohort.bounds.upper.copy()
    names = list(cost_model.names or ())
    name_to_k = {n: k for k, n in enumerate(names)}

    def _cost_of(raw, side):
        if raw is None or raw == "locked":
            return np.inf
        value = float(raw)
        if value < 0:
            raise ApiError(400, f"negative {side} cost")
        return value

    for name, entry in (body.get("cost_overrides") or {}).items():
        if name not in name_to_k:
            raise ApiError(400, f"unknown direct feature {name!r}")
        k = name_to_k[name]
        if "increase" in entry:
            c_plus[k] = _cost_of(entry["increase"], "increase")
        if "decrease" in entry:
            c_minus[k] = _cost_of(entry["decrease"], "decrease")
    for name, entry in (body.get("bound_overrides") or {}).items():
        if name not in name_to_k:
            raise ApiError(400, f"unknown direct feature {name!r}")
        k = name_to_k[name]
        if "lower" in entry:
            lower[k] = float(entry["lower"])
        if "upper" in entry:
            upper[k] = float(entry["upper"])
        if lower[k] > upper[k]:
            raise ApiError(400, f"lower bound above upper bound for {name!r}")
    # a feature locked in both directions becomes a bounds pin at its current
    # value; the cost model itself always keeps one finite side
    fully_locked = ~np.isfinite(c_plus) & ~np.isfinite(c_minus)
    for k in np.flatnonzero(fully_locked):
        lower[k] = upper[k] = float(current_d[k])
        c_plus[k] = c_minus[k] = 1.0
    try:
        cm = CostModel(d_indices=cost_model.d_indices, c_plus=c_plus, c_minus=c_minus,
                       names=cost_model.names)
    except InfeasibleError as exc:
        raise ApiError(400, str(exc))
    return cm, BudgetSpec(budget_value, lower, upper)


def _trajectory(state: ServiceState, iid: str, rec: Recommendation) -> dict:
    """Baseline vs optimized per-visit risk, carrying the optimized direct
    values forward exactly like the longitudinal experiment does."""
    arts = state.artifacts
    visits = _patient_visits(state, iid)
    baseline = {r["visit"]: r["probability"] for r in _visit_risks(state, iid)}
    modified: list[dict] = [dict() for _ in range(state.cohort.n_visits)]
    optimized = {}
    if rec.changed:
        modified[0][iid] = rec.assembled
        optimized[1] = rec.after_probability
        for v in visits:
            if v == 1:
                continue
            row_vals = _modified_rep_row(arts, v, iid, rec.after_raw, modified)
            modified[v - 1][iid] = row_vals
            optimized[v] = float(estimate_risk(arts.classifiers[v - 1], row_vals[None, :])[0])
    else:
        optimized = dict(baseline)
    return {
        "visits": visits,
        "baseline": [baseline[v] for v in visits],
        "optimized": [optimized[v] for v in visits],
    }


def handle_recommend(state: ServiceState, body: dict) -> dict:
    iid = body.get("id")
    if not isinstance(iid, str):
        raise ApiError(400, "body must carry a patient id")
    arts = state.artifacts
    if iid not in arts.row_index[0]:
        raise ApiError(404, f"unknown patient {iid!r}")
    instance = arts.instance(iid, 1)
    pos = {j: c for c, j in enumerate(instance.feature_cols)}
    current_d = instance.values[[pos[j] for j in state.cohort.cost_model.d_indices]]
    cost_model, budget = _overridden_models(state, body, current_d)
    try:
        rec = optimize(arts.classifiers[0], arts.indirects[0], instance,
                       state.cohort.partition, cost_model, budget, arts.config.solver)
    except InfeasibleError as exc:
        raise ApiError(400, str(exc))
    payload = rec.to_dict()
    payload["id"] = iid
    payload["trajectory"] = _trajectory(state, iid, rec)
    return payload


def handle_sweep(state: ServiceState, body: dict) -> dict:
    iid = body.get("id")
    if not isinstance(iid, str):
        raise ApiError(400, "body must carry a patient id")
    arts = state.artifacts
    if iid not in arts.row_index[0]:
        raise ApiError(404, f"unknown patient {iid!r}")
    budgets = body.get("budgets")
    if not isinstance(budgets, list) or not budgets:
        raise ApiError(400, "budgets must be a non-empty ascending list")
    try:
        budgets = [float(b) for b in budgets]
    except (TypeError, ValueError):
        raise ApiError(400, "budgets must be numbers")
    if budgets != sorted(budgets) or budgets[0] < 0:
        raise ApiError(400, "budgets must be non-negative and ascending")
    instance = arts.instance(iid, 1)
    pos = {j: c for c, j in enumerate(instance.feature_cols)}
    current_d = instance.values[[pos[j] for j in state.cohort.cost_model.d_indices]]
    cost_model, budget = _overridden_models(state, {**body, "budget": budgets[-1]}, current_d)
    try:
        recs = sweep_budget(arts.classifiers[0], arts.indirects[0], instance,
                            state.cohort.partition, cost_model, budgets,
                            budget.lower, budget.upper, arts.config.solver)
    except InfeasibleError as exc:
        raise ApiError(400, str(exc))
    return {
        "id": iid,
        "points": [{"budget": b, "after_probability": r.after_probability,
                    "cost_spent": r.cost_spent} for b, r in zip(budgets, recs)],
    }


def _json_bytes(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True).encode()


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState = None  # injected by make_server
    ui_dir = None

    def log_message(self, *args):  # quiet by default; stderr stays diagnostic
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = _json_bytes(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def _serve_ui(self, path: str) -> bool:
        if self.ui_dir is None:
            return False
        import mimetypes
        from pathlib import Path

        target = (Path(self.ui_dir) / (path.lstrip("/") or "index.html")).resolve()
        if not str(target).startswith(str(Path(self.ui_dir).resolve())) or not target.is_file():
            return False
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", mimetypes.guess_type(str(target))[0] or "text/plain")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True

    def do_GET(self):
        try:
            path = self.path.split("?")[0]
            if path == "/health":
                self._send(200, {"status": "ok"})
            elif path == "/patients":
                self._send(200, handle_patients(self.state))
            elif path.startswith("/patient/"):
                self._send(200, handle_patient(self.state, path[len("/patient/"):]))
            elif self._serve_ui(path):
                pass
            else:
                self._send(404, {"error": "not found"})
        except ApiError as exc:
            self._send(exc.status, {"error": exc.message})
        except Exception as exc:  # pragma: no cover - defensive
            self._send(500, {"error": str(exc)})

    def do_POST(self):
        try:
            length = int(self.headers.get("Content-Length") or 0)
            try:
                body = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                raise ApiError(400, "invalid JSON body")
            if self.path == "/recommend":
                self._send(200, handle_recommend(self.state, body))
            elif self.path == "/sweep":
                self._send(200, handle_sweep(self.state, body))
            else:
                self._send(404, {"error": "not found"})
        except ApiError as exc:
            self._send(exc.status, {"error": exc.message})
        except Exception as exc:  # pragma: no cover - defensive
            self._send(500, {"error": str(exc)})


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8741,
                ui_dir=None) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"state": state, "ui_dir": ui_dir})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
