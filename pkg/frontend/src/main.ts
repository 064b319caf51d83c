import { ApiClient } from "./api";
import { renderApp, type Handlers } from "./render";
import { Session } from "./state";
import "./style.css";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? window.location.origin;

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const api = new ApiClient(apiBase);
const session: Session = new Session(api, (state) => renderApp(root, state, handlers));

const handlers: Handlers = {
  onSelectPatient: (id) => void session.selectPatient(id),
  onPage: (page) => session.setPage(page),
  onBudgetInput: (value) => session.setBudget(value),
  onBudgetCommit: () => void session.recommend(),
  onLockToggle: (name, locked) => session.setLocked(name, locked),
  onCostEdit: (name, side, value) =>
    session.setCostOverride(name, {
      ...session.state.costOverrides[name],
      [side]: value,
    }),
  onBoundEdit: (name, side, value) =>
    session.setBoundOverride(name, {
      ...session.state.boundOverrides[name],
      [side]: value,
    }),
  onRecompute: () => void session.recommend(),
  onSweep: () => void session.runSweep(),
  onSweepBudgets: (budgets) => session.setSweepBudgets(budgets),
  onRetry: () => void session.loadPatients(),
};

void session.loadPatients();
