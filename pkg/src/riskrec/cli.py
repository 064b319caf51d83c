"""Command-line entry point.

Exit codes: 0 success, 1 training failure, 2 configuration error,
3 unknown patient, 4 bind failure. Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from riskrec.cohort import Cohort, load_cohort, write_cohort
from riskrec.errors import ConfigError, DataError, InfeasibleError, ModelError
from riskrec.pipeline import (
    ModelConfig,
    TrainedArtifacts,
    experiment1,
    experiment2,
    experiment3,
    load_artifacts,
    save_artifacts,
    train_all,
    write_report,
)
from riskrec.synth import GeneratorSpec, generate, spec_from_payload

EXIT_OK = 0
EXIT_TRAINING = 1
EXIT_CONFIG = 2
EXIT_UNKNOWN_PATIENT = 3
EXIT_BIND = 4

OUT_DIR_ENV = "RISKREC_OUT"


@dataclass
class RunConfig:
    cohort_path: Optional[str]
    generator: Optional[GeneratorSpec]
    model: ModelConfig
    experiments: tuple[int, ...]
    budget: float
    budgets: tuple[float, ...]
    seed: int
    out_dir: str

    def __post_init__(self):
        if (self.cohort_path is None) == (self.generator is None):
            raise ConfigError("config needs exactly one of cohort_path / generator")


def parse_run_config(payload: dict) -> RunConfig:
    known_model = {"kernel", "c_reg", "gamma", "platt_folds", "test_fraction",
                   "bandwidth", "estimator_kinds"}
    model_payload = payload.get("model") or {}
    unknown = set(model_payload) - known_model
    if unknown:
        raise ConfigError(f"unknown model option {sorted(unknown)[0]!r}")
    generator = payload.get("generator")
    return RunConfig(
        cohort_path=payload.get("cohort_path"),
        generator=None if generator is None else spec_from_payload(generator),
        model=ModelConfig(**model_payload),
        experiments=tuple(payload.get("experiments", (1, 2, 3))),
        budget=float(payload.get("budget", 2.0)),
        budgets=tuple(payload.get("budgets", (0.5, 1.0, 2.0, 4.0))),
        seed=int(payload.get("seed", 0)),
        out_dir=str(payload.get("out_dir", "runs")),
    )


def load_run_config(path) -> RunConfig:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read run config {path}: {exc}")
    return parse_run_config(payload)


def _resolve_cohort(config: RunConfig) -> Cohort:
    if config.cohort_path is not None:
        return load_cohort(config.cohort_path)
    return generate(config.generator)


def cmd_generate(args) -> int:
    try:
        payload = json.loads(Path(args.spec).read_text())
        spec = spec_from_payload(payload)
        if args.seed is not None:
            payload["seed"] = args.seed
            spec = spec_from_payload(payload)
        cohort = generate(spec)
        write_cohort(cohort, args.out)
    except (OSError, json.JSONDecodeError, ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"out": str(args.out), "visits": cohort.n_visits,
                      "instances": cohort.visit(1).n}))
    return EXIT_OK


def _train(config: RunConfig, cohort: Cohort) -> TrainedArtifacts:
    return train_all(cohort, config.model, seed=config.seed)


def cmd_run(args) -> int:
    try:
        config = load_run_config(args.config)
        config = _apply_cli_overrides(config, args)
        unknown = [e for e in config.experiments if e not in (1, 2, 3)]
        if unknown:
            raise ConfigError(f"unknown experiment id {unknown[0]}")
        cohort = _resolve_cohort(config)
    except (ConfigError, DataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    run_dir = Path(config.out_dir) / f"run-{time.strftime('%Y%m%dT%H%M%S')}-seed{config.seed}"
    try:
        arts = None
        if any(e in config.experiments for e in (2, 3)):
            arts = _train(config, cohort)
        for exp in config.experiments:
            if exp == 1:
                report = experiment1(cohort, config.model, seed=config.seed)
            elif exp == 2:
                report = experiment2(cohort, config.model, seed=config.seed, artifacts=arts)
            else:
                report = experiment3(cohort, config.model, seed=config.seed,
                                     budget=config.budget, artifacts=arts)
            write_report(report, run_dir / f"exp{exp}")
            print(f"experiment {exp} written to {run_dir / f'exp{exp}'}", file=sys.stderr)
        if arts is not None:
            save_artifacts(arts, run_dir / "artifacts")
    except (ModelError, InfeasibleError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    print(json.dumps({"run_dir": str(run_dir), "experiments": list(config.experiments)}))
    return EXIT_OK


def _apply_cli_overrides(config: RunConfig, args) -> RunConfig:
    import dataclasses
    import os

    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        updates["out_dir"] = args.out
    elif os.environ.get(OUT_DIR_ENV):
        updates["out_dir"] = os.environ[OUT_DIR_ENV]
    if getattr(args, "experiments", None):
        try:
            updates["experiments"] = tuple(int(e) for e in args.experiments.split(","))
        except ValueError:
            raise ConfigError(f"bad experiment list {args.experiments!r}")
    if getattr(args, "budget", None) is not None:
        updates["budget"] = args.budget
    return dataclasses.replace(config, **updates) if updates else config


def _artifacts_for(config: RunConfig, cohort: Cohort, artifacts_dir) -> TrainedArtifacts:
    if artifacts_dir and (Path(artifacts_dir) / "artifacts.json").is_file():
        return load_artifacts(artifacts_dir, cohort)
    return _train(config, cohort)


def cmd_recommend(args) -> int:
    from riskrec.service import ApiError, ServiceState, handle_recommend

    try:
        config = load_run_config(args.config)
        config = _apply_cli_overrides(config, args)
        cohort = _resolve_cohort(config)
    except (ConfigError, DataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        arts = _artifacts_for(config, cohort, args.artifacts)
    except (ModelError, InfeasibleError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    state = ServiceState(artifacts=arts, default_budget=config.budget)
    body = {"id": args.patient}
    if args.budget is not None:
        body["budget"] = args.budget
    try:
        payload = handle_recommend(state, body)
    except ApiError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_UNKNOWN_PATIENT if exc.status == 404 else EXIT_CONFIG
    print(json.dumps(payload, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_serve(args) -> int:
    from riskrec.service import ServiceState, make_server

    try:
        config = load_run_config(args.config)
        config = _apply_cli_overrides(config, args)
        cohort = _resolve_cohort(config)
    except (ConfigError, DataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        arts = _artifacts_for(config, cohort, args.artifacts)
    except (ModelError, InfeasibleError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    host, _, port = args.bind.partition(":")
    try:
        server = make_server(ServiceState(artifacts=arts, default_budget=config.budget),
                             host=host or "127.0.0.1", port=int(port or 8741),
                             ui_dir=args.ui_dir)
    except OSError as exc:
        print(f"bind error: {exc}", file=sys.stderr)
        return EXIT_BIND
    print(f"serving on http://{host or '127.0.0.1'}:{port or 8741}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskrec",
                                     description="longitudinal inverse classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic cohort")
    p_gen.add_argument("--spec", required=True, help="generator spec JSON")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="train and run experiments")
    p_run.add_argument("--config", required=True, help="run config JSON")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--experiments", default=None, help="comma-separated ids, e.g. 1,2,3")
    p_run.add_argument("--budget", type=float, default=None)
    p_run.set_defaults(func=cmd_run)

    p_rec = sub.add_parser("recommend", help="print one patient's recommendation")
    p_rec.add_argument("--config", required=True)
    p_rec.add_argument("--patient", required=True)
    p_rec.add_argument("--budget", type=float, default=None)
    p_rec.add_argument("--seed", type=int, default=None)
    p_rec.add_argument("--artifacts", default=None, help="saved artifacts directory")
    p_rec.set_defaults(func=cmd_recommend)

    p_srv = sub.add_parser("serve", help="serve the recommendation API")
    p_srv.add_argument("--config", required=True)
    p_srv.add_argument("--bind", default="127.0.0.1:8741")
    p_srv.add_argument("--seed", type=int, default=None)
    p_srv.add_argument("--artifacts", default=None)
    p_srv.add_argument("--ui-dir", default=None, help="serve a built frontend from this directory")
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
