"""Command-line surface: build, correct, exec, bench, export-dot, serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import RunConfig
from .demos import load_demo
from .errors import ConsistencyError, InvalidInputError, ModelFileError, SkillGraphError
from .simulator import generate_demo, get_scenario, run_with_model, teach
from .task_model import TaskModel, load_model, save_model
from .updates import counters, incorporate_demo

log = logging.getLogger("skillgraph")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _write_edit_log(records, path: str) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
    print(text)


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        scenario=getattr(args, "scenario", "") or "",
        theta=args.theta,
        tau=args.tau,
        sigma=getattr(args, "sigma", None),
        seed=args.seed,
    )


def cmd_build(args) -> int:
    scenario = get_scenario(args.scenario)
    config = _config_from_args(args).resolve(scenario)
    log.info("config %s hash %s", config.to_dict(), config.hash())
    cfg = config.update_config()
    model = TaskModel(scenario.layout, scenario.name, meta={"config_hash": config.hash()})
    records = []
    if args.no_demos:
        demos = []
    elif args.demo:
        demos = [load_demo(path) for path in args.demo]
    else:
        demos = [
            generate_demo(scenario, variant, config.sigma, rng_seed=config.seed + i,
                          demo_id=f"{scenario.name}-teach-{i}")
            for i, variant in enumerate(scenario.teach_variants)
        ]
    for demo in demos:
        records.extend(incorporate_demo(model, demo, cfg=cfg))
    save_model(model, args.out)
    _write_edit_log(records, args.out + ".edits.jsonl")
    summary = {
        "model": args.out,
        "config_hash": config.hash(),
        "kappa": model.kappa,
        "edges": len(model.edges),
        "edits": {kind: sum(1 for r in records if r.kind == kind)
                  for kind in sorted({r.kind for r in records})},
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_correct(args) -> int:
    model = load_model(args.model)
    scenario = get_scenario(model.scenario) if model.scenario else None
    config = _config_from_args(args).resolve(scenario)
    log.info("config %s hash %s", config.to_dict(), config.hash())
    cfg = config.update_config()
    demo = load_demo(args.demo)
    entry = model.start_id if args.failure_node is None else args.failure_node
    counters.reset()
    records = incorporate_demo(model, demo, entry=entry, cfg=cfg)
    model.meta["config_hash"] = config.hash()
    save_model(model, args.out)
    _write_edit_log(records, args.out + ".edits.jsonl")
    summary = {
        "model": args.out,
        "config_hash": config.hash(),
        "kappa": model.kappa,
        "edits": {kind: sum(1 for r in records if r.kind == kind)
                  for kind in sorted({r.kind for r in records})},
        "refit_counts": {
            "policy": counters.policy_fits,
            "classifier": counters.classifier_fits,
        },
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_exec(args) -> int:
    model = load_model(args.model)
    scenario = get_scenario(args.scenario or model.scenario)
    config = _config_from_args(args).resolve(scenario)
    log.info("config %s hash %s", config.to_dict(), config.hash())
    per_seed = []
    successes = 0
    first_trace = None
    for i in range(args.seeds):
        seed = config.seed + i
        trace, ok = run_with_model(
            model, scenario, args.variant, theta=config.theta, rng_seed=seed
        )
        if first_trace is None:
            first_trace = trace
        successes += ok
        per_seed.append({"seed": seed, "outcome": trace.outcome, "goal": bool(ok)})
    if args.trace_out and first_trace is not None:
        with open(args.trace_out, "w") as f:
            json.dump(first_trace.to_dict(), f, sort_keys=True, indent=2)
            f.write("\n")
    report = {
        "schema": "exec-report/1",
        "scenario": scenario.name,
        "variant": args.variant,
        "config_hash": config.hash(),
        "seeds": args.seeds,
        "successes": successes,
        "success_rate": successes / args.seeds if args.seeds else 0.0,
        "per_seed": per_seed,
    }
    _emit(report, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_bench

    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes or any(s < 1 for s in sizes):
        raise InvalidInputError("sizes must be positive integers")
    config = _config_from_args(args)
    log.info("config %s hash %s", config.to_dict(), config.hash())
    cfg = config.update_config()
    cfg.distance_sequences = 16  # rebuild cost is quadratic in kappa
    report = run_bench(sizes, seed=config.seed, cfg=cfg)
    report["config_hash"] = config.hash()
    _emit(report, args.out)
    return EXIT_OK


def cmd_export_dot(args) -> int:
    model = load_model(args.model)
    dot = model.to_dot()
    if args.out:
        with open(args.out, "w") as f:
            f.write(dot)
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skillgraph",
        description="Teach, correct, and run keyframe task automata in a 2D workspace.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=False, model=False, out_required=False):
        if scenario:
            p.add_argument("--scenario", help="scenario name or scenario file path")
        if model:
            p.add_argument("--model", required=True, help="model file path")
        p.add_argument("--out", required=out_required, help="output file path")
        p.add_argument("--theta", type=float, default=0.5, help="activation threshold")
        p.add_argument("--tau", type=float, default=None, help="cluster cut threshold")
        p.add_argument("--seed", type=int, default=0, help="base random seed")

    p = sub.add_parser("build", help="build a model from demonstrations")
    common(p, scenario=True, out_required=True)
    p.add_argument("--demo", action="append", help="demonstration file (repeatable)")
    p.add_argument("--sigma", type=float, default=None, help="teaching noise")
    p.add_argument("--no-demos", action="store_true",
                   help="write a start-only model (for interactive teaching)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("correct", help="apply a corrective demonstration")
    common(p, model=True, out_required=True)
    p.add_argument("--demo", required=True, help="corrective demonstration file")
    p.add_argument("--failure-node", type=int, default=None,
                   help="node where execution failed (default: start)")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("exec", help="run a model and report success rate")
    common(p, scenario=True, model=True)
    p.add_argument("--variant", default="base", help="scenario variant")
    p.add_argument("--seeds", type=int, default=20, help="number of seeded rollouts")
    p.add_argument("--trace-out", default=None,
                   help="write the first rollout's trace as JSON")
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("bench", help="compare local update against full rebuild")
    common(p)
    p.add_argument("--sizes", default="10,30,50", help="comma-separated model sizes")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export-dot", help="emit the automaton as DOT text")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("serve", help="host the interactive teaching service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8733)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "build" and not args.scenario:
        parser.error("build requires --scenario")
    try:
        return args.func(args)
    except (InvalidInputError, ModelFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConsistencyError as exc:
        print(f"internal consistency error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except SkillGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
