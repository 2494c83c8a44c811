"""Command-line entry point: ``rewardteach run | sweep | plot | validate-config``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness, plotting
from .config import ConfigError, load_config
from .harness import (
    AGGREGATE_COLUMNS,
    SCATTER_COLUMNS,
    SchemaError,
    aggregate,
    read_csv,
    run_batch,
    sweep_random_instances,
    write_aggregate_csv,
    write_run_csv,
    write_scatter_csv,
    write_summary_json,
)
from .servers import EpochSchedule, parse_policy

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("rewardteach")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _line_svgs(named_stats, out_dir: Path) -> None:
    for metric in ("regret", "cost"):
        curves = [
            {"label": label, "t": s.t.tolist(), "mean": getattr(s, f"{metric}_mean").tolist(),
             "low": getattr(s, f"{metric}_p10").tolist(), "high": getattr(s, f"{metric}_p90").tolist()}
            for label, s in named_stats
        ]
        title = f"cumulative {metric} (mean, 10-90% band)"
        (out_dir / f"{metric}.svg").write_text(plotting.line_chart(curves, title, "t", metric))


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.seeds is not None:
        cfg.seeds = args.seeds
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out = args.out
    if args.checkpoint_stride is not None:
        cfg.checkpoint_stride = args.checkpoint_stride
    if args.policies:
        cfg.policies = list(args.policies)
    templates = cfg.run_configs()

    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = cfg.seed_list()
    instance = templates[0].instance
    # where and how wide a run executed does not change its results, so it stays out
    recorded = {k: v for k, v in cfg.to_json().items() if k not in ("out", "workers")}
    manifest = {
        "config": recorded,
        "seeds": seeds,
        "instance": instance.to_json(),
        "reward_kind": instance.reward_kind,
        "schedule": EpochSchedule(cfg.T, instance.num_arms, instance.num_clients).to_json(),
        "policies": {},
    }
    failures = {}
    named_stats = []
    for tpl in templates:
        spec = parse_policy(tpl.policy)
        slug = spec.slug()
        runs = run_batch(tpl, seeds, workers=cfg.workers, backend=args.backend)
        run_dir = out_dir / slug
        run_dir.mkdir(exist_ok=True)
        for r in runs:
            write_run_csv(r, run_dir / f"seed_{r.seed}.csv")
            write_summary_json(r, run_dir / f"seed_{r.seed}.json")
        entry = {"label": spec.label(), "runs": len(runs), "failed": [f.seed for f in runs.failures]}
        if runs:
            stats = aggregate(list(runs))
            write_aggregate_csv(stats, out_dir / f"aggregate_{slug}.csv")
            entry["aggregate"] = f"aggregate_{slug}.csv"
            named_stats.append((spec.label(), stats))
        if runs.failures:
            failures[spec.label()] = [{"seed": f.seed, "error": f.kind, "message": f.error} for f in runs.failures]
        manifest["policies"][slug] = entry
        print(f"{spec.label()}: {len(runs)} runs, {len(runs.failures)} failed")
    if cfg.plots and named_stats:
        _line_svgs(named_stats, out_dir)
    manifest["partial"] = bool(failures)
    _write_json(out_dir / "manifest.json", manifest)
    if failures:
        _write_json(out_dir / "FAILED.json", failures)
        print(f"error: some runs failed; see {out_dir / 'FAILED.json'}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        policies = args.policies or cfg.policies
        strategies = args.strategies or cfg.strategies
        T = args.T or cfg.T
        seed = cfg.seed if args.seed is None else args.seed
        workers = cfg.workers if args.workers is None else args.workers
    else:
        policies = args.policies or ["tal:g1=1,g2=0", "twl:g1=1,g2=0", "ng", "na"]
        strategies = args.strategies or ["ucb1"]
        T = args.T or 50000
        seed = args.seed or 0
        workers = args.workers
    if isinstance(strategies, list) and len(strategies) == 1:
        strategies = strategies[0]
    if isinstance(strategies, list) and len(strategies) != args.M:
        raise ConfigError(f"--strategies has {len(strategies)} entries but M={args.M}")
    for i, p in enumerate(policies):
        try:
            parse_policy(p)
        except ValueError as exc:
            raise ConfigError(f"policies[{i}]: {exc}") from None
    try:
        result = sweep_random_instances(args.n, args.M, args.K, strategies, policies, T, seed,
                                        workers=workers, backend=args.backend)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out_dir = Path(args.out or "sweep")
    out_dir.mkdir(parents=True, exist_ok=True)
    groups = []
    expected = args.n
    short = False
    for label, points in result.items():
        slug = parse_policy(label).slug()
        write_scatter_csv(points, out_dir / f"scatter_{slug}.csv")
        groups.append({"label": label, "x": [p.final_regret for p in points], "y": [p.final_cost for p in points]})
        short |= len(points) != expected
        print(f"{label}: {len(points)} instances")
    (out_dir / "scatter.svg").write_text(
        plotting.scatter_chart(groups, f"{args.n} random {args.M}x{args.K} instances, T={T}"))
    _write_json(out_dir / "manifest.json", {
        "n": args.n, "M": args.M, "K": args.K, "T": T, "seed": seed, "policies": list(result),
        "strategies": strategies, "reward_kind": "bernoulli",
    })
    return EXIT_RUNTIME if short else EXIT_OK


def cmd_plot(args) -> int:
    labels = args.labels or [Path(p).stem for p in args.csv]
    if len(labels) != len(args.csv):
        raise ConfigError("--labels must name every CSV")
    try:
        if args.kind == "lines":
            curves = []
            for path, label in zip(args.csv, labels):
                d = read_csv(path, AGGREGATE_COLUMNS)
                m = args.metric
                curves.append({"label": label, "t": d["t"].tolist(), "mean": d[f"{m}_mean"].tolist(),
                               "low": d[f"{m}_p10"].tolist(), "high": d[f"{m}_p90"].tolist()})
            svg = plotting.line_chart(curves, args.title or f"cumulative {args.metric}", "t", args.metric)
        else:
            groups = []
            for path, label in zip(args.csv, labels):
                d = read_csv(path, SCATTER_COLUMNS)
                groups.append({"label": label, "x": d["final_regret"].tolist(), "y": d["final_cost"].tolist()})
            svg = plotting.scatter_chart(groups, args.title or "final regret vs cost")
    except OSError as exc:
        raise ConfigError(f"cannot read {exc.filename}: {exc.strerror}") from None
    except SchemaError as exc:
        raise ConfigError(str(exc)) from None
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(svg)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    templates = cfg.run_configs()
    inst = templates[0].instance
    print(f"ok: M={inst.num_clients} K={inst.num_arms} T={cfg.T} policies={[t.policy for t in templates]} seeds={cfg.seeds}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rewardteach", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, help="master seed (non-negative)")
        sp.add_argument("--workers", type=int, help="parallel worker processes (default: all processors)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--policies", nargs="+", help="policy specs, e.g. tal:g1=1,g2=0 twl ng na")
        sp.add_argument("--backend", choices=[harness._backend.PYTHON, harness._backend.COMPILED],
                        help="force an episode backend")

    r = sub.add_parser("run", help="seeded batches on one instance, one per policy")
    r.add_argument("--config", required=True)
    r.add_argument("--seeds", type=int, help="number of seeds (seed, seed+1, ...)")
    r.add_argument("--checkpoint-stride", type=int)
    common(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="one run per policy on each of n random instances")
    s.add_argument("--config")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--M", type=int, default=5)
    s.add_argument("--K", type=int, default=5)
    s.add_argument("--T", type=int)
    s.add_argument("--strategies", nargs="+", help="one spec for all clients or one per client")
    common(s)
    s.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="render aggregate or scatter CSVs as SVG")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--kind", choices=["lines", "scatter"], default="lines")
    pl.add_argument("--metric", choices=["regret", "cost"], default="regret")
    pl.add_argument("--labels", nargs="+")
    pl.add_argument("--title")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)

    v = sub.add_parser("validate-config", help="check a config file and exit")
    v.add_argument("config_path", nargs="?")
    v.add_argument("--config", dest="config_flag")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate-config":
        args.config = args.config_flag or args.config_path
        if not args.config:
            print("error: validate-config needs a config path", file=sys.stderr)
            return EXIT_CONFIG
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
