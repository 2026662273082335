"""Command-line entry point: ``ptvalue run|sweep|heatmap|verify|oracle``.

Exit codes: 0 success, 2 configuration error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import ConfigError, PtValueError

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 2, 3


def _resolve_config(arg: str):
    from .config import bundled_config, load_config

    path = Path(arg)
    if not path.exists() and path.suffix == "":
        path = bundled_config(arg)
    return load_config(path)


def _apply_overrides(cfg, args):
    over = {}
    if args.seeds is not None:
        over["seeds"] = args.seeds
    if args.base_seed is not None:
        over["base_seed"] = args.base_seed
    if args.jobs is not None:
        over["jobs"] = args.jobs
    if getattr(args, "episodes", None) is not None:
        over["episodes"] = args.episodes
    return cfg.with_overrides(**over) if over else cfg


def _write(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8", newline="")


def _cmd_run(cfg, args) -> int:
    from .runner import run, write_csv

    out = args.out or cfg.out
    per_seed = run(cfg, out=out)
    if out is None:
        write_csv(per_seed, cfg, sys.stdout)
    return EXIT_OK


def _cmd_sweep(cfg, args) -> int:
    from .sweep import sweep

    result = sweep(cfg)
    _write(result.to_csv(), args.out)
    print(f"selected {result.best} mean AUC {result.best_mean:.6g}", file=sys.stderr)
    return EXIT_OK


def _cmd_heatmap(cfg, args) -> int:
    from .sweep import kl_heatmap

    result = kl_heatmap(cfg)
    _write(result.to_csv(), args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import verify

    report = verify(args.suite, quick=args.quick)
    _write(report.to_json() + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_oracle(cfg, args) -> int:
    """Monte-Carlo values of every non-terminal grid state for each task, next to the exact values."""
    from ..analysis.montecarlo import mrp_monte_carlo
    from ..core_mdp import exact_value
    from .runner import format_value, seed_rng, setup_for

    if cfg.environment != "discrete_grid":
        raise ConfigError("the oracle subcommand needs a discrete_grid config")
    setup = setup_for(cfg)
    lines = ["task_id,state,mc_value,mc_stderr,exact_value\n"]
    for t, task in enumerate(setup.env.schedule.tasks):
        mrp = setup.env.induced_mrp(task)
        est = mrp_monte_carlo(mrp, args.episodes, seed_rng(cfg.base_seed, t), states=setup.eval_states)
        exact = exact_value(mrp)
        for s in setup.eval_states:
            vals = [t, int(s), float(est.values[s]), float(est.stderr[s]), float(exact[s])]
            lines.append(",".join(format_value(v) for v in vals) + "\n")
    _write("".join(lines), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptvalue", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML file, or the name of a bundled config")
        p.add_argument("--seeds", type=int, help="number of seeds (overrides the config)")
        p.add_argument("--base-seed", type=int, help="base seed of the per-run streams")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--jobs", type=int, help="worker processes")
        p.add_argument("--episodes", type=int, help="episode budget (overrides the config)")
        p.add_argument("--explain", action="store_true", help="print the resolved config and exit")
        return p

    experiment("run", "run a config and emit per-episode metrics")
    experiment("sweep", "sweep the [sweep] grids and select by curve area")
    experiment("heatmap", "k/decay heatmap for the continual learner")
    experiment("oracle", "Monte-Carlo ground truth for the prediction grid")
    v = sub.add_parser("verify", help="run a theory suite")
    v.add_argument("suite", help="thm1 ... thm8, analytic-mse or fixed-points")
    v.add_argument("--quick", action="store_true", help="reduced sample sizes")
    v.add_argument("--out", help="write the JSON report here (default: stdout)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        cfg = _resolve_config(args.config)
        episodes = args.episodes
        if args.command == "oracle":
            # for the oracle, --episodes counts walkers per state
            args.episodes = None
        cfg = _apply_overrides(cfg, args)
        if args.explain:
            print(cfg.explain())
            return EXIT_OK
        if args.command == "oracle":
            args.episodes = 10_000 if episodes is None else episodes
            return _cmd_oracle(cfg, args)
        return {"run": _cmd_run, "sweep": _cmd_sweep, "heatmap": _cmd_heatmap}[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PtValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
