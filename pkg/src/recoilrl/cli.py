"""Command-line entry point: ``recoilrl {train,eval,compare,sweep,export}``.

Log verbosity follows the ``RECOILRL_LOG`` environment variable
(``DEBUG``, ``INFO``, ``WARNING``; default ``INFO``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, dump_config, load_config
from .evaluation import AGENTS, compare_policies, run_eval, sweep_h_tt
from .plotting import plot_action_comparison, plot_error_comparison, plot_training_curves
from .policy import load_checkpoint, save_checkpoint
from .ppo import CURVE_COLUMNS, VARIANTS, train
from .reports import (
    COMPARISON_COLUMNS,
    comparison_rows,
    export_trajectory_csv,
    format_comparison,
    format_sweep,
    load_traces,
    save_traces,
    write_csv,
    write_curve,
    write_metrics,
    write_sweep,
)

log = logging.getLogger("recoilrl")


def _setup_logging() -> None:
    level = os.environ.get("RECOILRL_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(name)s: %(message)s")


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    print(f"config digest {cfg.digest()}")
    return cfg


def _run_dir(args, cfg: RunConfig, default_name: str) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.output_dir) / default_name
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    return out


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_train(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    out = _run_dir(args, cfg, f"train_{args.variant}_s{seed}")
    curve_path = out / "training_curve.csv"
    result = train(cfg.env_config(), cfg.ppo, args.variant, seed)
    write_curve(curve_path, result.curve, CURVE_COLUMNS)
    save_checkpoint(result.policy, out / "checkpoint.json", cfg.to_dict())
    plot_training_curves({args.variant: result.curve}, out / "training_curve.png")
    print(f"checkpoint {out / 'checkpoint.json'}")
    print(f"training curve {curve_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    policy, _ = load_checkpoint(args.checkpoint)
    n = args.episodes or cfg.eval.n_episodes
    env_cfg = cfg.eval_env_config(enable_disturbance=not args.no_disturbance)
    res = run_eval(policy, env_cfg, n, seed, workers=args.workers or cfg.eval.workers,
                   literal_metric=cfg.eval.literal_metric)
    agent = policy.meta.get("variant", "agent")
    out = _run_dir(args, cfg, f"eval_{agent}_s{seed}")
    write_metrics(out / "metrics.json", agent, res.metrics, seed, cfg.to_dict())
    save_traces(out / f"traces_{agent}.npz", res.traces)
    m = res.metrics
    print(f"{agent}: p_x={m.p_x:.4f} p_y={m.p_y:.4f} p_z={m.p_z:.4f} |p|={m.p_norm:.4f} "
          f"Sigma_u={m.sigma_u:.2f} failures={m.failures}/{m.n_episodes}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    policies = {}
    for agent in AGENTS:
        policies[agent], _ = load_checkpoint(getattr(args, agent))
    results = compare_policies(policies, cfg.eval_env_config(), seed, cfg.eval.n_episodes,
                               cfg.eval.workers, cfg.eval.literal_metric)
    out = _run_dir(args, cfg, f"compare_s{seed}")
    write_csv(out / "comparison.csv", COMPARISON_COLUMNS, comparison_rows(results))
    for agent, res in results.items():
        write_metrics(out / f"metrics_{agent}.json", agent, res.metrics, seed, cfg.to_dict())
        save_traces(out / f"traces_{agent}.npz", res.traces)
    traces = {a: r.traces for a, r in results.items()}
    plot_error_comparison(traces, out / "error_comparison.png")
    plot_action_comparison(traces, out / "control_comparison.png")
    print(format_comparison(results))
    print(f"report {out / 'comparison.csv'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    cells = sweep_h_tt(_int_list(args.h), _float_list(args.tt), cfg.env_config(), cfg.ppo,
                       cfg.eval_env_config(), seed, cfg.eval.n_episodes)
    out = _run_dir(args, cfg, f"sweep_s{seed}")
    write_sweep(out / "sweep.csv", cells)
    print(format_sweep(cells))
    return 0


def cmd_export(args) -> int:
    run = Path(args.run)
    files = sorted(run.glob("traces_*.npz"))
    if not files:
        raise FileNotFoundError(f"no trace store in {run}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if len(files) == 1:
        n = export_trajectory_csv(load_traces(files[0]), out)
        print(f"{out}: {n} rows")
        return 0
    for f in files:
        agent = f.stem.removeprefix("traces_")
        target = out.with_name(f"{out.stem}_{agent}{out.suffix or '.csv'}")
        n = export_trajectory_csv(load_traces(f), target)
        print(f"{target}: {n} rows")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="recoilrl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one policy variant")
    t.add_argument("--config")
    t.add_argument("--variant", choices=sorted(VARIANTS), required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate one checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config")
    e.add_argument("--episodes", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--workers", type=int)
    e.add_argument("--no-disturbance", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="Nominal / I / IT comparison under a shared schedule")
    c.add_argument("--nominal", required=True)
    c.add_argument("--i", required=True)
    c.add_argument("--it", required=True)
    c.add_argument("--config")
    c.add_argument("--seed", type=int)
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="history length x trigger duration grid")
    s.add_argument("--config")
    s.add_argument("--h", default="0,10,50")
    s.add_argument("--tt", default="0.1,0.5,1.0,2.0")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    x = sub.add_parser("export", help="write a run's traces as trajectory CSV")
    x.add_argument("--run", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - non-zero exit for any command error
        log.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
