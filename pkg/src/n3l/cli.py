"""Command-line entry point.

Exit codes: 0 success, 1 verify found violations, 2 solve stopped on budget,
64 usage error, 65 bad input data or checkpoint, 66 missing input, 74 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .grid import is_valid, parse_config, violation_count, write_config

EX_OK = 0
EX_INVALID = 1
EX_BUDGET = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66
EX_IOERR = 74



class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EX_USAGE)


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest:
    def __init__(self, command: str, config: dict, seeds: dict | None = None):
        self.record = {
            "command": command,
            "argv": sys.argv[1:],
            "config": config,
            "seeds": seeds or {},
            "versions": {
                "n3l": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
            "started": _now(),
            "finished": None,
            "outputs": [],
        }

    def output(self, path) -> None:
        self.record["outputs"].append(str(path))

    def write(self, path) -> None:
        self.record["finished"] = _now()
        try:
            with open(path, "w") as f:
                json.dump(self.record, f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            raise CliError(EX_IOERR, f"cannot write manifest {path}: {e}") from None


def _read_json(path) -> dict:
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise CliError(EX_NOINPUT, f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise CliError(EX_DATAERR, f"{path}:{e.lineno}: invalid JSON ({e.msg})") from None
    except OSError as e:
        raise CliError(EX_NOINPUT, f"cannot read {path}: {e}") from None
    if not isinstance(doc, dict):
        raise CliError(EX_DATAERR, f"{path}: expected a JSON object")
    return doc


def _read_grid(path):
    try:
        with open(path) as f:
            text = f.read()
    except FileNotFoundError:
        raise CliError(EX_NOINPUT, f"input file not found: {path}") from None
    except OSError as e:
        raise CliError(EX_NOINPUT, f"cannot read {path}: {e}") from None
    try:
        return parse_config(text)
    except ValueError as e:
        raise CliError(EX_DATAERR, f"{path}: {e}") from None


def _mkdir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(EX_IOERR, f"cannot create {path}: {e}") from None


# -- commands ----------------------------------------------------------------------------

def cmd_solve(args) -> int:
    from .exact import solve_exact

    if args.n < 1:
        raise CliError(EX_USAGE, "--n must be >= 1")
    out = Path(args.out or f"runs/solve-n{args.n}")
    _mkdir(out)
    manifest = RunManifest("solve", {"n": args.n, "budget_nodes": args.budget_nodes,
                                     "budget_secs": args.budget_secs,
                                     "symmetry_breaking": not args.no_symmetry})
    report = solve_exact(args.n, max_nodes=args.budget_nodes, max_seconds=args.budget_secs,
                         symmetry_breaking=not args.no_symmetry)
    proved = "true" if report.proved_optimal else "false"
    print(f"optimum={report.optimum} proved={proved}")
    print(f"nodes={report.nodes} wall_time_s={report.wall_time:.3f}")
    cert = out / "certificate.txt"
    try:
        write_config(report.certificate, cert,
                     comment=f"optimum={report.optimum} proved={proved}")
        (out / "report.txt").write_text(report.format())
    except OSError as e:
        raise CliError(EX_IOERR, f"cannot write results under {out}: {e}") from None
    manifest.output(cert)
    manifest.output(out / "report.txt")
    manifest.write(out / "manifest.json")
    print(f"certificate={cert}")
    return EX_OK if report.proved_optimal else EX_BUDGET


def cmd_greedy(args) -> int:
    from .greedy import generate_pool
    from .pool import write_configs

    if args.count < 1:
        raise CliError(EX_USAGE, "--count must be >= 1")
    if args.n < 1:
        raise CliError(EX_USAGE, "--n must be >= 1")
    path = Path(args.out or f"greedy_n{args.n}_s{args.seed}.jsonl")
    configs = generate_pool(args.n, args.count, args.seed, workers=args.workers)
    try:
        with open(path, "w") as f:
            write_configs(configs, f)
    except OSError as e:
        raise CliError(EX_IOERR, f"cannot write {path}: {e}") from None
    scores = Counter(len(c) for c in configs)
    for s in sorted(scores):
        print(f"score {s}: {scores[s]}")
    mean = sum(len(c) for c in configs) / len(configs)
    print(f"count={len(configs)} best={max(scores)} mean={mean:.3f} out={path}")
    manifest = RunManifest("greedy", {"n": args.n, "count": args.count}, {"seed": args.seed})
    manifest.output(path)
    manifest.write(path.with_name(path.name + ".manifest.json"))
    return EX_OK


def cmd_boost(args) -> int:
    from .boost import BoostConfig, BoostIOError, BoostRun, CheckpointLoadError

    if args.config is None and args.resume is None:
        raise CliError(EX_USAGE, "boost needs --config or --resume")
    raw = {}
    if args.config is not None:
        raw = _read_json(args.config)
    elif args.resume is not None:
        cfg_path = Path(args.resume) / "config.json"
        if not cfg_path.exists():
            raise CliError(EX_NOINPUT, f"no run to resume at {args.resume}")
        raw = _read_json(cfg_path)
    out = raw.pop("out", None)
    for key in ("n", "generations", "seed"):
        if getattr(args, key, None) is not None:
            raw[key] = getattr(args, key)
    try:
        cfg = BoostConfig.from_dict(raw)
    except (TypeError, ValueError) as e:
        raise CliError(EX_DATAERR, f"bad boost config: {e}") from None
    out_dir = Path(args.resume or args.out or out or f"runs/boost-n{cfg.n}-s{cfg.seed}")
    try:
        if args.resume is not None:
            run = BoostRun.resume(out_dir, cfg)
        else:
            run = BoostRun(cfg, out_dir)
            run.initialize()
    except CheckpointLoadError as e:
        raise CliError(EX_DATAERR, f"corrupted checkpoint: {e}") from None
    except OSError as e:
        raise CliError(EX_IOERR, str(e)) from None
    manifest = RunManifest("boost", cfg.to_dict(), {"seed": cfg.seed})
    for r in run.reports:
        print(json.dumps(r.to_dict(), sort_keys=True))
    try:
        while run.generation < cfg.generations:
            r = run.run_generation()
            print(json.dumps(r.to_dict(), sort_keys=True), flush=True)
    except BoostIOError as e:
        print(json.dumps(e.report.to_dict(), sort_keys=True))
        raise CliError(EX_IOERR, str(e)) from None
    best = run.pool.snapshot()[0]
    print(f"best={best.score}")
    manifest.output(out_dir)
    manifest.write(out_dir / "manifest.json")
    return EX_OK


_RL_EXTRA = {"seed", "out", "checkpoint", "policy", "episodes", "deterministic"}


def _rl_config(raw: dict):
    from .rl import PpoConfig

    ppo = {k: v for k, v in raw.items() if k not in _RL_EXTRA}
    try:
        return PpoConfig.from_dict(ppo)
    except (TypeError, ValueError) as e:
        raise CliError(EX_DATAERR, f"bad RL config: {e}") from None


def cmd_rl_train(args) -> int:
    from .rl import evaluate, save_policy, train_ppo

    raw = _read_json(args.config)
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    cfg = _rl_config(raw)
    out = Path(args.out or raw.get("out") or f"runs/rl-n{cfg.n}-s{seed}")
    _mkdir(out)
    manifest = RunManifest("rl-train", cfg.to_dict(), {"seed": seed})
    result = train_ppo(cfg, seed)
    metrics = evaluate(result.policy, cfg.n, raw.get("episodes", cfg.eval_episodes), seed=seed,
                       strict=cfg.strict)
    metrics["env_steps"] = result.steps
    try:
        result.write_log(out / "train_log.csv")
        save_policy(out / "best.ckpt", result.policy, cfg, seed)
        with open(out / "eval.json", "w") as f:
            json.dump(metrics, f, indent=2, sort_keys=True)
    except OSError as e:
        raise CliError(EX_IOERR, f"cannot write results under {out}: {e}") from None
    for name in ("train_log.csv", "best.ckpt", "eval.json"):
        manifest.output(out / name)
    manifest.write(out / "manifest.json")
    print(json.dumps(metrics, sort_keys=True))
    return EX_OK


def cmd_rl_eval(args) -> int:
    from .exact import solve_exact
    from .nn import CheckpointError
    from .rl import RandomPolicy, ScriptedPolicy, evaluate, load_policy

    raw = _read_json(args.config)
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    cfg = _rl_config(raw)
    kind = raw.get("policy", "checkpoint")
    checkpoint = args.checkpoint or raw.get("checkpoint")
    if kind == "oracle":
        policy = ScriptedPolicy(solve_exact(cfg.n).certificate)
    elif kind == "random":
        policy = RandomPolicy()
    elif kind == "checkpoint":
        if not checkpoint:
            raise CliError(EX_USAGE, "rl-eval needs a checkpoint (config key or --checkpoint)")
        if not Path(checkpoint).exists():
            raise CliError(EX_NOINPUT, f"checkpoint not found: {checkpoint}")
        try:
            policy, _ = load_policy(checkpoint, cfg)
        except (CheckpointError, KeyError, ValueError) as e:
            raise CliError(EX_DATAERR, f"checkpoint/config mismatch: {e}") from None
    else:
        raise CliError(EX_DATAERR, f"unknown policy kind {kind!r}")
    metrics = evaluate(policy, cfg.n, raw.get("episodes", cfg.eval_episodes), seed=seed,
                       deterministic=raw.get("deterministic", True), strict=cfg.strict)
    print(json.dumps(metrics, sort_keys=True))
    return EX_OK


def cmd_render(args) -> int:
    from .render import render_ascii, render_svg

    config = _read_grid(args.input)
    if args.format == "svg":
        text = render_svg(config, args.show_violations)
    else:
        text = render_ascii(config, args.show_violations)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as e:
            raise CliError(EX_IOERR, f"cannot write {args.out}: {e}") from None
        manifest = RunManifest("render", {"input": args.input, "format": args.format,
                                          "show_violations": args.show_violations})
        manifest.output(args.out)
        manifest.write(Path(args.out).with_name(Path(args.out).name + ".manifest.json"))
    else:
        sys.stdout.write(text)
    return EX_OK


def cmd_verify(args) -> int:
    config = _read_grid(args.input)
    v = violation_count(config)
    ok = is_valid(config)
    print(f"points={len(config)} violations={v} valid={'true' if ok else 'false'}")
    return EX_OK if ok else EX_INVALID


# -- parser --------------------------------------------------------------------------------

def build_parser() -> ArgumentParser:
    p = ArgumentParser(prog="n3l", description="No-three-in-line solvers and learners")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="worker threads for parallel phases (default: all cores)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="exact branch-and-bound")
    s.add_argument("--n", type=int, required=True)
    budget = s.add_mutually_exclusive_group()
    budget.add_argument("--budget-nodes", type=int)
    budget.add_argument("--budget-secs", type=float)
    s.add_argument("--no-symmetry", action="store_true", help="disable mirror symmetry breaking")
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("greedy", help="greedy saturation pool as JSON lines")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output .jsonl path")
    g.set_defaults(func=cmd_greedy)

    b = sub.add_parser("boost", help="PatternBoost loop")
    b.add_argument("--config")
    b.add_argument("--resume", metavar="DIR")
    b.add_argument("--out")
    b.add_argument("--n", type=int)
    b.add_argument("--generations", type=int)
    b.add_argument("--seed", type=int)
    b.set_defaults(func=cmd_boost)

    for name, func in (("rl-train", cmd_rl_train), ("rl-eval", cmd_rl_eval)):
        r = sub.add_parser(name, help="PPO " + name.split("-")[1])
        r.add_argument("--config", required=True)
        r.add_argument("--seed", type=int)
        if name == "rl-train":
            r.add_argument("--out")
        else:
            r.add_argument("--checkpoint")
        r.set_defaults(func=func)

    r = sub.add_parser("render", help="draw a configuration")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--format", choices=("ascii", "svg"), default="ascii")
    r.add_argument("--show-violations", action="store_true")
    r.add_argument("--out")
    r.set_defaults(func=cmd_render)

    v = sub.add_parser("verify", help="check a configuration")
    v.add_argument("--in", dest="input", required=True)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"n3l {args.command}: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
