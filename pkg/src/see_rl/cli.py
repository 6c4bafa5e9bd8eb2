"""Command-line entry point for single training runs."""

from __future__ import annotations

import argparse
import json
import sys

from . import envs
from .harness import ConfigError, TrainConfig, train
from .see import AblationMode

ABLATIONS = ("no-conditioning", "no-max-update", "no-mixing")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="see-rl",
        description="Train SAC/TD3 with optional error-seeking exploration.")
    p.add_argument("--algo", choices=["sac", "td3"], default="sac")
    see = p.add_mutually_exclusive_group()
    see.add_argument("--see", dest="see_enabled", action="store_true", default=True)
    see.add_argument("--no-see", dest="see_enabled", action="store_false")
    p.add_argument("--env", choices=envs.env_ids(), default="pendulum")
    p.add_argument("--reward", choices=list(envs.VARIANTS), default="dense")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--eval-every", type=int, default=1000)
    p.add_argument("--eval-episodes", type=int, default=10)
    p.add_argument("--ablation", action="append", choices=list(ABLATIONS),
                   default=[], help="repeatable ablation switch")
    p.add_argument("--hidden-dims", type=str, default="400,300",
                   help="comma-separated hidden layer sizes")
    p.add_argument("--dtype", choices=["float64", "float32"], default="float64")
    p.add_argument("--out", type=str, default=None,
                   help="output directory for metrics and checkpoint")
    p.add_argument("--config", type=str, default=None,
                   help="key = value file; command-line flags override it")
    return p


def parse_config_file(path: str) -> dict:
    """Read a flat 'key = value' text file into override strings."""
    overrides = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            overrides[key.replace("-", "_")] = value
    return overrides


def config_from_args(args) -> TrainConfig:
    hidden = tuple(int(x) for x in args.hidden_dims.split(",") if x.strip())
    if not hidden:
        raise ConfigError("--hidden-dims must list at least one layer size")
    ablation = AblationMode(
        no_conditioning="no-conditioning" in args.ablation,
        no_max_update="no-max-update" in args.ablation,
        no_mixing="no-mixing" in args.ablation)
    return TrainConfig(
        algo=args.algo, see_enabled=args.see_enabled, env_id=args.env,
        variant=args.reward, seed=args.seed, total_steps=args.steps,
        warm_up_steps=args.warmup, eval_every=args.eval_every,
        eval_episodes=args.eval_episodes, hidden_dims=hidden,
        ablation=ablation, dtype=args.dtype, out_dir=args.out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        overrides = parse_config_file(args.config)
        base = vars(args)
        for key, value in overrides.items():
            if key not in base:
                parser.error(f"unknown config key {key!r}")
            current = base[key]
            if isinstance(current, bool):
                base[key] = value.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                base[key] = int(value)
            elif key == "ablation":
                base[key] = [v.strip() for v in value.split(",") if v.strip()]
            else:
                base[key] = value
    try:
        config = config_from_args(args)
    except ConfigError as exc:
        parser.error(str(exc))
    print(json.dumps(config.to_dict(), indent=2, sort_keys=True))
    try:
        final = train(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"final step {final.step}: eval return "
          f"{final.eval_return_mean:.3f} +- {final.eval_return_stderr:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
