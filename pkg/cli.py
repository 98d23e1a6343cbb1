# cli.py
"""pulsetrace command line: synth, train, eval, infer, bench.

Exit codes: 0 success, 1 usage/config error, 2 data/format error, 3 numerical failure.
"""
import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Literal, Optional

import config

config.apply_thread_cap()

from pydantic import BaseModel, ConfigDict, Field, ValidationError  # noqa: E402

from exceptions import ConfigError, PulseTraceError  # noqa: E402

logger = logging.getLogger(__name__)

COMMANDS = ("synth", "train", "eval", "infer", "bench")


class CliConfig(BaseModel):
    """Merged settings of one invocation: config file first, then flags."""

    model_config = ConfigDict(extra="forbid")

    command: Literal["synth", "train", "eval", "infer", "bench"]
    out: str = "runs"
    seed: int = config.TRAINING_CONFIG["seed"]
    profile: Literal["full", "test"] = config.TRAINING_CONFIG["profile"]
    variant: Literal["framewise", "cgru"] = config.TRAINING_CONFIG["variant"]
    log_level: str = config.LOG_CONFIG["level"]
    log_dir: Optional[str] = None

    # synth
    count: int = Field(25, ge=0)
    length: int = Field(config.PHANTOM_CONFIG["training_length"], ge=1)
    vary_length: bool = False
    speckle_strength: float = Field(config.PHANTOM_CONFIG["speckle_strength"], ge=0)

    # train
    data: Optional[str] = None
    epochs: int = Field(config.TRAINING_CONFIG["epochs"], ge=1)
    learning_rate: float = Field(config.TRAINING_CONFIG["learning_rate"], ge=0)
    lam: float = Field(config.TRAINING_CONFIG["lambda"], ge=0)
    augment: bool = config.TRAINING_CONFIG["augment"]
    checkpoint_every: int = Field(config.TRAINING_CONFIG["checkpoint_every"], ge=0)

    # eval / infer / bench
    checkpoint: Optional[str] = None
    compare: Optional[str] = None
    sequence: Optional[str] = None
    prefetch: int = Field(0, ge=0)
    stream_length: int = Field(config.EVAL_CONFIG["bench_frames"], ge=1)
    warmup: int = Field(config.EVAL_CONFIG["bench_warmup"], ge=0)


def read_config_file(path: str) -> Dict[str, str]:
    """Parse UTF-8 ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values: Dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{number}: expected key=value, got {raw!r}")
        key = key.strip().replace("-", "_")
        if key in ("command", "config"):
            raise ConfigError(f"{path}:{number}: '{key}' cannot be set from a config file")
        values[key] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--profile", choices=config.PROFILES)
    common.add_argument("--out", help="output directory")
    common.add_argument("--log-level")
    common.add_argument("--log-dir")

    parser = argparse.ArgumentParser(prog=config.APP_NAME, description="Vessel diameter regression on ultrasound video")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[common], help="generate phantom sequences")
    synth.add_argument("--count", type=int)
    synth.add_argument("--length", type=int, help="fixed sequence length in frames")
    synth.add_argument("--vary-length", action="store_const", const=True,
                       help="sample lengths from the population range instead of --length")
    synth.add_argument("--speckle-strength", type=float)

    train = sub.add_parser("train", parents=[common], help="train a model")
    train.add_argument("--data", help="directory holding manifest.csv")
    train.add_argument("--variant", choices=config.VARIANTS)
    train.add_argument("--epochs", type=int)
    train.add_argument("--learning-rate", type=float)
    train.add_argument("--lam", type=float, help="CyclicLoss weight")
    train.add_argument("--augment", dest="augment", action="store_const", const=True)
    train.add_argument("--no-augment", dest="augment", action="store_const", const=False)
    train.add_argument("--checkpoint-every", type=int)

    evaluate = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    evaluate.add_argument("--data")
    evaluate.add_argument("--checkpoint")
    evaluate.add_argument("--compare", help="second checkpoint for a KS comparison")

    infer = sub.add_parser("infer", parents=[common], help="stream one sequence through a checkpoint")
    infer.add_argument("--checkpoint")
    infer.add_argument("--sequence", help=".usq file")
    infer.add_argument("--prefetch", type=int, help="bounded read-ahead queue size (0 reads inline)")

    bench = sub.add_parser("bench", parents=[common], help="measure streaming throughput")
    bench.add_argument("--checkpoint")
    bench.add_argument("--stream-length", type=int)
    bench.add_argument("--warmup", type=int)
    return parser


def resolve_config(argv: Optional[List[str]] = None) -> CliConfig:
    """Parse flags, merge them over the config file and validate the result."""
    args = build_parser().parse_args(argv)
    values: Dict[str, Any] = {}
    if args.config:
        values.update(read_config_file(args.config))
    flags = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    values.update(flags)
    try:
        return CliConfig(**values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid configuration: {problems}") from e


def _require(cfg: CliConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(f"'{cfg.command}' needs " + ", ".join(f"--{n.replace('_', '-')}" for n in missing))


def run(cfg: CliConfig) -> Any:
    from monitoring import log_manager
    from phantoms import PhantomRanges
    from runner import PulseTraceRunner
    from training import TrainConfig

    log_manager.configure(log_dir=cfg.log_dir, level=cfg.log_level)
    runner = PulseTraceRunner(out_dir=cfg.out, profile=cfg.profile, seed=cfg.seed)

    if cfg.command == "synth":
        length = None if cfg.vary_length else cfg.length
        ranges = PhantomRanges(length=length, speckle_strength=cfg.speckle_strength)
        return runner.synth(cfg.count, ranges)
    if cfg.command == "train":
        _require(cfg, "data")
        train_cfg = TrainConfig(epochs=cfg.epochs, learning_rate=cfg.learning_rate, lam=cfg.lam, seed=cfg.seed,
                                profile=cfg.profile, variant=cfg.variant, augment=cfg.augment,
                                checkpoint_every=cfg.checkpoint_every)
        return runner.train(cfg.data, train_cfg)
    if cfg.command == "eval":
        _require(cfg, "data", "checkpoint")
        return runner.evaluate(cfg.checkpoint, cfg.data, compare_path=cfg.compare)
    if cfg.command == "infer":
        _require(cfg, "checkpoint", "sequence")
        return runner.infer(cfg.checkpoint, cfg.sequence, prefetch=cfg.prefetch)
    report = runner.bench(cfg.checkpoint, stream_length=cfg.stream_length, warmup=cfg.warmup)
    print(json.dumps(report.summary()))
    return report


def main(argv: Optional[List[str]] = None) -> int:
    try:
        cfg = resolve_config(argv)
        run(cfg)
    except SystemExit as e:
        # argparse reports usage errors with status 2; usage errors are 1 here
        return 0 if e.code in (0, None) else 1
    except PulseTraceError as e:
        print(f"{config.APP_NAME}: error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"{config.APP_NAME}: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"{config.APP_NAME}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
