"""Command-line interface.

Commands: synth-data, train, generate, evaluate, decompose,
inspect-distance. Exit codes: 0 success, 2 validation error, 3 numeric
failure. DUOMOTION_SEED provides the default seed; explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .config import RunConfig, config_from_dict, load_config
from .errors import ContractError, FormatError, NumericError
from .synth import SCENARIOS

ENV_SEED = "DUOMOTION_SEED"


def _default_seed() -> int:
    raw = os.environ.get(ENV_SEED)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"{ENV_SEED} must be an integer, got {raw!r}") from exc


def _load_cache(path: str | None):
    if path is None:
        return None
    from .text import load_cache

    return load_cache(path)


def _config_for_checkpoint(args) -> tuple[RunConfig, "object"]:
    """Resolve the config for a checkpoint: explicit file or embedded copy."""
    from .checkpoint import load_checkpoint

    ckpt = load_checkpoint(args.ckpt)
    if getattr(args, "config", None):
        config = load_config(args.config)
        if config.fingerprint() != ckpt.fingerprint and not getattr(args, "force", False):
            raise ValueError(
                f"checkpoint fingerprint {ckpt.fingerprint} does not match config "
                f"{config.fingerprint()}; pass --force to override"
            )
    else:
        embedded = ckpt.extra.get("config")
        if embedded is None:
            raise ValueError("checkpoint carries no config; pass --config")
        config = config_from_dict(embedded)
    return config, ckpt


def _cmd_synth_data(args) -> int:
    from .dataio import save_dataset
    from .synth import generate_corpus

    samples = generate_corpus(
        count=args.count,
        frame_count=args.frames,
        joint_count=args.joints,
        seed=args.seed,
        scenario=args.scenario,
        fps=args.fps,
    )
    save_dataset(args.out, samples)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .dataio import load_dataset
    from .training import train

    config = load_config(args.config) if args.config else RunConfig()
    dataset = load_dataset(args.data)
    result = train(
        config,
        dataset,
        out_dir=args.out,
        cache=_load_cache(args.cache),
        log_every=args.log_every,
    )
    print(f"trained {config.train.steps} steps; checkpoint at {result.checkpoint_path}")
    return 0


def _cmd_generate(args) -> int:
    from .pipeline import generate_motions, write_generation
    from .training import build_model

    if not args.prompt.strip():
        raise ValueError("prompt must be non-empty")
    config, ckpt = _config_for_checkpoint(args)
    model = build_model(config)
    model.load_state_dict(ckpt.model_state)
    model.eval()
    motions, record, profile = generate_motions(
        model, config, args.prompt, args.count, args.seed, cache=_load_cache(args.cache)
    )
    out = write_generation(args.out, motions, record, profile, args.seed, ckpt.fingerprint)
    print(f"wrote {len(motions)} motions to {out}")
    return 0


def _cmd_evaluate(args) -> int:
    from .dataio import load_dataset
    from .evaluator import load_evaluator, save_evaluator, train_toy_evaluator
    from .pipeline import ALL_METRICS, evaluate_model, write_report
    from .training import build_model

    config, ckpt = _config_for_checkpoint(args)
    model = build_model(config)
    model.load_state_dict(ckpt.model_state)
    model.eval()
    dataset = load_dataset(args.data)

    names = ALL_METRICS if args.metrics == "all" else tuple(args.metrics.split(","))
    evaluator = None
    if args.train_evaluator:
        evaluator = train_toy_evaluator(dataset, seed=args.seed)
        if args.evaluator:
            save_evaluator(args.evaluator, evaluator)
    elif args.evaluator:
        evaluator = load_evaluator(args.evaluator)

    report = evaluate_model(
        model,
        config,
        dataset,
        list(names),
        evaluator=evaluator,
        seed=args.seed,
        limit=args.limit,
    )
    if args.out:
        json_path, tsv_path = write_report(args.out, report)
        print(f"wrote {json_path} and {tsv_path}")
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_decompose(args) -> int:
    from .text import decompose_prompt

    record = decompose_prompt(args.prompt, _load_cache(args.cache))
    print(
        json.dumps(
            {
                "overall": record.overall,
                "person1": record.person1,
                "person2": record.person2,
                "source": record.source,
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def _cmd_inspect_distance(args) -> int:
    from .dataio import load_dataset
    from .pipeline import distance_inspection, write_inspection
    from .training import build_model

    dataset = load_dataset(args.data)
    model = None
    if args.ckpt:
        config, ckpt = _config_for_checkpoint(args)
        model = build_model(config)
        model.load_state_dict(ckpt.model_state)
        model.eval()
    rows = distance_inspection(dataset, args.k, model=model)
    if args.out:
        write_inspection(args.out, rows)
        print(f"wrote {args.out}")
    else:
        for row in rows:
            fields = [row["id"], ",".join(f"{w:.6f}" for w in row["gt_profile"])]
            if "predicted_profile" in row:
                fields.append(",".join(f"{w:.6f}" for w in row["predicted_profile"]))
            print("\t".join(fields))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duomotion", description="Dual-human text-to-motion diffusion toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    seed = _default_seed()

    p = sub.add_parser("synth-data", help="generate a synthetic dataset")
    p.add_argument("--scenario", choices=SCENARIOS + ("mixed",), default="mixed")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--joints", type=int, default=5)
    p.add_argument("--fps", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=seed)
    p.set_defaults(func=_cmd_synth_data)

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--config", default=None, help="YAML config (defaults used if omitted)")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None, help="prompt decomposition cache")
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("generate", help="sample motions for a prompt")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--cache", default=None)
    p.add_argument("--force", action="store_true", help="ignore fingerprint mismatch")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="score a checkpoint against a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--metrics", default="mpjpe,mpjie", help='comma list or "all"')
    p.add_argument("--evaluator", default=None, help="toy evaluator checkpoint")
    p.add_argument("--train-evaluator", action="store_true")
    p.add_argument("--out", default=None, help="report base path (.json/.tsv)")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("decompose", help="split an overall prompt per person")
    p.add_argument("--prompt", required=True)
    p.add_argument("--cache", default=None)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("inspect-distance", help="dump distance profiles per sample")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--force", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_inspect_distance)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FormatError, ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
