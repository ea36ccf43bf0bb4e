"""Command line entry point: ``run``, ``encode``, ``decode`` and ``gen-synth``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench, codec, data, synth
from .errors import ConfigError, DecodeFailure, ExperimentFailure, InvalidArgument
from .report import write_outputs

EXIT_OK = 0
EXIT_EXPERIMENT_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def _floats(text: str):
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def cmd_run(args) -> int:
    try:
        config = bench.load_config(args.config)
        config = bench.filter_config(config, args.only_dataset, args.only_model)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.out:
        config.output_dir = Path(args.out)
    if args.cache:
        config.cache_dir = Path(args.cache)
    try:
        report = bench.run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except ExperimentFailure as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        if getattr(exc, "report", None) is not None:
            write_outputs(exc.report, config.output_dir)
        return EXIT_EXPERIMENT_FAILURE
    paths = write_outputs(report, config.output_dir)
    print(paths["table_txt"].read_text(encoding="utf-8"), end="")
    print(f"wrote {paths['report']}")
    return EXIT_OK


def cmd_encode(args) -> int:
    values = _floats(args.values)
    cfg = codec.ScalingConfig(alpha=args.alpha, beta=args.beta, precision=args.precision)
    if args.identity:
        state = codec.ScalingState(0.0, 1.0, cfg)
    else:
        state = codec.fit_scaling(values, cfg)
    enc = codec.encode(values, state)
    print(enc.text)
    if args.show_state:
        print(f"offset={state.offset!r} scale={state.scale!r}", file=sys.stderr)
    return EXIT_OK


def cmd_decode(args) -> int:
    state = codec.ScalingState(args.offset, args.scale, codec.ScalingConfig(precision=args.precision))
    try:
        values = codec.decode(args.text, state, args.max_values)
    except DecodeFailure as exc:
        print(f"decode failure: {exc}", file=sys.stderr)
        return EXIT_EXPERIMENT_FAILURE
    print(",".join(f"{v:.17g}" for v in values))
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    spec = synth.SynthSpec(kind=args.kind, sigma=args.sigma, n_points=args.n,
                           t_start=args.t_start, t_end=args.t_end, seed=args.seed)
    path = data.write_csv(synth.generate(spec), args.out)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llmtime-bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--only-dataset")
    p.add_argument("--only-model")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--cache", help="completion cache directory (overrides the config)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("encode", help="serialise comma-separated values")
    p.add_argument("--values", required=True, help="e.g. '0.789,7.89,78.9'")
    p.add_argument("--alpha", type=float, default=0.99)
    p.add_argument("--beta", type=float, default=0.3)
    p.add_argument("--precision", type=int, default=3)
    p.add_argument("--identity", action="store_true", help="skip rescaling")
    p.add_argument("--show-state", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="parse digit text back to values")
    p.add_argument("--text", required=True)
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--precision", type=int, default=3)
    p.add_argument("--max-values", type=int, default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("gen-synth", help="write a synthetic series as CSV")
    p.add_argument("--kind", default="almost_periodic", choices=[k.value for k in synth.SignalKind])
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=synth.SynthSpec().t_end)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidArgument as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
