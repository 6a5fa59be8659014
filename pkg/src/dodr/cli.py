"""Command line: ``dodr train | sweep | graph-dump``.

Exit codes: 0 success, 1 run failure, 2 usage or I/O error.
"""
import argparse
import logging
import sys

from .errors import DataFormatError, InvalidInputError, TrainingDivergedError
from .experiment import (
    ABLATIONS,
    ConfigError,
    ExperimentConfig,
    dump_graph,
    load_config,
    run_experiment,
    run_sweep,
)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _int_list(text):
    if not text.strip():
        raise argparse.ArgumentTypeError("empty list")
    return [int(v) for v in text.split(",")]


def _float_list(text):
    if not text.strip():
        raise argparse.ArgumentTypeError("empty list")
    return [float(v) for v in text.split(",")]


def _common(parser):
    parser.add_argument("--config", help="JSON config file (a result.json also works)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--lambda", dest="lam", type=float)
    parser.add_argument("--k", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--mode", choices=ABLATIONS)
    parser.add_argument("--data", help="'synth' or 'csv:PATH'")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--sigma-rank", type=int)
    parser.add_argument("--architecture", choices=("linear", "mlp1"))
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dodr",
        description="Directed ordinal diffusion regularization experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model and evaluate it")
    _common(p_train)

    p_sweep = sub.add_parser("sweep", help="grid over lambda / k / batch size")
    _common(p_sweep)
    p_sweep.add_argument("--lambdas", type=_float_list)
    p_sweep.add_argument("--ks", type=_int_list)
    p_sweep.add_argument("--batch-sizes", type=_int_list)
    p_sweep.add_argument("--seeds", type=_int_list, help="default: seed, seed+1, seed+2")
    p_sweep.add_argument("--workers", type=int, default=1)

    p_dump = sub.add_parser("graph-dump", help="write graph matrices for chosen samples")
    _common(p_dump)
    p_dump.add_argument("--indices", type=_int_list, required=True,
                        help="comma-separated sample indices into the dataset")
    return parser


def resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    return config.replace(
        out=args.out,
        seed=args.seed,
        lam=args.lam,
        k=args.k,
        batch_size=args.batch_size,
        mode=args.mode,
        data=args.data,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        sigma_rank=args.sigma_rank,
        architecture=args.architecture,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = resolve_config(args)
        if args.command == "train":
            run = run_experiment(config)
            t = run["test"]
            print(f"selected epoch {run['selected_epoch']}: test qwk={t['qwk']:.4f} "
                  f"f1={t['macro_f1']:.4f} inversion={t['forward_inversion_rate']:.4f}")
        elif args.command == "sweep":
            summary = run_sweep(config, args.lambdas, args.ks, args.batch_sizes,
                                args.seeds, args.workers)
            print(f"{len(summary['rows'])} grid points, {len(summary['failures'])} failed runs")
            if summary["failures"]:
                return EXIT_FAILURE
        else:
            dump_graph(config, args.indices)
            print(f"graph matrices written to {config.out}")
    except (ConfigError, DataFormatError, OSError, TypeError) as exc:
        print(f"dodr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDivergedError, InvalidInputError) as exc:
        print(f"dodr: run failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
