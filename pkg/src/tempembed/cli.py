"""Command-line entry point.

Exit status: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from tempembed import __version__
from tempembed.errors import ConfigError, TempEmbedError
from tempembed.pipeline import (
    build_config,
    parse_config_text,
    run_evaluate,
    run_pipeline,
    run_snapshots,
    run_train,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_common(p):
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--out", help="run directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_snapshot_flags(p):
    p.add_argument("--edges", help="edge list: 'src dst timestamp' per line")
    p.add_argument("--directed", type=_bool, metavar="BOOL", help="treat edges as directed (default false)")
    p.add_argument("--symmetrize", type=_bool, metavar="BOOL", help="symmetrize directed input (default true)")
    p.add_argument("--granularity", help="day | week | month | index | count:K (default count:T)")
    p.add_argument("--snapshots", type=int, metavar="T", help="number of equal-count snapshots (default 10)")


def _add_train_flags(p):
    p.add_argument("--dim", type=int, help="embedding size (default min(128, N/2))")
    p.add_argument("--layers", type=int, help="convolution layers (default 3)")
    p.add_argument("--tau", type=float, help="decay scale in snapshots (default 1.0)")
    p.add_argument("--cell", choices=("gru", "simple"), help="recurrent cell (default gru)")
    p.add_argument("--hidden", type=int, help="recurrent state size (default = dim)")
    p.add_argument("--head-hidden", type=int, help="hidden units in the link head; 0 = plain logistic (default = hidden)")
    p.add_argument("--epochs", type=int, help="default 100")
    p.add_argument("--batch", type=int, help="mini-batch size (default 512)")
    p.add_argument("--lr", type=float, help="Adam step size (default 1e-3)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--train-fraction", type=float, help="share of edges before the pivot (default 0.7)")
    p.add_argument("--align-direction", choices=("q", "qt"), help="right-multiply by Q or Q^T (default q)")
    p.add_argument("--align-reference", choices=("aligned", "raw"), help="compare against aligned or raw predecessor")
    p.add_argument("--scalar-decay", type=_bool, metavar="BOOL", help="one decay factor per snapshot (default false)")
    p.add_argument("--ablation", choices=("none", "static"), help="'static' trains on the last static snapshot only")
    p.add_argument("--figures", type=_bool, metavar="BOOL", help="render PNG figures (default true)")


def _add_eval_flags(p):
    p.add_argument("--scorer", choices=("model", "random", "oracle"), help="default model")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tempembed", description="Temporal node embeddings for link prediction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("snapshots", help="parse an edge list and write snapshots.json")
    _add_common(p)
    _add_snapshot_flags(p)

    p = sub.add_parser("train", help="embed, align and train; writes checkpoint and manifest")
    _add_common(p)
    p.add_argument("--snapshots-file", help="defaults to OUT/snapshots.json")
    _add_train_flags(p)

    p = sub.add_parser("evaluate", help="score the test split and write report.json")
    _add_common(p)
    _add_eval_flags(p)
    p.add_argument("--figures", type=_bool, metavar="BOOL", help="render PNG figures (default true)")

    p = sub.add_parser("pipeline", help="snapshots + train + evaluate in one run")
    _add_common(p)
    _add_snapshot_flags(p)
    _add_train_flags(p)
    _add_eval_flags(p)

    p = sub.add_parser("synth", help="write a planted-partition temporal edge list")
    p.add_argument("--out", required=True, help="edge list path to write")
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--snapshots", type=int, default=10)
    p.add_argument("--communities", type=int, default=2)
    p.add_argument("--p-in", type=float, default=0.2)
    p.add_argument("--p-out", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    return parser


_NOT_CONFIG = {"command", "config", "verbose", "snapshots_file"}
_REQUIRED = {"snapshots": ("edges", "out"), "train": ("out",), "evaluate": ("out",), "pipeline": ("edges", "out")}


def _resolve(args):
    file_values = {}
    if args.config:
        file_values = parse_config_text(Path(args.config).read_text())
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    return build_config(file_values, overrides, required=_REQUIRED[args.command])


def _synth(args) -> int:
    from tempembed.evaluation import generate_synthetic
    from tempembed.graph_store import format_edge_list

    g = generate_synthetic(args.nodes, args.snapshots, args.communities, args.p_in, args.p_out, args.seed)
    Path(args.out).write_text(format_edge_list(g))
    print(json.dumps(g.stats()))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "synth":
            return _synth(args)
        cfg = _resolve(args)
        if args.command == "snapshots":
            path = run_snapshots(cfg)
            print(json.dumps(json.loads(path.read_text())["stats"]))
        elif args.command == "train":
            run_train(cfg, args.snapshots_file)
        elif args.command == "evaluate":
            print(json.dumps(run_evaluate(cfg), indent=2))
        else:
            print(json.dumps(run_pipeline(cfg), indent=2))
    except ConfigError as exc:
        print(f"tempembed: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TempEmbedError as exc:
        print(f"tempembed: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"tempembed: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
