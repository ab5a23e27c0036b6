#!/usr/bin/env python3
import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, NoReturn

import numpy as np
import pandas as pd

from .codec import Bitstream, entropy_decode, entropy_encode
from .config import CoefficientMode, Config, load_config
from .count_model import Alphabet, Sequence
from .db import ResultsDatabase
from .exceptions import BudgetExceededError, MarkovLossyError
from .experiments import encode_with_mode, run_fig1, run_fig3, run_rd_curve, run_ziv_scan
from .io import SymbolFormat, read_symbols, write_csv_with_header, write_symbols

# Configure logging
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_BUDGET = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1"""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}"
        ) from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--debug", action="store_true", help="Show debug logging")
    common.add_argument(
        "--data-dir", type=Path, default=Path("data"), help="Directory for database storage"
    )
    common.add_argument(
        "--config",
        type=Path,
        help="Config file: JSON, or flat key=value (defaults to data-dir/config.json)",
        default=None,
        required=False,
    )
    common.add_argument("--alpha", type=float, help="Slope multiplying the distortion")
    common.add_argument("--alphas", type=_float_list, help="Comma-separated slope grid")
    common.add_argument("--k", type=int, help="Context order")
    common.add_argument("--k1", type=int, help="Block length for program mode")
    common.add_argument("--mode", choices=[m.value for m in CoefficientMode])
    common.add_argument("--seed", type=int, help="Root seed")
    common.add_argument("--reps", type=int, help="Replications per slope")
    common.add_argument("--q", type=float, help="Flip probability of the synthetic source")
    common.add_argument("--n", type=int, help="Length of synthetic sequences")
    common.add_argument("--format", choices=[f.value for f in SymbolFormat])
    common.add_argument("--workers", type=int, help="Concurrent experiment cells")
    common.add_argument("--out", type=Path, help="Output file or directory")

    parser = _Parser(description="Fixed-slope lossy compression of Markov sources")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    encode = commands.add_parser("encode", parents=[common], help="Encode a symbol file")
    encode.add_argument("input", type=Path)
    encode.add_argument("--metrics", type=Path, help="CSV to append the metrics row to")

    decode = commands.add_parser("decode", parents=[common], help="Decode a bitstream")
    decode.add_argument("input", type=Path)

    commands.add_parser("fig1", parents=[common], help="Encoder scatter against R(D)")
    commands.add_parser("fig3", parents=[common], help="Viterbi against annealing")
    commands.add_parser("ziv-scan", parents=[common], help="LZ78 excess over H_k")
    commands.add_parser("rd-curve", parents=[common], help="Reference curve CSV")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    fig3 = args.command == "fig3"
    reps_key = "experiment.fig3_reps" if fig3 else "experiment.reps"
    mode_key = "experiment.fig3_mode" if fig3 else "encoder.mode"
    return {
        "encoder.alpha": args.alpha,
        "experiment.alphas": args.alphas,
        "encoder.k": args.k,
        "encoder.k1": args.k1,
        mode_key: args.mode,
        "source.seed": args.seed,
        reps_key: args.reps,
        "source.q": args.q,
        "source.n": args.n,
        "encoder.symbol_format": args.format,
        "experiment.workers": args.workers,
    }


def cmd_encode(args: argparse.Namespace, config: Config) -> Dict[str, Any]:
    """Encode args.input, write the bitstream and report the metrics row"""
    fmt = config.encoder.symbol_format
    symbols = read_symbols(args.input, fmt)
    if symbols.size == 0:
        raise OSError(f"{args.input} holds no symbols")
    x = Sequence(symbols, Alphabet(max(2, int(symbols.max()) + 1)))
    result = encode_with_mode(x, config.encoder.alpha, config.encoder.k, config.encoder)
    stream = entropy_encode(result.reconstruction, result.k)

    out = args.out or args.input.with_suffix(".mlzc")
    stream.write(out)
    row = {
        "n": result.n,
        "k": result.k,
        "alpha": result.alpha,
        "distortion": result.true.distortion_part,
        "entropy": result.true.entropy_part,
        "true_cost": result.true.total,
        "bits_per_symbol": stream.payload_bits / result.n,
        "wall_clock": result.wall_clock,
    }
    print(" ".join(f"{key}={value}" for key, value in row.items()))
    if args.metrics:
        write_csv_with_header(
            pd.DataFrame([row]),
            args.metrics,
            {"kind": "encode_metrics", "mode": config.encoder.mode.value},
            append=True,
        )
    logger.info(f"Wrote {out} ({len(stream.to_bytes())} bytes)")
    return row


def cmd_decode(args: argparse.Namespace, config: Config) -> Sequence:
    y = entropy_decode(Bitstream.read(args.input))
    out = args.out or args.input.with_suffix(".dec")
    write_symbols(out, np.asarray(y.symbols), config.encoder.symbol_format)
    logger.info(f"Decoded {y.n} symbols to {out}")
    return y


def _run_experiment(args: argparse.Namespace, config: Config) -> None:
    out_dir = args.out or config.data_dir / "results"
    if args.command == "ziv-scan":
        paths = run_ziv_scan(config, out_dir).paths
    elif args.command == "rd-curve":
        paths = run_rd_curve(config, out_dir).paths
    else:
        runner = run_fig1 if args.command == "fig1" else run_fig3
        with ResultsDatabase(config.db_path) as db:
            paths = asyncio.run(runner(config, out_dir, db)).paths
    logger.info(f"{args.command} completed: {', '.join(str(p) for p in paths)}")


def main(argv: List[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        config = load_config(args.data_dir, args.config, _overrides(args))
        if args.command == "encode":
            cmd_encode(args, config)
        elif args.command == "decode":
            cmd_decode(args, config)
        else:
            _run_experiment(args, config)
    except BudgetExceededError as e:
        logger.error(f"Budget exceeded: {str(e)}", exc_info=True)
        return EXIT_BUDGET
    except OSError as e:
        logger.error(f"I/O error: {str(e)}", exc_info=True)
        return EXIT_IO
    except (MarkovLossyError, ValueError) as e:
        logger.error(f"Error during {args.command}: {str(e)}", exc_info=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
