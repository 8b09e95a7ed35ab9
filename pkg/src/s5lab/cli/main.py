"""``s5lab`` command-line entry point."""

import argparse
import logging
import sys

from s5lab.cli import commands
from s5lab.errors import S5Error


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def build_parser():
    parser = argparse.ArgumentParser(prog="s5lab", description="Diagonal state space layer toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run numerical verification suites")
    v.add_argument("--suite", action="append", choices=sorted(commands.SUITES),
                   help="suite to run (repeatable; default: all)")

    b = sub.add_parser("bench", help="time sequential scan, parallel scan and FFT convolution")
    b.add_argument("--lengths", type=_int_list, required=True)
    b.add_argument("--p", type=int, required=True, help="state size")
    b.add_argument("--h", type=int, required=True, help="feature count")
    b.add_argument("--workers", type=_int_list, default=[1])
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--no-conv", action="store_true", help="skip the convolution baseline")

    t = sub.add_parser("train", help="train a classifier from a config file")
    t.add_argument("--config", required=True)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--config", required=True)
    e.add_argument("--ckpt", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return commands.cmd_verify(args.suite)
        if args.command == "bench":
            return commands.cmd_bench(args.lengths, args.p, args.h, args.workers, args.repeats,
                                      args.seed, conv=not args.no_conv)
        if args.command == "train":
            return commands.cmd_train(args.config)
        return commands.cmd_eval(args.config, args.ckpt)
    except (S5Error, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
