"""Command-line front end: ``ocdl train`` and ``ocdl eval``.

Exit codes: 0 on success, 2 on configuration/input errors, 3 on numerical
failure during a solve.
"""

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from .cbpdn import CbpdnConfig
from .errors import NumericalFailureError, OcdlError
from .io import (
    load_dictionary,
    load_image,
    read_manifest,
    save_dictionary,
    write_log,
    write_manifest,
)
from .learner import FistaConfig
from .pipeline import RegionSampling, TrainConfig, evaluate_dictionary, online_train

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parse_p(text):
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid forgetting exponent {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ocdl",
        description="Online convolutional dictionary learning on streams of PGM images.",
    )
    parser.add_argument("--version", action="version", version=f"ocdl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="learn a dictionary from a directory of images")
    train.add_argument("--train-dir", required=True, help="directory of P5 PGM images")
    train.add_argument("--test-dir", help="held-out images for periodic evaluation")
    train.add_argument("--filters", type=int, default=32, metavar="M")
    train.add_argument("--filter-size", type=int, default=8, metavar="L")
    train.add_argument("--lambda", dest="lmbda", type=float, default=0.1)
    train.add_argument("--p", type=_parse_p, default=None,
                       help="forgetting exponent; accepts 'inf' "
                            "(default: 5, or 40 in region mode)")
    train.add_argument("--regions", type=int, metavar="SIZE",
                       help="train on SIZExSIZE regions tiled from each image")
    train.add_argument("--steps", type=int, required=True, metavar="T")
    train.add_argument("--eval-every", type=int, default=5)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--preprocess", choices=("mean", "none"), default="mean")
    train.add_argument("--dict-out", required=True)
    train.add_argument("--log-out", required=True)

    ev = sub.add_parser("eval", help="sum the sparse coding functional over a test set")
    ev.add_argument("--dict", dest="dict_path", required=True)
    ev.add_argument("--test-dir", required=True)
    ev.add_argument("--lambda", dest="lmbda", type=float, default=0.1)
    return parser


def _pgm_paths(directory):
    root = Path(directory)
    if not root.is_dir():
        raise OcdlError(f"not a directory: {directory}")
    paths = sorted(root.glob("*.pgm"))
    if not paths:
        raise OcdlError(f"no .pgm files in {directory}")
    return paths


def _cycled_images(paths, limit):
    """Yield images from the path list, cycling until ``limit`` loads."""
    served = 0
    while served < limit:
        for path in paths:
            if served >= limit:
                return
            yield load_image(path)
            served += 1


def _run_train(args):
    train_paths = _pgm_paths(args.train_dir)
    test_set = None
    if args.test_dir is not None:
        test_set = [load_image(p) for p in _pgm_paths(args.test_dir)]

    regions = None
    if args.regions is not None:
        regions = RegionSampling(args.regions, args.regions)
    p = args.p if args.p is not None else (40.0 if regions is not None else 5.0)

    cfg = TrainConfig(
        steps=args.steps,
        filters=args.filters,
        filter_shape=(args.filter_size, args.filter_size),
        lmbda=args.lmbda,
        p=p,
        regions=regions,
        eval_every=args.eval_every,
        seed=args.seed,
        preprocess=args.preprocess,
    )
    # Every image yields at least one sample, so `steps` image loads always
    # suffice to reach `steps` training samples.
    dictionary, records = online_train(_cycled_images(train_paths, cfg.steps), cfg,
                                       test_set)

    save_dictionary(dictionary, args.dict_out)
    write_log(records, args.log_out)
    manifest = {
        "tool": "ocdl",
        "tool_version": __version__,
        "command": "train",
        "train_dir": args.train_dir,
        "test_dir": args.test_dir if args.test_dir is not None else "",
        "steps": cfg.steps,
        "filters": cfg.filters,
        "filter_size": args.filter_size,
        "lambda": cfg.lmbda,
        "p": cfg.p,
        "regions": args.regions if args.regions is not None else "",
        "eval_every": cfg.eval_every,
        "seed": cfg.seed,
        "preprocess": cfg.preprocess,
        "cbpdn_rho": cfg.effective_cbpdn().effective_rho,
        "cbpdn_max_iter": cfg.effective_cbpdn().max_iter,
        "cbpdn_rel_tol": cfg.effective_cbpdn().rel_tol,
        "cbpdn_abs_tol": cfg.effective_cbpdn().abs_tol,
        "fista_max_iter": cfg.fista.max_iter,
        "fista_rel_tol": cfg.fista.rel_tol,
        "fista_power_iters": cfg.fista.power_iters,
        "dict_out": args.dict_out,
        "log_out": args.log_out,
    }
    write_manifest(manifest, f"{args.dict_out}.manifest")
    return EXIT_OK


def _run_eval(args):
    dictionary = load_dictionary(args.dict_path)
    root = Path(args.test_dir)
    if not root.is_dir():
        raise OcdlError(f"not a directory: {args.test_dir}")
    paths = sorted(root.glob("*.pgm"))
    if not paths:
        print(f"warning: no .pgm files in {args.test_dir}", file=sys.stderr)
        print(format(0.0, ".12g"))
        return EXIT_OK
    test_set = [load_image(p) for p in paths]
    cfg = CbpdnConfig(lmbda=args.lmbda)
    value = evaluate_dictionary(dictionary, test_set, args.lmbda, cfg)
    print(format(value, ".12g"))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _run_train(args)
        return _run_eval(args)
    except NumericalFailureError as err:
        print(f"ocdl: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OcdlError, OSError) as err:
        print(f"ocdl: error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
