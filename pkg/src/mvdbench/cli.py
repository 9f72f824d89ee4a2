"""Command-line entry point: ``mvdbench {estimate,eval,viewselect,sparsify,augstats,synth}``.

Every shared flag can also be set through an environment variable named
``MVDBENCH_<FLAG>`` (for example ``MVDBENCH_HYPS=96``); an explicit flag wins.
"""
from __future__ import annotations

import argparse
import os
import sys

ENV_PREFIX = "MVDBENCH_"


def _env(name: str, default):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def _add_manifest_flag(p: argparse.ArgumentParser) -> None:
    default = _env("manifest", None)
    p.add_argument("--manifest", required=default is None, default=default)


def _add_sweep_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--range", default=_env("range", "default"),
                   help="gt | default (0.2-100 m) | LO:HI in meters")
    p.add_argument("--fusion", choices=("average", "weighted"), default=_env("fusion", "weighted"))
    p.add_argument("--hyps", type=int, default=int(_env("hyps", 64)), help="number of depth hypotheses")
    p.add_argument("--patch", type=int, default=int(_env("patch", 2)), help="ZNCC patch radius")


def _add_align_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--align", default=_env("align", "none"), help="none | median | scalar=S")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=int(_env("threads", 1)),
                        help="threads for the compiled kernels (results do not depend on it)")
    common.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    parser = argparse.ArgumentParser(prog="mvdbench", description="Multi-view depth estimation and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="estimate inverse depth and uncertainty for every sample")
    _add_manifest_flag(p)
    p.add_argument("--out", required=True)
    _add_sweep_flags(p)

    p = sub.add_parser("eval", parents=[common], help="evaluate predictions against ground truth")
    _add_manifest_flag(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--range", default=_env("range", "default"), help="recorded in the report only")
    p.add_argument("--with-runtime", action="store_true",
                   help="copy wall-clock timings into the report (makes it non-reproducible)")
    _add_align_flag(p)

    p = sub.add_parser("viewselect", parents=[common], help="quasi-optimal source-view selection")
    _add_manifest_flag(p)
    p.add_argument("--out", required=True)
    _add_sweep_flags(p)
    _add_align_flag(p)

    p = sub.add_parser("sparsify", parents=[common], help="sparsification curves and AUSE")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest")
    src.add_argument("--input", help="CSV with columns error,uncertainty")
    p.add_argument("--predictions", help="prediction directory (with --manifest)")
    p.add_argument("--out", required=True)
    _add_align_flag(p)

    p = sub.add_parser("augstats", parents=[common], help="run the scale-augmentation loop and dump its histograms")
    p.add_argument("--manifest", help="take ground truth from here instead of random depth maps")
    p.add_argument("--iterations", type=int, default=10000)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", parents=[common], help="render synthetic multi-view samples and a manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=3)
    p.add_argument("--views", type=int, default=2, help="other views per sample")
    p.add_argument("--size", type=int, default=96)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if "numba" not in sys.modules:
        # numba fixes its pool size at import; allow the requested count
        cur = int(os.environ.get("NUMBA_NUM_THREADS", os.cpu_count() or 1))
        os.environ["NUMBA_NUM_THREADS"] = str(max(cur, args.threads))
    from . import commands

    return commands.run(args)


if __name__ == "__main__":
    sys.exit(main())
