"""Command-line surface: invert, gaussianize, gradcheck, metrics.

Exit codes: 0 success, 1 check failure or unexpected error, 2 configuration
error, 3 convergence error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import ConfigError, ConvergenceError, GlayersError
from .gradcheck import GRADCHECK_IDS, run_gradcheck
from .gtns import read_gtns, write_gtns
from .invert import parse_config, run_inversion, write_report
from .metrics import psnr, ssim
from .partition import PatchPartition
from .pipeline import GaussianizeConfig, PipelineStage, diagnostics, gaussianity_gates


def _cmd_invert(args) -> int:
    with open(args.config) as fh:
        cfg = parse_config(fh.read())
    report = run_inversion(cfg)
    write_report(report, args.out, args.history)
    best = report["best"]
    print(
        f"best psnr {best['psnr']:.2f} dB, best ssim {best['ssim']:.4f}, "
        f"best loss {best['loss']:.6g} -> {args.out}"
    )
    return 0


def _parse_patch(text: str) -> tuple:
    try:
        return tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"bad patch spec {text!r}; expected e.g. 2x2 or 1x4x4") from None


def _cmd_gaussianize(args) -> int:
    v = read_gtns(args.infile)
    patch = _parse_patch(args.patch)
    if args.roll:
        part = PatchPartition.half_patch_roll(v.shape, patch)
    else:
        part = PatchPartition(v.shape, patch)
    cfg = GaussianizeConfig(
        temperature=args.temp,
        ica=not args.no_ica,
        yeo_johnson=not args.no_yj,
        lambert=not args.no_lambert,
        whiten=args.whiten,
    )
    z = PipelineStage(part, cfg).apply(v)
    write_gtns(args.out, z)
    diag = diagnostics(z, part)
    payload = diag.flat_dict()
    payload.update({f"gate_{k}": v for k, v in gaussianity_gates(diag, args.temp).items()})
    print(json.dumps(payload))
    return 0


def _cmd_gradcheck(args) -> int:
    rep = run_gradcheck(args.id, args.seed)
    print(rep.table)
    if rep.kind == "slope":
        if rep.exact_to_roundoff:
            print(f"{args.id}: exact-to-roundoff [PASS]")
        else:
            print(f"{args.id}: slope {rep.slope:.3f} [{'PASS' if rep.passed else 'FAIL'}]")
    else:
        print(
            f"{args.id}: max adjoint-vs-fd rel err {rep.max_rel_err:.2e} "
            f"[{'PASS' if rep.passed else 'FAIL'}]"
        )
    return 0 if rep.passed else 1


def _cmd_metrics(args) -> int:
    ref = read_gtns(args.ref)
    test = read_gtns(args.test)
    print(json.dumps({"psnr": psnr(ref, test, args.peak), "ssim": ssim(ref, test, args.peak)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glayers",
        description="Gaussianization-layer toolkit: inversion runs, latent "
        "Gaussianization, gradient checks, image metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invert", help="run a multi-start inversion from a config file")
    p.add_argument("--config", required=True, help="key = value run configuration")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--history", default=None, help="optional loss-history CSV path")
    p.set_defaults(func=_cmd_invert)

    p = sub.add_parser("gaussianize", help="apply the Gaussianization pipeline to a tensor")
    p.add_argument("--in", dest="infile", required=True, help="input GTNS tensor")
    p.add_argument("--out", required=True, help="output GTNS tensor")
    p.add_argument("--patch", required=True, help="patch dims, e.g. 1x4x4")
    p.add_argument("--temp", type=float, default=1.0, help="temperature gamma")
    p.add_argument("--no-ica", action="store_true")
    p.add_argument("--no-yj", action="store_true")
    p.add_argument("--no-lambert", action="store_true")
    p.add_argument("--whiten", choices=("zca", "iterative"), default="zca")
    p.add_argument("--roll", action="store_true", help="shift patches by half a patch")
    p.set_defaults(func=_cmd_gaussianize)

    p = sub.add_parser("gradcheck", help="gradient convergence test for a stage or objective")
    p.add_argument("--id", required=True, choices=GRADCHECK_IDS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("metrics", help="PSNR/SSIM between two tensors")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--peak", type=float, default=2.0)
    p.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 3
    except (GlayersError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
