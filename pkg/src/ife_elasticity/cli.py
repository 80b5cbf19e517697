"""Command-line convergence studies for the elliptic-interface benchmark."""

from __future__ import annotations

import argparse
import sys

from .convergence import ConvergenceConfig, ConvergenceRecord, run_convergence
from .errors import IFEError
from .exact import DEFAULT_AXIS

_FLOAT_KEYS = {"lambda_minus", "lambda_plus", "mu_minus", "mu_plus", "a", "b", "alpha1", "alpha2", "rel_tol"}
_INT_KEYS = {"n_start", "levels", "quad_subcells"}
_STR_KEYS = {"space", "mode", "out", "format", "interface", "F"}
_BOOL_KEYS = {"allow_large"}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` assignments, one per line or separated by ``;``.

    ``#`` starts a comment; dashes in keys become underscores.
    """
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for item in line.split(";"):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise ValueError(f"config line {lineno}: expected key = value, got {item!r}")
            key, value = (s.strip() for s in item.split("=", 1))
            key = key.replace("-", "_")
            if key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _INT_KEYS:
                out[key] = int(value)
            elif key in _BOOL_KEYS:
                out[key] = value.lower() in ("1", "true", "yes", "on")
            elif key in _STR_KEYS:
                out[key] = value
            else:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ife-elasticity",
        description="IFE convergence study for planar elasticity with an elliptic interface.",
    )
    p.add_argument("--space", default="bilinear", help="linear, bilinear or rotated-q1")
    p.add_argument("--mode", default="interp", choices=["interp", "solve"])
    p.add_argument("--n-start", type=int, default=10)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--lambda-minus", type=float, default=1.0)
    p.add_argument("--lambda-plus", type=float, default=5.0)
    p.add_argument("--mu-minus", type=float, default=2.0)
    p.add_argument("--mu-plus", type=float, default=10.0)
    p.add_argument("--a", type=float, default=DEFAULT_AXIS, help="ellipse semi-axis along x")
    p.add_argument("--b", type=float, default=DEFAULT_AXIS, help="ellipse semi-axis along y")
    p.add_argument("--alpha1", type=float, default=5.0)
    p.add_argument("--alpha2", type=float, default=7.0)
    p.add_argument("--quad-subcells", type=int, default=16)
    p.add_argument("--rel-tol", type=float, default=1e-11, help="CG relative residual")
    p.add_argument("--F", default=None, choices=[None, "midpoint"], help="override the traction-jump point")
    p.add_argument("--allow-large", action="store_true", help="permit meshes finer than n=160")
    p.add_argument("--out", default=None, help="write the table here instead of stdout")
    p.add_argument("--format", default="md", choices=["csv", "md"])
    p.add_argument("--config", default=None, help="file of key = value lines; its values override flags")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    opts = vars(args)
    if args.config:
        try:
            with open(args.config) as fh:
                overrides = parse_config_text(fh.read())
        except (OSError, ValueError) as exc:
            print(f"error [config]: {exc}", file=sys.stderr)
            return 2
        interface = overrides.pop("interface", "ellipse").lower()
        if interface not in ("ellipse", "circle"):
            print(f"error [config]: interface {interface!r} is not in the benchmark catalog", file=sys.stderr)
            return 2
        opts.update(overrides)

    try:
        config = ConvergenceConfig(
            space=opts["space"],
            mode=opts["mode"],
            n_start=opts["n_start"],
            levels=opts["levels"],
            lambda_minus=opts["lambda_minus"],
            lambda_plus=opts["lambda_plus"],
            mu_minus=opts["mu_minus"],
            mu_plus=opts["mu_plus"],
            a=opts["a"],
            b=opts["b"],
            alpha1=opts["alpha1"],
            alpha2=opts["alpha2"],
            quad_subcells=opts["quad_subcells"],
            rel_tol=opts["rel_tol"],
            F=opts["F"],
            allow_large=opts["allow_large"],
        )
    except ValueError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2

    def progress(row):
        if not opts["quiet"]:
            print(
                f"n={row.n:5d}  dofs={row.n_dofs:7d}  interface elements={row.n_interface:5d}  "
                f"L2={row.L2:.4e}  H1={row.H1:.4e}  ({row.seconds:.1f}s)",
                file=sys.stderr,
            )

    try:
        record: ConvergenceRecord = run_convergence(config, progress)
    except IFEError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error [input]: {exc}", file=sys.stderr)
        return 2

    text = record.to_csv() if opts["format"] == "csv" else record.to_markdown()
    if opts["out"]:
        with open(opts["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
