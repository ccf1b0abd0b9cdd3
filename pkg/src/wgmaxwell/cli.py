"""Command-line driver: convergence tables, single solves and slice export.

Examples::

    wgmaxwell --case s1 --levels 1..4
    wgmaxwell --case s3 --levels 1..5 --variant lowest --format csv
    wgmaxwell --case s3 --level 4 --slice-z 0.3 --out slices/
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .cases import CASES, derive_case_data
from .mesh import build_mesh
from .verify import NORM_LABELS, NORMS, ErrorReport, convergence_study, export_slice, solve_case

log = logging.getLogger(__name__)

DEFAULT_LEVELS = (1, 5)


@dataclass
class RunConfig:
    cases: list[str]
    levels: list[int]
    k: int = 1
    variant: str = "full"
    path: str = "condensed"
    quad_order: int | None = None
    fmt: str = "text"
    slice_z: float | None = None
    slice_res: int = 64
    out: str | None = None
    nu: float = 1.0

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("order k must be at least 1")
        if not self.levels:
            raise ValueError("level range is empty")
        if self.levels != sorted(set(self.levels)):
            raise ValueError("levels must be ascending")
        if self.levels[0] < 1:
            raise ValueError("levels start at 1")
        if self.quad_order is not None and self.quad_order < 1:
            raise ValueError("quadrature order must be positive")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.slice_z is not None and not 0.0 < self.slice_z < 1.0:
            raise ValueError("slice plane must lie strictly inside (0, 1)")
        if self.slice_res < 1:
            raise ValueError("slice resolution must be positive")


def parse_levels(text: str) -> list[int]:
    """``"A..B"`` or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level range {text!r}; expected A..B") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad level range {text!r}; need 1 <= A <= B")
    return list(range(lo, hi + 1))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wgmaxwell",
        description="Weak Galerkin Maxwell solver: manufactured-solution convergence studies.",
    )
    ap.add_argument("--case", choices=sorted(CASES) + ["all"], default="all",
                    help="manufactured solution (default: all four)")
    lv = ap.add_mutually_exclusive_group()
    lv.add_argument("--levels", type=parse_levels, help="level range A..B (default 1..5)")
    lv.add_argument("--level", type=int, help="single level")
    ap.add_argument("--order", type=int, default=1, help="polynomial order k (default 1)")
    ap.add_argument("--variant", choices=("full", "lowest"), default="full",
                    help="scalar face space: full (degree k) or lowest (piecewise constants)")
    ap.add_argument("--path", choices=("condensed", "full"), default="condensed", help="solve path")
    ap.add_argument("--quad", type=int, default=None, help="Gauss points per direction (default k+3)")
    ap.add_argument("--format", dest="fmt", choices=("text", "csv", "json"), default="text")
    ap.add_argument("--slice-z", type=float, default=None,
                    help="export slice data on the plane z=Z at the last level")
    ap.add_argument("--slice-res", type=int, default=64, help="slice samples per side (default 64)")
    ap.add_argument("--out", default=None,
                    help="output file for the table, or directory for slice files")
    ap.add_argument("--nu", type=float, default=1.0, help="uniform nu (default 1)")
    ap.add_argument("--dump-mesh", type=int, metavar="LEVEL", default=None,
                    help="print the mesh of LEVEL as JSON and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.level is not None:
        levels = [args.level]
    elif args.levels is not None:
        levels = args.levels
    else:
        levels = list(range(DEFAULT_LEVELS[0], DEFAULT_LEVELS[1] + 1))
    cases = sorted(CASES) if args.case == "all" else [args.case]
    return RunConfig(cases=cases, levels=levels, k=args.order, variant=args.variant, path=args.path,
                     quad_order=args.quad, fmt=args.fmt, slice_z=args.slice_z, slice_res=args.slice_res,
                     out=args.out, nu=args.nu)


# ------------------------------------------------------------------ formatting

def _rate(r: float | None) -> str:
    return "-" if r is None else f"{r:.2f}"


def format_text(reports: list[ErrorReport]) -> str:
    buf = io.StringIO()
    for rep in reports:
        buf.write(f"case {rep.case}  k={rep.k}  variant={rep.variant}  path={rep.path}\n")
        head = ["level"] + [f"{NORM_LABELS[n]:>16s} {'r':>5s}" for n in NORMS]
        buf.write(f"{head[0]:>5s}  " + "  ".join(head[1:]) + "\n")
        rates = {n: rep.rates(n) for n in NORMS}
        for i, level in enumerate(rep.levels):
            cols = [f"{rep.norms[n][i]:16.3e} {_rate(rates[n][i]):>5s}" for n in NORMS]
            buf.write(f"{level:5d}  " + "  ".join(cols) + "\n")
        buf.write("\n")
    return buf.getvalue()


def format_csv(reports: list[ErrorReport]) -> str:
    cols = ["case", "k", "variant", "path", "level"] + list(NORMS) + [f"rate_{n}" for n in NORMS]
    lines = [",".join(cols)]
    for rep in reports:
        rates = {n: rep.rates(n) for n in NORMS}
        for i, level in enumerate(rep.levels):
            vals = [rep.case, str(rep.k), rep.variant, rep.path, str(level)]
            vals += [f"{rep.norms[n][i]:.6e}" for n in NORMS]
            vals += ["" if rates[n][i] is None else f"{rates[n][i]:.4f}" for n in NORMS]
            lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def format_json(reports: list[ErrorReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


FORMATTERS = {"text": format_text, "csv": format_csv, "json": format_json}


# ------------------------------------------------------------------ running

def run(config: RunConfig, stdout=None) -> int:
    """Run the configured studies; returns the process exit status."""
    stdout = stdout or sys.stdout
    config.validate()
    reports = []
    try:
        for name in config.cases:
            reports.append(convergence_study(name, config.levels, config.k, config.variant, config.path,
                                             config.quad_order, config.nu))
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    text = FORMATTERS[config.fmt](reports)
    if config.out and config.slice_z is None:
        Path(config.out).write_text(text)
    else:
        stdout.write(text)

    if config.slice_z is not None:
        level = config.levels[-1]
        mesh = build_mesh(level)
        for name in config.cases:
            case = derive_case_data(name)
            sol = solve_case(mesh, case, config.k, config.variant, config.path, config.quad_order, config.nu)
            prefix = f"{name}_L{level}_z{config.slice_z:g}"
            texts = export_slice(mesh, sol, case, config.slice_z, config.slice_res, config.out, prefix)
            if config.out is None:
                for field_name, body in texts.items():
                    stdout.write(f"# {prefix} {field_name}\n{body}")
            else:
                log.info("wrote %d slice files with prefix %s to %s", len(texts), prefix, config.out)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.dump_mesh is not None:
        if args.dump_mesh < 1:
            parser.error("--dump-mesh needs a level >= 1")
        sys.stdout.write(build_mesh(args.dump_mesh).to_json() + "\n")
        return 0
    config = config_from_args(args)
    try:
        config.validate()
    except ValueError as exc:
        parser.error(str(exc))
    return run(config)


if __name__ == "__main__":
    raise SystemExit(main())
