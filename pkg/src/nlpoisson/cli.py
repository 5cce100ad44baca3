"""Command-line front end.

Subcommands: ``solve``, ``smooth``, ``study``, ``verify`` and ``fixtures``.
Exit status is 0 on success, 1 on invalid input and 2 on a numerical
failure (including a failed ``verify`` check).

Defaults can be overridden by a plain ``key=value`` file passed with
``--config``; explicit flags win over the file.  Relative output paths are
resolved against ``$NLPOISSON_OUTPUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import analysis
from .errors import NlPoissonError, NumericalError, ValidationError
from .fixtures import FIXTURE_IDS, fixture, transcription_report
from .kernels import KernelSpec, make_kernel
from .piecewise import constant, from_text, phi, to_text
from .smoothing import smooth
from .solver import SolveConfig, resolve

log = logging.getLogger("nlpoisson")

OUTPUT_ENV = "NLPOISSON_OUTPUT_DIR"
SUITES = ("transcription", "smoothing", "jump-relation", "identity", "cascade", "blowup")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(f"{self.prog}: {message}")


def fmt(v) -> str:
    """Fixed 17-significant-digit formatting for CSV output."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(float(v), ".17g")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _levels(text: str) -> list[int | None]:
    out = []
    for t in text.split(","):
        t = t.strip().lower()
        if not t:
            continue
        if t in ("none", "-", "direct"):
            out.append(None)
        else:
            try:
                out.append(int(t))
            except ValueError as exc:
                raise argparse.ArgumentTypeError(f"bad level {t!r}") from exc
    return out


def _level(text: str) -> int | None:
    lv = _levels(text)
    if len(lv) != 1:
        raise argparse.ArgumentTypeError("expected a single level")
    return lv[0]


def read_config(path: str) -> dict[str, str]:
    """Parse a ``key=value`` file; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def output_path(name: str | None) -> Path | None:
    if name is None:
        return None
    p = Path(name)
    base = os.environ.get(OUTPUT_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


# --------------------------------------------------------------------------
# parser


def _add_kernel(p):
    p.add_argument("--kernel", help="kernel family: s, p, g, q or quartic")
    p.add_argument("--delta", type=float, help="horizon")
    p.add_argument("--beta", type=float, help="exponent for the S and P families")


def _add_problem(p):
    p.add_argument("--example", help="fixture id (1, 2, 3 or ex1, ex2, ex3)")
    p.add_argument("--source", help="source f in the piecewise text format")
    p.add_argument("--constraint", help="constraint b in the piecewise text format (default 0)")
    p.add_argument("--domain", type=_float_list, help="a1,a2 for --source problems (write --domain=-2,2 for a negative a1)")
    p.add_argument("--jumps", type=_float_list, help="jump locations (default: fixture jumps)")
    _add_kernel(p)


def _add_solver(p):
    p.add_argument("--backend", choices=("spectral", "dense"), default="spectral")
    p.add_argument("--krylov-tol", type=float, default=1e-12)
    p.add_argument("--krylov-max-iter", type=int, default=2000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlpoisson", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--config", help="key=value file with default option values")
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("solve", parents=[common], help="solve one problem and write nodal values")
    _add_problem(p)
    _add_solver(p)
    p.add_argument("--n", type=int, default=81, help="grid points in the domain")
    p.add_argument("--level", type=_level, default=None, help="smoothing level or 'none'")
    p.add_argument("--out", help="CSV file (default: stdout)")

    p = sub.add_parser("smooth", parents=[common], help="print smoothing coefficients and write f_M")
    _add_problem(p)
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--out", help="file for f_M in the piecewise text format")

    p = sub.add_parser("study", parents=[common], help="convergence study over several grids and levels")
    p.add_argument("--example", required=True)
    _add_solver(p)
    p.add_argument("--levels", type=_levels, default=_levels("none,0,1,2,3,4"))
    p.add_argument("--ns", type=_int_list, required=True)
    p.add_argument("--reference-n", type=int, default=401)
    p.add_argument("--jobs", type=int, default=1, help="parallel solves per level")
    p.add_argument("--out", help="Markdown table (default: stdout)")
    p.add_argument("--csv", help="CSV with one row per (level, N)")
    p.add_argument("--svg", help="log-log plot of error against N")

    p = sub.add_parser("verify", parents=[common], help="run numerical checks and print pass/fail lines")
    p.add_argument("--suite", default="all", choices=SUITES + ("all",))

    p = sub.add_parser("fixtures", parents=[common], help="fixture information")
    p.add_argument("action", choices=("list",))
    return parser


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in cfg.items():
            if key not in known:
                raise ValidationError(f"unknown config key {key!r} for {args.command}")
            act = known[key]
            defaults[key] = act.type(value) if act.type else value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# --------------------------------------------------------------------------
# problem assembly


def _kernel_from(args, default: KernelSpec | None) -> KernelSpec:
    if args.kernel is None and args.delta is None and args.beta is None:
        if default is None:
            raise ValidationError("--kernel and --delta are required")
        return default
    family = args.kernel or (default.family if default else None)
    delta = args.delta if args.delta is not None else (default.delta if default else None)
    if family is None or delta is None:
        raise ValidationError("--kernel and --delta are required")
    return make_kernel(family, delta, args.beta)


def _problem(args):
    if (args.example is None) == (args.source is None):
        raise ValidationError("give exactly one of --example and --source")
    if args.example is not None:
        fx = fixture(args.example)
        spec = _kernel_from(args, fx.spec)
        b = analysis.fixture_constraint(fx) if spec == fx.spec else fx.b
        if b is None:
            raise ValidationError("a constructed constraint needs the fixture kernel")
        jumps = tuple(args.jumps) if args.jumps else fx.jumps
        return fx.f, b, spec, fx.domain, jumps, fx.u_exact
    f = from_text(Path(args.source).read_text())
    b = from_text(Path(args.constraint).read_text()) if args.constraint else constant(0.0)
    spec = _kernel_from(args, None)
    if not args.domain or len(args.domain) != 2:
        raise ValidationError("--domain a1,a2 is required with --source")
    jumps = tuple(args.jumps) if args.jumps else tuple(f.breakpoints)
    return f, b, spec, tuple(args.domain), jumps, None


def _solve_config(args, n: int) -> SolveConfig:
    return SolveConfig(
        backend=args.backend, n_interior=n, krylov_tol=args.krylov_tol,
        krylov_max_iter=args.krylov_max_iter,
    )


# --------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    f, b, spec, domain, jumps, exact = _problem(args)
    sol = resolve(f, b, spec, args.level, _solve_config(args, args.n), domain, jumps)
    x = sol.grid.nodes
    u = sol.values.values
    header = ["x", "u"]
    cols = [x, u]
    if exact is not None:
        ue = exact.eval(0, x)
        header += ["u_exact", "error"]
        cols += [ue, np.abs(u - ue)]
    lines = [",".join(header)]
    lines += [",".join(fmt(c[i]) for c in cols) for i in range(len(x))]
    _emit("\n".join(lines) + "\n", args.out)
    if exact is not None:
        om = sol.grid.omega
        log.info("max error on the domain: %.3e", float(np.max(np.abs(u - ue)[om])))
    return 0


def cmd_smooth(args) -> int:
    f, _, spec, _, jumps, _ = _problem(args)
    rec = smooth(f, spec, args.level, jumps)
    head = "| p | " + " | ".join(f"c_{k}" for k in range(rec.level + 1)) + " |"
    rule = "|---" * (rec.level + 2) + "|"
    rows = [
        f"| {fmt(p)} | " + " | ".join(fmt(c) for c in rec.coefficients[j]) + " |"
        for j, p in enumerate(rec.locations)
    ]
    print("\n".join([head, rule] + rows))
    if args.out:
        output_path(args.out).write_text(to_text(rec.source))
    return 0


def markdown_table(reports: list[analysis.ConvergenceReport]) -> str:
    Ns = reports[0].Ns
    head = "| N | " + " | ".join(f"E (M={r.level_label}) | order" for r in reports) + " |"
    rule = "|---" * (2 * len(reports) + 1) + "|"
    lines = [head, rule]
    for i, n in enumerate(Ns):
        cells = [str(n)]
        for r in reports:
            cells.append(f"{r.errors[i]:.2e}")
            cells.append("" if i == 0 else f"{r.orders[i - 1]:.2f}")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def svg_loglog(reports: list[analysis.ConvergenceReport], title: str = "") -> str:
    """Standalone SVG of error against N on log-log axes."""
    W, H, m = 560, 400, 60
    xs = np.log10([n for r in reports for n in r.Ns])
    ys = np.log10([max(e, 1e-300) for r in reports for e in r.errors])
    x0, x1 = xs.min(), xs.max() + 1e-9
    y0, y1 = math.floor(ys.min()), math.ceil(ys.max() + 1e-9)

    def px(v):
        return m + (v - x0) / (x1 - x0) * (W - 2 * m)

    def py(v):
        return H - m - (v - y0) / max(y1 - y0, 1) * (H - 2 * m)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle">{title}</text>',
        f'<line x1="{m}" y1="{H - m}" x2="{W - m}" y2="{H - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{H - m}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle">N</text>',
        f'<text x="15" y="{H / 2}" transform="rotate(-90 15 {H / 2})" text-anchor="middle">max error</text>',
    ]
    for e in range(int(y0), int(y1) + 1):
        out.append(f'<text x="{m - 6}" y="{py(e) + 4:.1f}" text-anchor="end">1e{e}</text>')
        out.append(f'<line x1="{m}" y1="{py(e):.1f}" x2="{W - m}" y2="{py(e):.1f}" stroke="#ddd"/>')
    for n in reports[0].Ns:
        out.append(f'<text x="{px(math.log10(n)):.1f}" y="{H - m + 16}" text-anchor="middle">{n}</text>')
    for i, r in enumerate(reports):
        col = palette[i % len(palette)]
        pts = " ".join(f"{px(math.log10(n)):.1f},{py(math.log10(max(e, 1e-300))):.1f}"
                       for n, e in zip(r.Ns, r.errors))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for pt in pts.split():
            cx, cy = pt.split(",")
            out.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="{col}"/>')
        out.append(f'<text x="{W - m + 5}" y="{m + 15 * i}" fill="{col}">M={r.level_label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_study(args) -> int:
    fx = fixture(args.example)
    cfg = _solve_config(args, args.ns[0])
    reports = []
    for level in args.levels:
        rep = analysis.convergence_study(fx, args.ns, level, cfg, reference_n=args.reference_n, jobs=args.jobs)
        log.info("level %s done", rep.level_label)
        reports.append(rep)
    _emit(markdown_table(reports), args.out)
    if args.csv:
        lines = ["level,N,error,order"]
        for r in reports:
            for n, e, o in r.rows():
                lines.append(f"{r.level_label},{n},{fmt(e)},{fmt(o)}")
        output_path(args.csv).write_text("\n".join(lines) + "\n")
    if args.svg:
        output_path(args.svg).write_text(svg_loglog(reports, f"{fx.id}: error against N"))
    return 0


def _checks(suite: str):
    """Yield ``(name, passed, detail)`` for one suite."""
    if suite == "transcription":
        for fid in ("ex1", "ex2"):
            dev = transcription_report(fid)["max"]
            yield f"{fid} source vs quadrature of L u_exact", dev <= 1e-8, f"max deviation {dev:.2e}"
    elif suite == "smoothing":
        fx = fixture("ex1")
        rec = smooth(fx.f, fx.spec, 4, fx.jumps)
        dev = float(np.max(np.abs(rec.coefficients - 1.0)))
        yield "ex1 coefficients c_0..c_4 equal 1", dev <= 1e-9, f"max |c - 1| = {dev:.2e}"
        res = max(abs(rec.source.jump_at(0.0, k).magnitude) for k in range(5))
        yield "ex1 smoothed source is C^4 at 0", res <= 1e-10, f"max residual jump {res:.2e}"
    elif suite == "jump-relation":
        u = fixture("ex1").u_exact
        for fam in ("G", "Q", "quartic"):
            spec = KernelSpec(fam, 1.6)
            kmax = min(3, analysis.relation_order_limit(spec))
            dev = analysis.verify_jump_relation(spec, u, kmax)
            yield f"{fam} kernel, orders 0..{kmax}", dev <= 1e-6, f"max deviation {dev:.2e}"
    elif suite == "identity":
        for fam in ("G", "Q", "quartic"):
            chk = analysis.derivative_identity_check(KernelSpec(fam, 1.0))
            order = min(chk.orders)
            yield f"(L phi_0)' = K for {fam}", order >= 1.9, f"min observed order {order:.3f}"
    elif suite == "cascade":
        spec = KernelSpec("G", 0.5)
        sol = resolve(phi(0, 0.0), constant(0.0), spec, None, SolveConfig(backend="dense", n_interior=161), (-2.0, 2.0))
        rep = analysis.cascade_scan(sol, spec, 2)
        sig = min(rep.at(s * spec.delta, 1).significance for s in (-1, 1))
        yield "G kernel order-1 jumps at +-delta", sig >= analysis.SIGNIFICANCE, f"min significance {sig:.1f}"
        bad = [c for c in rep.controls if c.flagged]
        yield "no jumps flagged at control points", not bad, f"{len(bad)} flagged"
    elif suite == "blowup":
        for fam, j in (("S", 1), ("P", 2)):
            rows = analysis.blowup_probe(KernelSpec(fam, 1.0, 0.4), j=j)
            pk = [r.peak for r in rows]
            ok = all(b > a for a, b in zip(pk, pk[1:])) and pk[-1] / pk[0] >= 1.5
            yield f"{fam} kernel |u^({j})| grows near the jump", ok, f"final/first {pk[-1] / pk[0]:.3f}"
        rows = analysis.blowup_probe(KernelSpec("quartic", 1.0), j=1)
        ratio = rows[-1].peak / rows[0].peak
        yield "quartic control stays bounded", ratio <= 1.2, f"final/first {ratio:.3f}"


def cmd_verify(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    failed = 0
    for suite in suites:
        for name, ok, detail in _checks(suite):
            print(f"{'PASS' if ok else 'FAIL'} [{suite}] {name}: {detail}")
            failed += not ok
    return 0 if failed == 0 else 2


def cmd_fixtures(args) -> int:
    for fid in FIXTURE_IDS:
        fx = fixture(fid)
        a1, a2 = fx.domain
        print(f"{fx.id}: domain ({a1:g}, {a2:g}), delta {fx.delta:g}, kernel {fx.spec.label()}, "
              f"jumps {', '.join(f'{p:g}' for p in fx.jumps)}")
        print(f"    {fx.description}")
        for c in fx.corrections:
            print(f"    corrected: {c}")
    return 0


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        output_path(path).write_text(text)


COMMANDS = {
    "solve": cmd_solve,
    "smooth": cmd_smooth,
    "study": cmd_study,
    "verify": cmd_verify,
    "fixtures": cmd_fixtures,
}


def run(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            return COMMANDS[args.command](args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, NlPoissonError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
