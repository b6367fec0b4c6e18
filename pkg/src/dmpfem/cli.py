"""Command-line front end.

Exit status: 0 on success, 2 on bad arguments or configuration, 3 when a
solve fails (diagnostics go to stderr).
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings
from pathlib import Path

import numpy as np

from .analysis import refinement_study
from .assembly import AssemblyError, critical_h_1d, empirical_critical_h_1d
from .bench import SOLVERS, StraddleWarning, parse_mesh_size, run_benchmark, solve_problem, write_bundle
from .config import ConfigError, load_config
from .linsolve import NotPositiveDefiniteError
from .mesh import MeshError
from .model import CASE_NAMES, ProblemError, make_case
from .qp import InfeasibleBoundsError, IterationLimitError, QpError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dmpfem", description="Non-negative finite elements for diffusion with decay.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bench", help="run a reference case and write an artifact bundle")
    b.add_argument("case", choices=CASE_NAMES)
    b.add_argument("--alpha", type=float)
    b.add_argument("--mesh", help="elements (decay1d), NxN nodes per side (square cases), bands (hole2d)")
    b.add_argument("--element", choices=("tri", "quad"))
    b.add_argument("--solver", choices=SOLVERS, default="constrained")
    b.add_argument("--warm-start", choices=("violated-galerkin", "empty"), default="violated-galerkin")
    b.add_argument("--perturb", type=float, default=0.0, help="interior node jitter, fraction of local h")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None, help="bundle directory (default out/<case>)")

    s = sub.add_parser("study", help="mesh refinement study, CSV on stdout or in --out")
    s.add_argument("case", choices=CASE_NAMES)
    s.add_argument("--meshes", required=True, help="comma-separated mesh sizes, e.g. 6,12,18 or 6x6,12x12")
    s.add_argument("--alphas", type=_floats, default=None)
    s.add_argument("--solver", choices=SOLVERS, default="galerkin")
    s.add_argument("--element", choices=("tri", "quad"))
    s.add_argument("--out", default=None)

    h = sub.add_parser("hcrit", help="critical 1D mesh size sqrt(6 D / alpha)")
    h.add_argument("--alpha", type=float, required=True)
    h.add_argument("--diffusivity", type=float, required=True)
    h.add_argument("--verify", action="store_true", help="also bisect on the assembled off-diagonal")

    c = sub.add_parser("solve", help="solve a problem described by an INI file")
    c.add_argument("--config", required=True)
    return p


def _bench(args) -> int:
    params = {"alpha": args.alpha, "element": args.element, "solver": args.solver,
              "warm_start": args.warm_start, "perturb": args.perturb or None, "seed": args.seed}
    if args.mesh is not None:
        params["mesh"] = parse_mesh_size(args.mesh)
    with warnings.catch_warnings():
        # reported below through bundle.messages
        warnings.simplefilter("ignore", StraddleWarning)
        bundle = run_benchmark(args.case, params)
    out = write_bundle(bundle, args.out or Path("out") / args.case)
    _check_report(bundle)
    for msg in bundle.messages:
        print(f"warning: {msg}", file=sys.stderr)
    for name, d in bundle.diagnostics.items():
        print(f"{name}: min {d.min_nodal:.6g}, negative nodes {d.negative_node_count} "
              f"({d.negative_node_fraction:.2f}%), bound violations {d.bound_violation_count}")
    if bundle.report is not None:
        print(f"active-set iterations: {bundle.report.iterations}")
    print(f"wrote {out}")
    return EXIT_OK


def _check_report(bundle):
    rep = bundle.report
    if rep is not None and not rep.kkt_satisfied():
        raise QpError("KKT conditions not met: " +
                      ", ".join(f"{k}={v:.3e}" for k, v in rep.kkt_residuals.items()))


def _study(args) -> int:
    sizes = [parse_mesh_size(t) for t in args.meshes.split(",") if t.strip()]
    alphas = args.alphas or [None]
    buf = io.StringIO()
    rates = []
    for k, alpha in enumerate(alphas):
        case = make_case(args.case, alpha=alpha)
        res = refinement_study(case, sizes, solver=args.solver, element=args.element)
        a = case.params["alpha"]
        lines = res.to_csv().splitlines()
        if k == 0:
            buf.write("alpha," + lines[0] + "\n")
        for line in lines[1:]:
            buf.write(f"{a!r},{line}\n")
        conv = res.convergence
        if conv is not None and len(conv.h) >= 2:
            rates.append((a, conv.l2_rate, conv.h1_rate))
    text = buf.getvalue()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "study.csv").write_text(text)
        if rates:
            rbuf = io.StringIO()
            w = csv.writer(rbuf, lineterminator="\n")
            w.writerow(["alpha", "l2_rate", "h1_rate"])
            w.writerows([[repr(a), repr(l2), repr(h1)] for a, l2, h1 in rates])
            (out / "rates.csv").write_text(rbuf.getvalue())
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)
    for a, l2, h1 in rates:
        print(f"alpha {a:g}: L2 rate {l2:.3f}, H1 rate {h1:.3f}", file=sys.stderr)
    return EXIT_OK


def _hcrit(args) -> int:
    h = critical_h_1d(args.alpha, args.diffusivity)
    print(repr(h))
    if args.verify:
        emp = empirical_critical_h_1d(args.alpha, args.diffusivity)
        print(f"empirical {emp!r} relative difference {abs(emp - h) / h:.3e}")
    return EXIT_OK


def _solve(args) -> int:
    cfg = load_config(args.config)
    bundle = solve_problem("custom", cfg.problem, cfg.mesh, cfg.solver, bounds=cfg.bounds,
                           warm_start=cfg.warm_start, method=cfg.linear,
                           config={**cfg.resolved, "config": str(args.config)})
    _check_report(bundle)
    out = write_bundle(bundle, cfg.out_dir)
    for name, d in bundle.diagnostics.items():
        print(f"{name}: min {d.min_nodal:.6g}, negative nodes {d.negative_node_count} "
              f"({d.negative_node_fraction:.2f}%)")
    print(f"wrote {out}")
    return EXIT_OK


_COMMANDS = {"bench": _bench, "study": _study, "hcrit": _hcrit, "solve": _solve}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except InfeasibleBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotPositiveDefiniteError as exc:
        print(f"solver failure: matrix not positive definite: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IterationLimitError as exc:
        r = exc.report
        print(f"solver failure: {exc}", file=sys.stderr)
        print("KKT residuals: " + ", ".join(f"{k}={v:.3e}" for k, v in r.kkt_residuals.items()),
              file=sys.stderr)
        return EXIT_SOLVER
    except (QpError, AssemblyError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ProblemError, MeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
