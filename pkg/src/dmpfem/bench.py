"""End-to-end runs of the reference cases, written out as artifact bundles.

A bundle directory holds ``mesh.txt``, one ``<field>.vtk`` per computed
field, ``diagnostics.csv``, ``iterations.csv``, ``errors.csv`` and
``config.resolved``. Every file is a deterministic function of the resolved
configuration.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mesh as meshlib
from .analysis import DiagnosticsReport, diagnose, dirichlet_scale, errors_l2_h1
from .assembly import assemble
from .model import CASE_NAMES, ExactSolution, ProblemError, ProblemSpec, make_case
from .qp import QpSolveReport, clip, dmp_bounds_from_data, solve_constrained, solve_galerkin
from .vtk import format_vtk

SOLVERS = ("galerkin", "constrained", "clip")
_CASE_PARAMS = ("alpha", "theta", "k1", "k2", "epsilon")
_RUN_PARAMS = ("mesh", "element", "solver", "warm_start", "diagonal", "perturb", "seed", "method")
_SOURCE_BOX = (3 / 8, 5 / 8)


class StraddleWarning(UserWarning):
    """Elements cut across a discontinuity of the source term."""


@dataclass
class BenchmarkBundle:
    """Fields and diagnostics of one run. ``fields`` is ordered galerkin,
    constrained, clipped (whichever were computed)."""

    name: str
    mesh: meshlib.Mesh
    fields: dict[str, np.ndarray]
    diagnostics: dict[str, DiagnosticsReport]
    report: QpSolveReport | None
    errors: dict[str, tuple[float, float]]
    config: dict[str, object]
    messages: list[str] = field(default_factory=list)

    def diagnostics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["field", "nodes", "negative_nodes", "percent_violated",
                    "min_concentration", "max_concentration", "bound_violations"])
        for name, d in self.diagnostics.items():
            w.writerow([name, d.n_nodes, d.negative_node_count, f"{d.negative_node_fraction:.2f}",
                        repr(d.min_nodal), repr(d.max_nodal), d.bound_violation_count])
        return buf.getvalue()

    def iterations_csv(self) -> str:
        if self.report is not None:
            return self.report.trace_csv()
        return "iteration,active_set_size,objective,max_primal_violation\n"

    def errors_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["field", "l2_error", "h1_error"])
        for name, (l2, h1) in self.errors.items():
            w.writerow([name, repr(l2), repr(h1)])
        return buf.getvalue()

    def config_text(self) -> str:
        lines = ["[run]"]
        lines += [f"{k} = {_format_value(v)}" for k, v in sorted(self.config.items())]
        return "\n".join(lines) + "\n"


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return "x".join(_format_value(x) for x in v)
    return str(v)


def parse_mesh_size(text):
    """``"12"`` -> 12, ``"12x12"`` -> (12, 12). Integers and pairs pass through."""
    if isinstance(text, (int, np.integer)):
        return int(text)
    if isinstance(text, (tuple, list)):
        return tuple(int(t) for t in text)
    parts = str(text).lower().replace("×", "x").split("x")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise ProblemError(f"cannot parse mesh size {text!r}; use N or NxM") from None
    if len(vals) == 1:
        return vals[0]
    if len(vals) == 2:
        return tuple(vals)
    raise ProblemError(f"cannot parse mesh size {text!r}; use N or NxM")


def straddling_elements(mesh, box=_SOURCE_BOX) -> np.ndarray:
    """Indices of elements whose interior crosses an edge of the square ``box x box``."""
    lo, hi = box
    coords = mesh.nodes[mesh.elements]
    mn, mx = coords.min(axis=1), coords.max(axis=1)
    overlaps = np.all((mn < hi) & (mx > lo), axis=1)
    crosses = np.zeros(mesh.n_elements, dtype=bool)
    for edge in box:
        crosses |= np.any((mn < edge) & (mx > edge), axis=1)
    return np.flatnonzero(overlaps & crosses)


def solve_problem(name: str, problem: ProblemSpec, mesh: meshlib.Mesh, solver: str = "constrained",
                  bounds=None, exact: ExactSolution | None = None,
                  warm_start: str = "violated-galerkin", method: str = "direct",
                  config: dict | None = None) -> BenchmarkBundle:
    """Assemble, solve and diagnose one problem on one mesh.

    ``bounds`` is the ``(c_min, c_max)`` pair used both as QP bounds and for
    the violation counts; by default it is derived from the boundary data and
    the sign of the source.
    """
    if solver not in SOLVERS:
        raise ProblemError(f"solver must be one of {', '.join(SOLVERS)}")
    problem.check_segments(mesh)
    system = assemble(mesh, problem)
    if bounds is None:
        bounds = problem.bounds if problem.bounds is not None else \
            dmp_bounds_from_data(problem, mesh).qp_bounds()
    lo, hi = bounds
    fields = {"galerkin": solve_galerkin(system, method)}
    report = None
    if solver == "constrained":
        report = solve_constrained(system, lo, hi, warm_start=warm_start, method=method)
        fields["constrained"] = report.nodal
    if solver in ("constrained", "clip"):
        fields["clipped"] = clip(fields["galerkin"], lo, hi)

    scale = dirichlet_scale(system)
    diags = {k: diagnose(v, (lo, hi), scale=scale) for k, v in fields.items()}
    errors = {}
    if exact is not None:
        errors = {k: errors_l2_h1(v, mesh, exact.value, exact.gradient) for k, v in fields.items()}
    cfg = dict(config or {})
    cfg.update({"case": name, "solver": solver, "lower": lo, "upper": hi,
                "warm_start": warm_start, "method": method,
                "nodes": mesh.n_nodes, "elements": mesh.n_elements, "kind": mesh.kind})
    return BenchmarkBundle(name, mesh, fields, diags, report, errors, cfg)


def run_benchmark(name: str, params: dict | None = None, **overrides) -> BenchmarkBundle:
    """Run a catalog case.

    Parameters
    ----------
    name : str
        One of ``decay1d``, ``iso2d``, ``aniso2d``, ``hole2d``, ``hetero2d``.
    params : dict, optional
        Case coefficients (``alpha``, ``theta``, ``k1``, ``k2``, ``epsilon``)
        and run settings: ``mesh`` (size in the case's convention, ``"NxN"``
        accepted), ``element`` (``tri``/``quad``), ``solver``
        (``galerkin``/``constrained``/``clip``, default ``constrained``),
        ``warm_start``, ``diagonal``, ``perturb`` (relative node jitter, with
        ``seed``) and ``method`` (``direct``/``cg``).

    Returns
    -------
    BenchmarkBundle
    """
    if name not in CASE_NAMES:
        raise ProblemError(f"unknown case {name!r}; choose from {', '.join(CASE_NAMES)}")
    p = {k: v for k, v in {**(params or {}), **overrides}.items() if v is not None}
    unknown = set(p) - set(_CASE_PARAMS) - set(_RUN_PARAMS)
    if unknown:
        raise ProblemError(f"unknown parameters {sorted(unknown)}")
    case = make_case(name, **{k: p[k] for k in _CASE_PARAMS if k in p})
    size = parse_mesh_size(p.get("mesh", case.default_mesh))
    element = p.get("element", case.elements[0])
    if element not in case.elements:
        raise ProblemError(f"case {name!r} supports elements {case.elements}, not {element!r}")
    kwargs = {"diagonal": p["diagonal"]} if "diagonal" in p and element == "tri" else {}
    mesh = case.build_mesh(size, element, **kwargs)
    perturb = float(p.get("perturb", 0.0))
    seed = int(p.get("seed", 0))
    if perturb > 0:
        mesh = meshlib.perturb_interior_nodes(mesh, perturb, seed=seed)

    messages = []
    if name == "hetero2d":
        bad = straddling_elements(mesh)
        if bad.size:
            msg = (f"{bad.size} elements straddle the source box edges; the discontinuous "
                   f"source is under-integrated there")
            warnings.warn(msg, StraddleWarning, stacklevel=2)
            messages.append(msg)

    config = {**case.params, "mesh": size, "mesh_convention": case.mesh_convention,
              "element": element, "perturb": perturb, "seed": seed,
              "diagonal": p.get("diagonal", "NW") if element == "tri" else None}
    bundle = solve_problem(name, case.problem, mesh, p.get("solver", "constrained"),
                           bounds=case.bounds, exact=case.exact,
                           warm_start=p.get("warm_start", "violated-galerkin"),
                           method=p.get("method", "direct"), config=config)
    bundle.messages = messages
    return bundle


def write_bundle(bundle: BenchmarkBundle, out_dir) -> Path:
    """Write the artifact files of ``bundle`` into ``out_dir`` (created if needed)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "mesh.txt").write_text(meshlib.format_mesh(bundle.mesh))
    for name, values in bundle.fields.items():
        (out / f"{name}.vtk").write_text(format_vtk(bundle.mesh, values, title=f"{bundle.name} {name}"))
    (out / "diagnostics.csv").write_text(bundle.diagnostics_csv())
    (out / "iterations.csv").write_text(bundle.iterations_csv())
    (out / "errors.csv").write_text(bundle.errors_csv())
    (out / "config.resolved").write_text(bundle.config_text())
    return out
