"""INI-style problem files for ad-hoc solves.

Example::

    [mesh]
    type = square-tri        ; interval | square-tri | square-quad | hole | file
    size = 12x12             ; elements (interval), nodes per side (square), band count (hole)
    ; path = my.mesh         ; for type = file

    [problem]
    decay = 1.0
    diffusivity = rotated 0.5235987755982988 1e4 1   ; or: 1.0 | tensor a b c | lepotier 1e-4
    forcing = 0.0                                      ; or a preset: sin-pi-x | central-box

    [dirichlet]
    bottom = sin-pi-x
    left = 0.0

    [neumann]
    ; segment = flux

    [solver]
    method = constrained     ; galerkin | constrained | clip
    lower = 0.0              ; omit for the bound implied by the data, 'none' for unbounded
    upper = 1.0
    warm_start = violated-galerkin
    linear = direct          ; direct | cg

    [output]
    dir = out

Coefficients are numbers or one of the named presets; there is no
expression language.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import mesh as meshlib
from .model import (
    ProblemSpec,
    constant,
    constant_tensor,
    isotropic_diffusivity,
    lepotier_diffusivity,
    rotated_anisotropic_tensor,
)
from .qp import WARM_STARTS


class ConfigError(ValueError):
    """Malformed or inconsistent configuration file."""


def _sin_pi_x(p):
    return np.sin(np.pi * p[:, 0])


def _central_box(p):
    inside = np.all((p >= 3 / 8) & (p <= 5 / 8), axis=1)
    return inside.astype(float)


SCALAR_PRESETS = {"sin-pi-x": _sin_pi_x, "central-box": _central_box}
MESH_TYPES = ("interval", "square-tri", "square-quad", "hole", "file")
_SECTIONS = {"mesh", "problem", "dirichlet", "neumann", "solver", "output"}


@dataclass
class SolveConfig:
    mesh: meshlib.Mesh
    problem: ProblemSpec
    solver: str
    bounds: tuple[float | None, float | None] | None
    warm_start: str
    linear: str
    out_dir: Path
    resolved: dict


def _scalar(text: str, where: str):
    key = text.strip().lower()
    if key in SCALAR_PRESETS:
        return SCALAR_PRESETS[key]
    try:
        return constant(float(key))
    except ValueError:
        raise ConfigError(
            f"{where}: {text!r} is neither a number nor a preset ({', '.join(SCALAR_PRESETS)})"
        ) from None


def _numbers(parts, count, where):
    if len(parts) != count:
        raise ConfigError(f"{where}: expected {count} numbers, got {len(parts)}")
    try:
        return [float(v) for v in parts]
    except ValueError:
        raise ConfigError(f"{where}: non-numeric value in {parts}") from None


def _diffusivity(text: str, ndim: int):
    parts = text.split()
    where = "[problem] diffusivity"
    if not parts:
        raise ConfigError(f"{where} is empty")
    head = parts[0].lower()
    if head == "tensor":
        a, b, c = _numbers(parts[1:], 3, where)
        return constant_tensor([[a, b], [b, c]])
    if head == "rotated":
        return rotated_anisotropic_tensor(*_numbers(parts[1:], 3, where))
    if head == "lepotier":
        return lepotier_diffusivity(*_numbers(parts[1:], 1, where))
    (d,) = _numbers(parts, 1, where)
    return isotropic_diffusivity(d, ndim)


def _bound(section, key):
    if key not in section:
        return None, False
    text = section[key].strip().lower()
    if text in ("none", ""):
        return None, True
    try:
        return float(text), True
    except ValueError:
        raise ConfigError(f"[solver] {key}: {section[key]!r} is not a number") from None


def _build_mesh(sec, base: Path) -> tuple[meshlib.Mesh, dict]:
    kind = sec.get("type", "").strip()
    if kind not in MESH_TYPES:
        raise ConfigError(f"[mesh] type must be one of {', '.join(MESH_TYPES)}, got {kind!r}")
    if kind == "file":
        if "path" not in sec:
            raise ConfigError("[mesh] type = file needs a path")
        path = Path(sec["path"])
        path = path if path.is_absolute() else base / path
        return meshlib.load_mesh(path), {"mesh_type": kind, "mesh_path": str(path)}
    if "size" not in sec:
        raise ConfigError("[mesh] size is required")
    try:
        size = [int(v) for v in sec["size"].lower().split("x")]
    except ValueError:
        raise ConfigError(f"[mesh] size {sec['size']!r} is not N or NxM") from None
    diagonal = sec.get("diagonal", "NW").strip().upper()
    if kind == "interval":
        m = meshlib.build_interval_mesh(size[0], float(sec.get("x_min", 0.0)), float(sec.get("x_max", 1.0)))
    elif kind == "hole":
        m = meshlib.build_square_with_hole_mesh(size[0], diagonal)
    else:
        nx, ny = (size[0], size[0]) if len(size) == 1 else size[:2]
        if kind == "square-quad":
            m = meshlib.build_unit_square_quad_mesh(nx - 1, ny - 1)
        else:
            m = meshlib.build_unit_square_tri_mesh(nx - 1, ny - 1, diagonal)
    return m, {"mesh_type": kind, "mesh_size": "x".join(map(str, size)), "diagonal": diagonal}


def load_config(path) -> SolveConfig:
    """Parse a problem file into a mesh, a :class:`ProblemSpec` and solver settings.

    Raises
    ------
    ConfigError
        On unreadable files, unknown sections, bad values or segments that do
        not exist on the mesh.
    """
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with path.open() as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(cp.sections()) - _SECTIONS
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    for required in ("mesh", "problem"):
        if not cp.has_section(required):
            raise ConfigError(f"{path}: missing [{required}] section")

    try:
        mesh, resolved = _build_mesh(cp["mesh"], path.parent)
    except meshlib.MeshError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    prob = cp["problem"]
    decay = _scalar(prob.get("decay", "0.0"), "[problem] decay")
    if getattr(decay, "constant_value", 0.0) < 0:
        raise ConfigError("[problem] decay must be nonnegative")
    dirichlet = {k: _scalar(v, f"[dirichlet] {k}") for k, v in cp.items("dirichlet")} \
        if cp.has_section("dirichlet") else {}
    neumann = {k: _scalar(v, f"[neumann] {k}") for k, v in cp.items("neumann")} \
        if cp.has_section("neumann") else {}
    try:
        problem = ProblemSpec(
            decay,
            _diffusivity(prob.get("diffusivity", "1.0"), mesh.ndim),
            _scalar(prob.get("forcing", "0.0"), "[problem] forcing"),
            dirichlet,
            neumann,
        )
        problem.check_segments(mesh)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc

    sol = cp["solver"] if cp.has_section("solver") else {}
    method = sol.get("method", "constrained").strip()
    if method not in ("galerkin", "constrained", "clip"):
        raise ConfigError(f"[solver] method must be galerkin, constrained or clip, got {method!r}")
    warm = sol.get("warm_start", "violated-galerkin").strip()
    if warm not in WARM_STARTS:
        raise ConfigError(f"[solver] warm_start must be one of {WARM_STARTS}")
    linear = sol.get("linear", "direct").strip()
    if linear not in ("direct", "cg"):
        raise ConfigError("[solver] linear must be direct or cg")
    lo, has_lo = _bound(sol, "lower")
    hi, has_hi = _bound(sol, "upper")
    if lo is not None and hi is not None and lo > hi:
        raise ConfigError(f"[solver] lower {lo} exceeds upper {hi}")
    bounds = (lo, hi) if (has_lo or has_hi) else None
    out = Path(cp.get("output", "dir", fallback="out"))
    out = out if out.is_absolute() else path.parent / out

    resolved.update({f"problem.{k}": v.strip() for k, v in prob.items()})
    resolved.update({f"dirichlet.{k}": v.strip() for k, v in (cp.items("dirichlet") if cp.has_section("dirichlet") else [])})
    resolved.update({f"neumann.{k}": v.strip() for k, v in (cp.items("neumann") if cp.has_section("neumann") else [])})
    return SolveConfig(mesh, problem, method, bounds, warm, linear, out, resolved)
