"""Structured and unstructured meshes of low-order elements with named boundaries.

A :class:`Mesh` holds a single element kind (``Line2``, ``Tri3`` or ``Quad4``).
Generators return validated, counterclockwise meshes; a plain-text format is
provided for exchanging externally generated meshes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

ELEMENT_KINDS = {"Line2": 2, "Tri3": 3, "Quad4": 4}
ELEMENT_DIM = {"Line2": 1, "Tri3": 2, "Quad4": 2}

# local edges (counterclockwise) for 2D kinds; Line2 "edges" are its end points
LOCAL_EDGES = {
    "Tri3": ((0, 1), (1, 2), (2, 0)),
    "Quad4": ((0, 1), (1, 2), (2, 3), (3, 0)),
    "Line2": ((0,), (1,)),
}

DUPLICATE_TOL = 1e-12


class MeshError(ValueError):
    """Raised when a mesh violates its structural or quality invariants."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable low-order mesh.

    Parameters
    ----------
    nodes : ndarray, shape (n_nodes, ndim)
    elements : ndarray of int, shape (n_elements, nodes_per_element)
    kind : {'Line2', 'Tri3', 'Quad4'}
    boundary_nodes : dict
        Segment name -> ordered array of node ids.
    boundary_edges : list of (element, local_edge, segment)
        Element sides lying on a named segment, used for Neumann integrals.
    """

    nodes: np.ndarray
    elements: np.ndarray
    kind: str
    boundary_nodes: dict[str, np.ndarray] = field(default_factory=dict)
    boundary_edges: list[tuple[int, int, str]] = field(default_factory=list)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        elements = np.array(self.elements, dtype=np.int64)
        nodes.setflags(write=False)
        elements.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        segs = {}
        for name, ids in self.boundary_nodes.items():
            arr = np.array(ids, dtype=np.int64)
            arr.setflags(write=False)
            segs[name] = arr
        object.__setattr__(self, "boundary_nodes", segs)
        object.__setattr__(self, "boundary_edges", [tuple(e) for e in self.boundary_edges])

    @property
    def ndim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def segments(self) -> list[str]:
        return list(self.boundary_nodes)

    def all_boundary_nodes(self) -> np.ndarray:
        if not self.boundary_nodes:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(list(self.boundary_nodes.values())))

    def measures(self) -> np.ndarray:
        """Element lengths (1D) or areas (2D)."""
        x = self.nodes[self.elements]
        if self.kind == "Line2":
            return x[:, 1, 0] - x[:, 0, 0]
        # shoelace formula; exact for straight-sided polygons
        xs, ys = x[..., 0], x[..., 1]
        return 0.5 * np.sum(xs * np.roll(ys, -1, axis=1) - np.roll(xs, -1, axis=1) * ys, axis=1)

    def corner_jacobians(self) -> np.ndarray:
        """Jacobian determinants at every element corner, shape (n_elements, k)."""
        x = self.nodes[self.elements]
        if self.kind == "Line2":
            d = x[:, 1, 0] - x[:, 0, 0]
            return np.stack([d, d], axis=1)
        nxt = np.roll(x, -1, axis=1) - x
        prv = np.roll(x, 1, axis=1) - x
        return nxt[..., 0] * prv[..., 1] - nxt[..., 1] * prv[..., 0]

    def edge_lengths(self) -> np.ndarray:
        x = self.nodes[self.elements]
        if self.kind == "Line2":
            return np.abs(x[:, 1, 0] - x[:, 0, 0])[:, None]
        return np.linalg.norm(np.roll(x, -1, axis=1) - x, axis=2)

    def validate(self) -> "Mesh":
        """Check every structural and quality invariant; return self."""
        if self.kind not in ELEMENT_KINDS:
            raise MeshError(f"unknown element kind {self.kind!r}")
        k = ELEMENT_KINDS[self.kind]
        if self.elements.ndim != 2 or self.elements.shape[1] != k:
            raise MeshError(f"{self.kind} connectivity must have {k} columns")
        if self.ndim != ELEMENT_DIM[self.kind]:
            raise MeshError(f"{self.kind} needs {ELEMENT_DIM[self.kind]}D nodes, got {self.ndim}D")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= self.n_nodes):
            raise MeshError("connectivity references a nonexistent node")
        jac = self.corner_jacobians()
        bad = np.flatnonzero(np.any(jac <= 0.0, axis=1))
        if bad.size:
            raise MeshError(f"element {int(bad[0])} is inverted or degenerate (corner Jacobians {jac[bad[0]]})")
        pairs = cKDTree(self.nodes).query_pairs(DUPLICATE_TOL)
        if pairs:
            i, j = sorted(pairs)[0]
            raise MeshError(f"duplicate nodes {i} and {j}")
        topo = set(self._topological_boundary_nodes().tolist())
        for name, ids in self.boundary_nodes.items():
            if ids.size and (ids.min() < 0 or ids.max() >= self.n_nodes):
                raise MeshError(f"segment {name!r} references a nonexistent node")
            stray = [int(i) for i in ids if int(i) not in topo]
            if stray:
                raise MeshError(f"segment {name!r} node {stray[0]} is not on the mesh boundary")
        for e, le, name in self.boundary_edges:
            if name not in self.boundary_nodes:
                raise MeshError(f"boundary edge refers to unknown segment {name!r}")
        return self

    def _boundary_facets(self) -> list[tuple[int, int]]:
        """(element, local edge) pairs owned by exactly one element."""
        count: dict[tuple[int, ...], list[tuple[int, int]]] = {}
        for e, conn in enumerate(self.elements):
            for le, loc in enumerate(LOCAL_EDGES[self.kind]):
                key = tuple(sorted(int(conn[i]) for i in loc))
                count.setdefault(key, []).append((e, le))
        return [owners[0] for owners in count.values() if len(owners) == 1]

    def _topological_boundary_nodes(self) -> np.ndarray:
        ids = set()
        for e, le in self._boundary_facets():
            ids.update(int(self.elements[e, i]) for i in LOCAL_EDGES[self.kind][le])
        return np.array(sorted(ids), dtype=np.int64)

    def with_boundary_edges(self) -> "Mesh":
        """Return a copy whose ``boundary_edges`` are rebuilt from the segment node lists."""
        edges = []
        members = {name: set(ids.tolist()) for name, ids in self.boundary_nodes.items()}
        for e, le in sorted(self._boundary_facets()):
            loc = [int(self.elements[e, i]) for i in LOCAL_EDGES[self.kind][le]]
            for name, ids in members.items():
                if all(n in ids for n in loc):
                    edges.append((e, le, name))
                    break
        return Mesh(self.nodes, self.elements, self.kind, dict(self.boundary_nodes), edges)


def _grid_segments(nx: int, ny: int) -> dict[str, np.ndarray]:
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    return {
        "bottom": idx[0, :],
        "right": idx[:, nx],
        "top": idx[ny, ::-1],
        "left": idx[::-1, 0],
    }


def _grid_nodes(nx: int, ny: int, x0=0.0, x1=1.0, y0=0.0, y1=1.0) -> np.ndarray:
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def _check_count(name: str, n) -> int:
    if int(n) != n or n < 1:
        raise MeshError(f"{name} must be a positive integer, got {n!r}")
    return int(n)


def build_interval_mesh(n_elements: int, x_min: float = 0.0, x_max: float = 1.0) -> Mesh:
    """Uniform Line2 mesh of ``[x_min, x_max]`` with segments ``left`` and ``right``."""
    n = _check_count("n_elements", n_elements)
    if not x_min < x_max:
        raise MeshError(f"degenerate interval [{x_min}, {x_max}]")
    nodes = np.linspace(x_min, x_max, n + 1)[:, None]
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    mesh = Mesh(
        nodes,
        elements,
        "Line2",
        {"left": [0], "right": [n]},
        [(0, 0, "left"), (n - 1, 1, "right")],
    )
    return mesh.validate()


def build_unit_square_quad_mesh(nx: int, ny: int) -> Mesh:
    """Uniform ``nx`` x ``ny`` Quad4 mesh of the unit square."""
    nx, ny = _check_count("nx", nx), _check_count("ny", ny)
    j, i = np.divmod(np.arange(nx * ny), nx)
    a = j * (nx + 1) + i
    elements = np.column_stack([a, a + 1, a + nx + 2, a + nx + 1])
    mesh = Mesh(_grid_nodes(nx, ny), elements, "Quad4", _grid_segments(nx, ny))
    return mesh.with_boundary_edges().validate()


def _split_cells(a: np.ndarray, row: int, diagonal: str) -> np.ndarray:
    # a: lower-left node of each cell; row: nodes per grid row
    b, c, d = a + 1, a + row + 1, a + row
    if diagonal == "NE":  # diagonal from lower-left to upper-right
        first, second = np.column_stack([a, b, c]), np.column_stack([a, c, d])
    elif diagonal == "NW":  # diagonal from lower-right to upper-left
        first, second = np.column_stack([a, b, d]), np.column_stack([b, c, d])
    else:
        raise MeshError(f"diagonal must be 'NE' or 'NW', got {diagonal!r}")
    out = np.empty((2 * a.size, 3), dtype=np.int64)
    out[0::2], out[1::2] = first, second
    return out


def build_unit_square_tri_mesh(nx: int, ny: int, diagonal: str = "NW") -> Mesh:
    """Uniform Tri3 mesh of the unit square, each grid cell split along ``diagonal``.

    ``'NE'`` cuts cells from lower-left to upper-right, ``'NW'`` from lower-right
    to upper-left.
    """
    nx, ny = _check_count("nx", nx), _check_count("ny", ny)
    j, i = np.divmod(np.arange(nx * ny), nx)
    elements = _split_cells(j * (nx + 1) + i, nx + 1, diagonal)
    mesh = Mesh(_grid_nodes(nx, ny), elements, "Tri3", _grid_segments(nx, ny))
    return mesh.with_boundary_edges().validate()


def build_square_with_hole_mesh(n_per_band: int, diagonal: str = "NW") -> Mesh:
    """Tri3 mesh of the unit square minus the block ``[4/9, 5/9]^2``.

    The square is cut into a 9 x 9 array of bands, each subdivided ``n_per_band``
    times, so the hole boundary coincides with grid lines.
    """
    nb = _check_count("n_per_band", n_per_band)
    n = 9 * nb
    lo, hi = 4 * nb, 5 * nb
    j, i = np.divmod(np.arange(n * n), n)
    keep = ~((i >= lo) & (i < hi) & (j >= lo) & (j < hi))
    elements = _split_cells((j * (n + 1) + i)[keep], n + 1, diagonal)

    grid = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    inside = np.zeros_like(grid, dtype=bool)
    inside[lo + 1 : hi, lo + 1 : hi] = True
    renum = -np.ones(grid.size, dtype=np.int64)
    kept = np.flatnonzero(~inside.ravel())
    renum[kept] = np.arange(kept.size)

    outer = np.concatenate([grid[0, :-1], grid[:-1, n], grid[n, :0:-1], grid[:0:-1, 0]])
    inner = np.concatenate(
        [grid[lo, lo:hi], grid[lo:hi, hi], grid[hi, hi:lo:-1], grid[hi:lo:-1, lo]]
    )
    mesh = Mesh(
        _grid_nodes(n, n)[kept],
        renum[elements],
        "Tri3",
        {"outer": renum[outer], "inner": renum[inner]},
    )
    return mesh.with_boundary_edges().validate()


def _node_offsets(seed: int, node_ids: np.ndarray) -> np.ndarray:
    """Two uniforms in [0, 1) per node from a counter-based stream keyed by (seed, id)."""
    out = np.empty((node_ids.size, 2))
    for row, nid in enumerate(node_ids):
        bitgen = np.random.Philox(key=int(seed), counter=[int(nid), 0, 0, 0])
        out[row] = np.random.Generator(bitgen).random(2)
    return out


def perturb_interior_nodes(
    mesh: Mesh,
    magnitude: float,
    seed: int = 0,
    window: tuple[float, ...] | None = None,
) -> Mesh:
    """Displace interior nodes by at most ``magnitude`` times the local mesh size.

    The local size of a node is its shortest incident edge. Offsets are drawn
    uniformly in a disc (an interval in 1D) and depend only on ``seed`` and the
    node id. ``window`` = ``(x_min, x_max[, y_min, y_max])`` restricts the
    perturbation to nodes inside a box.

    Raises
    ------
    MeshError
        If a perturbed element inverts; lower ``magnitude``.
    """
    if not 0.0 <= magnitude < 0.5:
        raise MeshError(f"magnitude must lie in [0, 0.5), got {magnitude}")
    if magnitude == 0.0:
        return mesh
    moving = np.ones(mesh.n_nodes, dtype=bool)
    moving[mesh.all_boundary_nodes()] = False
    if window is not None:
        w = np.asarray(window, dtype=float).reshape(-1, 2)
        for axis in range(min(mesh.ndim, w.shape[0])):
            x = mesh.nodes[:, axis]
            moving &= (x >= w[axis, 0]) & (x <= w[axis, 1])

    local_h = np.full(mesh.n_nodes, np.inf)
    lengths = mesh.edge_lengths()
    for col, loc in enumerate(LOCAL_EDGES[mesh.kind] if mesh.kind != "Line2" else [(0, 1)]):
        for node_col in loc:
            np.minimum.at(local_h, mesh.elements[:, node_col], lengths[:, col])

    ids = np.flatnonzero(moving)
    u = _node_offsets(seed, ids)
    radius = magnitude * local_h[ids]
    nodes = mesh.nodes.copy()
    if mesh.ndim == 1:
        nodes[ids, 0] += radius * (2.0 * u[:, 0] - 1.0)
    else:
        r = radius * np.sqrt(u[:, 0])
        phi = 2.0 * np.pi * u[:, 1]
        nodes[ids, 0] += r * np.cos(phi)
        nodes[ids, 1] += r * np.sin(phi)
    out = Mesh(nodes, mesh.elements, mesh.kind, dict(mesh.boundary_nodes), list(mesh.boundary_edges))
    return out.validate()


def save_mesh(mesh: Mesh, path) -> None:
    """Write the plain-text mesh format (see :func:`load_mesh`)."""
    Path(path).write_text(format_mesh(mesh))


def format_mesh(mesh: Mesh) -> str:
    lines = [
        "# dmpfem mesh: ndim nnodes nelements nsegments",
        f"{mesh.ndim} {mesh.n_nodes} {mesh.n_elements} {len(mesh.boundary_nodes)}",
    ]
    for i, x in enumerate(mesh.nodes):
        lines.append(" ".join([str(i)] + [repr(float(v)) for v in x]))
    for e, conn in enumerate(mesh.elements):
        lines.append(" ".join([str(e), mesh.kind] + [str(int(n)) for n in conn]))
    for name, ids in mesh.boundary_nodes.items():
        lines.append(" ".join([name] + [str(int(n)) for n in ids]))
    return "\n".join(lines) + "\n"


def load_mesh(path) -> Mesh:
    """Read a mesh file.

    Layout: a header ``ndim nnodes nelements nsegments``, then ``nnodes`` lines
    ``id x [y]``, ``nelements`` lines ``id kind n0 n1 [n2 [n3]]`` and
    ``nsegments`` lines ``segment_name id ...``. ``#`` starts a comment.
    """
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise MeshError(f"{path}: empty mesh file")
    try:
        ndim, nn, ne, nseg = (int(v) for v in rows[0])
    except ValueError as exc:
        raise MeshError(f"{path}: bad header {rows[0]}") from exc
    if len(rows) != 1 + nn + ne + nseg:
        raise MeshError(f"{path}: expected {1 + nn + ne + nseg} records, found {len(rows)}")
    nodes = np.zeros((nn, ndim))
    for rec in rows[1 : 1 + nn]:
        nodes[int(rec[0])] = [float(v) for v in rec[1 : 1 + ndim]]
    kinds = set()
    conn = []
    for rec in rows[1 + nn : 1 + nn + ne]:
        kinds.add(rec[1])
        conn.append((int(rec[0]), [int(v) for v in rec[2:]]))
    if len(kinds) > 1:
        raise MeshError(f"{path}: mixed element kinds {sorted(kinds)} are not supported")
    kind = kinds.pop() if kinds else "Tri3"
    elements = np.zeros((ne, ELEMENT_KINDS.get(kind, 0)), dtype=np.int64)
    for e, ids in conn:
        if len(ids) != elements.shape[1]:
            raise MeshError(f"{path}: element {e} has {len(ids)} nodes, {kind} needs {elements.shape[1]}")
        elements[e] = ids
    segments = {rec[0]: [int(v) for v in rec[1:]] for rec in rows[1 + nn + ne :]}
    return Mesh(nodes, elements, kind, segments).with_boundary_edges().validate()
