"""Reference shape functions and quadrature rules for Line2, Tri3 and Quad4."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_G = 1.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class ReferenceRule:
    """Quadrature points and weights on the reference element, with shape
    function values ``N`` (q, k) and reference derivatives ``dN`` (q, k, dim)."""

    points: np.ndarray
    weights: np.ndarray
    N: np.ndarray
    dN: np.ndarray


def _line2(xi):
    xi = np.asarray(xi)
    N = np.stack([0.5 * (1 - xi), 0.5 * (1 + xi)], axis=-1)
    dN = np.broadcast_to(np.array([[-0.5], [0.5]]), xi.shape + (2, 1)).copy()
    return N, dN


def _tri3(pts):
    xi, eta = pts[:, 0], pts[:, 1]
    N = np.stack([1 - xi - eta, xi, eta], axis=-1)
    dN = np.broadcast_to(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (len(pts), 3, 2)).copy()
    return N, dN


def _quad4(pts):
    xi, eta = pts[:, 0], pts[:, 1]
    N = 0.25 * np.stack(
        [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)],
        axis=-1,
    )
    dxi = 0.25 * np.stack([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)], axis=-1)
    deta = 0.25 * np.stack([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)], axis=-1)
    return N, np.stack([dxi, deta], axis=-1)


def shape_functions(kind: str, points) -> tuple[np.ndarray, np.ndarray]:
    """Shape values and reference derivatives at arbitrary reference points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if kind == "Line2":
        return _line2(pts[:, 0])
    if kind == "Tri3":
        return _tri3(pts)
    if kind == "Quad4":
        return _quad4(pts)
    raise ValueError(f"unknown element kind {kind!r}")


def reference_rule(kind: str) -> ReferenceRule:
    """Element quadrature: 2-point Gauss (Line2), edge-midpoint rule (Tri3), 2x2 Gauss (Quad4)."""
    if kind == "Line2":
        pts = np.array([[-_G], [_G]])
        w = np.array([1.0, 1.0])
    elif kind == "Tri3":
        pts = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        w = np.full(3, 1.0 / 6.0)
    elif kind == "Quad4":
        pts = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
        w = np.ones(4)
    else:
        raise ValueError(f"unknown element kind {kind!r}")
    N, dN = shape_functions(kind, pts)
    return ReferenceRule(pts, w, N, dN)


def gauss_line_2pt() -> tuple[np.ndarray, np.ndarray]:
    """Two-point Gauss rule on [0, 1] as (points, weights); used for boundary edges."""
    return np.array([0.5 - 0.5 * _G, 0.5 + 0.5 * _G]), np.array([0.5, 0.5])
