"""Penalty contact between a point-sampled circular probe and the mesh.

Each probe point that lands inside a deformed triangle is paired with the
nearest of that triangle's three edges (as segments). Penetration depth is
the distance to the closest point on that segment; the penalty energy is
quadratic in depth. The force on the probe point pushes it back toward the
surface, and the equal-and-opposite reaction is split across the segment
endpoints by the closest-point parameter, so the pair sums to zero exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class ContactResult:
    """Per-point contact state for one probe placement.

    Arrays are indexed by probe point. ``triangle`` is -1 where the point is
    outside the mesh; for contained points, ``edge`` holds the vertex ids of
    the assigned boundary segment, ``edge_t`` the closest-point parameter in
    [0, 1], ``direction`` the unit push-out direction and ``force`` the force
    the mesh exerts on that probe point.
    """

    energy: float
    triangle: np.ndarray
    depth: np.ndarray
    direction: np.ndarray
    edge: np.ndarray
    edge_t: np.ndarray
    force: np.ndarray
    gradient: np.ndarray

    @property
    def any_penetration(self) -> bool:
        return bool(np.any(self.depth > 0.0))

    @property
    def total_probe_force(self) -> np.ndarray:
        return self.force.sum(axis=0)


def probe_points(pose: np.ndarray, radius: float, n_points: int) -> np.ndarray:
    """Ring of sample points on the probe circle; point 0 at angle 0."""
    angles = 2.0 * np.pi * np.arange(n_points) / n_points
    ring = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return np.asarray(pose, dtype=np.float64) + radius * ring


def evaluate_contact(positions: np.ndarray, triangles: np.ndarray,
                     points: np.ndarray, stiffness: float) -> ContactResult:
    """Full contact evaluation at fixed probe points.

    ``gradient`` is d(energy)/d(vertex positions); mesh reaction forces are
    its negation restricted to the touched edge endpoints.
    """
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    tris = np.ascontiguousarray(triangles, dtype=np.int64)
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    grad = np.zeros_like(pos)
    pt_tri = np.empty(n, dtype=np.int64)
    pt_depth = np.empty(n, dtype=np.float64)
    pt_dir = np.empty((n, 2), dtype=np.float64)
    pt_edge = np.empty((n, 2), dtype=np.int64)
    pt_t = np.empty(n, dtype=np.float64)
    pt_force = np.empty((n, 2), dtype=np.float64)
    energy = _kernels.contact_eval(pos, tris, pts, float(stiffness), grad,
                                   pt_tri, pt_depth, pt_dir, pt_edge,
                                   pt_t, pt_force)
    return ContactResult(energy=float(energy), triangle=pt_tri,
                         depth=pt_depth, direction=pt_dir, edge=pt_edge,
                         edge_t=pt_t, force=pt_force, gradient=grad)
