"""Linear elastic energy on triangle meshes.

Deformation is measured per element against the rest shape: with D the
deformed edge matrix and B the rest edge matrix, F = D B^-1, and the
small-strain tensor is the symmetric part of F minus identity. The energy
density combines a shear term (mu) and a volumetric term (lambda), both
derived from Young's modulus and Poisson's ratio under plane strain.
Forces are the exact negative gradient of the total energy.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .bodygen import BodyModel, Mesh
from .errors import MeshError


def lame_parameters(young, poisson):
    """Plane-strain Lame pair (lambda, mu) from (E, nu). Vectorized.

    Raises ValueError for E <= 0 or nu outside (-1, 0.49]; the upper cutoff
    sits below the incompressible limit because lambda blows up there.
    """
    young = np.asarray(young, dtype=np.float64)
    poisson = np.asarray(poisson, dtype=np.float64)
    if np.any(young <= 0):
        raise ValueError("Young's modulus must be positive")
    if np.any(poisson <= -1) or np.any(poisson > 0.49):
        raise ValueError("Poisson's ratio must lie in (-1, 0.49]")
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    return lam, mu


def rest_basis(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Per-element inverse rest edge matrix and area.

    Returns (binv, area) with shapes (M, 2, 2) and (M,). Raises MeshError on
    degenerate or negatively oriented elements.
    """
    p = mesh.rest_positions
    t = mesh.triangles
    e1 = p[t[:, 1]] - p[t[:, 0]]
    e2 = p[t[:, 2]] - p[t[:, 0]]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 1e-14):
        raise MeshError("degenerate or clockwise rest triangle")
    binv = np.empty((t.shape[0], 2, 2))
    binv[:, 0, 0] = e2[:, 1] / det
    binv[:, 0, 1] = -e2[:, 0] / det
    binv[:, 1, 0] = -e1[:, 1] / det
    binv[:, 1, 1] = e1[:, 0] / det
    area = 0.5 * det
    return binv, area


class ElasticModel:
    """Precomputed energy model for one body's mesh and materials.

    Holds the contiguous arrays the compiled kernels consume; build once per
    body state and reuse across solves.
    """

    def __init__(self, mesh: Mesh, young: np.ndarray, poisson: np.ndarray):
        if young.shape != (mesh.n_triangles,) or poisson.shape != (mesh.n_triangles,):
            raise MeshError("material arrays must have one entry per triangle")
        self.mesh = mesh
        self.triangles = np.ascontiguousarray(mesh.triangles)
        self.binv, self.area = rest_basis(mesh)
        self.lam, self.mu = lame_parameters(young, poisson)
        self.lam = np.ascontiguousarray(self.lam)
        self.mu = np.ascontiguousarray(self.mu)

    @classmethod
    def from_body(cls, body: BodyModel) -> "ElasticModel":
        return cls(body.mesh, body.young, body.poisson)

    def energy(self, positions: np.ndarray) -> float:
        """Total elastic energy at the given deformed positions."""
        grad = np.zeros_like(positions)
        return float(_kernels.elastic_energy_grad(
            np.ascontiguousarray(positions, dtype=np.float64),
            self.triangles, self.binv, self.area, self.lam, self.mu, grad))

    def energy_and_gradient(self, positions, fixed_mask=None):
        """Energy plus d(energy)/d(positions), shape (N, 2).

        When fixed_mask is given, gradient rows of pinned vertices are zeroed
        so a caller stepping along the gradient cannot move them. Raises
        ValueError on non-finite positions.
        """
        pos = np.ascontiguousarray(positions, dtype=np.float64)
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        grad = np.zeros_like(pos)
        e = _kernels.elastic_energy_grad(
            pos, self.triangles, self.binv, self.area, self.lam, self.mu, grad)
        if fixed_mask is not None:
            grad[np.asarray(fixed_mask, dtype=bool)] = 0.0
        return float(e), grad

    def forces(self, positions: np.ndarray) -> np.ndarray:
        """Nodal forces, the negative energy gradient."""
        _, grad = self.energy_and_gradient(positions)
        return -grad

    def element_energies(self, positions: np.ndarray) -> np.ndarray:
        """Per-element energy contributions (numpy path, for diagnostics)."""
        p = np.asarray(positions, dtype=np.float64)
        t = self.triangles
        d = np.stack([p[t[:, 1]] - p[t[:, 0]], p[t[:, 2]] - p[t[:, 0]]], axis=2)
        f = d @ self.binv
        eps = 0.5 * (f + np.transpose(f, (0, 2, 1)))
        eps[:, 0, 0] -= 1.0
        eps[:, 1, 1] -= 1.0
        tr = eps[:, 0, 0] + eps[:, 1, 1]
        sq = np.einsum("eij,eij->e", eps, eps)
        return self.area * (self.mu * sq + 0.5 * self.lam * tr * tr)
