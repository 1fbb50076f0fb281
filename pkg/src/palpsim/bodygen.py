"""Soft-body generation: semicircular meshes with embedded stiff lumps.

A body is a half-disc of radius ~1 sitting on the x axis, meshed with
Delaunay triangles over a jittered point layout, with per-element materials
drawn around per-body means. An optional circular lump overrides the
materials of every element whose centroid it contains. Bottom vertices
(rest y == 0) are the boundary condition: they stay pinned in every solve.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import Delaunay, QhullError

from . import rng as rngmod
from .config import BodyConfig
from .errors import MeshError

FIXED_Y_TOL = 1e-9

# resampling caps; generous for any sane config, finite so bad configs fail loudly
_PLACEMENT_TRIES = 64
_GROWTH_TRIES = 64


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh with rest positions and the pinned-vertex mask.

    Attributes
    ----------
    rest_positions:
        float64 array of shape (N, 2).
    triangles:
        int64 array of shape (M, 3), counter-clockwise vertex order.
    fixed_mask:
        bool array of shape (N,), True where the vertex is pinned.
    """

    rest_positions: np.ndarray
    triangles: np.ndarray
    fixed_mask: np.ndarray

    def __post_init__(self):
        for arr in (self.rest_positions, self.triangles, self.fixed_mask):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.rest_positions.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True)
class LumpSpec:
    """Circular inclusion: center, radius and its fixed material pair."""

    center: tuple[float, float]
    radius: float
    young: float
    poisson: float


@dataclass(frozen=True)
class BodyModel:
    """One generated body: mesh, per-element materials, optional lump.

    ``young`` and ``poisson`` are float64 arrays of shape (M,). ``change_flag``
    marks bodies selected for a between-trial lump growth. ``mu_young`` and
    ``mu_poisson`` are the per-body background means used whenever materials
    are resampled.
    """

    mesh: Mesh
    young: np.ndarray
    poisson: np.ndarray
    lump: LumpSpec | None
    change_flag: bool
    body_radius: float
    seed: int
    mu_young: float
    mu_poisson: float

    def __post_init__(self):
        self.young.setflags(write=False)
        self.poisson.setflags(write=False)
        if self.young.shape != (self.mesh.n_triangles,):
            raise MeshError("young array does not match triangle count")
        if self.poisson.shape != (self.mesh.n_triangles,):
            raise MeshError("poisson array does not match triangle count")


def triangle_areas(positions: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed areas, positive for counter-clockwise triangles."""
    a = positions[triangles[:, 0]]
    b = positions[triangles[:, 1]]
    c = positions[triangles[:, 2]]
    u = b - a
    v = c - a
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def delaunay_triangulate(
    points: np.ndarray,
    keep: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """Delaunay triangulation with validation and CCW orientation.

    Parameters
    ----------
    points:
        (N, 2) float array, N >= 3, no duplicates, not all collinear.
    keep:
        Optional predicate mapping triangle centroids (M, 2) to a bool mask;
        triangles where it is False are dropped. Lets callers carve concave
        outlines out of the convex triangulation.

    Returns
    -------
    (M, 3) int64 triangle array in counter-clockwise vertex order.

    Raises
    ------
    MeshError
        On fewer than 3 points, duplicate points, collinear input, or an
        empty result after filtering.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise MeshError(f"points must have shape (N, 2), got {pts.shape}")
    if pts.shape[0] < 3:
        raise MeshError(f"need at least 3 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise MeshError("points contain non-finite values")

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    diffs = np.diff(pts[order], axis=0)
    if np.any(np.all(np.abs(diffs) <= 1e-12, axis=1)):
        raise MeshError("duplicate points in input")

    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise MeshError(f"triangulation failed: {exc}") from exc
    simplices = tri.simplices.astype(np.int64)
    if simplices.shape[0] == 0:
        raise MeshError("triangulation produced no triangles (collinear input?)")

    # enforce CCW by swapping two vertices of negatively oriented triangles
    areas = triangle_areas(pts, simplices)
    flip = areas < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    areas = np.abs(areas)
    if np.any(areas < 1e-14):
        raise MeshError("triangulation produced a degenerate triangle")

    if keep is not None:
        centroids = pts[simplices].mean(axis=1)
        mask = np.asarray(keep(centroids), dtype=bool)
        simplices = simplices[mask]
        if simplices.shape[0] == 0:
            raise MeshError("keep predicate removed every triangle")
    return np.ascontiguousarray(simplices)


def _semicircle_points(radius: float, cfg: BodyConfig) -> tuple[np.ndarray, np.ndarray]:
    """Unjittered layout. Returns (points, bottom_mask) with bottom y exactly 0."""
    l_grid = cfg.l_grid
    l_perim = cfg.l_perimeter
    if l_grid <= 0 or l_perim <= 0:
        raise MeshError("l_grid and l_perimeter must be positive")
    if radius <= l_perim:
        raise MeshError(f"body radius {radius:.4g} too small for spacing {l_perim:.4g}")

    chunks = []
    # interior grid, rows starting one spacing above the flat side
    i_max = int(np.floor(radius / l_grid))
    r_keep = radius - 0.5 * l_perim
    for j in range(1, i_max + 1):
        y = j * l_grid
        for i in range(-i_max, i_max + 1):
            x = i * l_grid
            if np.hypot(x, y) <= r_keep:
                chunks.append((x, y))
    # arc at perimeter spacing, endpoints on the axis included
    n_arc = max(2, int(np.ceil(np.pi * radius / l_perim)))
    angles = np.linspace(0.0, np.pi, n_arc + 1)
    for a in angles:
        x = radius * np.cos(a)
        y = radius * np.sin(a)
        if abs(y) < 1e-12:
            y = 0.0  # snap sin(pi) residue so endpoints are true bottom points
        chunks.append((x, y))
    # flat side interior points between the two arc endpoints
    n_bot = max(1, int(np.ceil(2.0 * radius / l_perim)))
    xs = np.linspace(-radius, radius, n_bot + 1)[1:-1]
    for x in xs:
        chunks.append((float(x), 0.0))

    pts = np.array(chunks, dtype=np.float64)
    bottom = pts[:, 1] == 0.0
    return pts, bottom


def _draw_lump_geometry(
    gen: np.random.Generator, radius: float, r_lo: float, r_hi: float, cfg: BodyConfig
) -> tuple[float, float, float]:
    """Draw (rho, theta, r_lump) so the lump disc fits inside the body."""
    for _ in range(_PLACEMENT_TRIES):
        r_lump = gen.uniform(r_lo, r_hi)
        rho = gen.uniform(cfg.center_lump_lo, cfg.center_lump_hi)
        if r_lump < rho and rho + r_lump <= radius:
            margin = np.arcsin(r_lump / rho)
            theta = gen.uniform(margin, np.pi - margin)
            return rho, theta, r_lump
    raise MeshError(
        f"could not place a lump of radius in [{r_lo:.3g}, {r_hi:.3g}] "
        f"inside a body of radius {radius:.3g}"
    )


def _lump_elements(mesh: Mesh, lump: LumpSpec) -> np.ndarray:
    """Bool mask over elements whose centroid lies inside the lump disc."""
    centroids = mesh.rest_positions[mesh.triangles].mean(axis=1)
    d = centroids - np.asarray(lump.center)
    return np.einsum("ij,ij->i", d, d) < lump.radius**2


def _clip_materials(young: np.ndarray, poisson: np.ndarray) -> None:
    # keep draws physical: E > 0, plane-strain nu bounded away from 0 and 1/2
    np.clip(young, 1e-6, None, out=young)
    np.clip(poisson, 0.01, 0.45, out=poisson)


def generate_body(seed: int, cfg: BodyConfig | None = None) -> BodyModel:
    """Generate one body deterministically from its seed.

    Draw order is fixed (radius, jitter, material means, per-element
    materials, change flag, lump presence, lump geometry), so any two calls
    with the same seed and config produce identical bodies.
    """
    cfg = cfg if cfg is not None else BodyConfig()
    gen = rngmod.stream(seed, rngmod.GEOMETRY)

    radius = float(gen.normal(cfg.r_model_mu, cfg.r_model_sigma))
    if radius <= 0:
        raise MeshError(f"drew non-positive body radius {radius:.4g}")

    pts, bottom = _semicircle_points(radius, cfg)
    jitter = gen.normal(0.0, cfg.sigma_jitter, size=pts.shape)
    jitter[bottom, 1] = 0.0  # flat side must stay on the axis
    pts = pts + jitter

    triangles = delaunay_triangulate(pts)
    n_elem = triangles.shape[0]
    if n_elem < 3:
        raise MeshError(f"mesh too coarse: {n_elem} triangles")
    fixed = np.abs(pts[:, 1]) <= FIXED_Y_TOL
    mesh = Mesh(rest_positions=pts, triangles=triangles, fixed_mask=fixed)

    mu_young = float(gen.uniform(cfg.mu_ym_lo, cfg.mu_ym_hi))
    mu_poisson = float(gen.uniform(cfg.mu_pr_lo, cfg.mu_pr_hi))
    young = gen.normal(mu_young, cfg.sigma_ym, size=n_elem)
    poisson = gen.normal(mu_poisson, cfg.sigma_pr, size=n_elem)
    _clip_materials(young, poisson)

    change_flag = bool(gen.uniform() < cfg.p_change)
    has_lump = bool(gen.uniform() < cfg.p_lump)  # drawn even when flag forces it
    if change_flag:
        has_lump = True

    lump = None
    if has_lump:
        if change_flag:
            r_lo, r_hi = cfg.r_lump_change_lo, cfg.r_lump_change_hi
        else:
            r_lo, r_hi = cfg.r_lump_nochange_lo, cfg.r_lump_nochange_hi
        rho, theta, r_lump = _draw_lump_geometry(gen, radius, r_lo, r_hi, cfg)
        center = (rho * np.cos(theta), rho * np.sin(theta))
        lump = LumpSpec(center=center, radius=r_lump,
                        young=cfg.ym_lump, poisson=cfg.pr_lump)
        inside = _lump_elements(mesh, lump)
        young[inside] = lump.young
        poisson[inside] = lump.poisson

    return BodyModel(
        mesh=mesh, young=young, poisson=poisson, lump=lump,
        change_flag=change_flag, body_radius=radius, seed=int(seed),
        mu_young=mu_young, mu_poisson=mu_poisson,
    )


def perturb_materials(body: BodyModel, cfg: BodyConfig,
                      gen: np.random.Generator) -> BodyModel:
    """Resample background materials around the body's means.

    Lump elements keep their exact lump constants; geometry, lump and flags
    are untouched. Returns a new body sharing the mesh.
    """
    young = gen.normal(body.mu_young, cfg.sigma_ym, size=body.mesh.n_triangles)
    poisson = gen.normal(body.mu_poisson, cfg.sigma_pr, size=body.mesh.n_triangles)
    _clip_materials(young, poisson)
    if body.lump is not None:
        inside = _lump_elements(body.mesh, body.lump)
        young[inside] = body.lump.young
        poisson[inside] = body.lump.poisson
    return dataclasses.replace(body, young=young, poisson=poisson)


def apply_change(body: BodyModel, cfg: BodyConfig,
                 gen: np.random.Generator) -> BodyModel:
    """Grow the lump of a change-flagged body; center stays put.

    The radius increment is a positive normal draw, redrawn while the grown
    disc would poke out of the body; if no draw fits the radius is clamped to
    the largest fitting value. Elements newly covered by the grown disc take
    the lump materials, so the lump element set only ever grows.

    Raises
    ------
    ValueError
        If the body is not change-flagged or has no lump.
    """
    if not body.change_flag:
        raise ValueError("apply_change requires a change-flagged body")
    if body.lump is None:
        raise ValueError("apply_change requires a body with a lump")

    cx, cy = body.lump.center
    rho = float(np.hypot(cx, cy))
    # largest radius keeping the disc inside the half-disc: above the flat
    # side (cy) and inside the arc (R - rho)
    fit = min(cy, body.body_radius - rho)
    r_new = None
    for _ in range(_GROWTH_TRIES):
        delta = gen.normal(cfg.delta_r_lump_mu, cfg.delta_r_lump_sigma)
        if delta <= 0:
            continue
        cand = body.lump.radius + delta
        if cand <= fit:
            r_new = cand
            break
    if r_new is None:
        # no draw fits; grow to the fit bound, strictly past the old radius
        r_new = max(body.lump.radius * (1.0 + 1e-12), fit - 1e-9)

    lump = dataclasses.replace(body.lump, radius=float(r_new))
    young = body.young.copy()
    poisson = body.poisson.copy()
    inside = _lump_elements(body.mesh, lump)
    young[inside] = lump.young
    poisson[inside] = lump.poisson
    return dataclasses.replace(body, lump=lump, young=young, poisson=poisson)
