"""Quasi-static equilibrium via Adam descent on the total energy.

The total energy is elastic plus (when a probe is present) contact penalty.
Pinned vertices are excluded from the update entirely. The solve stops when
the largest per-coordinate position change of an iteration drops below the
tolerance, or when the iteration budget runs out; callers get both the
iteration count and the converged flag and decide what a non-converged solve
means for them. Optimizer moments start at zero on every call, so a warm
start differs from a cold one only through the initial positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import SolverConfig
from .contact import evaluate_contact
from .elasticity import ElasticModel

_EMPTY_PTS = np.zeros((0, 2), dtype=np.float64)


@dataclass(frozen=True)
class SolverState:
    """Optimizer state: positions plus Adam moment accumulators."""

    positions: np.ndarray      # (N, 2)
    first_moment: np.ndarray   # (N, 2)
    second_moment: np.ndarray  # (N, 2)
    step_count: int
    config: SolverConfig


def init_state(positions: np.ndarray, cfg: SolverConfig | None = None) -> SolverState:
    """Fresh state at the given positions, moments zeroed."""
    pos = np.array(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ValueError(f"positions must be (N, 2), got {pos.shape}")
    return SolverState(
        positions=pos,
        first_moment=np.zeros_like(pos),
        second_moment=np.zeros_like(pos),
        step_count=0,
        config=cfg if cfg is not None else SolverConfig(),
    )


def adam_step(state: SolverState, gradient: np.ndarray) -> SolverState:
    """One bias-corrected Adam update; pinned rows stay put when their
    gradient entries are zero (zero gradient, zero moments move nothing).

    Raises ValueError on a non-finite or mis-shaped gradient.
    """
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != state.positions.shape:
        raise ValueError(f"gradient shape {g.shape} does not match positions")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite")
    cfg = state.config
    t = state.step_count + 1
    m = cfg.beta1 * state.first_moment + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.second_moment + (1.0 - cfg.beta2) * g * g
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    pos = state.positions - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return SolverState(positions=pos, first_moment=m, second_moment=v,
                       step_count=t, config=cfg)


@dataclass(frozen=True)
class SolveResult:
    positions: np.ndarray     # (N, 2) equilibrium estimate
    energy: float             # total energy at the start of the last iteration
    iterations: int
    converged: bool
    energies: np.ndarray      # energy at the start of each iteration run
    residual: float           # max abs total-gradient entry over free vertices


def solve_equilibrium(
    model: ElasticModel,
    fixed_mask: np.ndarray,
    init_positions: np.ndarray,
    probe: np.ndarray | None = None,
    stiffness: float = 0.0,
    cfg: SolverConfig | None = None,
) -> SolveResult:
    """Relax ``init_positions`` to an equilibrium of the total energy.

    @param model: precomputed elastic model for the body state
    @param fixed_mask: (N,) bool, True where the vertex is pinned
    @param init_positions: (N, 2) starting guess; not modified
    @param probe: optional (P, 2) probe sample points, fixed during the solve
    @param stiffness: contact penalty stiffness, used only with a probe
    @param cfg: optimizer settings; defaults to SolverConfig()
    """
    cfg = cfg if cfg is not None else SolverConfig()
    pos = np.array(init_positions, dtype=np.float64)
    if pos.shape != (model.mesh.n_vertices, 2):
        raise ValueError(f"positions shape {pos.shape} does not match mesh")
    fixed = np.ascontiguousarray(fixed_mask, dtype=np.bool_)
    pts = _EMPTY_PTS if probe is None else np.ascontiguousarray(probe, dtype=np.float64)
    n_pts = pts.shape[0]

    energies = np.zeros(cfg.max_iters, dtype=np.float64)
    pt_tri = np.empty(n_pts, dtype=np.int64)
    pt_depth = np.empty(n_pts, dtype=np.float64)
    pt_dir = np.empty((n_pts, 2), dtype=np.float64)
    pt_edge = np.empty((n_pts, 2), dtype=np.int64)
    pt_t = np.empty(n_pts, dtype=np.float64)
    pt_force = np.empty((n_pts, 2), dtype=np.float64)

    iters, converged = _kernels.solve_adam(
        pos, model.triangles, model.binv, model.area, model.lam, model.mu,
        fixed, pts, float(stiffness),
        cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.tol, cfg.max_iters,
        energies, pt_tri, pt_depth, pt_dir, pt_edge, pt_t, pt_force)

    _, grad = model.energy_and_gradient(pos)
    if n_pts:
        grad = grad + evaluate_contact(pos, model.triangles, pts,
                                       float(stiffness)).gradient
    free = ~fixed
    residual = float(np.abs(grad[free]).max()) if free.any() else 0.0

    return SolveResult(
        positions=pos,
        energy=float(energies[iters - 1]),
        iterations=int(iters),
        converged=bool(converged),
        energies=energies[:iters].copy(),
        residual=residual,
    )
