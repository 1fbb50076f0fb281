"""Press trajectories: drive the probe into the body and read forces.

A trajectory presses the probe along a ray through the origin at a fixed
angle. The probe starts clear of the body, advances inward one step at a
time with warm-started equilibrium solves, and starts recording at the first
pose whose equilibrium shows actual penetration. From there a fixed travel
budget is recorded; at every recorded pose the sensor reports the per-point
contact forces with additive Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bodygen import BodyModel
from .config import PressConfig, ProbeConfig, SolverConfig
from .contact import ContactResult, evaluate_contact, probe_points
from .elasticity import ElasticModel
from .errors import SimulationError
from .solver import solve_equilibrium


@dataclass(frozen=True)
class Trajectory:
    """Recorded press: poses (T, 2), force readings (T, K), solve flags (T,).

    Arrays are float32/uint8, matching the wire format exactly. ``angle`` is
    derived bookkeeping (the press direction); it is not serialized and is
    None on trajectories read back from disk.
    """

    poses: np.ndarray
    forces: np.ndarray
    flags: np.ndarray
    angle: float | None = None

    def __post_init__(self):
        if self.poses.dtype != np.float32 or self.forces.dtype != np.float32:
            raise ValueError("poses and forces must be float32")
        if self.flags.dtype != np.uint8:
            raise ValueError("flags must be uint8")
        t = self.poses.shape[0]
        if self.forces.shape[0] != t or self.flags.shape[0] != t:
            raise ValueError("poses, forces and flags must share length")
        if t < 2:
            raise ValueError("a trajectory must record at least two steps")

    @property
    def n_steps(self) -> int:
        return self.poses.shape[0]

    @property
    def n_unconverged(self) -> int:
        return int(np.sum(self.flags == 0))


@dataclass(frozen=True)
class Trial:
    """One palpation round over a body state: a fan of press trajectories.

    ``material_epoch`` records which material draw the body carried (0 for
    the base body, t for the t-th redraw); ``body_id`` and ``trial_index``
    locate the round inside a dataset.
    """

    trajectories: list[Trajectory]
    body_id: int = 0
    trial_index: int = 0
    material_epoch: int = 0

    @property
    def n_unconverged(self) -> int:
        return sum(t.n_unconverged for t in self.trajectories)


def read_sensor(contact: ContactResult, noise_sigma: float,
                rng: np.random.Generator | None) -> np.ndarray:
    """Flattened per-point force reading with additive Gaussian noise."""
    reading = contact.force.reshape(-1).astype(np.float64)
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        reading = reading + rng.normal(0.0, noise_sigma, size=reading.shape)
    return reading


def trajectory_angles(n_traj: int) -> np.ndarray:
    """Evenly spaced press directions over the upper half plane."""
    j = np.arange(n_traj)
    return np.pi * (j + 0.5) / n_traj


def _solve_and_read(model, body, pos, pose_xy, probe_cfg, solver_cfg):
    """Equilibrium at one probe pose, warm-started from ``pos``."""
    pts = probe_points(pose_xy, probe_cfg.radius, probe_cfg.n_points)
    res = solve_equilibrium(model, body.mesh.fixed_mask, pos, probe=pts,
                            stiffness=probe_cfg.stiffness, cfg=solver_cfg)
    contact = evaluate_contact(res.positions, body.mesh.triangles, pts,
                               probe_cfg.stiffness)
    return res, contact


def quasi_static_sweep(
    body: BodyModel,
    poses,
    probe_cfg: ProbeConfig | None = None,
    solver_cfg: SolverConfig | None = None,
    rng: np.random.Generator | None = None,
    model: ElasticModel | None = None,
) -> Trajectory:
    """Solve a chain of probe poses, each warm-started from the last.

    The first solve starts from the rest shape. One sensor reading is taken
    per pose; the returned trajectory has no press angle (the pose sequence
    need not be a straight line here, callers supply whatever path they
    want, at least two poses long).
    """
    probe_cfg = probe_cfg if probe_cfg is not None else ProbeConfig()
    solver_cfg = solver_cfg if solver_cfg is not None else SolverConfig()
    if model is None:
        model = ElasticModel.from_body(body)
    pose_arr = np.asarray(poses, dtype=np.float64)
    if pose_arr.ndim != 2 or pose_arr.shape[1] != 2 or pose_arr.shape[0] < 2:
        raise ValueError(f"poses must be (T >= 2, 2), got {pose_arr.shape}")

    t_total = pose_arr.shape[0]
    out_poses = np.zeros((t_total, 2), dtype=np.float32)
    out_forces = np.zeros((t_total, 2 * probe_cfg.n_points), dtype=np.float32)
    flags = np.zeros(t_total, dtype=np.uint8)
    pos = body.mesh.rest_positions.copy()
    for t in range(t_total):
        res, contact = _solve_and_read(model, body, pos, pose_arr[t],
                                       probe_cfg, solver_cfg)
        pos = res.positions
        out_poses[t] = pose_arr[t].astype(np.float32)
        out_forces[t] = read_sensor(contact, probe_cfg.noise_sigma,
                                    rng).astype(np.float32)
        flags[t] = 1 if res.converged else 0
    return Trajectory(poses=out_poses, forces=out_forces, flags=flags, angle=None)


def press_trajectory(
    body: BodyModel,
    angle: float,
    probe_cfg: ProbeConfig | None = None,
    press_cfg: PressConfig | None = None,
    solver_cfg: SolverConfig | None = None,
    rng: np.random.Generator | None = None,
    model: ElasticModel | None = None,
) -> Trajectory:
    """Run one full press at the given angle and record the readings.

    The approach phase consumes no sensor noise; recording starts at the
    first pose whose solved state penetrates. Raises SimulationError if the
    probe crosses the whole domain without ever touching the body, and
    ValueError for an angle outside the upper half plane [0, pi].
    ``model`` lets callers reuse one ElasticModel across trajectories.
    """
    if not 0.0 <= angle <= math.pi:
        raise ValueError(f"press angle must lie in [0, pi], got {angle}")
    probe_cfg = probe_cfg if probe_cfg is not None else ProbeConfig()
    press_cfg = press_cfg if press_cfg is not None else PressConfig()
    solver_cfg = solver_cfg if solver_cfg is not None else SolverConfig()
    if model is None:
        model = ElasticModel.from_body(body)

    direction = np.array([math.cos(angle), math.sin(angle)])
    start_r = body.body_radius + press_cfg.start_clearance * probe_cfg.radius
    step = press_cfg.step
    n_record = 1 + int(round(press_cfg.depth / step))

    pos = body.mesh.rest_positions.copy()

    # approach until the equilibrium shows penetration
    max_approach = int(math.ceil((start_r + body.body_radius) / step)) + 1
    k = 0
    while True:
        r = start_r - k * step
        res, contact = _solve_and_read(model, body, pos, r * direction,
                                       probe_cfg, solver_cfg)
        pos = res.positions
        if contact.any_penetration:
            break
        k += 1
        if k > max_approach:
            raise SimulationError(
                f"probe at angle {angle:.4f} never touched the body")

    poses = np.zeros((n_record, 2), dtype=np.float32)
    forces = np.zeros((n_record, 2 * probe_cfg.n_points), dtype=np.float32)
    flags = np.zeros(n_record, dtype=np.uint8)
    for t in range(n_record):
        if t > 0:
            k += 1
            r = start_r - k * step
            res, contact = _solve_and_read(model, body, pos, r * direction,
                                           probe_cfg, solver_cfg)
            pos = res.positions
        poses[t] = (r * direction).astype(np.float32)
        forces[t] = read_sensor(contact, probe_cfg.noise_sigma, rng).astype(np.float32)
        flags[t] = 1 if res.converged else 0
    return Trajectory(poses=poses, forces=forces, flags=flags, angle=float(angle))


def collect_trial(
    body: BodyModel,
    n_traj: int,
    probe_cfg: ProbeConfig | None = None,
    press_cfg: PressConfig | None = None,
    solver_cfg: SolverConfig | None = None,
    rng: np.random.Generator | None = None,
    body_id: int = 0,
    trial_index: int = 0,
    material_epoch: int = 0,
) -> Trial:
    """Press the body from ``n_traj`` evenly spaced directions."""
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    model = ElasticModel.from_body(body)
    trajectories = [
        press_trajectory(body, float(a), probe_cfg, press_cfg, solver_cfg,
                         rng=rng, model=model)
        for a in trajectory_angles(n_traj)
    ]
    return Trial(trajectories=trajectories, body_id=body_id,
                 trial_index=trial_index, material_epoch=material_epoch)
