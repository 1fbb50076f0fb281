import dataclasses

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from palpsim.bodygen import generate_body
from palpsim.config import BodyConfig, PressConfig, ProbeConfig, SolverConfig

# compiled kernels warm up on first use; a per-example deadline would flag that
settings.register_profile(
    "palpsim",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("palpsim")


@pytest.fixture(scope="session")
def default_body():
    return generate_body(12345, BodyConfig())


@pytest.fixture(scope="session")
def homogeneous_cfg():
    """Lump-free body with uniform materials; the symmetry workhorse."""
    return BodyConfig(p_lump=0.0, p_change=0.0, sigma_ym=0.0, sigma_pr=0.0)


@pytest.fixture(scope="session")
def homogeneous_body(homogeneous_cfg):
    return generate_body(777, homogeneous_cfg)


@pytest.fixture(scope="session")
def quiet_probe():
    return ProbeConfig(noise_sigma=0.0)


@pytest.fixture(scope="session")
def shallow_press():
    # 6 recorded poses; plenty for behavioral checks at a fraction of the cost
    return PressConfig(depth=0.05)


@pytest.fixture(scope="session")
def twin_bodies():
    """Same seed with and without the lump: identical mesh and background."""
    seed = 4242
    with_lump = generate_body(seed, BodyConfig(p_lump=1.0, p_change=0.0))
    without = generate_body(seed, BodyConfig(p_lump=0.0, p_change=0.0))
    assert with_lump.lump is not None
    np.testing.assert_array_equal(with_lump.mesh.rest_positions,
                                  without.mesh.rest_positions)
    return with_lump, without


@pytest.fixture()
def solver_cfg():
    return SolverConfig()


@pytest.fixture(scope="session")
def symmetric_pair():
    return make_symmetric_body()


def make_symmetric_body(radius=1.0, spacing=0.22):
    """Hand-built mirror-symmetric half-disc body with uniform materials.

    The right half is triangulated and reflected, so for every vertex i the
    mirror index map sends i to its x-negated twin and every triangle has a
    reflected partner. Returns (body, mirror_index_map).
    """
    from palpsim.bodygen import BodyModel, Mesh, delaunay_triangulate, triangle_areas

    right = []
    axis = []
    n_r = int(np.ceil(radius / spacing))
    for j in range(0, n_r + 1):
        y = j * spacing
        if y > radius:
            break
        width = np.sqrt(max(radius * radius - y * y, 0.0))
        n_x = int(np.floor(width / spacing))
        for i in range(0, n_x + 1):
            x = i * spacing
            if i == 0:
                axis.append((0.0, y))
            else:
                right.append((x, y))
    # arc points on the right quarter; apex sits on the mirror axis
    axis.append((0.0, radius))
    n_arc = max(3, int(np.ceil(0.5 * np.pi * radius / spacing)))
    for a in np.linspace(0.0, np.pi / 2, n_arc + 1)[1:-1]:
        right.append((radius * np.sin(a), radius * np.cos(a)))
    right.append((radius, 0.0))

    axis = np.array(sorted(set(axis), key=lambda p: p[1]))
    right = np.array(sorted(set(right)))
    n_axis, n_right = len(axis), len(right)
    pts = np.concatenate([axis, right, right * np.array([-1.0, 1.0])])

    half_pts = np.concatenate([axis, right])
    half_tris = delaunay_triangulate(half_pts)
    # drop slivers outside the quarter disc (between arc chords and nothing)
    cent = half_pts[half_tris].mean(axis=1)
    half_tris = half_tris[np.hypot(cent[:, 0], cent[:, 1]) <= radius]

    def reflect_index(v):
        return v if v < n_axis else v + n_right

    left_tris = np.vectorize(reflect_index)(half_tris)[:, [0, 2, 1]]
    tris = np.concatenate([half_tris, left_tris]).astype(np.int64)
    assert np.all(triangle_areas(pts, tris) > 0)

    fixed = np.abs(pts[:, 1]) <= 1e-9
    mesh = Mesh(rest_positions=pts, triangles=tris, fixed_mask=fixed)
    m = tris.shape[0]
    body = BodyModel(
        mesh=mesh,
        young=np.full(m, 0.003),
        poisson=np.full(m, 0.1),
        lump=None, change_flag=False, body_radius=radius, seed=0,
        mu_young=0.003, mu_poisson=0.1,
    )
    mirror = np.concatenate([
        np.arange(n_axis),
        n_axis + n_right + np.arange(n_right),
        n_axis + np.arange(n_right),
    ])
    return body, mirror
