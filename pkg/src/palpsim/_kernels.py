"""Compiled inner loops. Everything here is numba @njit with fastmath off.

Accumulation order is sequential and index-ascending everywhere, so results
are bit-reproducible run to run. The contact kernel filters candidate
triangles through a uniform spatial grid whose per-cell lists preserve
ascending triangle order; a probe point is assigned to the first containing
triangle in that order, which is exactly what a brute-force scan would pick.
"""

import numpy as np
from numba import njit

GRID_CELL = 0.2  # spatial hash pitch; larger than any healthy deformed edge


@njit(cache=True)
def point_in_triangle(px, py, ax, ay, bx, by, cx, cy):
    """Inclusive containment via same-sign edge cross products."""
    d1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    d2 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
    d3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
    neg = (d1 < 0.0) or (d2 < 0.0) or (d3 < 0.0)
    pos = (d1 > 0.0) or (d2 > 0.0) or (d3 > 0.0)
    return not (neg and pos)


@njit(cache=True)
def elastic_energy_grad(pos, tris, binv, area, lam, mu, grad):
    """Small-strain energy; gradient accumulated into ``grad``. Returns E."""
    energy = 0.0
    for e in range(tris.shape[0]):
        v0 = tris[e, 0]
        v1 = tris[e, 1]
        v2 = tris[e, 2]
        d00 = pos[v1, 0] - pos[v0, 0]
        d10 = pos[v1, 1] - pos[v0, 1]
        d01 = pos[v2, 0] - pos[v0, 0]
        d11 = pos[v2, 1] - pos[v0, 1]
        b00 = binv[e, 0, 0]
        b01 = binv[e, 0, 1]
        b10 = binv[e, 1, 0]
        b11 = binv[e, 1, 1]
        f00 = d00 * b00 + d01 * b10
        f01 = d00 * b01 + d01 * b11
        f10 = d10 * b00 + d11 * b10
        f11 = d10 * b01 + d11 * b11
        e00 = f00 - 1.0
        e11 = f11 - 1.0
        e01 = 0.5 * (f01 + f10)
        tr = e00 + e11
        a = area[e]
        le = lam[e]
        me = mu[e]
        energy += a * (me * (e00 * e00 + e11 * e11 + 2.0 * e01 * e01)
                       + 0.5 * le * tr * tr)
        p00 = 2.0 * me * e00 + le * tr
        p11 = 2.0 * me * e11 + le * tr
        p01 = 2.0 * me * e01
        g00 = a * (p00 * b00 + p01 * b01)
        g01 = a * (p00 * b10 + p01 * b11)
        g10 = a * (p01 * b00 + p11 * b01)
        g11 = a * (p01 * b10 + p11 * b11)
        grad[v1, 0] += g00
        grad[v1, 1] += g10
        grad[v2, 0] += g01
        grad[v2, 1] += g11
        grad[v0, 0] -= g00 + g01
        grad[v0, 1] -= g10 + g11
    return energy


@njit(cache=True)
def contact_eval(pos, tris, probe_pts, kappa, grad,
                 pt_tri, pt_depth, pt_dir, pt_edge, pt_t, pt_force):
    """Penalty contact between probe points and the deformed mesh.

    Fills per-point assignment arrays, adds the position gradient into
    ``grad`` and returns the contact energy. ``pt_tri`` is -1 for points
    outside every triangle; ``pt_edge`` holds the two vertex ids of the
    nearest boundary segment of the containing triangle, ``pt_t`` the
    parameter of the closest point along it.
    """
    n_pts = probe_pts.shape[0]
    n_tri = tris.shape[0]
    for i in range(n_pts):
        pt_tri[i] = -1
        pt_depth[i] = 0.0
        pt_dir[i, 0] = 0.0
        pt_dir[i, 1] = 0.0
        pt_edge[i, 0] = -1
        pt_edge[i, 1] = -1
        pt_t[i] = 0.0
        pt_force[i, 0] = 0.0
        pt_force[i, 1] = 0.0
    if n_tri == 0:
        return 0.0

    # uniform grid over the deformed mesh; triangles enter every cell their
    # bbox overlaps, cell lists stay in ascending triangle order
    x_lo = pos[0, 0]
    x_hi = pos[0, 0]
    y_lo = pos[0, 1]
    y_hi = pos[0, 1]
    for i in range(pos.shape[0]):
        if pos[i, 0] < x_lo:
            x_lo = pos[i, 0]
        if pos[i, 0] > x_hi:
            x_hi = pos[i, 0]
        if pos[i, 1] < y_lo:
            y_lo = pos[i, 1]
        if pos[i, 1] > y_hi:
            y_hi = pos[i, 1]
    nx = int((x_hi - x_lo) / GRID_CELL) + 1
    ny = int((y_hi - y_lo) / GRID_CELL) + 1
    n_cells = nx * ny

    counts = np.zeros(n_cells + 1, dtype=np.int64)
    t_ix0 = np.empty(n_tri, dtype=np.int64)
    t_ix1 = np.empty(n_tri, dtype=np.int64)
    t_iy0 = np.empty(n_tri, dtype=np.int64)
    t_iy1 = np.empty(n_tri, dtype=np.int64)
    for e in range(n_tri):
        tx_lo = pos[tris[e, 0], 0]
        tx_hi = tx_lo
        ty_lo = pos[tris[e, 0], 1]
        ty_hi = ty_lo
        for k in range(1, 3):
            x = pos[tris[e, k], 0]
            y = pos[tris[e, k], 1]
            if x < tx_lo:
                tx_lo = x
            if x > tx_hi:
                tx_hi = x
            if y < ty_lo:
                ty_lo = y
            if y > ty_hi:
                ty_hi = y
        ix0 = int((tx_lo - x_lo) / GRID_CELL)
        ix1 = int((tx_hi - x_lo) / GRID_CELL)
        iy0 = int((ty_lo - y_lo) / GRID_CELL)
        iy1 = int((ty_hi - y_lo) / GRID_CELL)
        if ix1 >= nx:
            ix1 = nx - 1
        if iy1 >= ny:
            iy1 = ny - 1
        t_ix0[e] = ix0
        t_ix1[e] = ix1
        t_iy0[e] = iy0
        t_iy1[e] = iy1
        for cx in range(ix0, ix1 + 1):
            for cy in range(iy0, iy1 + 1):
                counts[cx * ny + cy + 1] += 1
    for c in range(1, n_cells + 1):
        counts[c] += counts[c - 1]
    cell_tris = np.empty(counts[n_cells], dtype=np.int64)
    cursor = counts[:n_cells].copy()
    for e in range(n_tri):
        for cx in range(t_ix0[e], t_ix1[e] + 1):
            for cy in range(t_iy0[e], t_iy1[e] + 1):
                c = cx * ny + cy
                cell_tris[cursor[c]] = e
                cursor[c] += 1

    energy = 0.0
    for i in range(n_pts):
        px = probe_pts[i, 0]
        py = probe_pts[i, 1]
        if px < x_lo or px > x_hi or py < y_lo or py > y_hi:
            continue
        cx = int((px - x_lo) / GRID_CELL)
        cy = int((py - y_lo) / GRID_CELL)
        if cx >= nx:
            cx = nx - 1
        if cy >= ny:
            cy = ny - 1
        c = cx * ny + cy
        hit = -1
        for s in range(counts[c], counts[c + 1]):
            e = cell_tris[s]
            if point_in_triangle(px, py,
                                 pos[tris[e, 0], 0], pos[tris[e, 0], 1],
                                 pos[tris[e, 1], 0], pos[tris[e, 1], 1],
                                 pos[tris[e, 2], 0], pos[tris[e, 2], 1]):
                hit = e
                break
        if hit < 0:
            continue
        pt_tri[i] = hit

        # nearest of the triangle's three edges, treated as segments
        best_d2 = np.inf
        best_t = 0.0
        best_qx = 0.0
        best_qy = 0.0
        best_a = -1
        best_b = -1
        for k in range(3):
            va = tris[hit, k]
            vb = tris[hit, (k + 1) % 3]
            ax = pos[va, 0]
            ay = pos[va, 1]
            ex = pos[vb, 0] - ax
            ey = pos[vb, 1] - ay
            ee = ex * ex + ey * ey
            if ee > 0.0:
                t = ((px - ax) * ex + (py - ay) * ey) / ee
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            qx = ax + t * ex
            qy = ay + t * ey
            d2 = (px - qx) * (px - qx) + (py - qy) * (py - qy)
            if d2 < best_d2:
                best_d2 = d2
                best_t = t
                best_qx = qx
                best_qy = qy
                best_a = va
                best_b = vb
        depth = np.sqrt(best_d2)
        pt_depth[i] = depth
        pt_edge[i, 0] = best_a
        pt_edge[i, 1] = best_b
        pt_t[i] = best_t
        if depth <= 0.0:
            continue
        ux = (best_qx - px) / depth
        uy = (best_qy - py) / depth
        pt_dir[i, 0] = ux
        pt_dir[i, 1] = uy
        pt_force[i, 0] = kappa * depth * ux
        pt_force[i, 1] = kappa * depth * uy
        energy += 0.5 * kappa * depth * depth
        # d(E)/d(endpoint) via the fixed-assignment envelope
        gx = kappa * (best_qx - px)
        gy = kappa * (best_qy - py)
        grad[best_a, 0] += (1.0 - best_t) * gx
        grad[best_a, 1] += (1.0 - best_t) * gy
        grad[best_b, 0] += best_t * gx
        grad[best_b, 1] += best_t * gy
    return energy


@njit(cache=True)
def solve_adam(pos, tris, binv, area, lam, mu, fixed, probe_pts, kappa,
               lr, beta1, beta2, eps, tol, max_iters, energies,
               pt_tri, pt_depth, pt_dir, pt_edge, pt_t, pt_force):
    """Relax positions to equilibrium with bias-corrected Adam.

    ``pos`` is updated in place; ``energies[:iters]`` holds the energy at the
    start of each iteration. Fixed vertices never move. Moment buffers are
    local, so every call starts from fresh optimizer state. Returns
    (iterations_run, converged).
    """
    n = pos.shape[0]
    grad = np.zeros((n, 2))
    m = np.zeros((n, 2))
    v = np.zeros((n, 2))
    has_probe = probe_pts.shape[0] > 0
    pw1 = 1.0
    pw2 = 1.0
    for it in range(max_iters):
        for i in range(n):
            grad[i, 0] = 0.0
            grad[i, 1] = 0.0
        energy = elastic_energy_grad(pos, tris, binv, area, lam, mu, grad)
        if has_probe:
            energy += contact_eval(pos, tris, probe_pts, kappa, grad,
                                   pt_tri, pt_depth, pt_dir, pt_edge,
                                   pt_t, pt_force)
        energies[it] = energy
        pw1 *= beta1
        pw2 *= beta2
        c1 = 1.0 - pw1
        c2 = 1.0 - pw2
        max_step = 0.0
        for i in range(n):
            if fixed[i]:
                continue
            for c in range(2):
                g = grad[i, c]
                m[i, c] = beta1 * m[i, c] + (1.0 - beta1) * g
                v[i, c] = beta2 * v[i, c] + (1.0 - beta2) * g * g
                mhat = m[i, c] / c1
                vhat = v[i, c] / c2
                step = lr * mhat / (np.sqrt(vhat) + eps)
                pos[i, c] -= step
                astep = abs(step)
                if astep > max_step:
                    max_step = astep
        if max_step < tol:
            return it + 1, True
    return max_iters, False


@njit(cache=True)
def raster_triangles(classes, pos, tris, x_lo, y_hi, pitch):
    """Mark pixels whose center lies in any triangle with class 1.

    Row 0 is the top of the frame; pixel centers sit at half-pitch offsets.
    """
    n_rows = classes.shape[0]
    n_cols = classes.shape[1]
    for e in range(tris.shape[0]):
        ax = pos[tris[e, 0], 0]
        ay = pos[tris[e, 0], 1]
        bx = pos[tris[e, 1], 0]
        by = pos[tris[e, 1], 1]
        cx = pos[tris[e, 2], 0]
        cy = pos[tris[e, 2], 1]
        tx_lo = min(ax, min(bx, cx))
        tx_hi = max(ax, max(bx, cx))
        ty_lo = min(ay, min(by, cy))
        ty_hi = max(ay, max(by, cy))
        j0 = int(np.ceil((tx_lo - x_lo) / pitch - 0.5))
        j1 = int(np.floor((tx_hi - x_lo) / pitch - 0.5))
        i0 = int(np.ceil((y_hi - ty_hi) / pitch - 0.5))
        i1 = int(np.floor((y_hi - ty_lo) / pitch - 0.5))
        if j0 < 0:
            j0 = 0
        if j1 > n_cols - 1:
            j1 = n_cols - 1
        if i0 < 0:
            i0 = 0
        if i1 > n_rows - 1:
            i1 = n_rows - 1
        for i in range(i0, i1 + 1):
            py = y_hi - (i + 0.5) * pitch
            for j in range(j0, j1 + 1):
                px = x_lo + (j + 0.5) * pitch
                if point_in_triangle(px, py, ax, ay, bx, by, cx, cy):
                    classes[i, j] = 1
