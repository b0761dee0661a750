"""Compiled inner loops: voxel traversal, scan integration, gain casting, box queries.

All grid routines work in voxel units: a point p in metres maps to
``(p - origin) / resolution`` so voxel ``i`` spans ``[i, i + 1)``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

_NUDGE = 1e-6


@njit(cache=True)
def traverse(px, py, pz, dx, dy, dz, tlim, nx, ny, nz, out_idx, out_t):
    """Amanatides-Woo walk from p along unit d until entry parameter exceeds tlim.

    Writes visited voxel indices and their entry parameters. Returns the count,
    negated when the walk stopped by leaving the grid.
    """
    ix = int(math.floor(px))
    iy = int(math.floor(py))
    iz = int(math.floor(pz))
    if ix < 0 or iy < 0 or iz < 0 or ix >= nx or iy >= ny or iz >= nz:
        return 0
    inf = np.inf
    if dx > 0.0:
        sx = 1
        tmx = (ix + 1.0 - px) / dx
        ddx = 1.0 / dx
    elif dx < 0.0:
        sx = -1
        tmx = (px - ix) / -dx
        ddx = -1.0 / dx
    else:
        sx = 0
        tmx = inf
        ddx = inf
    if dy > 0.0:
        sy = 1
        tmy = (iy + 1.0 - py) / dy
        ddy = 1.0 / dy
    elif dy < 0.0:
        sy = -1
        tmy = (py - iy) / -dy
        ddy = -1.0 / dy
    else:
        sy = 0
        tmy = inf
        ddy = inf
    if dz > 0.0:
        sz = 1
        tmz = (iz + 1.0 - pz) / dz
        ddz = 1.0 / dz
    elif dz < 0.0:
        sz = -1
        tmz = (pz - iz) / -dz
        ddz = -1.0 / dz
    else:
        sz = 0
        tmz = inf
        ddz = inf

    cap = out_idx.shape[0]
    n = 0
    t = 0.0
    while n < cap:
        out_idx[n, 0] = ix
        out_idx[n, 1] = iy
        out_idx[n, 2] = iz
        out_t[n] = t
        n += 1
        if tmx <= tmy and tmx <= tmz:
            t = tmx
            ix += sx
            tmx += ddx
        elif tmy <= tmz:
            t = tmy
            iy += sy
            tmy += ddy
        else:
            t = tmz
            iz += sz
            tmz += ddz
        if t > tlim:
            break
        if ix < 0 or iy < 0 or iz < 0 or ix >= nx or iy >= ny or iz >= nz:
            return -n
    return n


def buffer_for(tlim_vox: float):
    cap = int(3 * (math.ceil(tlim_vox) + 2)) + 4
    return np.empty((cap, 3), dtype=np.int64), np.empty(cap, dtype=np.float64)


@njit(cache=True)
def integrate_rays(state, p, dirs, ranges, hits, tmax, out_idx, out_t):
    """Carve free space along rays and mark hit voxels occupied.

    Occupied wins: hit voxels are written first and free carving never
    overwrites an occupied voxel. ``ranges`` and ``tmax`` are in voxel units.
    """
    nx, ny, nz = state.shape
    nr = dirs.shape[0]
    for r in range(nr):
        if not hits[r]:
            continue
        n = traverse(p[0], p[1], p[2], dirs[r, 0], dirs[r, 1], dirs[r, 2],
                     ranges[r] + _NUDGE, nx, ny, nz, out_idx, out_t)
        if n > 0:
            state[out_idx[n - 1, 0], out_idx[n - 1, 1], out_idx[n - 1, 2]] = OCCUPIED
    for r in range(nr):
        if hits[r]:
            n = traverse(p[0], p[1], p[2], dirs[r, 0], dirs[r, 1], dirs[r, 2],
                         ranges[r] + _NUDGE, nx, ny, nz, out_idx, out_t)
            last = n - 1 if n > 0 else -n
        else:
            n = traverse(p[0], p[1], p[2], dirs[r, 0], dirs[r, 1], dirs[r, 2],
                         min(ranges[r], tmax), nx, ny, nz, out_idx, out_t)
            last = abs(n)
        for i in range(last):
            a = out_idx[i, 0]
            b = out_idx[i, 1]
            c = out_idx[i, 2]
            if state[a, b, c] != OCCUPIED:
                state[a, b, c] = FREE


@njit(cache=True)
def volume_gains(state, origins, headings, dirs, dmax, half_h, half_v, full_h,
                 stamp, base, out_idx, out_t):
    """Distinct unknown voxels seen from each origin, rays stopping at occupied.

    A traversed unknown voxel counts only if its centre lies inside the frustum
    (range, elevation and, unless ``full_h``, azimuth bounds). Returns counts.
    """
    nx, ny, nz = state.shape
    k_n = origins.shape[0]
    nr = dirs.shape[0]
    counts = np.zeros(k_n, dtype=np.int64)
    for k in range(k_n):
        px = origins[k, 0]
        py = origins[k, 1]
        pz = origins[k, 2]
        ch = math.cos(headings[k])
        sh = math.sin(headings[k])
        tag = base + k
        cnt = 0
        for r in range(nr):
            dx = ch * dirs[r, 0] - sh * dirs[r, 1]
            dy = sh * dirs[r, 0] + ch * dirs[r, 1]
            dz = dirs[r, 2]
            n = abs(traverse(px, py, pz, dx, dy, dz, dmax, nx, ny, nz, out_idx, out_t))
            for i in range(n):
                a = out_idx[i, 0]
                b = out_idx[i, 1]
                c = out_idx[i, 2]
                v = state[a, b, c]
                if v == OCCUPIED:
                    break
                if v != UNKNOWN or stamp[a, b, c] == tag:
                    continue
                cx = a + 0.5 - px
                cy = b + 0.5 - py
                cz = c + 0.5 - pz
                horiz = math.sqrt(cx * cx + cy * cy)
                if math.sqrt(horiz * horiz + cz * cz) > dmax:
                    continue
                if abs(math.atan2(cz, horiz)) > half_v + 1e-9:
                    continue
                if not full_h:
                    az = math.atan2(cy, cx) - headings[k]
                    az = (az + math.pi) % (2.0 * math.pi) - math.pi
                    if abs(az) > half_h + 1e-9:
                        continue
                stamp[a, b, c] = tag
                cnt += 1
        counts[k] = cnt
    return counts


@njit(cache=True)
def first_occupied(state, p, dirs, tmax, out_idx, out_t):
    """Entry parameter of the first occupied voxel along each ray, inf if none."""
    nx, ny, nz = state.shape
    nr = dirs.shape[0]
    res = np.full(nr, np.inf)
    for r in range(nr):
        n = abs(traverse(p[0], p[1], p[2], dirs[r, 0], dirs[r, 1], dirs[r, 2],
                         tmax, nx, ny, nz, out_idx, out_t))
        for i in range(n):
            if state[out_idx[i, 0], out_idx[i, 1], out_idx[i, 2]] == OCCUPIED:
                res[r] = out_t[i]
                break
    return res


@njit(cache=True)
def line_of_sight(state, a, b, out_idx, out_t):
    """True when no occupied voxel lies strictly before b's voxel on segment a->b."""
    nx, ny, nz = state.shape
    d0 = b[0] - a[0]
    d1 = b[1] - a[1]
    d2 = b[2] - a[2]
    length = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    if length == 0.0:
        return True
    n = traverse(a[0], a[1], a[2], d0 / length, d1 / length, d2 / length,
                 length, nx, ny, nz, out_idx, out_t)
    m = abs(n)
    bx = int(math.floor(b[0]))
    by = int(math.floor(b[1]))
    bz = int(math.floor(b[2]))
    for i in range(m):
        a0 = out_idx[i, 0]
        a1 = out_idx[i, 1]
        a2 = out_idx[i, 2]
        if a0 == bx and a1 == by and a2 == bz:
            break
        if state[a0, a1, a2] == OCCUPIED:
            return False
    return True


SNAP = 1e-9


@njit(cache=True)
def _box_blocked(sat, lx, ly, lz, hx, hy, hz):
    nx = sat.shape[0] - 1
    ny = sat.shape[1] - 1
    nz = sat.shape[2] - 1
    # faces within SNAP voxels of a grid plane count as touching, not overlapping
    i0 = int(math.floor(lx + SNAP))
    j0 = int(math.floor(ly + SNAP))
    k0 = int(math.floor(lz + SNAP))
    i1 = max(int(math.ceil(hx - SNAP)) - 1, i0)
    j1 = max(int(math.ceil(hy - SNAP)) - 1, j0)
    k1 = max(int(math.ceil(hz - SNAP)) - 1, k0)
    if i0 < 0 or j0 < 0 or k0 < 0 or i1 >= nx or j1 >= ny or k1 >= nz:
        return True
    i1 += 1
    j1 += 1
    k1 += 1
    cnt = (sat[i1, j1, k1] - sat[i0, j1, k1] - sat[i1, j0, k1] - sat[i1, j1, k0]
           + sat[i0, j0, k1] + sat[i0, j1, k0] + sat[i1, j0, k0] - sat[i0, j0, k0])
    return cnt > 0


@njit(cache=True)
def _fenced(fences, lx, ly, lz, hx, hy, hz):
    for f in range(fences.shape[0]):
        if (lx < fences[f, 3] and hx > fences[f, 0] and ly < fences[f, 4]
                and hy > fences[f, 1] and lz < fences[f, 5] and hz > fences[f, 2]):
            return True
    return False


@njit(cache=True)
def _placement_ok(sat, origin, res, fences, x, y, z, half):
    lx = x - half[0]
    ly = y - half[1]
    lz = z - half[2]
    hx = x + half[0]
    hy = y + half[1]
    hz = z + half[2]
    if _fenced(fences, lx, ly, lz, hx, hy, hz):
        return False
    return not _box_blocked(sat, (lx - origin[0]) / res, (ly - origin[1]) / res,
                            (lz - origin[2]) / res, (hx - origin[0]) / res,
                            (hy - origin[1]) / res, (hz - origin[2]) / res)


@njit(cache=True)
def boxes_admissible(sat, origin, res, fences, points, half):
    out = np.empty(points.shape[0], dtype=np.bool_)
    for i in range(points.shape[0]):
        out[i] = _placement_ok(sat, origin, res, fences,
                               points[i, 0], points[i, 1], points[i, 2], half)
    return out


@njit(cache=True)
def sweep_count(ax, ay, az, bx, by, bz, res):
    length = math.sqrt((bx - ax) ** 2 + (by - ay) ** 2 + (bz - az) ** 2)
    return max(1, int(math.ceil(length / (0.5 * res) - 1e-9)))


@njit(cache=True)
def segments_admissible(sat, origin, res, fences, a, b, half):
    """Robot box placements every <= res/2 along each segment must be admissible.

    Endpoints are put in lexicographic order first so a->b and b->a test the
    exact same placements.
    """
    out = np.empty(a.shape[0], dtype=np.bool_)
    for s in range(a.shape[0]):
        p0 = a[s]
        p1 = b[s]
        if (p1[0] < p0[0] or (p1[0] == p0[0] and (p1[1] < p0[1]
                              or (p1[1] == p0[1] and p1[2] < p0[2])))):
            p0, p1 = p1, p0
        n = sweep_count(p0[0], p0[1], p0[2], p1[0], p1[1], p1[2], res)
        ok = True
        for k in range(n + 1):
            f = k / n
            x = p0[0] + (p1[0] - p0[0]) * f
            y = p0[1] + (p1[1] - p0[1]) * f
            z = p0[2] + (p1[2] - p0[2]) * f
            if not _placement_ok(sat, origin, res, fences, x, y, z, half):
                ok = False
                break
        out[s] = ok
    return out


@njit(cache=True)
def scan_free_boxes(boxes, o, dirs, dmax):
    """Exact range to the solid complement of a union of free boxes.

    Returns (ranges, hit) where a ray with no surface within dmax reports dmax.
    """
    nr = dirs.shape[0]
    nb = boxes.shape[0]
    ranges = np.empty(nr)
    hit = np.zeros(nr, dtype=np.bool_)
    for r in range(nr):
        t = 0.0
        for _ in range(nb + 1):
            best = -1.0
            for b in range(nb):
                te = -np.inf
                tx = np.inf
                empty = False
                for ax in range(3):
                    d = dirs[r, ax]
                    lo = boxes[b, ax]
                    hi = boxes[b, ax + 3]
                    if d == 0.0:
                        if o[ax] < lo or o[ax] > hi:
                            empty = True
                            break
                    else:
                        t0 = (lo - o[ax]) / d
                        t1 = (hi - o[ax]) / d
                        if t0 > t1:
                            t0, t1 = t1, t0
                        if t0 > te:
                            te = t0
                        if t1 < tx:
                            tx = t1
                if empty:
                    continue
                if te <= t + 1e-9 and tx > t + 1e-9 and tx > best:
                    best = tx
            if best < 0.0:
                break
            t = best
            if t >= dmax:
                break
        if t >= dmax:
            ranges[r] = dmax
        else:
            ranges[r] = t
            hit[r] = True
    return ranges, hit


@njit(cache=True)
def dtw(a, b):
    """Classic DTW with Euclidean point cost; returns (total cost, warp length)."""
    n = a.shape[0]
    m = b.shape[0]
    acc = np.full((n + 1, m + 1), np.inf)
    steps = np.zeros((n + 1, m + 1), dtype=np.int64)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            c = 0.0
            for k in range(a.shape[1]):
                c += (a[i - 1, k] - b[j - 1, k]) ** 2
            c = math.sqrt(c)
            best = acc[i - 1, j - 1]
            st = steps[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
                st = steps[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
                st = steps[i, j - 1]
            acc[i, j] = c + best
            steps[i, j] = st + 1
    return acc[n, m], steps[n, m]


@njit(cache=True)
def pairwise_dtw(flat, offsets):
    """Normalised DTW between every pair of sequences packed in ``flat``.

    Sequence ``i`` is ``flat[offsets[i]:offsets[i + 1]]``.
    """
    n = offsets.shape[0] - 1
    out = np.zeros((n, n))
    for i in range(n):
        a = flat[offsets[i]:offsets[i + 1]]
        for j in range(i + 1, n):
            total, steps = dtw(a, flat[offsets[j]:offsets[j + 1]])
            out[i, j] = total / steps
            out[j, i] = out[i, j]
    return out
