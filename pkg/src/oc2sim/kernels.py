"""Hot numeric kernels.

Everything here is written as plain Python loops over NumPy arrays and
compiled with numba's ``@njit`` (see :mod:`oc2sim._jit`).  With
``OC2_DISABLE_NUMBA=1`` the same source runs interpreted; both paths execute
identical operations in identical order and therefore produce bit-identical
trajectories.

Scalar conventions used throughout:

* world frame: x to the right, y up, angles counter-clockwise from +x
* body frame: +x forward, +y to the robot's left
* positive angular speed turns the robot to its left
* the random stream is a MINSTD generator advanced in place through a
  1-element int64 ``state`` array (see :mod:`oc2sim.rng`)
"""

import numpy as np

from ._jit import njit_kernel

_EDT_INF = 1e20


@njit_kernel
def rng_uniform(state):
    state[0] = (state[0] * 48271) % 2147483647
    return (state[0] - 1) / 2147483646.0


@njit_kernel
def wrap_angle(a):
    return ((a + np.pi) % (2.0 * np.pi)) - np.pi


# ---------------------------------------------------------------------------
# scalar field sampling and construction
# ---------------------------------------------------------------------------

@njit_kernel
def sample_field(vals, cell, x, y, nearest):
    """Read the field at a continuous world point.

    ``nearest != 0`` returns the value of the cell containing the point;
    otherwise the four surrounding cell centres are blended bilinearly.
    Points outside the grid clamp to the border cells.
    """
    h, w = vals.shape
    if nearest != 0:
        ix = int(np.floor(x / cell))
        iy = int(np.floor(y / cell))
        if ix < 0:
            ix = 0
        elif ix > w - 1:
            ix = w - 1
        if iy < 0:
            iy = 0
        elif iy > h - 1:
            iy = h - 1
        return vals[iy, ix]
    gx = x / cell - 0.5
    gy = y / cell - 0.5
    if gx < 0.0:
        gx = 0.0
    elif gx > w - 1.0:
        gx = w - 1.0
    if gy < 0.0:
        gy = 0.0
    elif gy > h - 1.0:
        gy = h - 1.0
    x0 = int(np.floor(gx))
    y0 = int(np.floor(gy))
    x1 = x0 + 1 if x0 + 1 < w else w - 1
    y1 = y0 + 1 if y0 + 1 < h else h - 1
    tx = gx - x0
    ty = gy - y0
    v00 = vals[y0, x0]
    v01 = vals[y0, x1]
    v10 = vals[y1, x0]
    v11 = vals[y1, x1]
    top = v00 + (v01 - v00) * tx
    bot = v10 + (v11 - v10) * tx
    return top + (bot - top) * ty


@njit_kernel
def segment_distance(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        ex = px - ax
        ey = py - ay
        return np.sqrt(ex * ex + ey * ey)
    t = ((px - ax) * dx + (py - ay) * dy) / l2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return np.sqrt(ex * ex + ey * ey)


@njit_kernel
def ramp_field_values(h, w, cell, segs, halfwidth, falloff):
    """Field values on an h-by-w grid from distance to a set of segments.

    ``segs`` is an (n, 4) array of segment endpoints.  A cell whose centre is
    within ``halfwidth`` of any segment is exactly 0; values rise linearly to
    1 over ``falloff`` and clamp there.
    """
    vals = np.empty((h, w), np.float64)
    nseg = segs.shape[0]
    for iy in range(h):
        cy = (iy + 0.5) * cell
        for ix in range(w):
            cx = (ix + 0.5) * cell
            d = segment_distance(cx, cy, segs[0, 0], segs[0, 1], segs[0, 2], segs[0, 3])
            for s in range(1, nseg):
                ds = segment_distance(cx, cy, segs[s, 0], segs[s, 1], segs[s, 2], segs[s, 3])
                if ds < d:
                    d = ds
            v = (d - halfwidth) / falloff
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            vals[iy, ix] = v
    return vals


@njit_kernel
def _edt_1d(f, d, v, z, n):
    # Felzenszwalb-Huttenlocher lower envelope of parabolas, squared distances.
    k = 0
    v[0] = 0
    z[0] = -_EDT_INF
    z[1] = _EDT_INF
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = _EDT_INF
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        dq = q - v[k]
        d[q] = dq * dq + f[v[k]]


@njit_kernel
def distance_map_cells(feature):
    """Exact Euclidean distance (in cell units) to the nearest feature cell."""
    h, w = feature.shape
    n = h if h > w else w
    f = np.empty(n, np.float64)
    d1 = np.empty(n, np.float64)
    v = np.empty(n, np.int64)
    z = np.empty(n + 1, np.float64)
    out = np.empty((h, w), np.float64)
    for x in range(w):
        for y in range(h):
            f[y] = 0.0 if feature[y, x] != 0 else _EDT_INF
        _edt_1d(f, d1, v, z, h)
        for y in range(h):
            out[y, x] = d1[y]
    for y in range(h):
        for x in range(w):
            f[x] = out[y, x]
        _edt_1d(f, d1, v, z, w)
        for x in range(w):
            out[y, x] = np.sqrt(d1[x])
    return out


# ---------------------------------------------------------------------------
# circle physics
# ---------------------------------------------------------------------------

@njit_kernel
def integrate_unicycle_pose(x, y, th, v, w, dt):
    th2 = wrap_angle(th + w * dt)
    x2 = x + v * dt * np.cos(th2)
    y2 = y + v * dt * np.sin(th2)
    return x2, y2, th2


@njit_kernel
def clamp_to_arena(xy, radius, aw, ah):
    for i in range(xy.shape[0]):
        r = radius[i]
        if xy[i, 0] < r:
            xy[i, 0] = r
        elif xy[i, 0] > aw - r:
            xy[i, 0] = aw - r
        if xy[i, 1] < r:
            xy[i, 1] = r
        elif xy[i, 1] > ah - r:
            xy[i, 1] = ah - r


@njit_kernel
def _avail_along(x, y, r, ux, uy, aw, ah):
    # How far a body may slide along (ux, uy) before its centre leaves
    # [r, extent - r] on either axis.
    t = _EDT_INF
    if ux > 0.0:
        tt = (aw - r - x) / ux
        if tt < t:
            t = tt
    elif ux < 0.0:
        tt = (r - x) / ux
        if tt < t:
            t = tt
    if uy > 0.0:
        tt = (ah - r - y) / uy
        if tt < t:
            t = tt
    elif uy < 0.0:
        tt = (r - y) / uy
        if tt < t:
            t = tt
    if t < 0.0:
        t = 0.0
    return t


@njit_kernel
def _separate_pair(xy_a, ia, ra, xy_b, ib, rb, frac_a, aw, ah):
    """Push one overlapping pair apart along the centre line.

    Body a prefers taking ``frac_a`` of the correction and b the rest; a
    partner pinned against a wall hands its unusable share to the other.
    Coincident centres separate along +x.  Returns the overlap depth seen.
    """
    dx = xy_b[ib, 0] - xy_a[ia, 0]
    dy = xy_b[ib, 1] - xy_a[ia, 1]
    dist2 = dx * dx + dy * dy
    rsum = ra + rb
    if dist2 >= rsum * rsum:
        return 0.0
    dist = np.sqrt(dist2)
    if dist > 0.0:
        ux = dx / dist
        uy = dy / dist
    else:
        ux = 1.0
        uy = 0.0
    depth = rsum - dist
    want_a = depth * frac_a
    avail_a = _avail_along(xy_a[ia, 0], xy_a[ia, 1], ra, -ux, -uy, aw, ah)
    avail_b = _avail_along(xy_b[ib, 0], xy_b[ib, 1], rb, ux, uy, aw, ah)
    move_a = want_a if want_a < avail_a else avail_a
    move_b = depth - move_a
    if move_b > avail_b:
        move_b = avail_b
        extra = depth - move_a - move_b
        room_a = avail_a - move_a
        if extra > 0.0 and room_a > 0.0:
            move_a += extra if extra < room_a else room_a
    xy_a[ia, 0] -= move_a * ux
    xy_a[ia, 1] -= move_a * uy
    xy_b[ib, 0] += move_b * ux
    xy_b[ib, 1] += move_b * uy
    return depth


_CANDIDATE_SLOP = 8.0


@njit_kernel
def resolve_collisions_arrays(rxy, rr, pxy, pr, aw, ah, min_sweeps, max_sweeps, tol):
    """Iterative positional separation; every overlapping pair splits the
    correction evenly along the centre line (a wall-pinned partner hands its
    share over).  Robots deflect off pucks like pucks deflect off robots, so
    a robot pressing a puck into a wall stalls instead of tunnelling through
    it — which freezes its readings and lets the reading-window recovery
    break the pin.  Sweeps continue past ``min_sweeps`` while any overlap
    exceeds ``tol``.  Returns sweeps run.

    Sweeps iterate only the candidate pairs already within a slop distance of
    contact when the call began (bodies barely move during resolution, and a
    packed cluster would otherwise force every sweep over all n^2 pairs).
    Convergence is only accepted after a full all-pairs check; if chained
    corrections shoved some non-candidate pair into overlap, resolution
    continues over all pairs, so the returned state never depends on the
    pruning.
    """
    nr = rxy.shape[0]
    npk = pxy.shape[0]
    c_rr = np.empty((nr * (nr - 1) // 2, 2), np.int64)
    c_rp = np.empty((nr * npk, 2), np.int64)
    c_pp = np.empty((npk * (npk - 1) // 2, 2), np.int64)
    n_rr = 0
    n_rp = 0
    n_pp = 0
    for i in range(nr):
        for j in range(i + 1, nr):
            dx = rxy[j, 0] - rxy[i, 0]
            dy = rxy[j, 1] - rxy[i, 1]
            reach = rr[i] + rr[j] + _CANDIDATE_SLOP
            if dx * dx + dy * dy < reach * reach:
                c_rr[n_rr, 0] = i
                c_rr[n_rr, 1] = j
                n_rr += 1
    for i in range(nr):
        for j in range(npk):
            dx = pxy[j, 0] - rxy[i, 0]
            dy = pxy[j, 1] - rxy[i, 1]
            reach = rr[i] + pr[j] + _CANDIDATE_SLOP
            if dx * dx + dy * dy < reach * reach:
                c_rp[n_rp, 0] = i
                c_rp[n_rp, 1] = j
                n_rp += 1
    for i in range(npk):
        for j in range(i + 1, npk):
            dx = pxy[j, 0] - pxy[i, 0]
            dy = pxy[j, 1] - pxy[i, 1]
            reach = pr[i] + pr[j] + _CANDIDATE_SLOP
            if dx * dx + dy * dy < reach * reach:
                c_pp[n_pp, 0] = i
                c_pp[n_pp, 1] = j
                n_pp += 1
    sweeps = 0
    full_mode = False
    for s in range(max_sweeps):
        max_seen = 0.0
        if full_mode:
            for i in range(nr):
                for j in range(i + 1, nr):
                    d = _separate_pair(rxy, i, rr[i], rxy, j, rr[j], 0.5, aw, ah)
                    if d > max_seen:
                        max_seen = d
            for i in range(nr):
                for j in range(npk):
                    d = _separate_pair(rxy, i, rr[i], pxy, j, pr[j], 0.5, aw, ah)
                    if d > max_seen:
                        max_seen = d
            for i in range(npk):
                for j in range(i + 1, npk):
                    d = _separate_pair(pxy, i, pr[i], pxy, j, pr[j], 0.5, aw, ah)
                    if d > max_seen:
                        max_seen = d
        else:
            for k in range(n_rr):
                i = c_rr[k, 0]
                j = c_rr[k, 1]
                d = _separate_pair(rxy, i, rr[i], rxy, j, rr[j], 0.5, aw, ah)
                if d > max_seen:
                    max_seen = d
            for k in range(n_rp):
                i = c_rp[k, 0]
                j = c_rp[k, 1]
                d = _separate_pair(rxy, i, rr[i], pxy, j, pr[j], 0.5, aw, ah)
                if d > max_seen:
                    max_seen = d
            for k in range(n_pp):
                i = c_pp[k, 0]
                j = c_pp[k, 1]
                d = _separate_pair(pxy, i, pr[i], pxy, j, pr[j], 0.5, aw, ah)
                if d > max_seen:
                    max_seen = d
        sweeps = s + 1
        if sweeps >= min_sweeps and max_seen <= tol:
            if full_mode:
                break
            a, b, c = max_overlaps(rxy, rr, pxy, pr)
            worst = a
            if b > worst:
                worst = b
            if c > worst:
                worst = c
            if worst <= tol:
                break
            full_mode = True
    return sweeps


@njit_kernel
def max_overlaps(rxy, rr, pxy, pr):
    """Diagnostic: max overlap depth per pair kind (robot-robot, robot-puck,
    puck-puck)."""
    rr_max = 0.0
    rp_max = 0.0
    pp_max = 0.0
    nr = rxy.shape[0]
    npk = pxy.shape[0]
    for i in range(nr):
        for j in range(i + 1, nr):
            dx = rxy[j, 0] - rxy[i, 0]
            dy = rxy[j, 1] - rxy[i, 1]
            d = rr[i] + rr[j] - np.sqrt(dx * dx + dy * dy)
            if d > rr_max:
                rr_max = d
    for i in range(nr):
        for j in range(npk):
            dx = pxy[j, 0] - rxy[i, 0]
            dy = pxy[j, 1] - rxy[i, 1]
            d = rr[i] + pr[j] - np.sqrt(dx * dx + dy * dy)
            if d > rp_max:
                rp_max = d
    for i in range(npk):
        for j in range(i + 1, npk):
            dx = pxy[j, 0] - pxy[i, 0]
            dy = pxy[j, 1] - pxy[i, 1]
            d = pr[i] + pr[j] - np.sqrt(dx * dx + dy * dy)
            if d > pp_max:
                pp_max = d
    return rr_max, rp_max, pp_max


@njit_kernel
def step_arrays(rxy, rth, rr, pxy, pr, actions, aw, ah, dt, min_sweeps, max_sweeps, tol):
    # Clamp robots back into the arena before resolving: the resolver is
    # wall-aware and never pushes a body past a wall, so separations done on
    # in-bounds bodies stay in bounds and the final clamps cannot undo them
    # (a clamp after resolution could otherwise re-create an overlap).
    for i in range(rxy.shape[0]):
        x2, y2, th2 = integrate_unicycle_pose(
            rxy[i, 0], rxy[i, 1], rth[i], actions[i, 0], actions[i, 1], dt
        )
        rxy[i, 0] = x2
        rxy[i, 1] = y2
        rth[i] = th2
    clamp_to_arena(rxy, rr, aw, ah)
    resolve_collisions_arrays(rxy, rr, pxy, pr, aw, ah, min_sweeps, max_sweeps, tol)
    clamp_to_arena(rxy, rr, aw, ah)
    clamp_to_arena(pxy, pr, aw, ah)


# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------

@njit_kernel
def spawn_bodies(rng_state, rxy, rth, rr, pxy, pr, aw, ah, margin, max_attempts):
    """Place robots (then pucks) uniformly at random, overlap-free.

    Centres are drawn from [radius + margin, extent - radius - margin] on each
    axis, x before y; a robot's heading is drawn after its position lands.
    Returns 0 on success, 1 when any body exceeds ``max_attempts`` rejections.
    """
    nr = rxy.shape[0]
    npk = pxy.shape[0]
    for i in range(nr):
        r = rr[i]
        lox = r + margin
        hix = aw - r - margin
        loy = r + margin
        hiy = ah - r - margin
        if hix < lox or hiy < loy:
            return 1
        placed = False
        for _ in range(max_attempts):
            x = lox + (hix - lox) * rng_uniform(rng_state)
            y = loy + (hiy - loy) * rng_uniform(rng_state)
            good = True
            for j in range(i):
                dx = x - rxy[j, 0]
                dy = y - rxy[j, 1]
                s = r + rr[j]
                if dx * dx + dy * dy < s * s:
                    good = False
                    break
            if good:
                rxy[i, 0] = x
                rxy[i, 1] = y
                placed = True
                break
        if not placed:
            return 1
        rth[i] = -np.pi + 2.0 * np.pi * rng_uniform(rng_state)
    for i in range(npk):
        r = pr[i]
        lox = r + margin
        hix = aw - r - margin
        loy = r + margin
        hiy = ah - r - margin
        if hix < lox or hiy < loy:
            return 1
        placed = False
        for _ in range(max_attempts):
            x = lox + (hix - lox) * rng_uniform(rng_state)
            y = loy + (hiy - loy) * rng_uniform(rng_state)
            good = True
            for j in range(nr):
                dx = x - rxy[j, 0]
                dy = y - rxy[j, 1]
                s = r + rr[j]
                if dx * dx + dy * dy < s * s:
                    good = False
                    break
            if good:
                for j in range(i):
                    dx = x - pxy[j, 0]
                    dy = y - pxy[j, 1]
                    s = r + pr[j]
                    if dx * dx + dy * dy < s * s:
                        good = False
                        break
            if good:
                pxy[i, 0] = x
                pxy[i, 1] = y
                placed = True
                break
        if not placed:
            return 1
    return 0


@njit_kernel
def scatter_pucks(rng_state, pxy, pr, rxy, rr, aw, ah, margin, max_attempts):
    """Reposition every puck uniformly at random, overlap-free against robots
    and already-repositioned pucks.  Same margins and draw order as spawning.
    """
    nr = rxy.shape[0]
    npk = pxy.shape[0]
    for i in range(npk):
        r = pr[i]
        lox = r + margin
        hix = aw - r - margin
        loy = r + margin
        hiy = ah - r - margin
        if hix < lox or hiy < loy:
            return 1
        placed = False
        for _ in range(max_attempts):
            x = lox + (hix - lox) * rng_uniform(rng_state)
            y = loy + (hiy - loy) * rng_uniform(rng_state)
            good = True
            for j in range(nr):
                dx = x - rxy[j, 0]
                dy = y - rxy[j, 1]
                s = r + rr[j]
                if dx * dx + dy * dy < s * s:
                    good = False
                    break
            if good:
                for j in range(i):
                    dx = x - pxy[j, 0]
                    dy = y - pxy[j, 1]
                    s = r + pr[j]
                    if dx * dx + dy * dy < s * s:
                        good = False
                        break
            if good:
                pxy[i, 0] = x
                pxy[i, 1] = y
                placed = True
                break
        if not placed:
            return 1
    return 0


# ---------------------------------------------------------------------------
# sensing
# ---------------------------------------------------------------------------

@njit_kernel
def sense_triangle(vals, cell, x, y, th, olx, oly, ocx, ocy, orx, ory, nearest):
    c = np.cos(th)
    s = np.sin(th)
    lx = x + c * olx - s * oly
    ly = y + s * olx + c * oly
    cx = x + c * ocx - s * ocy
    cy = y + s * ocx + c * ocy
    rx = x + c * orx - s * ory
    ry = y + s * orx + c * ory
    return (
        sample_field(vals, cell, lx, ly, nearest),
        sample_field(vals, cell, cx, cy, nearest),
        sample_field(vals, cell, rx, ry, nearest),
    )


@njit_kernel
def sense_queued(vals, cell, x, y, th, olx, oly, ocx, ocy, orx, ory, nearest,
                 q_left, q_right, q_count, q_pos, i):
    """Hardware-style read: co-linear samples with left/right delayed by a
    fixed-length queue.

    The co-linear row sits at the centre sensor's forward offset; left/right
    keep their lateral offsets and the centre value is the mean of two inner
    samples at a quarter of those offsets.  Until the queue is primed the
    current samples pass straight through.
    """
    c = np.cos(th)
    s = np.sin(th)
    lx = x + c * ocx - s * oly
    ly = y + s * ocx + c * oly
    rx = x + c * ocx - s * ory
    ry = y + s * ocx + c * ory
    mlx = x + c * ocx - s * (0.25 * oly)
    mly = y + s * ocx + c * (0.25 * oly)
    mrx = x + c * ocx - s * (0.25 * ory)
    mry = y + s * ocx + c * (0.25 * ory)
    l_now = sample_field(vals, cell, lx, ly, nearest)
    r_now = sample_field(vals, cell, rx, ry, nearest)
    c_val = 0.5 * (
        sample_field(vals, cell, mlx, mly, nearest)
        + sample_field(vals, cell, mrx, mry, nearest)
    )
    qlen = q_left.shape[1]
    if q_count[i] < qlen:
        tail = (q_pos[i] + q_count[i]) % qlen
        q_left[i, tail] = l_now
        q_right[i, tail] = r_now
        q_count[i] += 1
        return l_now, c_val, r_now
    head = q_pos[i]
    l_old = q_left[i, head]
    r_old = q_right[i, head]
    q_left[i, head] = l_now
    q_right[i, head] = r_now
    q_pos[i] = (head + 1) % qlen
    return l_old, c_val, r_old


@njit_kernel
def detect_pucks_left(x, y, th, pxy, fov, fov_half, cam_mode,
                      aw, ah, wall_deadband):
    """True when some puck centre lies in the left-camera region.

    ``cam_mode`` 0 is the idealized half-plane camera: in range ``fov``,
    strictly on the left of the heading axis, within ``fov_half`` of the
    heading.  ``cam_mode`` 1 is the offset-lens camera: a circle of diameter
    ``fov`` tangent to the robot centre, its centre ``fov/2`` ahead-left at
    45 degrees; the lens covers the nose at close range but neither the far
    field nor anything behind, which is what keeps gathering chases short and
    breaks the pivot loop a half-plane test degenerates into once pucks are
    dense (some puck is then *always* on the left).

    Pucks whose centre lies within ``wall_deadband`` of an arena wall are
    invisible to either camera: a puck pressed into a strip narrower than
    the body radius has no wall-side face the robot can reach, so it can be
    slid along the wall but never pushed off it, and chasing one just pins
    the chaser.  Pass 0 to disable the filter.
    """
    c = np.cos(th)
    s = np.sin(th)
    if cam_mode == 1:
        half = 0.5 * fov
        ca = c * 0.7071067811865476 - s * 0.7071067811865476
        sa = s * 0.7071067811865476 + c * 0.7071067811865476
        lx = x + half * ca
        ly = y + half * sa
        r2 = half * half
        for j in range(pxy.shape[0]):
            px = pxy[j, 0]
            py = pxy[j, 1]
            if (px < wall_deadband or px > aw - wall_deadband
                    or py < wall_deadband or py > ah - wall_deadband):
                continue
            dx = px - lx
            dy = py - ly
            if dx * dx + dy * dy < r2:
                return True
        return False
    f2 = fov * fov
    for j in range(pxy.shape[0]):
        px = pxy[j, 0]
        py = pxy[j, 1]
        if (px < wall_deadband or px > aw - wall_deadband
                or py < wall_deadband or py > ah - wall_deadband):
            continue
        dx = px - x
        dy = py - y
        if dx * dx + dy * dy > f2:
            continue
        fwd = c * dx + s * dy
        left = -s * dx + c * dy
        if left <= 0.0:
            continue
        if abs(np.arctan2(left, fwd)) <= fov_half:
            return True
    return False


@njit_kernel
def detect_robots_sides(i, rxy, rth, fov, fov_half):
    """(left, right) peer-robot flags; a centre exactly on the heading axis
    raises both."""
    x = rxy[i, 0]
    y = rxy[i, 1]
    th = rth[i]
    c = np.cos(th)
    s = np.sin(th)
    f2 = fov * fov
    left_seen = False
    right_seen = False
    for j in range(rxy.shape[0]):
        if j == i:
            continue
        dx = rxy[j, 0] - x
        dy = rxy[j, 1] - y
        if dx * dx + dy * dy > f2:
            continue
        fwd = c * dx + s * dy
        left = -s * dx + c * dy
        if abs(np.arctan2(abs(left), fwd)) > fov_half:
            continue
        if left >= 0.0:
            left_seen = True
        if left <= 0.0:
            right_seen = True
        if left_seen and right_seen:
            break
    return left_seen, right_seen


# ---------------------------------------------------------------------------
# controller
# ---------------------------------------------------------------------------

@njit_kernel
def compute_order(L, C, R):
    # Chained guards; ties fall to the earliest match.
    if R >= C and C >= L:
        return 1
    if C >= R and R >= L:
        return 2
    if R >= L and L >= C:
        return 4
    if L >= R and R >= C:
        return 8
    if C >= L and L >= R:
        return 16
    return 32


@njit_kernel
def decide_one(L, C, R, left_puck, left_robot, right_robot, x, y,
               vmax, wmax, puck_variant, align_variant, black_threshold,
               stuck_window, stuck_eps, stuck_move_eps, recovery_duration,
               kick_interval,
               i, hist, hist_count, hist_pos, pose_hist, kick_count,
               rec_rem, rec_v, rec_w, rng_state):
    """One control decision for robot ``i``; returns (v, omega, branch).

    Branch ids: 0 recovery, 1 goal-zone avoidance, 2 puck gathering,
    3 field alignment, 4 default orbit (veer right), 5 slow forward.
    State arrays (reading history, pose history, kick counter, recovery
    timer/action) mutate in place.  A recovery already in progress is not
    re-triggered, so the drawn turn rate holds for its full duration.

    A recovery starts on any of four conditions:

    * flat readings - per-channel spread below ``stuck_eps`` over a full
      window; the field carries no heading information where readings
      freeze;
    * all-black readings - every sample in the window below
      ``black_threshold``; deep inside the zero-valued goal plateau the
      control law degenerates to a tight pivot loop;
    * a pinned body - the pose ``(x, y)`` stayed inside a box smaller than
      ``stuck_move_eps`` per axis for a full window.  This catches chase
      loops against an immovable puck (one wedged in a corner, say) where
      the readings still wobble just above ``stuck_eps``;
    * a scheduled kick - ``kick_interval`` steps passed since the last
      recovery (0 disables).  A reactive law over a static field admits
      global limit cycles that tour the arena without transporting
      anything; a sparse randomized reverse re-phases such tours at
      negligible duty cycle, and the counter reset on every recovery keeps
      kicks from stacking onto organic triggers.

    The pose ring shares the reading ring's cursor, so both tests see the
    same rolling window; the reverse during a recovery floods the rings
    with motion, which spaces repeated triggers out naturally.
    """
    pos = hist_pos[i]
    hist[i, pos, 0] = L
    hist[i, pos, 1] = C
    hist[i, pos, 2] = R
    pose_hist[i, pos, 0] = x
    pose_hist[i, pos, 1] = y
    hist_pos[i] = (pos + 1) % stuck_window
    if hist_count[i] < stuck_window:
        hist_count[i] += 1
    kick_count[i] += 1
    if rec_rem[i] == 0:
        trigger = kick_interval > 0 and kick_count[i] >= kick_interval
        if not trigger and hist_count[i] == stuck_window:
            stuck = True
            all_black = True
            for ch in range(3):
                lo = hist[i, 0, ch]
                hi = lo
                for k in range(1, stuck_window):
                    v = hist[i, k, ch]
                    if v < lo:
                        lo = v
                    if v > hi:
                        hi = v
                if hi - lo >= stuck_eps:
                    stuck = False
                if hi >= black_threshold:
                    all_black = False
            if not (stuck or all_black):
                pinned = True
                for ch in range(2):
                    lo = pose_hist[i, 0, ch]
                    hi = lo
                    for k in range(1, stuck_window):
                        v = pose_hist[i, k, ch]
                        if v < lo:
                            lo = v
                        if v > hi:
                            hi = v
                    if hi - lo >= stuck_move_eps:
                        pinned = False
                        break
                trigger = pinned
            else:
                trigger = True
        if trigger:
            rec_rem[i] = recovery_duration
            rec_v[i] = -vmax
            rec_w[i] = (2.0 * rng_uniform(rng_state) - 1.0) * wmax
            kick_count[i] = 0
    if rec_rem[i] > 0:
        rec_rem[i] -= 1
        return rec_v[i], rec_w[i], 0
    order = compute_order(L, C, R)
    if R < black_threshold and C >= L:
        return vmax, wmax, 1
    if (puck_variant & order) != 0 and left_puck and not left_robot:
        return vmax, wmax, 2
    if (align_variant & order) != 0 and not left_robot:
        return vmax, wmax, 3
    if not right_robot:
        return vmax, -wmax, 4
    return 0.25 * vmax, 0.0, 5


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@njit_kernel
def proportion_in_goal_arrays(pxy, pr, dmap, cell):
    n = pxy.shape[0]
    if n == 0:
        return 0.0
    h, w = dmap.shape
    cnt = 0
    for j in range(n):
        ix = int(np.floor(pxy[j, 0] / cell))
        iy = int(np.floor(pxy[j, 1] / cell))
        if ix < 0:
            ix = 0
        elif ix > w - 1:
            ix = w - 1
        if iy < 0:
            iy = 0
        elif iy > h - 1:
            iy = h - 1
        if dmap[iy, ix] <= pr[j]:
            cnt += 1
    return cnt / n


@njit_kernel
def goal_coverage_arrays(zero_ys, zero_xs, cell, pxy, pr):
    nz = zero_ys.shape[0]
    if nz == 0:
        return 0.0
    npk = pxy.shape[0]
    cnt = 0
    for k in range(nz):
        cx = (zero_xs[k] + 0.5) * cell
        cy = (zero_ys[k] + 0.5) * cell
        for j in range(npk):
            dx = pxy[j, 0] - cx
            dy = pxy[j, 1] - cy
            if dx * dx + dy * dy <= pr[j] * pr[j]:
                cnt += 1
                break
    return cnt / nz


# ---------------------------------------------------------------------------
# trial loop
# ---------------------------------------------------------------------------

@njit_kernel
def advance(vals, cell, dmap,
            rxy, rth, rr, pxy, pr, aw, ah,
            olx, oly, ocx, ocy, orx, ory,
            puck_fov, robot_fov, fov_half, cam_mode, wall_deadband,
            nearest, queued,
            q_left, q_right, q_count, q_pos,
            vmax, wmax, puck_variant, align_variant, black_threshold,
            stuck_window, stuck_eps, stuck_move_eps, recovery_duration,
            kick_interval,
            hist, hist_count, hist_pos, pose_hist, kick_count,
            rec_rem, rec_v, rec_w,
            dt, min_sweeps, max_sweeps, tol,
            step0, n_steps, scatter_step, margin, place_attempts,
            sample_interval,
            rng_state,
            out_steps, out_props, out_cursor,
            trace, trace_cursor):
    """Run ``n_steps`` simulation steps in place; resumable via ``step0``.

    Per step: all robots sense the pre-step world, all decide, then the world
    integrates, resolves overlaps, and clamps to the walls.  The in-goal
    proportion lands in ``out_*`` whenever the completed step count is a
    multiple of ``sample_interval``; when ``trace`` is non-empty one row per
    decision is appended.  Pucks are rescattered when the global step counter
    hits ``scatter_step``.  Returns 0, or 1 if a rescatter fails to place.
    """
    nr = rxy.shape[0]
    actions = np.empty((nr, 2), np.float64)
    do_trace = trace.shape[0] > 0
    for k in range(n_steps):
        gstep = step0 + k
        if gstep == scatter_step:
            bad = scatter_pucks(rng_state, pxy, pr, rxy, rr, aw, ah, margin, place_attempts)
            if bad != 0:
                return 1
        for i in range(nr):
            x = rxy[i, 0]
            y = rxy[i, 1]
            th = rth[i]
            if queued != 0:
                L, C, R = sense_queued(vals, cell, x, y, th,
                                       olx, oly, ocx, ocy, orx, ory, nearest,
                                       q_left, q_right, q_count, q_pos, i)
            else:
                L, C, R = sense_triangle(vals, cell, x, y, th,
                                         olx, oly, ocx, ocy, orx, ory, nearest)
            lp = detect_pucks_left(x, y, th, pxy, puck_fov, fov_half, cam_mode,
                                   aw, ah, wall_deadband)
            lr, rb = detect_robots_sides(i, rxy, rth, robot_fov, fov_half)
            v, w, branch = decide_one(L, C, R, lp, lr, rb, x, y,
                                      vmax, wmax, puck_variant, align_variant,
                                      black_threshold, stuck_window, stuck_eps,
                                      stuck_move_eps, recovery_duration,
                                      kick_interval,
                                      i, hist, hist_count, hist_pos,
                                      pose_hist, kick_count,
                                      rec_rem, rec_v, rec_w, rng_state)
            actions[i, 0] = v
            actions[i, 1] = w
            if do_trace:
                t = trace_cursor[0]
                trace[t, 0] = gstep
                trace[t, 1] = i
                trace[t, 2] = L
                trace[t, 3] = C
                trace[t, 4] = R
                trace[t, 5] = 1.0 if lp else 0.0
                trace[t, 6] = 1.0 if lr else 0.0
                trace[t, 7] = 1.0 if rb else 0.0
                trace[t, 8] = branch
                trace[t, 9] = v
                trace[t, 10] = w
                trace_cursor[0] = t + 1
        step_arrays(rxy, rth, rr, pxy, pr, actions, aw, ah, dt, min_sweeps, max_sweeps, tol)
        done = gstep + 1
        if sample_interval > 0 and done % sample_interval == 0:
            cpos = out_cursor[0]
            out_steps[cpos] = done
            out_props[cpos] = proportion_in_goal_arrays(pxy, pr, dmap, cell)
            out_cursor[0] = cpos + 1
    return 0


@njit_kernel
def flow_rollout(vals, cell, x0, y0, aw, ah, robot_radius,
                 olx, oly, ocx, ocy, orx, ory, nearest,
                 vmax, wmax, puck_variant, align_variant, black_threshold,
                 stuck_window, stuck_eps, stuck_move_eps, recovery_duration,
                 kick_interval,
                 n_headings, steps, burn_in, dt, rng_state):
    """Average displacement of a lone robot started at a point.

    For each of ``n_headings`` evenly spaced initial headings the robot runs
    ``steps`` control steps with no pucks or peers (walls still clamp); the
    displacement from the pose after ``burn_in`` steps to the final pose is
    averaged across headings.
    """
    hist = np.zeros((1, stuck_window, 3), np.float64)
    hist_count = np.zeros(1, np.int64)
    hist_pos = np.zeros(1, np.int64)
    pose_hist = np.zeros((1, stuck_window, 2), np.float64)
    kick_count = np.zeros(1, np.int64)
    rec_rem = np.zeros(1, np.int64)
    rec_v = np.zeros(1, np.float64)
    rec_w = np.zeros(1, np.float64)
    acc_x = 0.0
    acc_y = 0.0
    for h in range(n_headings):
        th = wrap_angle(-np.pi + 2.0 * np.pi * h / n_headings)
        x = x0
        y = y0
        bx = x0
        by = y0
        hist_count[0] = 0
        hist_pos[0] = 0
        kick_count[0] = 0
        rec_rem[0] = 0
        for s in range(steps):
            L, C, R = sense_triangle(vals, cell, x, y, th,
                                     olx, oly, ocx, ocy, orx, ory, nearest)
            v, w, branch = decide_one(L, C, R, False, False, False, x, y,
                                      vmax, wmax, puck_variant, align_variant,
                                      black_threshold, stuck_window, stuck_eps,
                                      stuck_move_eps, recovery_duration,
                                      kick_interval,
                                      0, hist, hist_count, hist_pos,
                                      pose_hist, kick_count,
                                      rec_rem, rec_v, rec_w, rng_state)
            x, y, th = integrate_unicycle_pose(x, y, th, v, w, dt)
            if x < robot_radius:
                x = robot_radius
            elif x > aw - robot_radius:
                x = aw - robot_radius
            if y < robot_radius:
                y = robot_radius
            elif y > ah - robot_radius:
                y = ah - robot_radius
            if s + 1 == burn_in:
                bx = x
                by = y
        acc_x += x - bx
        acc_y += y - by
    return acc_x / n_headings, acc_y / n_headings
