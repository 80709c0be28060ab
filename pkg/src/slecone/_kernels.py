"""Compiled inner loops for the Loewner solver and the SDE samplers.

Loewner kernels take per-step capacities ``h`` (``h[j]`` belongs to the map
driven by ``W[j]``; ``h[0]`` is unused) so that uniform and adaptive grids
share one code path.
"""

import numpy as np
from numba import njit

# Far-field expansions of a block are used only when the point is at least
# FAR_FACTOR times the block's singular radius away from the block centre.
FAR_FACTOR = 2.0
N_TERMS = 40
N_CIRCLE = 128


@njit(cache=True, nogil=True)
def _usqrt(q):
    # square root with nonnegative imaginary part (cut along the positive reals)
    s = np.sqrt(q)
    if s.imag < 0.0:
        s = -s
    return s


@njit(cache=True, nogil=True)
def inverse_slit(z, w, dt):
    """Inverse vertical-slit map z -> w + sqrt((z - w)^2 - 4 dt), H onto H minus a slit."""
    d = z - w
    return w + _usqrt(d * d - 4.0 * dt)


@njit(cache=True, nogil=True)
def forward_slit(z, w, dt):
    d = z - w
    return w + _usqrt(d * d + 4.0 * dt)


@njit(cache=True, nogil=True)
def naive_tips(W, h, lift):
    n = W.shape[0] - 1
    out = np.empty(n + 1, dtype=np.complex128)
    out[0] = W[0] + 0j
    bad = -1
    for k in range(1, n + 1):
        z = W[k] + 1j * lift[k]
        for j in range(k, 0, -1):
            z = inverse_slit(z, W[j], h[j])
        out[k] = z
        if bad < 0 and not (np.isfinite(z.real) and np.isfinite(z.imag)):
            bad = k
    return out, bad


@njit(cache=True, nogil=True)
def _series(z, node, centres, radii, coefs):
    d = z - centres[node]
    u = 1.5 * radii[node] / d
    # terms decay like (|u| / 1.5)^p; truncate at double precision
    q = abs(u) / 1.5
    nt = N_TERMS
    if q < 0.5:
        nt = min(N_TERMS, int(-36.0 / np.log(q)) + 1) if q > 0.0 else 1
    acc = 0j
    for p in range(nt - 1, -1, -1):
        acc = (acc + coefs[node, p]) * u
    return z + acc


@njit(cache=True, nogil=True)
def _apply_range(z, hi, lo, nlev, sizes, offsets, W, h, centres, radii, coefs):
    # maps hi, hi-1, ..., lo+1 applied in that order; levels below nlev may be
    # replaced by their far-field expansions
    j = hi
    while j > lo:
        done = False
        for lev in range(nlev - 1, -1, -1):
            size = sizes[lev]
            if j % size != 0 or j - size < lo:
                continue
            node = offsets[lev] + j // size - 1
            if abs(z - centres[node]) > FAR_FACTOR * radii[node]:
                z = _series(z, node, centres, radii, coefs)
                j -= size
                done = True
                break
        if not done:
            z = inverse_slit(z, W[j], h[j])
            j -= 1
    return z


@njit(cache=True, nogil=True)
def build_tree(W, h, sizes):
    """Far-field expansions of aligned blocks of inverse slit maps.

    Node b on level l covers maps b*sizes[l]+1 .. (b+1)*sizes[l].  Each node
    stores its centre, the radius of its real singular interval, and
    normalised Laurent coefficients c_p such that the block composition is
    z + sum_p c_p (r / (z - centre))^p with r = 1.5 * radius.
    """
    n = W.shape[0] - 1
    nlev = sizes.shape[0]
    offsets = np.zeros(nlev + 1, dtype=np.int64)
    for lev in range(nlev):
        offsets[lev + 1] = offsets[lev] + n // sizes[lev]
    total = offsets[nlev]
    centres = np.zeros(total)
    radii = np.zeros(total)
    coefs = np.zeros((total, N_TERMS), dtype=np.complex128)
    half = N_CIRCLE // 2
    vals = np.empty(half, dtype=np.complex128)
    for lev in range(nlev):
        size = sizes[lev]
        for b in range(n // size):
            node = offsets[lev] + b
            lo = b * size
            hi = lo + size
            # forward flow of the real singular interval of the block
            a = W[lo + 1]
            c = W[lo + 1]
            for j in range(lo + 1, hi + 1):
                w = W[j]
                if w < a:
                    a = w
                if w > c:
                    c = w
                da = a - w
                dc = c - w
                a = w - np.sqrt(da * da + 4.0 * h[j])
                c = w + np.sqrt(dc * dc + 4.0 * h[j])
            ctr = 0.5 * (a + c)
            rad = 0.5 * (c - a)
            centres[node] = ctr
            radii[node] = rad
            r = 1.5 * rad
            for m in range(half):
                th = 2.0 * np.pi * (m + 0.5) / N_CIRCLE
                z0 = ctr + r * (np.cos(th) + 1j * np.sin(th))
                z = _apply_range(z0, hi, lo, lev, sizes, offsets, W, h, centres, radii, coefs)
                vals[m] = z - z0
            # the lower half of the circle follows by reflection symmetry
            for p in range(1, N_TERMS + 1):
                acc = 0j
                for m in range(half):
                    th = 2.0 * np.pi * (m + 0.5) / N_CIRCLE
                    e = np.cos(p * th) + 1j * np.sin(p * th)
                    acc += vals[m] * e + np.conj(vals[m] * e)
                coefs[node, p - 1] = acc / N_CIRCLE
    return offsets, centres, radii, coefs


@njit(cache=True, nogil=True)
def fast_tips(W, h, lift, sizes, offsets, centres, radii, coefs, start):
    """Tips f_1 o ... o f_k (W_k + i lift) for k >= start, using the tree."""
    n = W.shape[0] - 1
    nlev = sizes.shape[0]
    out = np.empty(n + 1, dtype=np.complex128)
    out[0] = W[0] + 0j
    bad = -1
    for k in range(max(start, 1), n + 1):
        z = _apply_range(W[k] + 1j * lift[k], k, 0, nlev, sizes, offsets, W, h, centres, radii, coefs)
        out[k] = z
        if bad < 0 and not (np.isfinite(z.real) and np.isfinite(z.imag)):
            bad = k
    return out, bad


@njit(cache=True, nogil=True)
def pullback(z, W, h, hi, sizes, offsets, centres, radii, coefs):
    """Apply f_1 o ... o f_hi to each point of z."""
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        out[i] = _apply_range(z[i], hi, 0, sizes.shape[0], sizes, offsets, W, h, centres, radii, coefs)
    return out


@njit(cache=True, nogil=True)
def forward_points(W, h, z, nsteps, swallow_tol):
    """Forward flow g_t of an array of points; returns images and swallow step (-1 if alive)."""
    m = z.shape[0]
    out = z.copy()
    swallowed = -np.ones(m, dtype=np.int64)
    for i in range(m):
        x = z[i]
        if x.imag <= swallow_tol:
            # points on the real line at the seed are swallowed at once
            if abs(x - W[0]) <= swallow_tol:
                swallowed[i] = 0
                out[i] = x
                continue
        for j in range(1, nsteps + 1):
            x = forward_slit(x, W[j], h[j])
            if x.imag <= swallow_tol and z[i].imag > swallow_tol:
                swallowed[i] = j
                break
        out[i] = x
    return out, swallowed


@njit(cache=True, nogil=True)
def _besq_step(zk, delta, h, db, milstein):
    if zk > 0.0:
        x = np.sqrt(zk)
        if milstein:
            y = x + db
            return y * y + (delta - 1.0) * h
        return zk + delta * h + 2.0 * x * db
    return zk + delta * h


@njit(cache=True, nogil=True)
def besq_driver_path(delta, z0, h, dB, milstein):
    """Square-root scheme on Z = X^2 tracking the Brownian increments.

    ``h[k]`` is the length of step k.  Negative excursions of Z are clamped
    inside the diffusion coefficient and kept in the state; the Milstein
    correction is applied only while Z > 0.
    """
    n = dB.shape[0]
    Z = np.empty(n + 1)
    Z[0] = z0
    for k in range(n):
        Z[k + 1] = _besq_step(Z[k], delta, h[k], dB[k], milstein)
    return Z


@njit(cache=True, nogil=True)
def besq_adaptive(delta, z0, t0, T, c, hmin, hmax, normals, milstein):
    """Same scheme with step ``clip(c * Z, hmin, hmax)``, run from time t0 towards T.

    Consumes standard normals from ``normals`` until either T is reached or
    the normals run out.  Returns (Z, h, dB, t_end).
    """
    m = normals.shape[0]
    Z = np.empty(m + 1)
    H = np.empty(m)
    D = np.empty(m)
    Z[0] = z0
    t = t0
    k = 0
    while k < m and t < T * (1.0 - 1e-14):
        zk = Z[k]
        step = c * zk
        if step < hmin:
            step = hmin
        if step > hmax:
            step = hmax
        if t + step > T:
            step = T - t
        db = np.sqrt(step) * normals[k]
        Z[k + 1] = _besq_step(zk, delta, step, db, milstein)
        H[k] = step
        D[k] = db
        t += step
        k += 1
    return Z[: k + 1], H[:k], D[:k], t


@njit(cache=True, nogil=True)
def multi_force_euler(w0, V0, rho, dt, dB, sqrt_kappa, floor, side, cum_stop):
    """Euler scheme for a driving function with several force points.

    side[i] is -1 for a left force point and +1 for a right one.  A force
    point overtaken by W within one step is reflected about W, which keeps
    the ordering without touching the driving increment.  Drift terms use
    gaps floored at `floor`.  The run stops early when W comes within
    `floor` of an adjacent force cluster whose cumulative weight is at or
    below cum_stop (continuation threshold); a point W overtook during the step
    counts as touched.
    """
    n = dB.shape[0]
    m = V0.shape[0]
    W = np.empty(n + 1)
    V = np.empty((n + 1, m))
    W[0] = w0
    for i in range(m):
        V[0, i] = V0[i]
    stop = n
    hit = np.zeros(m, dtype=np.bool_)
    for k in range(n):
        w = W[k]
        drift = 0.0
        for i in range(m):
            g = w - V[k, i]
            if abs(g) < floor:
                g = -side[i] * floor
            drift += rho[i] / g
        wn = w + sqrt_kappa * dB[k] + drift * dt
        for i in range(m):
            g = V[k, i] - w
            if abs(g) < floor:
                g = side[i] * floor
            v = V[k, i] + 2.0 * dt / g
            hit[i] = False
            if side[i] < 0 and v > wn:
                v = 2.0 * wn - v
                hit[i] = True
            elif side[i] > 0 and v < wn:
                v = 2.0 * wn - v
                hit[i] = True
            if abs(v - wn) <= floor:
                hit[i] = True
            V[k + 1, i] = v
        W[k + 1] = wn
        halt = False
        for s in (-1, 1):
            # nearest point on this side; if W touched it, sum its cluster
            near = -1
            best = np.inf
            for i in range(m):
                if side[i] == s and abs(V[k + 1, i] - wn) < best:
                    best = abs(V[k + 1, i] - wn)
                    near = i
            if near < 0 or not hit[near]:
                continue
            cum = 0.0
            for i in range(m):
                if side[i] == s and (hit[i] or abs(V[k + 1, i] - V[k + 1, near]) <= floor):
                    cum += rho[i]
            if cum <= cum_stop + 1e-9:
                halt = True
        if halt:
            stop = k + 1
            break
    return W[: stop + 1], V[: stop + 1], stop
