"""Forward chordal Loewner solver on a capacity grid.

The driving function is approximated by a constant on each step, so every
increment is a vertical slit map of half-plane capacity ``dt`` (a scalar
for a uniform grid, or one value per step).  Tips are
obtained by pulling ``W_k + i*lift`` back through the inverse increments.
Far from a block of increments, the block's composition is replaced by its
Laurent expansion (see :mod:`slecone._kernels`); near it the exact maps are
used, so the result agrees with the plain O(N^2) composition to rounding.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

IMAG_TOL = 1e-9


class LoewnerError(RuntimeError):
    """Numerical failure of the Loewner solver at a given step."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


@dataclass
class Trace:
    """Polyline approximation of a curve in the closed upper half-plane."""

    capacity_times: np.ndarray
    points: np.ndarray
    kappa: float = float("nan")
    rho: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.capacity_times = np.asarray(self.capacity_times, dtype=float)
        self.points = np.asarray(self.points, dtype=complex)
        if self.capacity_times.shape != self.points.shape:
            raise ValueError("capacity_times and points must have the same length")

    def __len__(self):
        return self.points.shape[0]

    def upto(self, t):
        """The trace restricted to capacity times <= t."""
        keep = self.capacity_times <= t + 1e-12
        return Trace(self.capacity_times[keep], self.points[keep], self.kappa, self.rho, dict(self.meta))

    def xy(self):
        return np.column_stack([self.points.real, self.points.imag])


def tree_sizes(n, base=32, factor=8):
    sizes = []
    s = base
    while s <= n:
        sizes.append(s)
        s *= factor
    return np.array(sizes or [max(n, 1)], dtype=np.int64)


def _check(W, dt):
    """Validated driving array and per-step capacities ``h`` (``h[0]`` unused)."""
    W = np.ascontiguousarray(W, dtype=float)
    if W.ndim != 1 or W.size == 0:
        raise ValueError("W must be a nonempty 1-d sequence")
    n = W.size - 1
    if np.ndim(dt) == 0:
        if not dt > 0:
            raise ValueError("dt must be positive")
        h = np.full(n + 1, float(dt))
    else:
        steps = np.asarray(dt, dtype=float)
        if steps.shape != (n,):
            raise ValueError("per-step dt must have one value per step")
        if not np.all(steps > 0):
            raise ValueError("dt must be positive")
        h = np.concatenate([[steps[0] if n else 1.0], steps])
    if not np.all(np.isfinite(W)):
        bad = int(np.flatnonzero(~np.isfinite(W))[0])
        raise LoewnerError("non-finite driving value", bad)
    return W, h


def _times(h):
    return np.concatenate([[0.0], np.cumsum(h[1:])])


def _nsteps(h, t):
    times = _times(h)
    if t < -1e-12 or t > times[-1] * (1 + 1e-12) + 1e-12:
        raise ValueError("t outside the grid horizon")
    return int(np.searchsorted(times, t + 1e-12 * max(1.0, t), side="right") - 1)


def solve_forward(W, dt, lift=None, method="tree", kappa=float("nan"), rho=float("nan")):
    """Trace of the Loewner chain driven by ``W`` (length N+1, ``W[0]`` at t=0).

    Parameters
    ----------
    W : array_like
        Driving values on the grid ``k * dt``.
    dt : float or array_like
        Capacity step, or the N step capacities of a non-uniform grid.
    lift : float, optional
        Height above ``W_k`` at which the tip is evaluated; defaults to
        ``sqrt`` of the step capacity.
    method : {"tree", "naive"}
        ``"naive"`` composes every increment explicitly (O(N^2)).

    Returns
    -------
    Trace
    """
    W, h = _check(W, dt)
    lifts = np.sqrt(h) if lift is None else np.full(h.size, float(lift))
    n = W.size - 1
    if method == "naive":
        pts, bad = _kernels.naive_tips(W, h, lifts)
    elif method == "tree":
        sizes = tree_sizes(n)
        offsets, centres, radii, coefs = _kernels.build_tree(W, h, sizes)
        pts, bad = _kernels.fast_tips(W, h, lifts, sizes, offsets, centres, radii, coefs, 1)
    else:
        raise ValueError(f"unknown method {method!r}")
    if bad >= 0:
        raise LoewnerError("square-root branch produced a non-finite tip", bad)
    pts[0] = W[0]
    low = np.flatnonzero(pts.imag < -IMAG_TOL)
    if low.size:
        raise LoewnerError("tip left the upper half-plane", int(low[0]))
    meta = {"dt": float(dt) if np.ndim(dt) == 0 else "adaptive", "lift": lift}
    return Trace(_times(h), pts, kappa, rho, meta)


def pullback(W, dt, z, k=None):
    """Apply ``f_1 o ... o f_k`` (the inverse of ``g_{k dt}``) to points ``z``."""
    W, h = _check(W, dt)
    n = W.size - 1 if k is None else int(k)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if n == 0:
        return z.copy()
    Wk = np.ascontiguousarray(W[: n + 1])
    hk = np.ascontiguousarray(h[: n + 1])
    sizes = tree_sizes(n)
    offsets, centres, radii, coefs = _kernels.build_tree(Wk, hk, sizes)
    return _kernels.pullback(z, Wk, hk, n, sizes, offsets, centres, radii, coefs)


@dataclass
class MapResult:
    value: complex
    swallowed: bool
    swallow_time: float = float("nan")


def map_point(W, dt, z, t, swallow_tol=1e-12):
    """``g_t(z)`` by forward composition of the slit increments.

    If ``z`` enters the hull before time ``t`` the result is marked swallowed
    and carries the swallowing time and the boundary value reached.
    """
    W, h = _check(W, dt)
    z = complex(z)
    if z.imag < 0:
        raise ValueError("z must lie in the closed upper half-plane")
    nsteps = _nsteps(h, t)
    out, sw = _kernels.forward_points(W, h, np.array([z]), nsteps, swallow_tol)
    if sw[0] >= 0:
        return MapResult(complex(out[0]), True, float(_times(h)[sw[0]]))
    return MapResult(complex(out[0]), False)


def map_points(W, dt, z, t, swallow_tol=1e-12):
    """Vectorised :func:`map_point`; returns images and swallow steps (-1 when alive)."""
    W, h = _check(W, dt)
    nsteps = _nsteps(h, t)
    z = np.ascontiguousarray(np.atleast_1d(z), dtype=complex)
    return _kernels.forward_points(W, h, z, nsteps, swallow_tol)


def hydrodynamic_check(W, dt, radius, t=None, n_points=64):
    """Max of ``|g_t(z) - z - 2t/z|`` over points of the upper half circle ``|z| = radius``."""
    W, h = _check(W, dt)
    if t is None:
        t = float(_times(h)[-1])
    if t == 0:
        return 0.0
    th = np.pi * (np.arange(n_points) + 0.5) / n_points
    z = radius * np.exp(1j * th)
    g, sw = map_points(W, dt, z, t)
    if np.any(sw >= 0):
        raise ValueError("radius is inside the hull")
    return float(np.max(np.abs(g - z - 2 * t / z)))


def solve_tail(W, dt, start, lift=None, kappa=float("nan"), rho=float("nan")):
    """Tips of the chain driven by ``W`` at steps ``start .. N`` only.

    Used when a chain shares its first ``start`` steps with one already
    solved; the returned trace starts at step ``start``.
    """
    W, h = _check(W, dt)
    n = W.size - 1
    if not 0 <= start <= n:
        raise ValueError("start outside the grid")
    lifts = np.sqrt(h) if lift is None else np.full(h.size, float(lift))
    sizes = tree_sizes(n)
    offsets, centres, radii, coefs = _kernels.build_tree(W, h, sizes)
    pts, bad = _kernels.fast_tips(W, h, lifts, sizes, offsets, centres, radii, coefs, max(start, 1))
    if bad >= 0:
        raise LoewnerError("square-root branch produced a non-finite tip", bad)
    pts[0] = W[0]
    pts = pts[start:]
    low = np.flatnonzero(pts.imag < -IMAG_TOL)
    if low.size:
        raise LoewnerError("tip left the upper half-plane", int(low[0]) + start)
    return Trace(_times(h)[start:], pts, kappa, rho, {"start": start})
