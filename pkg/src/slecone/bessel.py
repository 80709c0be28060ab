"""Squared Bessel and Bessel processes, with the principal-value functional.

Two samplers are provided.  :func:`sample_besq_exact` draws BESQ^delta on an
arbitrary grid from the noncentral chi-square transition law and is exact in
law at the grid times.  :func:`sample_bes_with_driver` runs a square-root
scheme on Z = X^2 while keeping the Brownian increments, so that the
principal-value integral U = P.V. int_0^t ds / X_s can be recovered from the
identity

    X_t = x0 + (delta - 1)/2 * U_t + B_t.

For delta in (0, 1) this is the only cheap route to U: the plain integral of
1/X diverges there and the compensation lives in the local time at zero.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _kernels

DELTA_GUARD = 1e-6


@dataclass
class BesselPath:
    """Bessel path X, its driving Brownian motion B and the P.V. functional U.

    ``dt`` is the step of a uniform grid; adaptive paths carry their own
    ``grid`` of times and report the smallest step as ``dt``.
    """

    delta: float
    x0: float
    dt: float
    X: np.ndarray
    B: np.ndarray
    U: np.ndarray
    grid: np.ndarray | None = None

    @property
    def times(self):
        if self.grid is not None:
            return self.grid
        return self.dt * np.arange(self.X.size)

    @property
    def steps(self):
        """Length of each step (``len(X) - 1`` values)."""
        return np.diff(self.times)

    def __len__(self):
        return self.X.size


def sample_besq_exact(delta, z0, times, rng):
    """Markov-exact BESQ^delta samples on ``times`` (``times[0] == 0``).

    The transition from ``Z_s`` to ``Z_t`` is ``(t-s)`` times a noncentral
    chi-square with ``delta`` degrees of freedom and noncentrality
    ``Z_s/(t-s)``.  ``z0`` may be an array to sample several paths at once;
    the returned array then has shape ``(len(times), len(z0))``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] != 0:
        raise ValueError("times must be a 1-d grid starting at 0")
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise ValueError("time grid must be strictly increasing")
    z0 = np.asarray(z0, dtype=float)
    if np.any(z0 < 0):
        raise ValueError("z0 must be nonnegative")
    out = np.empty((times.size,) + z0.shape)
    out[0] = z0
    z = z0
    for i, h in enumerate(steps):
        nc = z / h
        # numpy's sampler wants a strictly positive noncentrality only for
        # df <= 1; it handles nc == 0 as a central chi-square
        z = h * rng.noncentral_chisquare(delta, nc, size=z0.shape) if z0.shape else \
            h * rng.noncentral_chisquare(delta, float(nc))
        out[i + 1] = z
    return out


def sample_bes_with_driver(delta, x0, dt, steps, rng, scheme="milstein"):
    """BES^delta from ``x0`` with its driving Brownian motion and P.V. functional.

    Parameters
    ----------
    delta : float
        Bessel dimension, positive and not within ``1e-6`` of 1.
    x0 : float
        Starting value, ``>= 0``.
    dt : float
        Grid step.
    steps : int
        Number of steps.
    rng : numpy.random.Generator
    scheme : {"milstein", "euler"}
        Update of Z = X^2.  ``"euler"`` is ``Z + delta dt + 2 sqrt(Z) dB``;
        ``"milstein"`` adds the ``dB^2 - dt`` correction, which for this SDE
        reads ``(sqrt(Z) + dB)^2 + (delta - 1) dt``.  In both schemes negative
        values of Z are kept in the state and clamped to 0 in the diffusion
        coefficient.

    Returns
    -------
    BesselPath
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if abs(delta - 1.0) < DELTA_GUARD:
        raise ValueError("delta too close to 1: the principal-value identity is singular there")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if x0 < 0:
        raise ValueError("x0 must be nonnegative")
    steps = int(steps)
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if scheme not in ("milstein", "euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    dB = rng.standard_normal(steps) * np.sqrt(dt)
    return bes_from_increments(delta, x0, dt, dB, scheme)


def bes_from_increments(delta, x0, dt, dB, scheme="milstein"):
    """Deterministic part of :func:`sample_bes_with_driver` given the increments."""
    dB = np.ascontiguousarray(dB, dtype=float)
    h = np.full(dB.size, float(dt))
    Z = _kernels.besq_driver_path(float(delta), float(x0) ** 2, h, dB, scheme == "milstein")
    return _assemble(delta, x0, float(dt), Z, dB, None)


def _assemble(delta, x0, dt, Z, dB, grid):
    X = np.sqrt(np.maximum(Z, 0.0))
    X[0] = x0
    B = np.concatenate([[0.0], np.cumsum(dB)])
    U = 2.0 * (X - x0 - B) / (delta - 1.0)
    U[0] = 0.0
    return BesselPath(float(delta), float(x0), dt, X, B, U, grid)


def sample_bes_adaptive(delta, x0, T, rng, resolution=1e-3, hmin=1e-9, hmax=1e-4, scheme="milstein"):
    """BES^delta on a state-dependent grid refined near zero.

    The step from a state X is ``clip(resolution^2 * X^2, hmin, hmax)``, so
    the spatial move per step is about ``resolution * X`` away from zero and
    about ``sqrt(hmin)`` next to it.  This resolves the short excursions that
    a uniform grid of the same size smears out.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if abs(delta - 1.0) < DELTA_GUARD:
        raise ValueError("delta too close to 1: the principal-value identity is singular there")
    if not 0 < hmin <= hmax:
        raise ValueError("need 0 < hmin <= hmax")
    if not T >= 0:
        raise ValueError("T must be nonnegative")
    if x0 < 0:
        raise ValueError("x0 must be nonnegative")
    c = float(resolution) ** 2
    chunk = int(min(max(4 * T / hmax, 1024), 1 << 22))
    Zs, Hs, Ds = [np.array([float(x0) ** 2])], [], []
    t = 0.0
    while t < T * (1 - 1e-14):
        Z, H, D, t = _kernels.besq_adaptive(float(delta), Zs[-1][-1], t, float(T), c, float(hmin), float(hmax),
                                             rng.standard_normal(chunk), scheme == "milstein")
        Zs.append(Z[1:])
        Hs.append(H)
        Ds.append(D)
    Z = np.concatenate(Zs)
    H = np.concatenate(Hs) if Hs else np.empty(0)
    D = np.concatenate(Ds) if Ds else np.empty(0)
    grid = np.concatenate([[0.0], np.cumsum(H)])
    return _assemble(delta, x0, float(H.min()) if H.size else float(hmin), Z, D, grid)


def zero_set_local_time(X, dt, eps):
    """Normalised occupation time of ``[0, eps)``: ``(1/eps) * int 1{X < eps} dt``.

    A crude, monotone proxy for the local time at 0, used for diagnostics.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")
    X = np.asarray(X, dtype=float)
    inc = (X[:-1] < eps) * (dt / eps)
    return np.concatenate([[0.0], np.cumsum(inc)])


def first_zero_index(X, level=0.0):
    """Index of the first grid value ``<= level``, or ``-1`` if none."""
    hit = np.flatnonzero(np.asarray(X) <= level)
    return int(hit[0]) if hit.size else -1


def bridge_zero_probability(delta, z_prev, z_next, h):
    """Probability that BESQ^delta bridging ``z_prev -> z_next`` over time ``h`` touches 0.

    For delta < 2 the killed BES^delta kernel is the h-transform of BES^(4-delta),
    which gives ``1 - I_{1-delta/2}(x y / h) / I_{delta/2-1}(x y / h)`` with
    ``x, y`` the square roots of the end points.  It is 0 for delta >= 2.
    """
    z_prev, z_next = np.broadcast_arrays(np.asarray(z_prev, float), np.asarray(z_next, float))
    if delta >= 2:
        return np.zeros(z_prev.shape)
    nu = 1.0 - delta / 2.0
    arg = np.sqrt(np.maximum(z_prev, 0.0) * np.maximum(z_next, 0.0)) / h
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = special.ive(nu, arg) / special.ive(-nu, arg)
    # arg -> 0: I_{-nu} blows up, so the bridge surely hits
    return np.where(arg > 0, 1.0 - np.nan_to_num(ratio, nan=0.0), 1.0)


def zero_hit_fraction(delta, x0, T, n_paths, n_steps, rng):
    """Estimate P(BES^delta from ``x0`` hits 0 before ``T``).

    Paths are drawn exactly on a uniform grid and each interval contributes
    its bridge hitting probability, so there is no discretisation bias.
    Returns the mean over paths of ``1 - prod(1 - p_k)`` and its standard error.
    """
    if n_paths < 2 or n_steps < 1:
        raise ValueError("need at least two paths and one step")
    h = T / n_steps
    z = np.full(n_paths, float(x0) ** 2)
    survive = np.ones(n_paths)
    for _ in range(n_steps):
        nz = h * rng.noncentral_chisquare(delta, z / h)
        survive *= 1.0 - bridge_zero_probability(delta, z, nz, h)
        z = nz
    hit = 1.0 - survive
    return float(hit.mean()), float(hit.std(ddof=1) / np.sqrt(n_paths))
