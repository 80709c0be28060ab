"""SLE_kappa(rho) driving pairs, phase classification and derived constants."""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .bessel import BesselPath, bes_from_increments, sample_bes_adaptive
from .loewner import Trace, solve_forward
from .rng import as_rng, seed_of


class Phase(enum.Enum):
    NOT_DEFINED = "not_defined"
    TRUNK_PLUS_LOOPS = "trunk_plus_loops"
    LIGHT_CONE = "light_cone"
    BOUNDARY_TRACING = "boundary_tracing"
    BOUNDARY_HITTING = "boundary_hitting"
    BOUNDARY_AVOIDING = "boundary_avoiding"


# (simple, reversible) flags per phase; None where the table has no entry
_FLAGS = {
    Phase.NOT_DEFINED: (None, None),
    Phase.TRUNK_PLUS_LOOPS: (False, False),
    Phase.LIGHT_CONE: (False, False),
    Phase.BOUNDARY_TRACING: (True, True),
    Phase.BOUNDARY_HITTING: (True, True),
    Phase.BOUNDARY_AVOIDING: (True, True),
}


@dataclass(frozen=True)
class PhaseInfo:
    phase: Phase
    simple: bool | None
    reversible: bool | None
    dimension: float


@dataclass(frozen=True)
class PhaseParams:
    kappa: float
    rho: float
    delta: float
    chi: float
    lambda_: float
    lambda_prime: float
    theta_rho: float | None
    theta_c: float | None
    dimension: float


def bessel_dimension(kappa, rho):
    return 1.0 + 2.0 * (rho + 2.0) / kappa


def lightcone_dimension(kappa, rho):
    """Almost sure dimension of the range in the light-cone regime."""
    return (kappa - 2.0 * (2.0 + rho)) * (kappa + 2.0 * (6.0 + rho)) / (8.0 * kappa)


def params(kappa, rho):
    """All constants derived from ``(kappa, rho)``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    chi = 2.0 / np.sqrt(kappa) - np.sqrt(kappa) / 2.0
    lam = np.pi / np.sqrt(kappa)
    lam_p = np.pi / np.sqrt(16.0 / kappa)
    theta_rho = None if kappa == 4 else np.pi * (rho + 2.0) / (kappa / 2.0 - 2.0)
    theta_c = np.pi * kappa / (4.0 - kappa) if kappa < 4 else None
    return PhaseParams(kappa, rho, bessel_dimension(kappa, rho), chi, lam, lam_p,
                       theta_rho, theta_c, lightcone_dimension(kappa, rho))


def classify_phase(kappa, rho):
    """Phase of SLE_kappa(rho) with a single boundary force point.

    For kappa <= 2 the trunk-plus-loops interval (-2-kappa/2, kappa/2-4] is
    empty and the whole of (-2-kappa/2, -2) is the light-cone phase.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if rho <= -2.0 - kappa / 2.0:
        phase = Phase.NOT_DEFINED
        dim = float("nan")
    elif rho < -2.0:
        if rho <= kappa / 2.0 - 4.0:
            phase = Phase.TRUNK_PLUS_LOOPS
            dim = 1.0 + 2.0 / kappa
        else:
            phase = Phase.LIGHT_CONE
            dim = lightcone_dimension(kappa, rho)
    elif rho == -2.0:
        phase = Phase.BOUNDARY_TRACING
        dim = 1.0
    elif rho < kappa / 2.0 - 2.0:
        phase = Phase.BOUNDARY_HITTING
        dim = min(2.0, 1.0 + kappa / 8.0)
    else:
        phase = Phase.BOUNDARY_AVOIDING
        dim = min(2.0, 1.0 + kappa / 8.0)
    simple, rev = _FLAGS[phase]
    return PhaseInfo(phase, simple, rev, dim)


@dataclass
class DrivingPair:
    """Loewner driving function W and force point V on a capacity grid.

    With ``side == "right"`` the force point starts at 0+ and W <= V; the
    mirrored pair (force point at 0-) has V <= W.  ``dt`` is a scalar on a
    uniform grid and the array of step lengths on an adaptive one.
    """

    dt: float | np.ndarray
    W: np.ndarray
    V: np.ndarray
    kappa: float
    rho: float
    side: str = "right"
    bessel: BesselPath | None = None

    @property
    def times(self):
        if np.ndim(self.dt):
            return np.concatenate([[0.0], np.cumsum(self.dt)])
        return self.dt * np.arange(self.W.size)

    def collisions(self, tol_scale=1e-8):
        """Steps where |V - W| < tol_scale * sqrt(t) (diagnostic only)."""
        t = np.maximum(self.times, self.dt)
        return np.flatnonzero(np.abs(self.V - self.W) < tol_scale * np.sqrt(t))


def _check_rho(kappa, rho):
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if rho <= -2.0 - kappa / 2.0:
        raise ValueError(f"rho={rho} is not above -2-kappa/2: SLE_kappa(rho) is not defined")
    if rho == -2.0:
        raise ValueError("rho = -2 needs the side-swapping construction and is not supported")


def sample_driving_pair(kappa, rho, T, dt, rng, side="right", scheme="milstein", grid="uniform",
                        resolution=None):
    """Driving pair of an origin-seeded one-sided SLE_kappa(rho).

    X is a Bessel process of dimension ``1 + 2(rho+2)/kappa`` started at 0,
    ``V = (2/sqrt(kappa)) * P.V. int ds / X`` and ``W = V - sqrt(kappa) X``.

    With ``grid="adaptive"`` the step near a state X is about
    ``(resolution * X)^2``, clipped to ``[dt / 100, dt * 10]``; ``dt`` then
    only sets the scale of the grid.
    """
    _check_rho(kappa, rho)
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    if not dt > 0:
        raise ValueError("dt must be positive")
    rng = as_rng(rng)
    if grid == "adaptive":
        res = np.sqrt(10 * dt) if resolution is None else resolution
        path = sample_bes_adaptive(bessel_dimension(kappa, rho), 0.0, T, rng, res, dt / 100, 10 * dt, scheme)
        return _pair_from_path(kappa, rho, path.steps, path, side)
    if grid != "uniform":
        raise ValueError(f"unknown grid {grid!r}")
    steps = int(round(T / dt))
    dB = rng.standard_normal(steps) * np.sqrt(dt)
    return driving_pair_from_increments(kappa, rho, dt, dB, side, scheme)


def driving_pair_from_increments(kappa, rho, dt, dB, side="right", scheme="milstein"):
    _check_rho(kappa, rho)
    delta = bessel_dimension(kappa, rho)
    path = bes_from_increments(delta, 0.0, dt, dB, scheme)
    return _pair_from_path(kappa, rho, dt, path, side)


def _pair_from_path(kappa, rho, dt, path, side):
    sk = np.sqrt(kappa)
    V = (2.0 / sk) * path.U
    W = V - sk * path.X
    if side == "left":
        V, W = -V, -W
    return DrivingPair(dt, W, V, kappa, rho, side, path)


@dataclass
class MultiForceDriving:
    """Driving function with several boundary force points.

    ``V[k, i]`` is the position of force point ``i`` at step ``k``; ``sides``
    marks each point as left (-1) or right (+1) of W.
    """

    dt: float
    W: np.ndarray
    V: np.ndarray
    weights: np.ndarray
    sides: np.ndarray
    kappa: float
    stopped_at: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def V_left(self):
        return self.V[:, self.sides < 0]

    @property
    def V_right(self):
        return self.V[:, self.sides > 0]


def sample_force_point_driving(kappa, weights, positions, T, dt, rng, w0=0.0, floor=None, cum_stop=-2.0):
    """Euler scheme for ``dW = sqrt(kappa) dB + sum_i rho_i/(W - V_i) dt``, ``dV_i = 2/(V_i - W) dt``.

    Force points sitting exactly at ``w0`` are read as ``w0-`` (negative
    weight index side) or ``w0+``; they are separated by one deterministic
    vertical-slit step of capacity ``dt`` before the Euler steps start.
    Every weight must exceed -2.
    """
    weights = np.asarray(weights, dtype=float)
    positions = np.asarray(positions, dtype=float)
    if weights.shape != positions.shape:
        raise ValueError("weights and positions must match")
    sides = np.where(positions < w0, -1, 1).astype(np.int64)
    return _force_driving(kappa, weights, positions, sides, T, dt, rng, w0, floor, cum_stop)


def _force_driving(kappa, weights, positions, sides, T, dt, rng, w0, floor, cum_stop, dB=None):
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if np.any(positions[sides < 0] > w0) or np.any(positions[sides > 0] < w0):
        raise ValueError("force points must satisfy V_left <= W <= V_right initially")
    steps = int(round(T / dt))
    if dB is None:
        dB = as_rng(rng).standard_normal(max(steps - 1, 0)) * np.sqrt(dt)
    if floor is None:
        floor = 0.5 * np.sqrt(kappa * dt)
    # one vertical-slit step moves every point off the seed
    d = positions - w0
    first = w0 + np.sign(np.where(d == 0, sides, d)) * np.sqrt(d * d + 4.0 * dt)
    if steps == 0:
        return MultiForceDriving(dt, np.array([w0]), positions[None, :].copy(), weights, sides, kappa)
    Wt, Vt, stop = _kernels.multi_force_euler(float(w0), first, weights, float(dt), np.ascontiguousarray(dB),
                                              float(np.sqrt(kappa)), float(floor), sides, float(cum_stop))
    W = np.concatenate([[w0], Wt])
    V = np.vstack([positions[None, :], Vt])
    stopped = stop + 1 if stop < dB.size else None
    return MultiForceDriving(dt, W, V, weights, sides, kappa, stopped, {"floor": floor})


def sample_multi_force_driving(kappa, rho_left, rho_right, x_left, x_right, T, dt, rng, floor=None):
    """Two-force-point driving function, SLE_kappa(rho_left; rho_right).

    Both weights must exceed -2; ``x_left <= 0 <= x_right``.
    """
    if rho_left <= -2 or rho_right <= -2:
        raise ValueError("force-point weights must exceed -2")
    if not x_left <= 0 <= x_right:
        raise ValueError("need x_left <= 0 <= x_right")
    weights = np.array([rho_left, rho_right], dtype=float)
    positions = np.array([x_left, x_right], dtype=float)
    sides = np.array([-1, 1], dtype=np.int64)
    return _force_driving(kappa, weights, positions, sides, T, dt, rng, 0.0, floor, -2.0)


def sample_sle_trace(kappa, rho, T, dt, rng, side="right", method="tree", grid="uniform"):
    """Trace of an origin-seeded SLE_kappa(rho) up to capacity time ``T``."""
    info = classify_phase(kappa, rho)
    if info.phase is Phase.NOT_DEFINED:
        raise ValueError(f"SLE_{kappa}({rho}) is not defined")
    pair = sample_driving_pair(kappa, rho, T, dt, as_rng(rng), side=side, grid=grid)
    tr = solve_forward(pair.W, pair.dt, method=method, kappa=kappa, rho=rho)
    tr.meta.update({"seed": seed_of(rng), "side": side, "phase": info.phase.value})
    tr.meta["driving"] = pair
    return tr
