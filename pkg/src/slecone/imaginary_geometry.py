"""Boundary-data bookkeeping for flow lines of a GFF.

Boundary values are stored as plain reals (they are usually written as
multiples of lambda).  A flow line of angle theta of ``h`` is a flow line of
``h + theta*chi``; with boundary data ``-lambda(1 + rho_L)`` to its left and
``lambda(1 + rho_R)`` to its right it is an SLE_kappa(rho_L; rho_R).
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

INF = math.inf
# weights within this of -2 count as -2 (they are sums of rounded ratios)
WEIGHT_TOL = 1e-9


def derived_constants(kappa):
    """``(chi, lambda, lambda_prime)`` for kappa in (0, 4]."""
    if not 0 < kappa <= 4:
        raise ValueError("kappa must lie in (0, 4]")
    chi = 2 / math.sqrt(kappa) - math.sqrt(kappa) / 2
    lam = math.pi / math.sqrt(kappa)
    lam_p = math.pi / math.sqrt(16 / kappa)
    return chi, lam, lam_p


def critical_angle(kappa):
    """Angle gap at or above which flow lines started at one point cannot meet."""
    if not 0 < kappa < 4:
        raise ValueError("kappa must lie in (0, 4)")
    return math.pi * kappa / (4 - kappa)


@dataclass(frozen=True)
class BoundaryData:
    """Piecewise-constant boundary values on the real line.

    ``intervals`` is a tuple of ``(left, right, value)`` covering
    ``(-inf, inf)`` in increasing order.
    """

    intervals: tuple
    winding_chi: float = 0.0

    def __post_init__(self):
        iv = self.intervals
        if not iv:
            raise ValueError("boundary data needs at least one interval")
        if iv[0][0] != -INF or iv[-1][1] != INF:
            raise ValueError("intervals must cover the whole real line")
        for (a, b, _), (c, _, _) in zip(iv, iv[1:]):
            if b != c:
                raise ValueError("intervals must be contiguous")
        for a, b, _ in iv:
            if a > b:
                raise ValueError("interval endpoints must be increasing")

    @classmethod
    def from_breaks(cls, breaks, values, winding_chi=0.0):
        """Data with jumps at ``breaks`` (increasing) and ``len(breaks)+1`` values."""
        edges = [-INF, *breaks, INF]
        iv = tuple((edges[i], edges[i + 1], float(v)) for i, v in enumerate(values))
        return cls(iv, winding_chi).normalized()

    def normalized(self, tol=1e-12):
        """Drop empty intervals and merge neighbours carrying the same value."""
        out = []
        for a, b, v in self.intervals:
            if b <= a and not (a == -INF or b == INF):
                continue
            if out and abs(out[-1][2] - v) <= tol:
                out[-1] = (out[-1][0], b, out[-1][2])
            else:
                out.append((a, b, v))
        if out[0][0] != -INF:
            out[0] = (-INF, out[0][1], out[0][2])
        return BoundaryData(tuple(out), self.winding_chi)

    @property
    def breaks(self):
        return [a for a, _, _ in self.intervals[1:]]

    @property
    def values(self):
        return [v for _, _, v in self.intervals]

    def value_at(self, x):
        for a, b, v in self.intervals:
            if a <= x < b or (b == INF and x >= a):
                return v
        raise ValueError("point outside the boundary")

    def allclose(self, other, tol=1e-9):
        if len(self.intervals) != len(other.intervals):
            return False
        for (a, b, v), (c, d, w) in zip(self.intervals, other.intervals):
            for x, y in ((a, c), (b, d), (v, w)):
                if math.isinf(x) or math.isinf(y):
                    if x != y:
                        return False
                elif abs(x - y) > tol * max(1.0, abs(x), abs(y)):
                    return False
        return True


# ---------------------------------------------------------------- map descriptors


class ConformalMap:
    """A conformal map of H onto a domain, acting on boundary data.

    Subclasses implement ``boundary_image`` (where a real boundary point
    goes), ``extra_intervals`` (new boundary arcs created by the map, with
    their transported values) and ``__call__``.
    """

    def __call__(self, z):
        raise NotImplementedError

    def boundary_image(self, x):
        raise NotImplementedError

    def extra_intervals(self, chi):
        return []

    def then(self, other):
        """The composition ``other o self``."""
        return Composite((self, other))


@dataclass(frozen=True)
class Translation(ConformalMap):
    c: float

    def __call__(self, z):
        return z + self.c

    def boundary_image(self, x):
        return x + self.c


@dataclass(frozen=True)
class Scaling(ConformalMap):
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("scaling factor must be positive")

    def __call__(self, z):
        return self.r * z

    def boundary_image(self, x):
        return self.r * x


@dataclass(frozen=True)
class Mobius(ConformalMap):
    """``z -> (a z + b) / (c z + d)`` with real coefficients and ``ad - bc > 0``."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not self.a * self.d - self.b * self.c > 0:
            raise ValueError("Mobius map must preserve H (ad - bc > 0)")

    def __call__(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def boundary_image(self, x):
        if math.isinf(x):
            # c == 0 forces a/d > 0, so the map fixes both ends of the line
            return x if self.c == 0 else self.a / self.c
        den = self.c * x + self.d
        if den == 0:
            return INF
        return (self.a * x + self.b) / den


@dataclass(frozen=True)
class LoewnerIncrement(ConformalMap):
    """Forward vertical-slit map ``z -> w + sqrt((z - w)^2 + 4 dt)``.

    It maps H minus the slit ``[w, w + 2i sqrt(dt)]`` onto H.  The slit's
    two sides carry ``left_value`` / ``right_value``, given in the slit's
    own frame (the slit points straight up); transporting them subtracts
    ``chi * arg`` of the derivative of the inverse map, which is +pi/2 on the
    image of the left side and -pi/2 on the right.
    """

    w: float
    dt: float
    left_value: float = 0.0
    right_value: float = 0.0

    def __call__(self, z):
        d = np.asarray(z, dtype=complex) - self.w
        s = np.sqrt(d * d + 4 * self.dt)
        s = np.where(s.imag < 0, -s, s)
        return self.w + s

    def boundary_image(self, x):
        if math.isinf(x):
            return x
        d = x - self.w
        r = math.sqrt(d * d + 4 * self.dt)
        if d == 0:
            raise ValueError("the slit base is not a single boundary point after the map")
        return self.w + math.copysign(r, d)

    def extra_intervals(self, chi):
        h = 2 * math.sqrt(self.dt)
        return [(self.w - h, self.w, self.left_value - chi * math.pi / 2),
                (self.w, self.w + h, self.right_value + chi * math.pi / 2)]


@dataclass(frozen=True)
class Composite(ConformalMap):
    """``maps[-1] o ... o maps[0]``."""

    maps: tuple

    def __call__(self, z):
        for m in self.maps:
            z = m(z)
        return z

    def boundary_image(self, x):
        for m in self.maps:
            x = m.boundary_image(x)
        return x


IDENTITY = Composite(())


def coordinate_change(bd, phi, chi=None):
    """Transport boundary data through ``phi``: ``h = h~ o phi^-1 - chi arg (phi^-1)'``.

    On the real line the primitive maps have real, positive derivative so
    values are unchanged and only endpoints move; arcs created by a Loewner
    increment receive their winding correction.
    """
    chi = bd.winding_chi if chi is None else chi
    if isinstance(phi, Composite):
        for m in phi.maps:
            bd = coordinate_change(bd, m, chi)
        return bd
    if isinstance(phi, Mobius) and phi.c != 0:
        return _mobius_change(bd, phi)
    if isinstance(phi, LoewnerIncrement):
        # the slit base w splits the interval containing it
        iv = []
        for a, b, v in bd.intervals:
            if a < phi.w < b:
                iv += [(a, phi.w, v), (phi.w, b, v)]
            else:
                iv.append((a, b, v))
        moved = []
        for a, b, v in iv:
            # the base splits into w- (left end of the new arcs) and w+ (right end)
            na = -INF if a == -INF else (phi.w + 2 * math.sqrt(phi.dt) if a == phi.w else phi.boundary_image(a))
            nb = INF if b == INF else (phi.w - 2 * math.sqrt(phi.dt) if b == phi.w else phi.boundary_image(b))
            moved.append((na, nb, v))
        left = [m for m in moved if m[1] <= phi.w - 2 * math.sqrt(phi.dt) + 1e-15]
        right = [m for m in moved if m[0] >= phi.w + 2 * math.sqrt(phi.dt) - 1e-15]
        new = tuple(left + phi.extra_intervals(chi) + right)
        return BoundaryData(new, chi).normalized()
    new = []
    for a, b, v in bd.intervals:
        na, nb = phi.boundary_image(a), phi.boundary_image(b)
        if na > nb:
            raise ValueError("map reverses the boundary orientation")
        new.append((na, nb, v))
    return BoundaryData(tuple(new), chi).normalized()


def _mobius_change(bd, phi):
    # a real Mobius map with c != 0 sends the pole -d/c to infinity: cut the
    # boundary there and rotate
    pole = -phi.d / phi.c
    pieces = []
    for a, b, v in bd.intervals:
        if a < pole < b:
            pieces += [(a, pole, v), (pole, b, v)]
        else:
            pieces.append((a, b, v))
    after = [p for p in pieces if p[0] >= pole]
    before = [p for p in pieces if p[1] <= pole]
    out = []
    for a, b, v in after + before:
        na = -INF if a == pole else phi.boundary_image(a)
        nb = INF if b == pole else phi.boundary_image(b)
        if math.isinf(a):
            na = phi.a / phi.c
        if math.isinf(b):
            nb = phi.a / phi.c
        out.append((na, nb, v))
    # the images of +inf and -inf coincide; drop the zero-length seam
    out = [(a, b, v) for a, b, v in out if not (a == b and not math.isinf(a))]
    return BoundaryData(tuple(out), bd.winding_chi).normalized()


# ---------------------------------------------------------------- flow lines


class ContinuationThreshold(ValueError):
    """A flow line segment would stop immediately (a force-point weight <= -2)."""


def flow_line_force_points(kappa, rho, theta, ambient=None):
    """Weights ``(rho_left, rho_right)`` of the angle-``theta`` flow line from the origin.

    ``ambient`` is the pair of boundary values ``(a_left, a_right)`` on either
    side of the seed; by default ``(-lambda, lambda(1 + rho))``.  The weights
    solve ``-lambda(1 + rho_left) = a_left + theta chi`` and
    ``lambda(1 + rho_right) = a_right + theta chi``.
    """
    chi, lam, _ = derived_constants(kappa)
    a_left, a_right = (-lam, lam * (1 + rho)) if ambient is None else ambient
    rho_left = -(a_left + theta * chi) / lam - 1
    rho_right = (a_right + theta * chi) / lam - 1
    for name, w in (("left", rho_left), ("right", rho_right)):
        if w <= -2 + WEIGHT_TOL:
            raise ContinuationThreshold(
                f"{name} weight {w:.6g} <= -2: the angle-{theta:.6g} flow line hits its continuation threshold at once")
    return rho_left, rho_right


def force_point_weights(kappa, bd, seed, theta):
    """Force points and weights of the angle-``theta`` flow line from ``seed`` for data ``bd``.

    Returns ``(positions, weights, sides)`` with ``sides`` -1 / +1, nearest
    points first on each side.  The
    weight at a jump is the jump divided by -lambda (left side) or lambda
    (right side); the two points adjacent to the seed absorb the mismatch
    between the data there and the +-lambda a flow line needs.
    """
    chi, lam, _ = derived_constants(kappa)
    shift = theta * chi
    left_pts, left_w, right_pts, right_w = [], [], [], []
    # right side, moving away from the seed
    prev = lam
    for a, b, v in bd.intervals:
        if b <= seed:
            continue
        start = max(a, seed)
        val = v + shift
        if val != prev or start == seed:
            w = (val - prev) / lam
            if start == seed or abs(w) > 1e-14:
                right_pts.append(start)
                right_w.append(w)
        prev = val
    prev = -lam
    for a, b, v in reversed(bd.intervals):
        if a >= seed:
            continue
        start = min(b, seed)
        val = v + shift
        w = -(val - prev) / lam
        if start == seed or abs(w) > 1e-14:
            left_pts.append(start)
            left_w.append(w)
        prev = val
    for name, ws in (("left", left_w), ("right", right_w)):
        if ws[0] <= -2 + WEIGHT_TOL:
            raise ContinuationThreshold(
                f"{name} weight at the seed is {ws[0]:.6g} <= -2 for angle {theta:.6g}")
    sides = np.array([-1] * len(left_pts) + [1] * len(right_pts), dtype=np.int64)
    return np.array(left_pts + right_pts, dtype=float), np.array(left_w + right_w), sides


class InteractionOutcome(enum.Enum):
    STAYS_LEFT = "stays_left"
    MERGE = "merge"
    CROSS_ONCE = "cross_once"


def interaction(theta1, theta2, start_order=True, tol=0.0):
    """How the angle-theta1 flow line from x1 meets the angle-theta2 one from x2.

    ``start_order`` is True when ``x1 <= x2``; otherwise the roles are
    swapped.  Returns the behaviour of the line started further left.
    """
    if not start_order:
        theta1, theta2 = theta2, theta1
    if abs(theta1 - theta2) >= 2 * math.pi:
        raise ValueError("angle gap must be below 2*pi")
    if abs(theta1 - theta2) <= tol:
        return InteractionOutcome.MERGE
    if theta1 > theta2:
        return InteractionOutcome.STAYS_LEFT
    if theta1 > theta2 - math.pi:
        return InteractionOutcome.CROSS_ONCE
    raise ValueError("theta1 <= theta2 - pi: interaction not classified")


def conditional_boundary_data(kappa, rho, W_tau, V_tau):
    """Boundary data at a stopping time, in the frame of ``g_tau``.

    ``-lambda`` on ``(-inf, W]``, ``lambda`` on ``(W, V]`` and
    ``lambda(1 + rho)`` on ``(V, inf)``.
    """
    if W_tau > V_tau:
        raise ValueError("need W_tau <= V_tau")
    chi, lam, _ = derived_constants(kappa)
    iv = ((-INF, W_tau, -lam), (W_tau, V_tau, lam), (V_tau, INF, lam * (1 + rho)))
    return BoundaryData(iv, chi).normalized()
