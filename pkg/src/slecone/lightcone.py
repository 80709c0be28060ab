"""Light cones of angle-switching flow lines, their pockets and exploration path.

Two routes produce a light cone.  The direct route draws one SLE_kappa(rho)
trace (its range is the light cone of opening angle theta_rho seeded from the
negative half-line).  The constructive route grows a tree of flow-line
segments: a segment of angle theta is one Loewner chain with boundary force
points, and switching to the other angle at a grid time adds two force points
at the tip with weights -+(dtheta chi / lambda).  A child shares its parent's
driving function up to the switch, so its trace continues the parent's curve.

Flow lines of different angles started independently are drawn from their
marginal laws; the joint coupling through one field is not simulated.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .analysis import as_xy, bbox_size
from .imaginary_geometry import (WEIGHT_TOL, BoundaryData, ContinuationThreshold, derived_constants,
                                 force_point_weights)
from .loewner import Trace, solve_forward, solve_tail
from .rng import make_rng
from .sle import Phase, _force_driving, classify_phase, sample_sle_trace


def theta_of_rho(kappa, rho):
    """Opening angle ``pi (rho + 2) / (kappa/2 - 2)``."""
    if kappa == 4:
        raise ValueError("the angle-weight relation degenerates at kappa = 4")
    return math.pi * (rho + 2) / (kappa / 2 - 2)


def rho_of_theta(kappa, theta):
    if kappa == 4:
        raise ValueError("the angle-weight relation degenerates at kappa = 4")
    return theta / math.pi * (kappa / 2 - 2) - 2


# ---------------------------------------------------------------- constructive route


@dataclass
class Segment:
    """One flow-line piece of the tree.

    ``trace`` holds the curve from the switch point on (capacity times are
    those of the whole chain).  ``W`` is the full driving function from the
    root, ``V`` the force-point positions over the segment's own steps.
    """

    angle: float
    trace: Trace
    seed: float
    n_switches: int
    parent: int | None
    start: int
    W: np.ndarray
    V: np.ndarray
    weights: np.ndarray
    sides: np.ndarray
    stopped: bool
    key: tuple


@dataclass
class Skipped:
    seed: float
    angle: float
    n_switches: int
    reason: str


@dataclass
class LightConeApprox:
    theta1: float
    theta2: float
    n_switches: int
    segments: list
    pockets: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def level(self, n):
        """The approximation with at most ``n`` switches (a sub-tree of this one)."""
        segs = [s for s in self.segments if s.n_switches <= n]
        return LightConeApprox(self.theta1, self.theta2, min(n, self.n_switches), segs, [],
                               [s for s in self.skipped if s.n_switches <= n], dict(self.meta))

    def points(self):
        if not self.segments:
            return np.empty(0, dtype=complex)
        return np.concatenate([s.trace.points for s in self.segments])

    def labelled_points(self):
        """Points with their angle label and a generation key (segment index, capacity time)."""
        pts, ang, gen = [], [], []
        for i, s in enumerate(self.segments):
            pts.append(s.trace.points)
            ang.append(np.full(len(s.trace), s.angle))
            gen.append(i + s.trace.capacity_times / (1.0 + s.trace.capacity_times[-1]))
        if not pts:
            return np.empty(0, complex), np.empty(0), np.empty(0)
        return np.concatenate(pts), np.concatenate(ang), np.concatenate(gen)


def default_boundary(kappa, rho=None):
    """``-lambda`` on the negative half-line and ``lambda`` (or ``lambda(1+rho)``) on the positive one."""
    chi, lam, _ = derived_constants(kappa)
    right = lam if rho is None else lam * (1 + rho)
    return BoundaryData.from_breaks([0.0], [-lam, right], chi)


def build_ln(kappa, theta1, theta2, n_switches, T=1.0, dt=1e-4, rng=0, seeds=(0.0,), boundary=None,
             switch_grid=8, branching=2, segment_budget=256, floor=None):
    """Approximate L_n(theta1, theta2) by a tree of angle-switching flow lines.

    Parameters
    ----------
    kappa : float
        In (0, 4).
    theta1, theta2 : float
        Extremal angles, ``theta1 <= theta2 <= theta1 + pi``.
    n_switches : int
        Maximal number of direction changes along one branch.
    T, dt : float
        Capacity horizon of every branch and grid step.
    rng : int
        Seed; every segment draws from its own sub-stream keyed by its
        position in the tree.
    seeds : sequence of float
        Starting points on the real line.
    boundary : BoundaryData, optional
        Ambient data, :func:`default_boundary` by default.
    switch_grid : int
        Switch times are drawn from ``start + k (end - start) / switch_grid``
        over the parent's lifetime ``[start, end]``.
    branching : int
        Number of switch times drawn per segment and level.
    segment_budget : int
        Hard cap on the number of segments.

    Segments whose weights at the seed are ``<= -2`` are skipped and listed
    in ``skipped``; segments stop early at their continuation threshold.
    """
    if not 0 < kappa < 4:
        raise ValueError("kappa must lie in (0, 4)")
    if theta1 > theta2:
        raise ValueError("need theta1 <= theta2")
    if theta2 - theta1 > math.pi + 1e-12:
        raise ValueError("angle gap must not exceed pi")
    if n_switches < 0:
        raise ValueError("n_switches must be nonnegative")
    if not dt > 0 or not T > 0:
        raise ValueError("T and dt must be positive")
    seed = int(rng)
    chi, lam, _ = derived_constants(kappa)
    bd = default_boundary(kappa) if boundary is None else boundary
    steps = int(round(T / dt))
    angles = [theta1] if theta1 == theta2 else [theta1, theta2]
    segments, skipped = [], []

    def run(W_prefix, positions, weights, sides, w0, key):
        remaining = steps - (W_prefix.size - 1)
        drv = _force_driving(kappa, weights, positions, sides, remaining * dt, dt, make_rng(seed, *key),
                             w0, floor, -2.0)
        W = np.concatenate([W_prefix, drv.W[1:]])
        return W, drv

    for si, x in enumerate(seeds):
        for ai, th in enumerate(angles):
            if len(segments) >= segment_budget:
                break
            try:
                pos, wts, sides = force_point_weights(kappa, bd, float(x), th)
            except ContinuationThreshold as exc:
                skipped.append(Skipped(float(x), th, 0, str(exc)))
                continue
            key = (si, ai)
            W, drv = run(np.array([float(x)]), pos, wts, sides, float(x), key)
            tr = solve_forward(W, dt, kappa=kappa)
            segments.append(Segment(th, tr, float(x), 0, None, 0, W, drv.V, wts, sides,
                                    drv.stopped_at is not None, key))

    frontier = list(range(len(segments)))
    fractions = np.arange(1, switch_grid) / switch_grid
    for level in range(1, n_switches + 1):
        nxt = []
        for pi in frontier:
            par = segments[pi]
            end = par.W.size - 1
            # switch times at fixed fractions of the parent's own lifetime
            choices = np.unique(par.start + np.round(fractions * (end - par.start)).astype(np.int64))
            choices = choices[(choices > par.start) & (choices < end)]
            if choices.size == 0:
                continue
            pick = make_rng(seed, *par.key, 10_000).choice(choices, size=min(branching, choices.size),
                                                           replace=False)
            for k in np.sort(pick):
                if len(segments) >= segment_budget:
                    break
                new = theta2 if par.angle == theta1 else theta1
                if new == par.angle:
                    continue
                dth = new - par.angle
                wl, wr = -dth * chi / lam, dth * chi / lam
                if min(wl, wr) <= -2 + WEIGHT_TOL:
                    skipped.append(Skipped(par.seed, new, level, "switch weight <= -2"))
                    continue
                local = k - par.start
                w0 = float(par.W[k])
                pos = np.concatenate([par.V[local], [w0, w0]])
                wts = np.concatenate([par.weights, [wl, wr]])
                sides = np.concatenate([par.sides, [-1, 1]]).astype(np.int64)
                key = par.key + (int(k),)
                W, drv = run(par.W[: k + 1], pos, wts, sides, w0, key)
                tr = solve_tail(W, dt, k, kappa=kappa)
                segments.append(Segment(new, tr, par.seed, level, pi, int(k), W, drv.V, wts, sides,
                                        drv.stopped_at is not None, key))
                nxt.append(len(segments) - 1)
        frontier = nxt

    meta = {"kappa": kappa, "T": T, "dt": dt, "seed": seed, "seeds": [float(s) for s in seeds],
            "switch_grid": switch_grid, "branching": branching}
    return LightConeApprox(theta1, theta2, n_switches, segments, [], skipped, meta)


def matched_lightcone(kappa, rho, n_switches, T=1.0, dt=1e-4, rng=0, seeds=None, **kw):
    """Constructive counterpart of the SLE_kappa(rho) range: angles ``(0, theta_rho)``
    from seeds on the negative half-line, with ``lambda(1+rho)`` on the positive one."""
    theta = theta_of_rho(kappa, rho)
    seeds = tuple(np.linspace(-1.0, 0.0, 5)[:-1]) if seeds is None else seeds
    return build_ln(kappa, 0.0, theta, n_switches, T, dt, rng, seeds, default_boundary(kappa, rho), **kw)


def lightcone_via_sle(kappa, rho, T, dt, rng):
    """Direct-route light cone: an SLE_kappa(rho) trace with ``rho`` in the light-cone phase."""
    info = classify_phase(kappa, rho)
    if info.phase is not Phase.LIGHT_CONE and not (info.phase is Phase.TRUNK_PLUS_LOOPS and rho == kappa / 2 - 4):
        raise ValueError(f"SLE_{kappa}({rho}) is not in the light-cone phase ({info.phase.value})")
    tr = sample_sle_trace(kappa, rho, T, dt, rng)
    tr.meta["theta"] = theta_of_rho(kappa, rho)
    return tr


# ---------------------------------------------------------------- pockets


@dataclass
class Pocket:
    opening: complex
    closing: complex
    side1: np.ndarray
    side2: np.ndarray
    diameter: float
    orientation: str
    open_time: float
    close_time: float
    area: float
    grid_eps: float
    order_index: int | None = None
    ambiguous: bool = False


def _diameter(pts):
    xy = as_xy(pts)
    if xy.shape[0] < 2:
        return 0.0
    try:
        xy = xy[ConvexHull(xy).vertices]
    except (QhullError, ValueError):
        pass
    d = xy[:, None, :] - xy[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def _dense_labelled(points, times, labels, spacing):
    """Densify a polyline, carrying times and labels of the left endpoint of each piece."""
    xy = as_xy(points)
    if xy.shape[0] < 2:
        return xy, times, labels
    seg = np.diff(xy, axis=0)
    reps = np.maximum(1, np.ceil(np.hypot(seg[:, 0], seg[:, 1]) / spacing).astype(int))
    idx = np.repeat(np.arange(seg.shape[0]), reps)
    frac = (np.arange(idx.size) - np.repeat(np.cumsum(reps) - reps, reps)) / np.repeat(reps, reps)
    out = xy[idx] + frac[:, None] * seg[idx]
    t = times[idx] + frac * (times[idx + 1] - times[idx])
    return (np.vstack([out, xy[-1:]]), np.concatenate([t, times[-1:]]),
            np.concatenate([labels[idx], labels[-1:]]))


def _source(obj, spacing):
    """Dense points, generation keys and angle labels of a trace or light cone."""
    if isinstance(obj, LightConeApprox):
        parts = [_dense_labelled(s.trace.points, i + s.trace.capacity_times / (1 + s.trace.capacity_times[-1]),
                                 np.full(len(s.trace), s.angle), spacing)
                 for i, s in enumerate(obj.segments) if len(s.trace) > 0]
        if not parts:
            return np.empty((0, 2)), np.empty(0), np.empty(0), (obj.theta1, obj.theta2)
        return (np.vstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                np.concatenate([p[2] for p in parts]), (obj.theta1, obj.theta2))
    pts = obj.points if hasattr(obj, "points") else np.asarray(obj)
    if len(pts) == 0:
        return np.empty((0, 2)), np.empty(0), np.empty(0), None
    times = obj.capacity_times if hasattr(obj, "capacity_times") else np.arange(len(pts), dtype=float)
    xy, t, lab = _dense_labelled(pts, np.asarray(times, float), np.zeros(len(pts)), spacing)
    return xy, t, lab, None


def _disk(r):
    g = np.arange(-r, r + 1)
    return g[:, None] ** 2 + g[None, :] ** 2 <= r * r + r


def default_grid_eps(obj):
    xy, *_ = _source(obj, np.inf)
    return bbox_size(xy) / 512 if xy.shape[0] > 1 else 1.0


def detect_pockets(obj, grid_eps=None, min_diameter=None, thickness=0.0):
    """Bounded complementary components of a rasterised trace or light cone.

    The point set is drawn on a grid of cell size ``grid_eps`` (default:
    bounding box / 512); the real line is a wall and components touching
    the other edges of the frame are unbounded, so not pockets.  For each
    pocket of diameter ``>= max(min_diameter, 2 grid_eps)`` the adjacent
    curve points are ordered by angle about the pocket's centroid; the first
    generated one is the opening point, the last the closing point, and the
    two arcs between them are the sides.  With angle labels (constructive
    route) side1 is the arc carrying more theta1 points; otherwise side1 is
    the clockwise arc from opening to closing point.

    ``thickness`` thickens the curve by that physical radius before the
    complement is labelled, which closes gaps narrower than about twice
    that; with a fixed thickness the count does not depend on the grid.
    """
    if grid_eps is None:
        grid_eps = default_grid_eps(obj)
    if not grid_eps > 0:
        raise ValueError("grid_eps must be positive")
    min_diameter = 2 * grid_eps if min_diameter is None else max(min_diameter, 2 * grid_eps)
    xy, gen, lab, angles = _source(obj, grid_eps / 2)
    if xy.shape[0] < 3:
        return []
    x0 = xy[:, 0].min() - 2 * grid_eps
    ij = np.floor(np.column_stack([(xy[:, 0] - x0) / grid_eps, np.maximum(xy[:, 1], 0) / grid_eps])).astype(int)
    nx = ij[:, 0].max() + 3
    ny = ij[:, 1].max() + 3
    wall = np.zeros((nx, ny), dtype=bool)
    wall[ij[:, 0], ij[:, 1]] = True
    r = int(math.ceil(thickness / grid_eps)) if thickness > 0 else 0
    solid = ndimage.binary_dilation(wall, _disk(r)) if r else wall
    comp, ncomp = ndimage.label(~solid)
    if ncomp == 0:
        return []
    # unbounded: touches left, right or top edge of the frame
    edge = np.unique(np.concatenate([comp[0, :], comp[-1, :], comp[:, -1]]))
    bounded = np.setdiff1d(np.arange(1, ncomp + 1), edge)
    if bounded.size == 0:
        return []
    cell_of = {}
    order = np.lexsort((gen,))
    for p in order:
        cell_of.setdefault((ij[p, 0], ij[p, 1]), []).append(p)
    objs = ndimage.find_objects(comp)
    pockets = []
    for c in bounded:
        sl = objs[c - 1]
        sub = (slice(max(sl[0].start - 1, 0), sl[0].stop + 1), slice(max(sl[1].start - 1, 0), sl[1].stop + 1))
        mask = comp[sub] == c
        sub = (slice(max(sub[0].start - r, 0), sub[0].stop + r), slice(max(sub[1].start - r, 0), sub[1].stop + r))
        mask = comp[sub] == c
        ring = ndimage.binary_dilation(mask, _disk(r + 1)) & wall[sub]
        cells = np.argwhere(ring) + np.array([sub[0].start, sub[1].start])
        idx = [p for ci, cj in cells for p in cell_of.get((ci, cj), ())]
        if len(idx) < 3:
            continue
        idx = np.array(idx)
        bpts = xy[idx]
        diam = _diameter(bpts)
        if diam < min_diameter:
            continue
        inside = np.argwhere(mask) + np.array([sub[0].start, sub[1].start])
        centre = np.array([x0, 0.0]) + (inside.mean(axis=0) + 0.5) * grid_eps
        ang = np.arctan2(bpts[:, 1] - centre[1], bpts[:, 0] - centre[0])
        ring_order = np.argsort(ang, kind="stable")
        bpts, bgen, blab = bpts[ring_order], gen[idx][ring_order], lab[idx][ring_order]
        io, ic = int(np.argmin(bgen)), int(np.argmax(bgen))
        n = bpts.shape[0]
        # counterclockwise arc io -> ic, clockwise arc io -> ic the other way round
        ccw = np.arange(io, io + ((ic - io) % n) + 1) % n
        cw = np.arange(io, io - ((io - ic) % n) - 1, -1) % n
        if angles is not None:
            t1 = angles[0]
            first_is_cw = np.mean(blab[cw] == t1) >= np.mean(blab[ccw] == t1)
            s1, s2 = (cw, ccw) if first_is_cw else (ccw, cw)
            orientation = "clockwise" if first_is_cw else "counterclockwise"
        else:
            s1, s2 = cw, ccw
            orientation = "clockwise" if np.median(bgen[cw]) <= np.median(bgen[ccw]) else "counterclockwise"
        op, cl = bpts[io], bpts[ic]
        pockets.append(Pocket(complex(*op), complex(*cl), bpts[s1], bpts[s2], diam, orientation,
                              float(bgen[io]), float(bgen[ic]), float(mask.sum() * grid_eps ** 2), float(grid_eps)))
    return pockets


def count_pockets(pockets, min_diameter):
    return sum(1 for p in pockets if p.diameter >= min_diameter)


# ---------------------------------------------------------------- ordering and exploration


def merge_side(line_a, line_b, tol):
    """Side of ``line_b`` on which ``line_a`` first comes within ``tol``: "right", "left" or None."""
    a, b = as_xy(line_a), as_xy(line_b)
    if a.shape[0] < 2 or b.shape[0] < 2:
        return None
    d, j = cKDTree(b).query(a)
    hit = np.flatnonzero(d <= tol)
    if hit.size == 0 or hit[0] == 0:
        return None
    i = hit[0]
    j = j[i]
    tang = b[min(j + 1, b.shape[0] - 1)] - b[max(j - 1, 0)]
    appr = a[i - 1] - b[j]
    cross = tang[0] * appr[1] - tang[1] * appr[0]
    if abs(cross) <= 1e-12 * (np.hypot(*tang) * np.hypot(*appr) + 1e-300):
        return None
    return "left" if cross > 0 else "right"


def order_pockets(pockets, theta2_lines=None, tol=None):
    """Order pockets; returns a new list with ``order_index`` set.

    Without ``theta2_lines`` the order is that of the first visits of the
    opening points.  With them (one polyline per pocket, started at its
    opening point) pocket A comes before B when A's line merges into B's on
    B's right side, and after B when it merges on the left.  Pairs the
    merge test cannot resolve fall back to visit order and are marked
    ``ambiguous``.
    """
    pockets = list(pockets)
    if theta2_lines is not None and len(theta2_lines) != len(pockets):
        raise ValueError("need one theta2 line per pocket")
    idx = list(range(len(pockets)))
    ambiguous = set()

    def by_visit(i, j):
        a, b = pockets[i].open_time, pockets[j].open_time
        return -1 if (a, i) < (b, j) else 1

    def cmp(i, j):
        if i == j:
            return 0
        if theta2_lines is None:
            return by_visit(i, j)
        eps = tol if tol is not None else pockets[i].grid_eps
        s = merge_side(theta2_lines[i], theta2_lines[j], eps)
        if s is not None:
            return -1 if s == "right" else 1
        s = merge_side(theta2_lines[j], theta2_lines[i], eps)
        if s is not None:
            return 1 if s == "right" else -1
        ambiguous.update((i, j))
        return by_visit(i, j)

    idx.sort(key=functools.cmp_to_key(cmp))
    out = []
    for rank, i in enumerate(idx):
        p = pockets[i]
        out.append(Pocket(p.opening, p.closing, p.side1, p.side2, p.diameter, p.orientation, p.open_time,
                          p.close_time, p.area, p.grid_eps, rank, i in ambiguous))
    return out


def exploration_path(pockets, gap_factor=10.0):
    """Concatenate the side1 polylines of ordered pockets, parameterised by arc length.

    Joins longer than ``gap_factor * grid_eps`` are listed in ``meta["gaps"]``
    as ``(index, length)``.  The returned trace stores arc length in
    ``capacity_times``.
    """
    if not pockets:
        return Trace(np.empty(0), np.empty(0, complex), meta={"gaps": [], "parameter": "arc_length"})
    parts, gaps, joins = [], [], []
    n = 0
    for p in pockets:
        if p.side1 is None or len(p.side1) == 0:
            raise ValueError("pocket without a side decomposition")
        xy = as_xy(p.side1)
        if parts:
            gap = float(np.hypot(*(xy[0] - parts[-1][-1])))
            if gap > gap_factor * p.grid_eps:
                gaps.append((n, gap))
        joins.append(n)
        parts.append(xy)
        n += xy.shape[0]
    xy = np.vstack(parts)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(xy, axis=0).T))])
    return Trace(s, xy[:, 0] + 1j * xy[:, 1],
                 meta={"gaps": gaps, "joins": joins, "parameter": "arc_length"})
