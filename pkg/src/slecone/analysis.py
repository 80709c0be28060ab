"""Estimators and ensemble statistics for traces and light cones."""

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree


@dataclass
class DimensionEstimate:
    value: float
    stderr: float
    scales_used: np.ndarray
    r_squared: float
    counts: np.ndarray | None = None


def as_xy(points):
    """Points as an (n, 2) float array; accepts complex arrays or (n, 2) arrays."""
    p = np.asarray(points)
    if np.iscomplexobj(p) or p.ndim == 1:
        p = p.astype(complex).ravel()
        return np.column_stack([p.real, p.imag])
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("points must be complex or of shape (n, 2)")
    return p.astype(float)


def densify(points, max_spacing):
    """Resample a polyline so consecutive points are at most ``max_spacing`` apart."""
    xy = as_xy(points)
    if xy.shape[0] < 2:
        return xy
    seg = np.diff(xy, axis=0)
    length = np.hypot(seg[:, 0], seg[:, 1])
    reps = np.maximum(1, np.ceil(length / max_spacing).astype(int))
    idx = np.repeat(np.arange(seg.shape[0]), reps)
    # fractional position of each sample along its segment
    starts = np.cumsum(reps) - reps
    frac = (np.arange(idx.size) - np.repeat(starts, reps)) / np.repeat(reps, reps)
    out = xy[idx] + frac[:, None] * seg[idx]
    return np.vstack([out, xy[-1:]])


def bbox_size(points):
    xy = as_xy(points)
    return float(np.max(np.ptp(xy, axis=0)))


def box_dimension(points, scale_min=None, scale_max=None, n_scales=12, n_offsets=4, seed=0):
    """Box-counting dimension: slope of log N(s) against log(1/s).

    Counts are averaged over ``n_offsets`` grid shifts to damp the
    dependence on grid alignment.  Scales default to a geometric grid over
    ``[bbox/512, bbox/16]``.
    """
    xy = as_xy(points)
    if xy.shape[0] < 2:
        raise ValueError("need at least two points")
    size = bbox_size(xy)
    if size == 0:
        raise ValueError("degenerate point cloud")
    scale_min = size / 512 if scale_min is None else scale_min
    scale_max = size / 16 if scale_max is None else scale_max
    if not 0 < scale_min < scale_max:
        raise ValueError("degenerate scale range")
    scales = np.geomspace(scale_min, scale_max, n_scales)
    shifts = np.random.default_rng(seed).random((n_offsets, 2))
    shifts[0] = 0.0
    origin = xy.min(axis=0)
    counts = np.empty(n_scales)
    for i, s in enumerate(scales):
        c = 0
        for sh in shifts:
            ij = np.floor((xy - origin) / s + sh).astype(np.int64)
            key = ij[:, 0] * 2_147_483_647 + ij[:, 1]
            c += np.unique(key).size
        counts[i] = c / n_offsets
    fit = stats.linregress(np.log(1 / scales), np.log(counts))
    return DimensionEstimate(float(fit.slope), float(fit.stderr), scales, float(fit.rvalue ** 2), counts)


def trace_dimension(trace, n_scales=12, lo=512, hi=16):
    """Box dimension of a trace polyline, densified below the finest scale."""
    xy = as_xy(trace.points if hasattr(trace, "points") else trace)
    size = bbox_size(xy)
    dense = densify(xy, size / lo / 4)
    return box_dimension(dense, size / lo, size / hi, n_scales)


def hausdorff_distance(A, B):
    """Symmetric Hausdorff distance between two finite point sets."""
    a, b = as_xy(A), as_xy(B)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("point sets must be nonempty")
    dab = cKDTree(b).query(a)[0].max()
    dba = cKDTree(a).query(b)[0].max()
    return float(max(dab, dba))


def directed_distance(A, B):
    """sup over a in A of dist(a, B)."""
    a, b = as_xy(A), as_xy(B)
    return float(cKDTree(b).query(a)[0].max())


def boundary_hit_fraction(trace, segment=(-1.0, 0.0), eps=0.05, n_test=200):
    """Fraction of ``n_test`` equispaced points of a real segment lying within ``eps`` of the trace."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    a, b = segment
    xy = as_xy(trace.points if hasattr(trace, "points") else trace)
    if xy.shape[0] == 0:
        return 0.0
    test = np.column_stack([np.linspace(a, b, n_test), np.zeros(n_test)])
    dist = cKDTree(xy).query(test)[0]
    return float(np.mean(dist <= eps))


def transience_stat(traces, R):
    """Fraction of traces whose tip leaves the disk ``|z| <= R`` and stays outside afterwards."""
    if not traces:
        raise ValueError("empty ensemble")
    escaped = 0
    for tr in traces:
        r = np.abs(np.asarray(tr.points if hasattr(tr, "points") else tr))
        inside = np.flatnonzero(r <= R)
        # escaped iff the last point inside the disk is not the final point
        if r.size and r[-1] > R and (inside.size == 0 or inside[-1] < r.size - 1):
            escaped += 1
    return escaped / len(traces)


def double_point_fraction(trace, radius=1e-3, time_gap=0.1):
    """Fraction of trace points having another point within ``radius`` at capacity distance > ``time_gap``."""
    pts = as_xy(trace.points)
    t = trace.capacity_times
    tree = cKDTree(pts)
    hits = 0
    for i, nb in enumerate(tree.query_ball_point(pts, radius)):
        if nb and np.max(np.abs(t[nb] - t[i])) > time_gap:
            hits += 1
    return hits / len(pts)


def boundary_proximity(trace):
    """Largest height of the trace divided by its diameter: 0 for a curve lying on the real line."""
    xy = as_xy(trace.points if hasattr(trace, "points") else trace)
    size = bbox_size(xy)
    return float(xy[:, 1].max() / size) if size > 0 else 0.0


# ---------------------------------------------------------------- range summaries


@dataclass(frozen=True)
class Window:
    """Axis-aligned observation window in the closed upper half-plane."""

    x0: float = -1.0
    x1: float = 1.0
    y1: float = 1.0

    def clip(self, xy, margin=0.0):
        keep = ((xy[:, 0] >= self.x0 - margin) & (xy[:, 0] <= self.x1 + margin)
                & (xy[:, 1] <= self.y1 + margin))
        return xy[keep]

    def grid(self, spacing):
        xs = np.arange(self.x0 + spacing / 2, self.x1, spacing)
        ys = np.arange(spacing / 2, self.y1, spacing)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


def neighborhood_area(points, eps, window=Window(), spacing=None):
    """Area of the eps-neighbourhood of a point set inside ``window`` (grid quadrature)."""
    spacing = eps / 4 if spacing is None else spacing
    grid = window.grid(spacing)
    xy = window.clip(as_xy(points), eps)
    if xy.shape[0] == 0:
        return 0.0
    d = cKDTree(xy).query(grid, distance_upper_bound=eps)[0]
    return float(np.count_nonzero(d <= eps) * spacing * spacing)


def grid_coverage(points, eps, window=Window(), n_side=24):
    """Fraction of a coarse test grid of the window lying within eps of the point set."""
    grid = window.grid((window.x1 - window.x0) / n_side)
    xy = as_xy(points)
    d = cKDTree(xy).query(grid, distance_upper_bound=eps)[0]
    return float(np.mean(d <= eps))


SUMMARIES = ("neighborhood_area", "boundary_hit_fraction", "grid_coverage")


def range_summaries(trace, eps=0.05, window=Window()):
    """The scalar summaries compared by :func:`range_equivalence_stat`."""
    pts = trace.points if hasattr(trace, "points") else trace
    dense = densify(pts, eps / 4)
    return {
        "neighborhood_area": neighborhood_area(dense, eps, window),
        "boundary_hit_fraction": boundary_hit_fraction(dense, (window.x0, 0.0), eps),
        "grid_coverage": grid_coverage(dense, eps, window),
    }


@dataclass
class EquivalenceReport:
    statistics: dict
    pvalues: dict
    passed: dict
    alpha: float
    n_a: int
    n_b: int

    @property
    def verdict(self):
        return "pass" if all(self.passed.values()) else "fail"

    def to_dict(self):
        return {"statistics": self.statistics, "pvalues": self.pvalues, "passed": self.passed,
                "alpha": self.alpha, "n_a": self.n_a, "n_b": self.n_b, "verdict": self.verdict}


def range_equivalence_stat(ensemble_a, ensemble_b, summaries=SUMMARIES, alpha=0.01, eps=0.05, window=Window()):
    """Two-sample KS tests on range summaries, Bonferroni-corrected at level ``alpha``.

    Ensembles are sequences of traces (or precomputed summary dicts) that
    have already been brought to a common scale: every member should have
    left a disk several times larger than ``window`` by the end of its run.
    """
    if not ensemble_a or not ensemble_b:
        raise ValueError("ensembles must be nonempty")

    def table(ens):
        rows = [m if isinstance(m, dict) else range_summaries(m, eps, window) for m in ens]
        return {s: np.array([r[s] for r in rows]) for s in summaries}

    ta, tb = table(ensemble_a), table(ensemble_b)
    level = alpha / len(summaries)
    stat, pval, ok = {}, {}, {}
    for s in summaries:
        res = stats.ks_2samp(ta[s], tb[s])
        stat[s] = float(res.statistic)
        pval[s] = float(res.pvalue)
        ok[s] = bool(res.pvalue > level)
    return EquivalenceReport(stat, pval, ok, alpha, len(ensemble_a), len(ensemble_b))


# ---------------------------------------------------------------- visit order


def first_visit_times(trace, test_points, eps):
    """Capacity time at which the trace first comes within ``eps`` of each test point (inf if never)."""
    xy = as_xy(trace.points)
    t = np.asarray(trace.capacity_times)
    tp = as_xy(test_points)
    first = np.full(tp.shape[0], np.inf)
    if xy.shape[0] == 0 or tp.shape[0] == 0:
        return first
    for i, nb in enumerate(cKDTree(xy).query_ball_point(tp, eps)):
        if nb:
            first[i] = t[min(nb)]
    return first


def pocket_visit_tau(trace, pockets=None, grid_eps=0.01, min_diameter=0.05):
    """Mean over pockets of the Kendall tau between first-visit time and abscissa of the pocket's boundary.

    Positive values mean pocket boundaries tend to be traced from left to
    right.  NaN when the trace has no pocket of diameter ``min_diameter``.
    """
    if pockets is None:
        from .lightcone import detect_pockets

        pockets = detect_pockets(trace, grid_eps=grid_eps, min_diameter=min_diameter)
    taus = []
    for p in pockets:
        b = np.vstack([np.reshape(p.side1, (-1, 2)), np.reshape(p.side2, (-1, 2))])
        t = first_visit_times(trace, b, grid_eps)
        ok = np.isfinite(t)
        if ok.sum() >= 3:
            tau = stats.kendalltau(t[ok], b[ok, 0]).statistic
            if np.isfinite(tau):
                taus.append(tau)
    return float(np.mean(taus)) if taus else float("nan")


@dataclass
class VisitOrderReport:
    median_a: float
    median_b: float
    pvalue: float
    alpha: float

    @property
    def different(self):
        return self.pvalue < self.alpha

    def to_dict(self):
        return {"median_tau_a": self.median_a, "median_tau_b": self.median_b, "pvalue": self.pvalue,
                "alpha": self.alpha, "different": self.different}


def visit_order_test(taus_a, taus_b, alpha=0.01):
    """Two-sided Mann-Whitney test on per-trace :func:`pocket_visit_tau` values (NaNs dropped)."""
    a = np.asarray(taus_a, float)
    b = np.asarray(taus_b, float)
    a, b = a[np.isfinite(a)], b[np.isfinite(b)]
    if a.size < 2 or b.size < 2:
        raise ValueError("need at least two traces with pockets on each side")
    p = stats.mannwhitneyu(a, b, alternative="two-sided").pvalue
    return VisitOrderReport(float(np.median(a)), float(np.median(b)), float(p), alpha)
