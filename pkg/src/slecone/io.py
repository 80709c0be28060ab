"""JSON, CSV and SVG formats, run manifests and atomic writes.

Every JSON document carries a ``schema`` tag (``slecone.<kind>/<version>``).
Floats are written with ``repr`` precision so that a document re-parses to
the same values and equal inputs give equal bytes.
"""

import csv
import io as _io
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import __version__
from .loewner import Trace

TRACE_SCHEMA = "slecone.trace/1"
ENSEMBLE_SCHEMA = "slecone.ensemble/1"
LIGHTCONE_SCHEMA = "slecone.lightcone/1"
MANIFEST_SCHEMA = "slecone.manifest/1"


class MalformedInput(ValueError):
    """Input document that does not match its schema; ``pointer`` is a JSON pointer."""

    def __init__(self, pointer, message):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(doc):
    return json.dumps(doc, indent=None, separators=(",", ":"), sort_keys=True, allow_nan=False) + "\n"


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if np.isfinite(f) else None
    return v


# ---------------------------------------------------------------- traces


def points_list(points):
    p = np.asarray(points, dtype=complex)
    return np.column_stack([p.real, p.imag]).tolist()


def trace_doc(trace, **extra):
    doc = {"schema": TRACE_SCHEMA, "kappa": trace.kappa, "rho": trace.rho,
           "capacity_times": trace.capacity_times.tolist(), "points": points_list(trace.points)}
    doc.update(extra)
    return _clean(doc)


def _expect(doc, key, kind, ptr):
    if not isinstance(doc, dict) or key not in doc:
        raise MalformedInput(f"{ptr}/{key}" if ptr or key else "", "missing field")
    v = doc[key]
    if kind == "number":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MalformedInput(f"{ptr}/{key}", "expected a number")
    elif kind == "list" and not isinstance(v, list):
        raise MalformedInput(f"{ptr}/{key}", "expected an array")
    return v


def _number_or_nan(doc, key, ptr):
    if doc.get(key) is None:
        return float("nan")
    return float(_expect(doc, key, "number", ptr))


def trace_from_doc(doc, ptr=""):
    if not isinstance(doc, dict):
        raise MalformedInput(ptr, "expected an object")
    times = _expect(doc, "capacity_times", "list", ptr)
    pts = _expect(doc, "points", "list", ptr)
    if len(times) != len(pts):
        raise MalformedInput(f"{ptr}/points", "length differs from capacity_times")
    for i, t in enumerate(times):
        if isinstance(t, bool) or not isinstance(t, (int, float)):
            raise MalformedInput(f"{ptr}/capacity_times/{i}", "expected a number")
    arr = np.empty(len(pts), dtype=complex)
    for i, p in enumerate(pts):
        if not (isinstance(p, list) and len(p) == 2 and all(isinstance(c, (int, float)) and not isinstance(c, bool)
                                                              for c in p)):
            raise MalformedInput(f"{ptr}/points/{i}", "expected a pair of numbers")
        arr[i] = complex(p[0], p[1])
    meta = {k: doc[k] for k in ("seed", "dt", "side", "grid") if k in doc}
    return Trace(np.asarray(times, dtype=float), arr, _number_or_nan(doc, "kappa", ptr),
                 _number_or_nan(doc, "rho", ptr), meta)


def read_json(path):
    try:
        with open(path, "rb") as fh:
            return json.loads(fh.read().decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedInput("", f"not valid JSON ({exc.msg} at line {exc.lineno})") from None
    except UnicodeDecodeError:
        raise MalformedInput("", "not UTF-8 text") from None


def load_traces(path):
    """Traces from a trace or ensemble document."""
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise MalformedInput("", "expected an object")
    schema = doc.get("schema")
    if schema == TRACE_SCHEMA:
        return [trace_from_doc(doc)]
    if schema == ENSEMBLE_SCHEMA:
        members = _expect(doc, "traces", "list", "")
        return [trace_from_doc(m, f"/traces/{i}") for i, m in enumerate(members)]
    if schema == LIGHTCONE_SCHEMA:
        segs = _expect(doc, "segments", "list", "")
        return [trace_from_doc(m, f"/segments/{i}") for i, m in enumerate(segs)]
    raise MalformedInput("/schema", f"unknown schema {schema!r}")


# ---------------------------------------------------------------- light cones


def pocket_doc(p):
    return _clean({"opening": [p.opening.real, p.opening.imag], "closing": [p.closing.real, p.closing.imag],
                   "side1": np.asarray(p.side1).tolist(), "side2": np.asarray(p.side2).tolist(),
                   "diameter": p.diameter, "orientation": p.orientation, "area": p.area,
                   "order_index": p.order_index, "ambiguous": p.ambiguous})


def lightcone_doc(approx_or_trace, pockets, **extra):
    from .lightcone import LightConeApprox

    if isinstance(approx_or_trace, LightConeApprox):
        a = approx_or_trace
        segs = [dict(trace_doc(s.trace), angle=s.angle, n_switches=s.n_switches, seed_point=s.seed,
                     parent=s.parent, start=s.start, stopped=s.stopped) for s in a.segments]
        doc = {"route": "constructive", "theta1": a.theta1, "theta2": a.theta2, "n_switches": a.n_switches,
               "segments": segs,
               "skipped": [{"seed_point": s.seed, "angle": s.angle, "n_switches": s.n_switches, "reason": s.reason}
                           for s in a.skipped]}
    else:
        tr = approx_or_trace
        doc = {"route": "direct", "theta1": 0.0, "theta2": tr.meta.get("theta"), "n_switches": None,
               "segments": [trace_doc(tr)], "skipped": []}
    doc["schema"] = LIGHTCONE_SCHEMA
    doc["pockets"] = [pocket_doc(p) for p in pockets]
    doc.update(extra)
    return _clean(doc)


def load_pockets(doc):
    from .lightcone import Pocket

    out = []
    for i, p in enumerate(doc.get("pockets", [])):
        ptr = f"/pockets/{i}"
        try:
            out.append(Pocket(complex(*p["opening"]), complex(*p["closing"]), np.asarray(p["side1"], float),
                              np.asarray(p["side2"], float), float(p["diameter"]), p["orientation"], float("nan"),
                              float("nan"), float(p.get("area") or 0.0), float("nan"), p.get("order_index"),
                              bool(p.get("ambiguous", False))))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(ptr, f"bad pocket record ({exc})") from None
    return out


# ---------------------------------------------------------------- manifests


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int
    toolkit_version: str = __version__
    timestamp: str = ""

    def to_doc(self):
        return _clean({"schema": MANIFEST_SCHEMA, "command": self.command, "parameters": self.parameters,
                       "seed": self.seed, "toolkit_version": self.toolkit_version, "timestamp": self.timestamp})

    @classmethod
    def from_doc(cls, doc):
        if not isinstance(doc, dict) or doc.get("schema") != MANIFEST_SCHEMA:
            raise MalformedInput("/schema", "not a run manifest")
        cmd = _expect(doc, "command", "str", "")
        if not isinstance(cmd, str):
            raise MalformedInput("/command", "expected a string")
        params = doc.get("parameters")
        if not isinstance(params, dict):
            raise MalformedInput("/parameters", "expected an object")
        seed = doc.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise MalformedInput("/seed", "expected a 64-bit unsigned integer")
        return cls(cmd, params, seed, doc.get("toolkit_version", ""), doc.get("timestamp", ""))


def manifest_path(out):
    return os.fspath(out) + ".manifest.json"


# ---------------------------------------------------------------- CSV and SVG


def dimension_csv(est):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scale", "count"])
    counts = est.counts if est.counts is not None else [""] * len(est.scales_used)
    for s, c in zip(est.scales_used, counts):
        w.writerow([repr(float(s)), repr(float(c))])
    return buf.getvalue()


def _fmt(x):
    return f"{x:.6g}"


def render_svg(traces=(), pockets=(), width=800, margin=10):
    """SVG 1.1 drawing: trace polylines, shaded pockets, opening (green) and closing (red) points."""
    pts = [np.asarray(t.points if hasattr(t, "points") else t, complex) for t in traces]
    allp = [p for p in pts if p.size]
    for pk in pockets:
        allp.append(np.asarray(pk.side1, float) @ np.array([1, 1j]) if len(pk.side1) else np.empty(0))
    allp = [p for p in allp if p.size]
    if allp:
        cat = np.concatenate(allp)
        x0, x1 = cat.real.min(), cat.real.max()
        y0, y1 = min(cat.imag.min(), 0.0), cat.imag.max()
    else:
        x0, x1, y0, y1 = -1.0, 1.0, 0.0, 1.0
    span = max(x1 - x0, y1 - y0, 1e-12)
    scale = (width - 2 * margin) / span
    height = int(np.ceil((y1 - y0) * scale + 2 * margin))

    def xy(z):
        return f"{_fmt((z.real - x0) * scale + margin)},{_fmt((y1 - z.imag) * scale + margin)}"

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    base = _fmt((y1 - 0.0) * scale + margin)
    out.append(f'<line x1="0" y1="{base}" x2="{width}" y2="{base}" stroke="#999" stroke-width="0.5"/>')
    for pk in pockets:
        ring = np.concatenate([np.asarray(pk.side1, float), np.asarray(pk.side2, float)[::-1]])
        if ring.shape[0] >= 3:
            poly = " ".join(xy(complex(a, b)) for a, b in ring)
            out.append(f'<polygon points="{poly}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>')
    for p in pts:
        if p.size >= 2:
            out.append(f'<polyline points="{" ".join(xy(z) for z in p)}" fill="none" stroke="black" '
                       f'stroke-width="0.5"/>')
    for pk in pockets:
        for z, colour in ((pk.opening, "green"), (pk.closing, "red")):
            cx, cy = xy(z).split(",")
            out.append(f'<circle cx="{cx}" cy="{cy}" r="2" fill="{colour}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
