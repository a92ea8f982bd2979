"""Planar metric primitives: points, polylines, point clouds, Hausdorff distance."""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .io_utils import atomic_write_text, fmt17

TWO_PI = 2.0 * math.pi

# below this many points the grid Hausdorff path just runs the naive kernel
GRID_MIN_POINTS = 512
# pair budget per vectorized block (keeps peak memory near 64 MB)
_BLOCK = 1 << 22


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def to_polar(self) -> "PolarPoint":
        r = math.hypot(self.x, self.y)
        if r == 0.0:
            return PolarPoint(0.0, 0.0)
        return PolarPoint(r, math.atan2(self.y, self.x))

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class PolarPoint:
    """Polar coordinates with the angle folded into [0, 2*pi)."""

    r: float
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.alpha)):
            raise GeometryError("non-finite polar point")
        if self.r < 0:
            raise GeometryError(f"negative radius {self.r}")
        if self.r == 0.0:
            object.__setattr__(self, "alpha", 0.0)
        else:
            object.__setattr__(self, "alpha", canonical_angle(self.alpha))


def canonical_angle(alpha: float) -> float:
    a = math.fmod(alpha, TWO_PI)
    if a < 0:
        a += TWO_PI
    # fmod of a value just below 0 can round up to exactly 2*pi
    return 0.0 if a >= TWO_PI else a


def polar_to_cartesian(p: PolarPoint) -> Point2:
    return Point2(p.r * math.cos(p.alpha), p.r * math.sin(p.alpha))


def dist(p: Point2, q: Point2) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def polar_dist(p: PolarPoint, q: PolarPoint) -> float:
    """Distance via the law of cosines; agrees with :func:`dist` on the Cartesian images."""
    sq = p.r * p.r + q.r * q.r - 2.0 * p.r * q.r * math.cos(p.alpha - q.alpha)
    return math.sqrt(max(sq, 0.0))


def as_array(points) -> np.ndarray:
    """Coerce Point2 sequences or array-likes to a float (n, 2) array."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
    else:
        pts = list(points)
        if pts and isinstance(pts[0], Point2):
            arr = np.array([(p.x, p.y) for p in pts], dtype=float)
        else:
            arr = np.asarray(pts, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim == 1:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"expected (n, 2) coordinates, got shape {arr.shape}")
    return arr


def to_polar_arrays(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = np.hypot(pts[:, 0], pts[:, 1])
    alpha = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)
    alpha[alpha >= TWO_PI] = 0.0
    alpha[r == 0] = 0.0
    return r, alpha


def from_polar_arrays(r, alpha) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    return np.column_stack([r * np.cos(alpha), r * np.sin(alpha)])


# --------------------------------------------------------------------------
# polylines


@dataclass(frozen=True, eq=False)
class Polyline:
    vertices: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        v = as_array(self.vertices)
        if len(v) < 2:
            raise GeometryError("a polyline needs at least two vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polyline has non-finite vertices")
        if np.any(np.all(v[1:] == v[:-1], axis=1)):
            raise GeometryError("consecutive polyline vertices coincide")
        if self.labels is not None and len(self.labels) != len(v):
            raise GeometryError("one label per vertex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def segment_lengths(self) -> np.ndarray:
        d = np.diff(self.vertices, axis=0)
        return np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])

    def cumulative_lengths(self) -> np.ndarray:
        return self._cum.copy()

    @functools.cached_property
    def _cum(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths())])

    @functools.cached_property
    def length(self) -> float:
        return polyline_length(self)

    def point_at(self, s) -> np.ndarray:
        """Points at arc-length positions ``s`` (clipped to the polyline)."""
        cum = self._cum
        s = np.clip(np.asarray(s, dtype=float), 0.0, cum[-1])
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
        seg = cum[idx + 1] - cum[idx]
        t = (s - cum[idx]) / seg
        v = self.vertices
        out = v[idx] + t[..., None] * (v[idx + 1] - v[idx])
        return out

    def resample(self, step: float) -> np.ndarray:
        """Vertices plus extra points so consecutive samples are at most ``step`` apart."""
        pieces = [self.vertices[:1]]
        for a, b, ln in zip(self.vertices[:-1], self.vertices[1:], self.segment_lengths()):
            k = max(1, math.ceil(ln / step))
            t = np.arange(1, k + 1) / k
            pieces.append(a + t[:, None] * (b - a))
        return np.concatenate(pieces)


def polyline_length(line: Polyline) -> float:
    # math.fsum keeps long zigzags (10^5 legs) exact to rounding of each leg
    return math.fsum(line.segment_lengths())


# --------------------------------------------------------------------------
# point clouds


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite sample of a compact planar set.

    ``resolution`` bounds the distance from any point of the ideal set to the
    nearest sample. Points closer than ``resolution / 10`` are merged on
    construction, keeping the first occurrence.
    """

    points: np.ndarray
    labels: tuple[str, ...] | None = None
    resolution: float = 1e-3
    dedup: bool = field(default=True, repr=False)

    def __post_init__(self):
        pts = as_array(self.points)
        if len(pts) == 0:
            raise GeometryError("a point cloud must be nonempty")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point cloud has non-finite coordinates")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise GeometryError(f"resolution must be positive, got {self.resolution}")
        labels = self.labels
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != len(pts):
                raise GeometryError("one label per point")
        if self.dedup:
            keep = dedup_indices(pts, self.resolution / 10.0)
            if len(keep) != len(pts):
                pts = pts[keep]
                if labels is not None:
                    labels = tuple(labels[i] for i in keep)
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dedup", False)

    def __len__(self) -> int:
        return len(self.points)

    def select(self, mask) -> "PointCloud":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return PointCloud(self.points[idx], labels, self.resolution, dedup=False)

    def with_label(self, predicate) -> "PointCloud":
        if self.labels is None:
            raise GeometryError("cloud carries no labels")
        return self.select(np.array([bool(predicate(s)) for s in self.labels]))

    def label_set(self) -> set[str]:
        return set() if self.labels is None else set(self.labels)

    def point(self, i: int) -> Point2:
        return Point2(float(self.points[i, 0]), float(self.points[i, 1]))


def union(clouds: Sequence[PointCloud], resolution: float | None = None) -> PointCloud:
    if not clouds:
        raise GeometryError("nothing to unite")
    res = resolution if resolution is not None else max(c.resolution for c in clouds)
    pts = np.concatenate([c.points for c in clouds])
    if all(c.labels is not None for c in clouds):
        labels = tuple(s for c in clouds for s in c.labels)
    else:
        labels = None
    return PointCloud(pts, labels, res)


def dedup_indices(pts: np.ndarray, tol: float) -> np.ndarray:
    """Indices (ascending) of a greedy subset with pairwise distances >= ``tol``.

    Earlier points win. Exact repeats and same-cell points are dropped first so
    the KD-tree pass never sees dense clumps.
    """
    n = len(pts)
    if n <= 1:
        return np.arange(n)
    cell = tol / math.sqrt(2.0)
    lo = pts.min(axis=0)
    span = float((pts.max(axis=0) - lo).max())
    if cell > 0 and span / cell < 2.0**52:
        keys = np.floor((pts - lo) / cell).astype(np.int64)
        _, first = np.unique(keys, axis=0, return_index=True)
    else:
        _, first = np.unique(pts, axis=0, return_index=True)
    first = np.sort(first)
    if tol <= 0 or len(first) <= 1:
        return first
    sub = pts[first]
    pairs = cKDTree(sub).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return first
    # query_pairs uses <= tol; keep strict ">= tol apart" semantics loose by one ulp
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    removed = np.zeros(len(sub), dtype=bool)
    for i, j in pairs.tolist():
        if not removed[i]:
            removed[j] = True
    return first[~removed]


# --------------------------------------------------------------------------
# distances between clouds


def _sq(ax, ay, bx, by):
    dx = ax - bx
    dy = ay - by
    return dx * dx + dy * dy


def _nearest_sq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared distance from each row of ``a`` to its nearest row of ``b``."""
    out = np.empty(len(a))
    step = max(1, _BLOCK // max(1, len(b)))
    bx, by = b[:, 0], b[:, 1]
    for s in range(0, len(a), step):
        blk = a[s : s + step]
        out[s : s + step] = _sq(blk[:, 0, None], blk[:, 1, None], bx[None, :], by[None, :]).min(axis=1)
    return out


def _directed_sq_naive(a: np.ndarray, b: np.ndarray) -> float:
    return float(_nearest_sq(a, b).max())


def _directed_sq_grid(a: np.ndarray, b: np.ndarray) -> float:
    """Same value as the naive kernel, using uniform buckets sized to a running bound.

    A lower bound ``lb`` (an exact nearest-neighbour value for a probe subset of
    ``a``) sets the bucket size so a bucket's diagonal equals ``lb``. Any point
    of ``a`` with some point of ``b`` within ``lb`` cannot raise the maximum and
    is discarded; the survivors get exact nearest-neighbour scans. All
    distances go through the same elementwise kernel, so the maximum is
    bit-identical to the naive path.
    """
    probe = a[np.linspace(0, len(a) - 1, min(len(a), 256)).astype(np.int64)]
    lb_sq = _directed_sq_naive(probe, b)

    lo = np.minimum(a.min(axis=0), b.min(axis=0))
    span = float((np.maximum(a.max(axis=0), b.max(axis=0)) - lo).max())
    cell = math.sqrt(lb_sq) / math.sqrt(2.0)
    floor_cell = span * 2.0**-20 if span > 0 else 1.0
    cell = max(cell, floor_cell)

    def cell_of(p):
        return np.floor((p - lo) / cell).astype(np.int64)

    cb = cell_of(b)
    ca = cell_of(a)
    ny = int(max(cb[:, 1].max(), ca[:, 1].max())) + 5
    kb = (cb[:, 0] + 2) * ny + (cb[:, 1] + 2)
    order = np.argsort(kb, kind="stable")
    kb_sorted = kb[order]
    bs = b[order]
    ukeys, starts, counts = np.unique(kb_sorted, return_index=True, return_counts=True)

    def lookup(keys):
        pos = np.searchsorted(ukeys, keys)
        pos_c = np.minimum(pos, len(ukeys) - 1)
        hit = ukeys[pos_c] == keys
        return hit, pos_c

    ka = (ca[:, 0] + 2) * ny + (ca[:, 1] + 2)
    resolved = np.zeros(len(a), dtype=bool)

    # own bucket, first occupant: within the bucket diagonal = lb
    hit, pos = lookup(ka)
    idx = np.flatnonzero(hit)
    if len(idx):
        first = bs[starts[pos[idx]]]
        d = _sq(a[idx, 0], a[idx, 1], first[:, 0], first[:, 1])
        resolved[idx[d <= lb_sq]] = True

    # full scan of the 5x5 neighbourhood for the rest
    pending = np.flatnonzero(~resolved)
    for ox in range(-2, 3):
        if len(pending) == 0:
            break
        for oy in range(-2, 3):
            if len(pending) == 0:
                break
            hit, pos = lookup(ka[pending] + ox * ny + oy)
            ai = pending[hit]
            if len(ai) == 0:
                continue
            st = starts[pos[hit]]
            ct = counts[pos[hit]]
            done = _any_within(a, bs, ai, st, ct, lb_sq)
            if len(done):
                resolved[done] = True
                pending = np.flatnonzero(~resolved)

    best = lb_sq
    if len(pending):
        best = max(best, _directed_sq_naive(a[pending], b))
    return best


def _any_within(a, bs, ai, st, ct, bound_sq) -> np.ndarray:
    """Indices in ``ai`` with at least one bucket occupant within sqrt(bound_sq)."""
    found = []
    csum = np.cumsum(ct)
    start = 0
    while start < len(ai):
        base = csum[start - 1] if start else 0
        stop = int(np.searchsorted(csum, base + _BLOCK, side="right"))
        stop = max(stop, start + 1)
        sl = slice(start, stop)
        cts = ct[sl]
        total = int(cts.sum())
        owner = np.repeat(np.arange(stop - start), cts)
        offs = np.arange(total) - np.repeat(np.cumsum(cts) - cts, cts)
        bidx = np.repeat(st[sl], cts) + offs
        aidx = ai[sl][owner]
        d = _sq(a[aidx, 0], a[aidx, 1], bs[bidx, 0], bs[bidx, 1])
        ok = np.zeros(stop - start, dtype=bool)
        ok[owner[d <= bound_sq]] = True
        found.append(ai[sl][ok])
        start = stop
    return np.concatenate(found) if found else np.array([], dtype=np.int64)


def _cloud_array(c) -> np.ndarray:
    arr = c.points if isinstance(c, PointCloud) else as_array(c)
    if len(arr) == 0:
        raise GeometryError("empty set has no Hausdorff distance")
    return arr


def directed_hausdorff(a, b, method: str = "grid") -> float:
    """sup over a of the distance to the nearest point of b."""
    A, B = _cloud_array(a), _cloud_array(b)
    return math.sqrt(_directed_sq(A, B, method))


def _directed_sq(A, B, method):
    if method == "naive" or len(A) < GRID_MIN_POINTS or len(B) < GRID_MIN_POINTS:
        if method not in ("naive", "grid"):
            raise GeometryError(f"unknown method {method!r}")
        return _directed_sq_naive(A, B)
    if method != "grid":
        raise GeometryError(f"unknown method {method!r}")
    return _directed_sq_grid(A, B)


def hausdorff_distance(a, b, method: str = "grid") -> float:
    A, B = _cloud_array(a), _cloud_array(b)
    return math.sqrt(max(_directed_sq(A, B, method), _directed_sq(B, A, method)))


def diameter(cloud) -> float:
    pts = cloud.points if isinstance(cloud, PointCloud) else as_array(cloud)
    if len(pts) == 0:
        raise GeometryError("empty set has no diameter")
    return math.sqrt(_diameter_sq(pts))


def _diameter_sq(pts: np.ndarray) -> float:
    if len(pts) == 1:
        return 0.0
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    if lo[1] == hi[1]:
        d = hi[0] - lo[0]
        return float(d * d)
    if lo[0] == hi[0]:
        d = hi[1] - lo[1]
        return float(d * d)
    if len(pts) > 64:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            pts = _flat_candidates(pts)
    return float(_nearest_far_sq(pts))


def _flat_candidates(pts: np.ndarray) -> np.ndarray:
    """Points that can still realise the diameter of a (near) collinear cloud.

    With projection range L along the principal axis and transverse spread h,
    a diametral pair is at least sqrt(L^2 - h^2) apart along the axis, so both
    ends lie within L - sqrt(L^2 - h^2) of the extremes.
    """
    c = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    proj = c @ vt[0]
    side = c @ vt[1]
    lo, hi = float(proj.min()), float(proj.max())
    L = hi - lo
    h = float(side.max() - side.min())
    if L <= h:
        return pts
    delta = L - math.sqrt(L * L - h * h) + 1e-9 * L
    keep = (proj >= hi - delta) | (proj <= lo + delta)
    return pts[keep]


def _nearest_far_sq(pts):
    best = 0.0
    step = max(1, _BLOCK // len(pts))
    for s in range(0, len(pts), step):
        blk = pts[s : s + step]
        d = _sq(blk[:, 0, None], blk[:, 1, None], pts[None, :, 0], pts[None, :, 1])
        best = max(best, float(d.max()))
    return best


def farthest_point_indices(pts: np.ndarray, k: int) -> np.ndarray:
    """Greedy farthest-point traversal starting from the point farthest from pts[0]."""
    n = len(pts)
    k = min(k, n)
    d0 = _sq(pts[:, 0], pts[:, 1], pts[0, 0], pts[0, 1])
    chosen = [int(d0.argmax())]
    mind = _sq(pts[:, 0], pts[:, 1], pts[chosen[0], 0], pts[chosen[0], 1])
    while len(chosen) < k:
        j = int(mind.argmax())
        if mind[j] == 0.0:
            break
        chosen.append(j)
        mind = np.minimum(mind, _sq(pts[:, 0], pts[:, 1], pts[j, 0], pts[j, 1]))
    return np.array(chosen, dtype=np.int64)


# --------------------------------------------------------------------------
# CSV


def cloud_to_csv(cloud: PointCloud) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "label"])
    labels = cloud.labels or ("",) * len(cloud)
    for (x, y), lab in zip(cloud.points.tolist(), labels):
        w.writerow([fmt17(x), fmt17(y), lab])
    return buf.getvalue()


def write_cloud_csv(cloud: PointCloud, path) -> None:
    atomic_write_text(Path(path), cloud_to_csv(cloud))


def cloud_from_csv(text: str, resolution: float = 1e-3) -> PointCloud:
    """Parse ``x,y,label`` CSV. Errors name the offending line (1-based)."""
    rows = csv.reader(io.StringIO(text))
    try:
        header = next(rows)
    except StopIteration:
        raise GeometryError("line 1: empty CSV") from None
    if [h.strip() for h in header] != ["x", "y", "label"]:
        raise GeometryError(f"line 1: expected header x,y,label, got {','.join(header)}")
    pts, labels = [], []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) not in (2, 3):
            raise GeometryError(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            raise GeometryError(f"line {lineno}: non-numeric coordinate") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise GeometryError(f"line {lineno}: non-finite coordinate")
        pts.append((x, y))
        labels.append(row[2] if len(row) == 3 else "")
    if not pts:
        raise GeometryError("line 2: no data rows")
    lab = tuple(labels) if any(labels) else None
    return PointCloud(np.array(pts), lab, resolution, dedup=False)


def read_cloud_csv(path, resolution: float | None = None) -> PointCloud:
    """Read a cloud; resolution comes from the argument or a sibling ``.json`` metadata file."""
    path = Path(path)
    if resolution is None:
        meta = path.with_suffix(".json")
        resolution = 1e-3
        if meta.exists():
            resolution = float(json.loads(meta.read_text()).get("resolution", resolution))
    return cloud_from_csv(path.read_text(), resolution)


def sample_circle(n: int, radius: float = 1.0) -> PointCloud:
    t = np.arange(n) * (TWO_PI / n)
    return PointCloud(from_polar_arrays(np.full(n, radius), t), resolution=radius * math.pi / n)


def points_of(items: Iterable) -> np.ndarray:
    return as_array(list(items))
