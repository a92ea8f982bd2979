"""Shark teeth continuum and the free-arc topological fractal construction.

The shark teeth M is the bone [0,1] x {0} plus rows
M_k = {(t, wave_{n_k}(t) / k)} with n_k = floor(log2 log2 (k + 1)).

Any Peano continuum P = P1 u L u P2 glued along a free arc L carries the
continuous family {F_0, F_1, F_2, G_1, G_2}: F_i folds L onto its i-th third
through the tent contraction and collapses the rest to rho(i/3); G_j wraps L
around the loop parametrising P_j and collapses the rest to rho_j(0).
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString

from .engine import IfsSystem, MapError, MapSpec, int_param, register_map
from .geometry import PointCloud, Polyline, as_array


class FreeArcError(ValueError):
    pass


# --------------------------------------------------------------------------
# wave functions


def wave(t):
    """Distance from t to the nearest integer: 1-periodic zigzag with range [0, 1/2]."""
    t = np.asarray(t, dtype=float)
    frac = t - np.floor(t)
    out = np.minimum(frac, 1.0 - frac)
    return float(out) if out.ndim == 0 else out


def scaled_wave(n: int, t):
    """2^-n * wave(2^n t); scaling by a power of two is exact."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    s = 2.0**n
    return wave(np.asarray(t, dtype=float) * s) / s if np.ndim(t) else wave(float(t) * s) / s


def row_index(k: int) -> int:
    """floor(log2 log2 (k + 1)) in exact integer arithmetic."""
    if k < 1:
        raise ValueError("row_index needs k >= 1 (log2 log2 1 is undefined)")
    m = 0
    while 2 ** (2 ** (m + 1)) <= k + 1:
        m += 1
    return m


def row_amplitude(k: int) -> float:
    return 2.0 ** (-row_index(k) - 1) / k


def tent(x):
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > 1) or not np.all(np.isfinite(x_arr)):
        raise ValueError("tent is defined on [0, 1]")
    out = np.where(x_arr <= 0.5, x_arr, 1.0 - x_arr)
    return float(out) if out.ndim == 0 else out


def tent_contraction(i: int, x):
    """f_i(x) = (i + 2 tent(x)) / 3, mapping [0, 1] onto [i/3, (i+1)/3] with Lipschitz constant 2/3."""
    if i not in (0, 1, 2):
        raise ValueError(f"i must be 0, 1 or 2, got {i}")
    return (i + 2.0 * tent(x)) / 3.0


@register_map("tent_f")
def _build_tent_f(params, context):
    i = int_param(params, 0, "i", {0, 1, 2})

    def f(pts):
        x = pts[:, 0]
        if np.any(x < 0) or np.any(x > 1):
            raise MapError("tent_f: x outside [0, 1]")
        return np.column_stack([tent_contraction(i, x), np.zeros(len(x))])

    return f


# --------------------------------------------------------------------------
# shark teeth


@dataclass(frozen=True, eq=False)
class SharkTeethSpace:
    rows: int
    samples_per_row: int
    cloud: PointCloud
    curves: dict[str, Polyline] = field(repr=False)


def row_kinks(k: int) -> np.ndarray:
    n = row_index(k)
    return np.arange(2 ** (n + 1) + 1) / 2.0 ** (n + 1)


def row_curve(k: int, t: np.ndarray | None = None) -> Polyline:
    t = row_kinks(k) if t is None else t
    return Polyline(np.column_stack([t, scaled_wave(row_index(k), t) / k]))


def build_shark_teeth(K: int, samples_per_row: int = 1025) -> SharkTeethSpace:
    if K < 1:
        raise ValueError("need at least one row")
    if samples_per_row < 2:
        raise ValueError("need at least two samples per row")
    grid = np.linspace(0.0, 1.0, samples_per_row)
    curves = {"bone": Polyline(np.column_stack([grid, np.zeros_like(grid)]))}
    for k in range(1, K + 1):
        t = np.union1d(grid, row_kinks(k))
        curves[f"M_{k}"] = row_curve(k, t)
    res = max(float(c.segment_lengths().max()) for c in curves.values())
    pts = np.concatenate([c.vertices for c in curves.values()])
    labels = tuple(name for name, c in curves.items() for _ in range(len(c.vertices)))
    return SharkTeethSpace(K, samples_per_row, PointCloud(pts, labels, res), curves)


def shark_teeth_loop(K: int) -> Polyline:
    """Closed walk from (0,0) covering the bone and rows 1..K, alternating direction."""
    paths = [np.array([[0.0, 0.0], [1.0, 0.0]])] + [row_curve(k).vertices for k in range(1, K + 1)]
    walk = [paths[0]]
    for p, v in enumerate(paths[1:], start=1):
        walk.append((v[::-1] if p % 2 else v)[1:])
    if K % 2 == 0:
        walk.append(paths[0][::-1][1:])
    return Polyline(np.concatenate(walk))


# --------------------------------------------------------------------------
# free arcs


@dataclass(frozen=True, eq=False)
class FreeArcSpace:
    """P = P1 u L u P2 with L a free arc.

    ``sides[j-1]`` describes P_j: ``None`` (empty), a single point
    (degenerate side) or a closed polyline traversed by rho_j.
    """

    cloud: PointCloud
    arc: Polyline
    sides: tuple
    arc_t: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_cum", self.arc.cumulative_lengths())
        object.__setattr__(self, "_len", self.arc.length)
        object.__setattr__(self, "_on_tol", self.cloud.resolution / 10.0)

    @property
    def resolution(self) -> float:
        return self.cloud.resolution

    @property
    def arc_samples(self) -> np.ndarray:
        return self.arc.point_at(self.arc_t * self.arc.length)

    def rho(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.arc.point_at(t * self._len).reshape(-1, 2)

    def rho_side(self, j: int, t) -> np.ndarray:
        side = self.sides[j - 1]
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if side is None:
            raise FreeArcError(f"side {j} is empty")
        if isinstance(side, Polyline):
            return side.point_at(t * side.length)
        return np.tile(np.asarray(side, dtype=float), (len(t), 1))

    def invert(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(on_arc mask, arc parameter in [0, 1] of the nearest point of L)."""
        d, s = _project_to_polyline(pts, self.arc.vertices, self._cum)
        return d <= self._on_tol, s / self._len

    def nonempty_sides(self) -> list[int]:
        return [j for j in (1, 2) if self.sides[j - 1] is not None]

    def side_cloud(self, j: int) -> PointCloud:
        return self.cloud.with_label(lambda s: s == f"P{j}")

    def arc_cloud(self) -> PointCloud:
        return self.cloud.with_label(lambda s: s == "L")


def _project_to_polyline(pts: np.ndarray, verts: np.ndarray, cum: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distance to the polyline and arc length of the nearest foot point."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if len(verts) == 2:
        a, ab = verts[0], verts[1] - verts[0]
        ln2 = float(ab @ ab)
        t = np.clip(((pts - a) @ ab) / ln2, 0.0, 1.0)
        fx = a[0] + t * ab[0]
        fy = a[1] + t * ab[1]
        return np.hypot(pts[:, 0] - fx, pts[:, 1] - fy), t * math.sqrt(ln2)
    a = verts[:-1]
    ab = verts[1:] - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    seg_len = np.sqrt(ab2)
    dist = np.full(len(pts), np.inf)
    arc_s = np.zeros(len(pts))
    step = max(1, (1 << 20) // max(1, len(a)))
    for lo in range(0, len(pts), step):
        p = pts[lo : lo + step, None, :]
        t = np.clip(np.einsum("pij,ij->pi", p - a[None], ab) / ab2[None], 0.0, 1.0)
        fx = a[None, :, 0] + t * ab[None, :, 0]
        fy = a[None, :, 1] + t * ab[None, :, 1]
        d = np.hypot(p[..., 0] - fx, p[..., 1] - fy)
        k = d.argmin(axis=1)
        rows = np.arange(len(k))
        dist[lo : lo + step] = d[rows, k]
        arc_s[lo : lo + step] = cum[k] + t[rows, k] * seg_len[k]
    return dist, arc_s


def _distance_to_polyline(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(verts, axis=0).T))])
    return _project_to_polyline(pts, verts, cum)[0]


def _parse_side(side):
    if side is None:
        return None
    v = as_array(side)
    if len(v) == 0:
        return None
    if len(v) == 1:
        return (float(v[0, 0]), float(v[0, 1]))
    if not np.allclose(v[0], v[-1], rtol=0.0, atol=1e-12):
        raise FreeArcError("a side polyline must be closed (rho_j(0) = rho_j(1))")
    return Polyline(v)


def free_arc_space(arc, sides, resolution: float) -> FreeArcSpace:
    """Sample P = P1 u L u P2 at ``resolution`` and run the numeric free-arc test."""
    arc = arc if isinstance(arc, Polyline) else Polyline(as_array(arc))
    sides = list(sides) + [None] * (2 - len(sides))
    if len(sides) != 2:
        raise FreeArcError("at most two sides")
    sides = tuple(_parse_side(s) for s in sides)
    if not LineString(arc.vertices).is_simple:
        raise FreeArcError("L is not a free arc at this resolution: the arc self-intersects")

    arc_pts = arc.resample(resolution)
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(arc_pts, axis=0).T))])
    arc_t = cum / cum[-1]
    arc_t[-1] = 1.0
    parts = [arc_pts]
    labels = ["L"] * len(arc_pts)
    for j, side in enumerate(sides, start=1):
        if side is None:
            continue
        sp = side.resample(resolution) if isinstance(side, Polyline) else np.array([side])
        parts.append(sp)
        labels += [f"P{j}"] * len(sp)
    cloud = PointCloud(np.concatenate(parts), tuple(labels), resolution, dedup=False)
    P = FreeArcSpace(cloud, arc, sides, arc_t)
    _check_free_arc(P)
    return P


def _check_free_arc(P: FreeArcSpace) -> None:
    res = P.resolution
    ends = {1: P.rho(0.0)[0], 2: P.rho(1.0)[0]}
    # parameter slack: two samples' worth of arc length
    slack = 2.0 * res / P.arc.length
    for j in P.nonempty_sides():
        side = P.sides[j - 1]
        pts = side.resample(res) if isinstance(side, Polyline) else np.array([side])
        near = _distance_to_polyline(pts, P.arc.vertices) <= res
        if not near.any():
            raise FreeArcError(f"L is not a free arc at this resolution: side {j} does not meet L")
        _, t = P.invert(pts[near])
        target = 0.0 if j == 1 else 1.0
        if np.any(np.abs(t - target) > slack):
            raise FreeArcError(
                f"L is not a free arc at this resolution: side {j} meets L away from rho({target:g})"
            )
        if np.hypot(*(pts[near] - ends[j]).T).min() > res:
            raise FreeArcError(f"L is not a free arc at this resolution: side {j} misses its endpoint")


def free_arc_from_json(text: str, resolution: float) -> FreeArcSpace:
    doc = json.loads(text)
    return free_arc_space(doc["arc"], doc.get("sides", []), resolution)


# arc length of the worked-instance arc L and of the loop around the teeth;
# F-words then shrink by exactly (2/3)^m and G-words never exceed that
WORKED_ARC_LENGTH = 2.0
WORKED_LOOP_LENGTH = 4.0 / 3.0


@functools.lru_cache(maxsize=8)
def worked_instance(rows: int = 8, resolution: float = 1e-3) -> FreeArcSpace:
    """Segment L from (-2, 0) to (0, 0) glued to a scaled shark teeth at the origin.

    P1 is the degenerate side {rho(0)}; P2 is the shark teeth with ``rows``
    rows, scaled so its covering loop has length 4/3.
    """
    loop = shark_teeth_loop(rows)
    scale = WORKED_LOOP_LENGTH / loop.length
    loop = Polyline(loop.vertices * scale)
    arc = Polyline(np.array([[-WORKED_ARC_LENGTH, 0.0], [0.0, 0.0]]))
    return free_arc_space(arc, [[(-WORKED_ARC_LENGTH, 0.0)], loop.vertices], resolution)


def _instance(params, context) -> FreeArcSpace:
    if context is not None:
        return context
    rows = int_param(params, 1, "rows")
    res = float(params[2]) if len(params) > 2 else 1e-3
    return worked_instance(rows, res)


@register_map("sharkteeth_F")
def _build_F(params, context):
    i = int_param(params, 0, "i", {0, 1, 2})
    P = _instance(params, context)
    const = P.rho(i / 3.0)[0]

    def F(pts):
        on, t = P.invert(pts)
        out = np.tile(const, (len(pts), 1))
        if on.any():
            out[on] = P.rho(tent_contraction(i, t[on]))
        return out

    return F


@register_map("sharkteeth_G")
def _build_G(params, context):
    j = int_param(params, 0, "j", {1, 2})
    P = _instance(params, context)
    if P.sides[j - 1] is None:
        raise MapError(f"side {j} is empty; G_{j} is omitted")
    const = P.rho_side(j, 0.0)[0]

    def G(pts):
        on, t = P.invert(pts)
        out = np.tile(const, (len(pts), 1))
        if on.any():
            out[on] = P.rho_side(j, t[on])
        return out

    return G


@dataclass(frozen=True, eq=False)
class FractalSystem:
    maps: IfsSystem
    space: FreeArcSpace
    g_indices: tuple[int, ...]

    @property
    def f_indices(self) -> tuple[int, ...]:
        return (0, 1, 2)


def build_free_arc_system(P: FreeArcSpace, params: tuple = ()) -> FractalSystem:
    """{F_0, F_1, F_2} plus G_j for every nonempty side, as a topological IFS.

    ``params`` (rows, resolution) are recorded in the map specs so the system
    serializes; pass them when ``P`` is a :func:`worked_instance`.
    """
    _check_free_arc(P)
    maps = [MapSpec.named("sharkteeth_F", i, *params, claimed_lip=2.0 / 3.0, context=P) for i in range(3)]
    gs = []
    for j in P.nonempty_sides():
        gs.append(len(maps))
        maps.append(MapSpec.named("sharkteeth_G", j, *params, context=P))
    return FractalSystem(IfsSystem(tuple(maps), "topological"), P, tuple(gs))


def worked_system(rows: int = 8, resolution: float = 1e-3) -> FractalSystem:
    return build_free_arc_system(worked_instance(rows, resolution), (rows, resolution))


def diameter_bound(m: int) -> float:
    return (2.0 / 3.0) ** m
