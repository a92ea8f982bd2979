"""The dendrite P of arcs L_n with length 2^n, and its straightened copy D.

L_n runs from the origin to rho_n = polar(2^-n, 2^-n) as a radial zigzag
inside the polar box {r < 2^-n, |alpha - 2^-n| < 2^-n / 4}. D replaces every
L_n by the straight segment J_n of length 2^-n at angle 2^-n; it is the
attractor of h(r, a) = (r/2, a/2), g1(r, a) = (r/2, 1/2), g2(r, a) = (1/2 - r/2, 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from shapely.geometry import LineString

from .engine import IfsSystem, MapError, MapSpec, register_map
from .geometry import PointCloud, Polyline, from_polar_arrays, polyline_length, to_polar_arrays

MAX_DEPTH = 10


class DendriteError(ValueError):
    pass


def leg_count(n: int) -> int:
    """Legs of the zigzag L_n: 4^n + 1 (odd, so the walk leaves the origin and ends outward)."""
    return 4**n + 1


def sector(n: int) -> tuple[float, float, float]:
    """(radius bound, angle low, angle high) of the open polar box holding L_n."""
    R = 2.0**-n
    return R, R - R / 4.0, R + R / 4.0


def _zigzag_vertices(n: int, a: float) -> np.ndarray:
    R, lo, _ = sector(n)
    K = leg_count(n)
    b = inner_radius(n)
    j = np.arange(1, K + 1)
    theta = lo + (R / 4.0) * j / K
    r = np.where(j % 2 == 1, a, b)
    r[-1] = R
    theta[-1] = R
    pts = from_polar_arrays(r, theta)
    return np.vstack([[0.0, 0.0], pts])


def inner_radius(n: int) -> float:
    # small enough that the length budget is feasible with outer radius < 2^-n
    return 2.0**-n / (2.0 * 4**n)


def _model_length(n: int, a: float) -> float:
    R, _, _ = sector(n)
    K = leg_count(n)
    b = inner_radius(n)
    dth = (R / 4.0) / K
    s2 = math.sin(dth / 2.0) ** 2
    leg = math.sqrt((a - b) ** 2 + 4.0 * a * b * s2)
    last = math.sqrt((R - b) ** 2 + 4.0 * R * b * s2)
    return a + (K - 2) * leg + last


def zigzag_arc(n: int) -> Polyline:
    """L_n as a polyline of exact length 2^n (to rounding)."""
    R, _, _ = sector(n)
    target = 2.0**n
    b = inner_radius(n)
    hi = R * (1.0 - 1e-15)
    if _model_length(n, hi) < target:
        raise DendriteError(f"length 2^{n} does not fit inside radius 2^-{n} with {leg_count(n)} legs")
    a = brentq(lambda x: _model_length(n, x) - target, b * 1.000001, hi, xtol=1e-300, rtol=1e-15, maxiter=200)
    # polish against the realised float geometry
    for _ in range(3):
        line = Polyline(_zigzag_vertices(n, a))
        err = target - polyline_length(line)
        if abs(err) < 1e-12:
            break
        a = min(a + err / (leg_count(n) - 1), hi)
    return Polyline(_zigzag_vertices(n, a))


@dataclass(frozen=True, eq=False)
class DendriteSpace:
    depth: int
    arcs: tuple[Polyline, ...]
    cloud: PointCloud
    arc_samples: tuple[np.ndarray, ...] = field(repr=False)
    arc_fractions: tuple[np.ndarray, ...] = field(repr=False)


def _sample_arc(line: Polyline, count: int) -> tuple[np.ndarray, np.ndarray]:
    cum = line.cumulative_lengths()
    s = np.union1d(cum, np.linspace(0.0, cum[-1], max(count, 2)))
    return line.point_at(s), s / cum[-1]


def build_dendrite(N: int, samples_per_arc: int = 2048) -> DendriteSpace:
    if not 1 <= N <= MAX_DEPTH:
        raise ValueError(f"depth must be in 1..{MAX_DEPTH} (leg count grows like 4^n)")
    arcs, samples, fracs, labels = [], [], [], []
    for n in range(1, N + 1):
        line = zigzag_arc(n)
        pts, fr = _sample_arc(line, samples_per_arc)
        arcs.append(line)
        samples.append(pts)
        fracs.append(fr)
        labels += [f"L_{n}"] * len(pts)
    res = max(float(np.hypot(*np.diff(p, axis=0).T).max()) for p in samples)
    cloud = PointCloud(np.concatenate(samples), tuple(labels), res)
    return DendriteSpace(N, tuple(arcs), cloud, tuple(samples), tuple(fracs))


def containment_violations(n: int, pts: np.ndarray) -> int:
    """Count points of L_n (endpoints excluded) outside its open polar box."""
    R, lo, hi = sector(n)
    pts = np.asarray(pts, dtype=float)
    r, a = to_polar_arrays(pts)
    end = np.array(from_polar_arrays([R], [R]))[0]
    is_end = (r == 0.0) | (np.hypot(pts[:, 0] - end[0], pts[:, 1] - end[1]) == 0.0)
    bad = ~((r < R) & (a > lo) & (a < hi))
    return int((bad & ~is_end).sum())


def is_simple_arc(line: Polyline) -> bool:
    """Linear-time certificate for a polyline that starts at the origin.

    If the polar angles of the remaining vertices strictly increase over a span
    below pi, each leg sweeps its own angular interval, so non-adjacent legs
    can only share the origin, which no later leg touches.
    """
    v = line.vertices
    if v[0, 0] != 0.0 or v[0, 1] != 0.0:
        return shapely_is_simple(line)
    r, a = to_polar_arrays(v[1:])
    if np.any(r <= 0.0):
        return False
    a = np.unwrap(a)
    return bool(np.all(np.diff(a) > 0.0) and a[-1] - a[0] < math.pi)


def shapely_is_simple(line: Polyline) -> bool:
    return bool(LineString(line.vertices).is_simple)


def arcs_meet_only_at_origin(arcs) -> bool:
    """True when every arc starts at the origin and the angular ranges of the
    remaining vertices are pairwise disjoint (each leg stays in its arc's range)."""
    spans = []
    for line in arcs:
        v = line.vertices
        if v[0, 0] != 0.0 or v[0, 1] != 0.0:
            return False
        _, a = to_polar_arrays(v[1:])
        spans.append((float(a.min()), float(a.max())))
    spans.sort()
    return all(spans[i][1] < spans[i + 1][0] for i in range(len(spans) - 1))


# --------------------------------------------------------------------------
# straightened copy


@dataclass(frozen=True, eq=False)
class StraightDendrite:
    depth: int
    cloud: PointCloud
    angles: tuple[float, ...]
    lengths: tuple[float, ...]
    segments: tuple[np.ndarray, ...] = field(repr=False)
    correspondence: dict[int, np.ndarray] | None = field(default=None, repr=False)


def straighten_dendrite(N: int, samples_per_arc: int = 1025, dendrite: DendriteSpace | None = None) -> StraightDendrite:
    """Segments J_n = {polar(r, 2^-n) : 0 <= r <= 2^-n}.

    With ``dendrite`` given, also records for each L_n sample the index of the
    J_n sample at the same arc-length fraction.
    """
    if N < 1:
        raise ValueError("depth must be at least 1")
    if samples_per_arc < 2:
        raise ValueError("need at least two samples per segment")
    segs, labels = [], []
    angles = tuple(2.0**-n for n in range(1, N + 1))
    for n, ang in enumerate(angles, start=1):
        r = np.linspace(0.0, ang, samples_per_arc)
        segs.append(from_polar_arrays(r, np.full_like(r, ang)))
        labels += [f"J_{n}"] * samples_per_arc
    res = 0.5 / (samples_per_arc - 1)
    cloud = PointCloud(np.concatenate(segs), tuple(labels), res)
    corr = None
    if dendrite is not None:
        corr = {
            n: np.rint(dendrite.arc_fractions[n - 1] * (samples_per_arc - 1)).astype(np.int64)
            for n in range(1, min(N, dendrite.depth) + 1)
        }
    return StraightDendrite(N, cloud, angles, angles, tuple(segs), corr)


def _polar_map(fn):
    def apply(pts):
        r, a = to_polar_arrays(pts)
        nr, na = fn(r, a)
        return from_polar_arrays(nr, na)

    return apply


@register_map("dendrite_h")
def _build_h(params, context):
    if params:
        raise MapError("dendrite_h takes no parameters")
    return _polar_map(lambda r, a: (r / 2.0, a / 2.0))


@register_map("dendrite_g1")
def _build_g1(params, context):
    if params:
        raise MapError("dendrite_g1 takes no parameters")
    return _polar_map(lambda r, a: (r / 2.0, np.full_like(a, 0.5)))


@register_map("dendrite_g2")
def _build_g2(params, context):
    if params:
        raise MapError("dendrite_g2 takes no parameters")

    def fn(r, a):
        if np.any(r > 1.0):
            raise MapError("dendrite_g2: radius above 1")
        return 0.5 - r / 2.0, np.full_like(a, 0.5)

    return _polar_map(fn)


def dendrite_ifs() -> IfsSystem:
    return IfsSystem(
        (
            MapSpec.named("dendrite_h", claimed_lip=0.5),
            MapSpec.named("dendrite_g1", claimed_lip=0.5),
            MapSpec.named("dendrite_g2", claimed_lip=0.5),
        ),
        "strict",
    )
