"""The snake: an arc of infinite length built from circular arcs O_n and radial segments I_n.

O_n is the circle of radius 1/n over angles [pi/2, 2*pi]; I_n joins radius
1/(n+1) to 1/n along the ray at angle (n mod 2) * pi/2. The weak contraction
``f`` keeps the angle and squeezes the radius with :func:`radial_profile`,
sending O_n u I_n onto O_{n+2} u I_{n+2}. Maps ``g_1 .. g_m`` cover the first
four pieces K = O_1 u I_1 u O_2 u I_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import IfsSystem, MapError, MapSpec, check_weak_contraction, int_param, register_map
from .geometry import (
    TWO_PI,
    GeometryError,
    PointCloud,
    PolarPoint,
    Polyline,
    from_polar_arrays,
    polyline_length,
    to_polar_arrays,
)

HALF_PI = 0.5 * math.pi
# sampled Lipschitz ceiling for a cover map to count as a contraction
COVER_LIP_CEILING = 0.95
# radii this far above 1 are rounding noise on O_1
_R_SLACK = 1e-9


class SnakeDomainError(ValueError):
    pass


# --------------------------------------------------------------------------
# radial profile


def _branch(r: np.ndarray) -> np.ndarray:
    """Index n with r in [1/(n+1), 1/n]; the larger n wins at shared endpoints."""
    n = np.floor(1.0 / r)
    n = np.maximum(n, 1.0)
    n = np.where(r > 1.0 / n, n - 1.0, n)
    n = np.where(r < 1.0 / (n + 1.0), n + 1.0, n)
    n = np.where(r == 1.0 / (n + 1.0), n + 1.0, n)
    return np.maximum(n, 1.0)


def radial_profile_array(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > 1.0 + _R_SLACK) or not np.all(np.isfinite(r)):
        raise SnakeDomainError("radial_profile is defined on [0, 1]")
    r = np.minimum(r, 1.0)
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    n = _branch(rp)
    out[pos] = (rp * n * (n + 1.0) + 2.0) / ((n + 2.0) * (n + 3.0))
    return out


def radial_profile(r: float) -> float:
    if not (0.0 <= r <= 1.0):
        raise SnakeDomainError(f"r={r} outside [0, 1]")
    return float(radial_profile_array(np.array([r]))[0])


def radial_branch_value(n: int, r: float) -> float:
    """The n-th branch formula evaluated at r, without branch selection."""
    return (r * n * (n + 1) + 2) / ((n + 2) * (n + 3))


# --------------------------------------------------------------------------
# the space


def arc_angles(n: int) -> tuple[float, float]:
    """(start, end) angle of O_n in arc order from the outer endpoint (1, 0)."""
    return (TWO_PI, HALF_PI) if n % 2 else (HALF_PI, TWO_PI)


def segment_angle(n: int) -> float:
    return (n % 2) * HALF_PI


def _polar_exact(r, alpha) -> np.ndarray:
    pts = from_polar_arrays(r, alpha)
    # pin the axis directions so neighbouring pieces share exact junction points
    a = np.broadcast_to(np.asarray(alpha, dtype=float), pts[:, 0].shape)
    rr = np.broadcast_to(np.asarray(r, dtype=float), pts[:, 0].shape)
    on_x = (a == 0.0) | (a == TWO_PI)
    on_y = a == HALF_PI
    pts[on_x, 0] = rr[on_x]
    pts[on_x, 1] = 0.0
    pts[on_y, 0] = 0.0
    pts[on_y, 1] = rr[on_y]
    return pts


def arc_piece(n: int, angular_step: float) -> Polyline:
    a0, a1 = arc_angles(n)
    k = max(1, math.ceil((1.5 * math.pi) / angular_step))
    alpha = np.linspace(a0, a1, k + 1)
    alpha[0], alpha[-1] = a0, a1
    return Polyline(_polar_exact(np.full(k + 1, 1.0 / n), alpha))


def segment_piece(n: int, radial_step: float) -> Polyline:
    r0, r1 = 1.0 / n, 1.0 / (n + 1)
    k = max(1, math.ceil((r0 - r1) / radial_step))
    r = np.linspace(r0, r1, k + 1)
    r[0], r[-1] = r0, r1
    return Polyline(_polar_exact(r, np.full(k + 1, segment_angle(n))))


@dataclass(frozen=True, eq=False)
class SnakeSpace:
    depth: int
    cloud: PointCloud
    angular_step: float
    radial_step: float
    pieces: dict[str, Polyline] = field(repr=False)

    @property
    def resolution(self) -> float:
        return self.cloud.resolution

    def piece_cloud(self, *names: str) -> PointCloud:
        pts = np.concatenate([self.pieces[n].vertices for n in names])
        labels = tuple(n for n in names for _ in range(len(self.pieces[n].vertices)))
        return PointCloud(pts, labels, self.resolution)


def build_snake(N: int, angular_step: float = 1e-3, radial_step: float = 1e-3) -> SnakeSpace:
    if N < 1:
        raise ValueError(f"depth must be at least 1, got {N}")
    if not (angular_step > 0 and radial_step > 0):
        raise ValueError("sampling steps must be positive")
    pieces: dict[str, Polyline] = {}
    for n in range(1, N + 1):
        pieces[f"O_{n}"] = arc_piece(n, angular_step)
        pieces[f"I_{n}"] = segment_piece(n, radial_step)
    pts = [p.vertices for p in pieces.values()] + [np.zeros((1, 2))]
    labels = [name for name, p in pieces.items() for _ in range(len(p.vertices))] + ["origin"]
    res = max(angular_step * 1.0, radial_step)
    cloud = PointCloud(np.concatenate(pts), tuple(labels), res)
    return SnakeSpace(N, cloud, angular_step, radial_step, pieces)


def in_snake(p: PolarPoint, tol: float = 1e-9) -> bool:
    r, a = p.r, p.alpha
    if r <= tol:
        return True
    if r > 1.0 + tol:
        return False
    n0 = max(1, int(math.floor(1.0 / r)))
    for n in range(max(1, n0 - 1), n0 + 2):
        # arc O_n
        if abs(r - 1.0 / n) <= tol and (a >= HALF_PI - tol / r or a <= tol / r or a >= TWO_PI - tol / r):
            return True
        # segment I_n
        if 1.0 / (n + 1) - tol <= r <= 1.0 / n + tol:
            beta = segment_angle(n)
            da = min(abs(a - beta), TWO_PI - abs(a - beta))
            if r * da <= tol:
                return True
    return False


def snake_weak_map(p: PolarPoint, tol: float = 1e-9) -> PolarPoint:
    if not in_snake(p, tol):
        raise SnakeDomainError(f"{p} is not on the snake")
    return PolarPoint(radial_profile(min(p.r, 1.0)), p.alpha)


def shift_label(label: str) -> str:
    """Label of the piece that f maps ``label`` onto (O_n -> O_{n+2})."""
    if label == "origin":
        return label
    kind, _, n = label.partition("_")
    if kind not in ("O", "I") or not n.isdigit():
        raise ValueError(f"not a snake piece label: {label!r}")
    return f"{kind}_{int(n) + 2}"


def _snake_f_points(pts: np.ndarray) -> np.ndarray:
    r = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(r > 1.0 + _R_SLACK):
        raise MapError("snake_f: point outside the unit disk")
    fr = radial_profile_array(np.minimum(r, 1.0))
    scale = np.divide(fr, r, out=np.zeros_like(r), where=r > 0)
    return pts * scale[:, None]


@register_map("snake_f")
def _build_snake_f(params, context):
    if params:
        raise MapError("snake_f takes no parameters")
    return _snake_f_points


def snake_f() -> MapSpec:
    return MapSpec.named("snake_f")


def image_cloud(S: SnakeSpace, *names: str) -> PointCloud:
    """f applied to the samples of the named pieces, relabelled by the shift law."""
    src = S.piece_cloud(*names)
    img = _snake_f_points(src.points)
    return PointCloud(img, tuple(shift_label(s) for s in src.labels), src.resolution)


# --------------------------------------------------------------------------
# cover maps g_1 .. g_m on K = O_1 u I_1 u O_2 u I_2

# arc-length breakpoints of K walked from (1, 0)
_K_BREAKS = np.array(
    [0.0, 1.5 * math.pi, 1.5 * math.pi + 0.5, 1.5 * math.pi + 0.5 + 0.75 * math.pi]
)
K_LENGTH = float(_K_BREAKS[-1] + 1.0 / 6.0)
JUNCTION = np.array([1.0 / 3.0, 0.0])


def k_point(s) -> np.ndarray:
    """Point of K at arc-length position s (0 at (1, 0), K_LENGTH at (1/3, 0))."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, K_LENGTH)
    c1, c2, c3 = _K_BREAKS[1:]
    r = np.empty_like(s)
    a = np.empty_like(s)
    m0 = s <= c1
    m1 = (s > c1) & (s <= c2)
    m2 = (s > c2) & (s <= c3)
    m3 = s > c3
    r[m0], a[m0] = 1.0, TWO_PI - s[m0]
    r[m1], a[m1] = 1.0 - (s[m1] - c1), HALF_PI
    r[m2], a[m2] = 0.5, HALF_PI + 2.0 * (s[m2] - c2)
    r[m3], a[m3] = 0.5 - (s[m3] - c3), 0.0
    return _polar_exact(r, a)


def _arc_projection(pts, radius, s0, direction):
    """Distance to O (radius) and arc position; direction=-1 walks angles downward."""
    r, a = to_polar_arrays(pts)
    a = np.where(a < 0.25 * math.pi, a + TWO_PI, a)
    ac = np.clip(a, HALF_PI, TWO_PI)
    foot = from_polar_arrays(np.full(len(pts), radius), ac)
    d = np.hypot(pts[:, 0] - foot[:, 0], pts[:, 1] - foot[:, 1])
    if direction < 0:
        s = s0 + radius * (TWO_PI - ac)
    else:
        s = s0 + radius * (ac - HALF_PI)
    return d, s


def _segment_projection(pts, angle, r_from, r_to, s0):
    u = np.array([math.cos(angle), math.sin(angle)])
    if angle == 0.0:
        u = np.array([1.0, 0.0])
    elif angle == HALF_PI:
        u = np.array([0.0, 1.0])
    t = np.clip(pts @ u, min(r_from, r_to), max(r_from, r_to))
    foot = t[:, None] * u
    d = np.hypot(pts[:, 0] - foot[:, 0], pts[:, 1] - foot[:, 1])
    return d, s0 + np.abs(r_from - t)


def k_position(pts: np.ndarray) -> np.ndarray:
    """Arc position along K after retracting the rest of the snake to the junction (1/3, 0)."""
    pts = np.asarray(pts, dtype=float)
    r = np.hypot(pts[:, 0], pts[:, 1])
    c1, c2, c3 = _K_BREAKS[1:]
    cands = [
        _arc_projection(pts, 1.0, 0.0, -1),
        _segment_projection(pts, HALF_PI, 1.0, 0.5, c1),
        _arc_projection(pts, 0.5, c2, +1),
        _segment_projection(pts, 0.0, 0.5, 1.0 / 3.0, c3),
    ]
    d = np.stack([c[0] for c in cands])
    s = np.stack([c[1] for c in cands])
    pick = np.argmin(d, axis=0)
    out = s[pick, np.arange(len(pts))]
    out[r <= 1.0 / 3.0 + 1e-12] = K_LENGTH
    return out


def _cover_fn(i: int, m: int):
    offset = (i - 1) * K_LENGTH / m

    def g(pts):
        return k_point(offset + k_position(pts) / m)

    return g


@register_map("snake_cover")
def _build_snake_cover(params, context):
    m = int_param(params, 1, "m")
    if m < 1:
        raise MapError("snake_cover needs m >= 1")
    i = int_param(params, 0, "i", range(1, m + 1))
    return _cover_fn(i, m)


def cover_map(i: int, m: int) -> MapSpec:
    return MapSpec.named("snake_cover", i, m)


class CoverCountError(ValueError):
    pass


def _cover_sup(S: SnakeSpace, m: int, pair_budget: int, rng_seed: int) -> float:
    return max(
        check_weak_contraction(cover_map(i, m), S.cloud, pair_budget, rng_seed).sup_ratio
        for i in range(1, m + 1)
    )


def minimal_cover_count(S: SnakeSpace, pair_budget: int = 20_000, rng_seed: int = 0, m_cap: int = 1024) -> int:
    """Doubling search for the first m whose cover maps all sample below the ceiling."""
    m = 1
    while m <= m_cap:
        if _cover_sup(S, m, pair_budget, rng_seed) < COVER_LIP_CEILING:
            return m
        m *= 2
    raise CoverCountError(f"no admissible m up to {m_cap}")


def build_cover_maps(S: SnakeSpace, m: int, pair_budget: int = 20_000, rng_seed: int = 0) -> list[MapSpec]:
    """g_1 .. g_m: retract onto K, then squeeze K affinely (in arc length) onto its i-th m-th."""
    if m < 1:
        raise ValueError("m must be at least 1")
    maps = [cover_map(i, m) for i in range(1, m + 1)]
    worst = _cover_sup(S, m, pair_budget, rng_seed)
    if worst >= COVER_LIP_CEILING:
        need = minimal_cover_count(S, pair_budget, rng_seed)
        raise CoverCountError(
            f"m={m} too small: sampled Lipschitz ratio {worst:.4f} >= {COVER_LIP_CEILING}; "
            f"doubling search admits m={need}"
        )
    return maps


def snake_system(S: SnakeSpace, m: int | None = None, pair_budget: int = 20_000, rng_seed: int = 0) -> IfsSystem:
    if m is None:
        m = minimal_cover_count(S, pair_budget, rng_seed)
    return IfsSystem((snake_f(), *build_cover_maps(S, m, pair_budget, rng_seed)), "weak")


def k_cloud(S: SnakeSpace) -> PointCloud:
    return S.piece_cloud("O_1", "I_1", "O_2", "I_2")


# --------------------------------------------------------------------------
# length diagnostics


@dataclass(frozen=True)
class SandersReport:
    """Length evidence for the infinite-length endpoint hypothesis.

    ``finite_part_lengths[n-1]`` is the polyline length of O_1 I_1 ... O_n I_n;
    ``tail_lower_bounds[n-1]`` bounds from below the length still to go from
    O_{n+1} down to O_N. Both grow without bound in N; every finite subarc
    away from the origin has finite length.
    """

    depth: int
    finite_part_lengths: tuple[float, ...]
    tail_lower_bounds: tuple[float, ...]
    arc_length_errors: tuple[float, ...]
    segment_length_errors: tuple[float, ...]
    bound: float
    divergence_witness: tuple[int, float] | None


def arc_length_closed_form(n: int) -> float:
    return 1.5 * math.pi / n


def segment_length_closed_form(n: int) -> float:
    return 1.0 / (n * (n + 1))


def sanders_report(N: int, bound: float = 24.0, angular_step: float = 1e-3, radial_step: float = 1e-3) -> SandersReport:
    if N < 2:
        raise ValueError("sanders_report needs N >= 2")
    cum, arc_err, seg_err = [], [], []
    total = 0.0
    witness = None
    for n in range(1, N + 1):
        lo = polyline_length(arc_piece(n, angular_step))
        li = polyline_length(segment_piece(n, radial_step))
        arc_err.append(abs(lo - arc_length_closed_form(n)))
        seg_err.append(abs(li - segment_length_closed_form(n)))
        total += lo + li
        cum.append(total)
        if witness is None and total > bound:
            witness = (n, total)
    tails = []
    for n in range(1, N + 1):
        tails.append(math.fsum(arc_length_closed_form(k) for k in range(n + 1, N + 1)))
    if any(b <= a for a, b in zip(cum, cum[1:])):
        raise GeometryError("cumulative snake length failed to increase")
    return SandersReport(N, tuple(cum), tuple(tails), tuple(arc_err), tuple(seg_err), bound, witness)
