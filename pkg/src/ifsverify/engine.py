"""Generic (weak) IFS machinery.

Maps act on (n, 2) coordinate arrays. Affine maps are built in; analytic maps
from the space modules register under a name (``snake_f``, ``dendrite_h``, ...)
and are looked up through :func:`register_map`.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .geometry import (
    GeometryError,
    Point2,
    PointCloud,
    _diameter_sq,
    as_array,
    farthest_point_indices,
    hausdorff_distance,
)
from .io_utils import fmt17

MapFn = Callable[[np.ndarray], np.ndarray]

WORD_BUDGET = 10**7
LIPSCHITZ_EXTREMES = 64
_PAIR_CHUNK = 1 << 16


class MapError(ValueError):
    pass


class CertificateBudgetError(ValueError):
    pass


# --------------------------------------------------------------------------
# map table

_NAMED: dict[str, Callable[[tuple, Any], MapFn]] = {}
_BUILTINS_LOADED = False


def register_map(name: str):
    """Decorator: ``builder(params, context) -> fn`` becomes the named map ``name``."""

    def deco(builder):
        _NAMED[name] = builder
        return builder

    return deco


def _load_builtin_maps() -> None:
    global _BUILTINS_LOADED
    if not _BUILTINS_LOADED:
        _BUILTINS_LOADED = True
        from . import dendrite, sharkteeth, snake  # noqa: F401  (registration side effects)


def registered_maps() -> list[str]:
    _load_builtin_maps()
    return sorted(_NAMED)


def int_param(params: tuple, k: int, name: str, allowed=None) -> int:
    try:
        v = params[k]
    except IndexError:
        raise MapError(f"missing parameter {name}") from None
    if float(v) != int(v):
        raise MapError(f"parameter {name} must be an integer, got {v}")
    v = int(v)
    if allowed is not None and v not in allowed:
        raise MapError(f"parameter {name}={v} outside {sorted(allowed)}")
    return v


@dataclass(frozen=True)
class MapSpec:
    """A self-map of the plane: affine ``x -> A x + b`` or a registered named map.

    ``context`` lets a named map close over a prebuilt object (for instance a
    custom free-arc space); it takes no part in equality or serialization.
    """

    kind: str
    matrix: tuple[tuple[float, float], tuple[float, float]] | None = None
    translation: tuple[float, float] | None = None
    name: str | None = None
    params: tuple[float, ...] = ()
    claimed_lip: float | None = None
    context: Any = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "affine":
            m = np.asarray(self.matrix, dtype=float)
            t = np.asarray(self.translation if self.translation is not None else (0.0, 0.0), dtype=float)
            if m.shape != (2, 2) or t.shape != (2,):
                raise MapError("affine map needs a 2x2 matrix and a 2-vector")
            if not (np.all(np.isfinite(m)) and np.all(np.isfinite(t))):
                raise MapError("affine map has non-finite entries")
            object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in m))
            object.__setattr__(self, "translation", (float(t[0]), float(t[1])))
        elif self.kind == "named":
            _load_builtin_maps()
            if self.name not in _NAMED:
                raise MapError(f"unknown map {self.name!r}")
            object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        else:
            raise MapError(f"unknown map kind {self.kind!r}")

    @classmethod
    def affine(cls, matrix, translation=(0.0, 0.0), claimed_lip=None) -> "MapSpec":
        return cls("affine", matrix=matrix, translation=translation, claimed_lip=claimed_lip)

    @classmethod
    def named(cls, name: str, *params, claimed_lip=None, context=None) -> "MapSpec":
        return cls("named", name=name, params=tuple(params), claimed_lip=claimed_lip, context=context)

    @property
    def fn(self) -> MapFn:
        cached = self.__dict__.get("_fn")
        if cached is None:
            cached = self._build()
            object.__setattr__(self, "_fn", cached)
        return cached

    def _build(self) -> MapFn:
        if self.kind == "affine":
            m = np.array(self.matrix)
            t = np.array(self.translation)
            return lambda pts: pts @ m.T + t
        return _NAMED[self.name](self.params, self.context)

    def label(self) -> str:
        if self.kind == "affine":
            return "affine"
        args = ",".join(fmt17(p) for p in self.params)
        return f"{self.name}({args})" if args else self.name

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "affine":
            d["matrix"] = [[fmt17(v) for v in row] for row in self.matrix]
            d["translation"] = [fmt17(v) for v in self.translation]
        else:
            d["name"] = self.name
            d["params"] = [fmt17(p) for p in self.params]
        if self.claimed_lip is not None:
            d["claimed_lip"] = fmt17(self.claimed_lip)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MapSpec":
        lip = d.get("claimed_lip")
        lip = None if lip is None else float(lip)
        if d.get("kind") == "affine":
            return cls.affine(
                [[float(v) for v in row] for row in d["matrix"]],
                [float(v) for v in d.get("translation", (0, 0))],
                claimed_lip=lip,
            )
        if d.get("kind") == "named":
            return cls.named(d["name"], *(float(p) for p in d.get("params", ())), claimed_lip=lip)
        raise MapError(f"unknown map kind {d.get('kind')!r}")


MODES = ("strict", "weak", "topological")


@dataclass(frozen=True)
class IfsSystem:
    maps: tuple[MapSpec, ...]
    mode: str = "weak"

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise MapError("an IFS needs at least one map")
        if self.mode not in MODES:
            raise MapError(f"mode must be one of {MODES}")
        if self.mode == "strict":
            bad = [i for i, f in enumerate(maps) if f.claimed_lip is None or not f.claimed_lip < 1]
            if bad:
                raise MapError(f"strict mode needs claimed_lip < 1; maps {bad} violate it")
        object.__setattr__(self, "maps", maps)

    def __len__(self):
        return len(self.maps)

    def to_json(self) -> str:
        return json.dumps({"mode": self.mode, "maps": [f.to_dict() for f in self.maps]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "IfsSystem":
        doc = json.loads(text)
        return cls(tuple(MapSpec.from_dict(m) for m in doc["maps"]), doc.get("mode", "weak"))


# --------------------------------------------------------------------------
# evaluation


def map_points(f: MapSpec, pts) -> np.ndarray:
    arr = as_array(pts)
    out = np.asarray(f.fn(arr), dtype=float)
    if out.shape != arr.shape:
        raise MapError(f"{f.label()} returned shape {out.shape} for input {arr.shape}")
    return out


def apply_map(f: MapSpec, p: Point2) -> Point2:
    q = map_points(f, np.array([[p.x, p.y]]))[0]
    return Point2(float(q[0]), float(q[1]))


def hutchinson(F: IfsSystem, A: PointCloud) -> PointCloud:
    """Union of the images of ``A``; labels carry the index of the map applied."""
    images = [map_points(f, A.points) for f in F.maps]
    labels = tuple(str(i) for i, img in enumerate(images) for _ in range(len(img)))
    return PointCloud(np.concatenate(images), labels, A.resolution)


@dataclass(frozen=True)
class AttractorResult:
    cloud: PointCloud
    iterations: int
    residual: float
    converged: bool
    residuals: tuple[float, ...] = ()


def iterate_attractor(
    F: IfsSystem, seed: PointCloud, tol: float, max_iter: int = 100, method: str = "grid"
) -> AttractorResult:
    """Apply the Hutchinson operator until successive iterates are within ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    A = seed
    history = []
    for k in range(1, max_iter + 1):
        B = hutchinson(F, A)
        step = hausdorff_distance(A, B, method)
        history.append(step)
        A = B
        if step <= tol:
            return AttractorResult(A, k, step, True, tuple(history))
    return AttractorResult(A, max_iter, history[-1], False, tuple(history))


def chaos_game(
    F: IfsSystem,
    n: int,
    burn_in: int,
    rng_seed: int,
    start=(0.0, 0.0),
    resolution: float = 1e-9,
) -> PointCloud:
    if n <= burn_in:
        raise ValueError(f"n={n} must exceed burn_in={burn_in}")
    rng = np.random.default_rng(rng_seed)
    choice = rng.integers(0, len(F.maps), size=n)
    fns = [f.fn for f in F.maps]
    p = np.array([start], dtype=float)
    out = np.empty((n, 2))
    for k in range(n):
        p = fns[choice[k]](p)
        out[k] = p[0]
    return PointCloud(out[burn_in:], None, resolution)


# --------------------------------------------------------------------------
# Lipschitz sampling


@dataclass(frozen=True)
class LipschitzReport:
    sup_ratio: float
    argmax_pair: tuple[Point2, Point2]
    pairs_sampled: int
    violations: np.ndarray  # (k, 2, 2): pairs (x, y) with d(f x, f y) >= d(x, y)

    @property
    def passed(self) -> bool:
        return len(self.violations) == 0

    @property
    def violation_count(self) -> int:
        return len(self.violations)


def _pair_chunks(n: int, budget: int, rng_seed: int):
    """Fixed-size chunks, each with its own child stream: results ignore worker count."""
    nchunks = -(-budget // _PAIR_CHUNK)
    seqs = np.random.SeedSequence(rng_seed).spawn(nchunks)
    for c, ss in enumerate(seqs):
        size = min(_PAIR_CHUNK, budget - c * _PAIR_CHUNK)
        yield size, ss


def _draw_pairs(n, size, ss):
    rng = np.random.default_rng(ss)
    i = rng.integers(0, n, size=size)
    j = (i + 1 + rng.integers(0, n - 1, size=size)) % n
    return i, j


def _ratios(pts, img, i, j):
    """Ratios for the pairs with d(x, y) > 0, plus the mask selecting them."""
    dx = pts[i] - pts[j]
    dy = img[i] - img[j]
    d = np.sqrt(dx[:, 0] * dx[:, 0] + dx[:, 1] * dx[:, 1])
    df = np.sqrt(dy[:, 0] * dy[:, 0] + dy[:, 1] * dy[:, 1])
    keep = d > 0
    return df[keep] / d[keep], keep


def estimate_lipschitz(
    f: MapSpec, domain: PointCloud, pair_budget: int = 10_000, rng_seed: int = 0, workers: int = 1
) -> LipschitzReport:
    """Sampled sup of d(f x, f y) / d(x, y).

    Samples ``pair_budget`` random distinct pairs plus every pair among the
    64 mutually farthest points of the domain.
    """
    pts = domain.points
    n = len(pts)
    if n < 2 or not np.any(pts != pts[0]):
        raise ValueError("all points identical: need at least two distinct points")
    if pair_budget < 1:
        raise ValueError("pair_budget must be at least 1")
    img = map_points(f, pts)

    ext = farthest_point_indices(pts, LIPSCHITZ_EXTREMES)
    ei, ej = np.triu_indices(len(ext), k=1)
    blocks = [(ext[ei], ext[ej])]

    chunks = list(_pair_chunks(n, pair_budget, rng_seed))
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks += list(pool.map(lambda c: _draw_pairs(n, *c), chunks))
    else:
        blocks += [_draw_pairs(n, *c) for c in chunks]

    i = np.concatenate([b[0] for b in blocks])
    j = np.concatenate([b[1] for b in blocks])
    # clouds built without dedup may repeat a point; such pairs carry no information
    ratio, keep = _ratios(pts, img, i, j)
    i, j = i[keep], j[keep]
    k = int(np.argmax(ratio))
    bad = ratio >= 1.0
    viol = np.stack([pts[i[bad]], pts[j[bad]]], axis=1) if bad.any() else np.empty((0, 2, 2))
    return LipschitzReport(
        sup_ratio=float(ratio[k]),
        argmax_pair=(Point2(*map(float, pts[i[k]])), Point2(*map(float, pts[j[k]]))),
        pairs_sampled=len(ratio),
        violations=viol,
    )


def check_weak_contraction(
    f: MapSpec, domain: PointCloud, pair_budget: int = 10_000, rng_seed: int = 0, workers: int = 1
) -> LipschitzReport:
    """Sampled evidence for d(f x, f y) < d(x, y); ``report.passed`` iff no sampled pair fails."""
    return estimate_lipschitz(f, domain, pair_budget, rng_seed, workers)


# --------------------------------------------------------------------------
# composition-diameter certificates


@dataclass(frozen=True)
class CoverCertificate:
    """Largest image diameter over all length-``m`` words.

    Words are listed outermost map first: ``(a, b, c)`` is ``F_a o F_b o F_c``.
    ``inner_*`` fields cover only words that use a tracked map anywhere except
    the outermost position.
    """

    m: int
    max_diameter: float
    argmax_word: tuple[int, ...]
    threshold: float
    words: int
    distinct_images: int
    inner_max_diameter: float | None = None
    inner_argmax_word: tuple[int, ...] | None = None

    @property
    def passed(self) -> bool:
        return self.max_diameter <= self.threshold


def _canon(pts: np.ndarray, tol: float) -> tuple[np.ndarray, bytes]:
    keys = np.floor(pts / tol).astype(np.int64)
    if len(pts) == 1:
        return pts, keys.tobytes()
    # cells fit in 31 bits per axis for any cloud this engine can hold
    flat = (keys[:, 0] << 32) + (keys[:, 1] + (1 << 31))
    uk, idx = np.unique(flat, return_index=True)
    return pts[idx], uk.tobytes()


def certify_composition_diameter(
    F: IfsSystem,
    X: PointCloud,
    m: int,
    threshold: float,
    track: Sequence[int] = (),
    budget: int = WORD_BUDGET,
) -> CoverCertificate:
    """Max over all words of length ``m`` of diam(w(X)), by memoized depth-first search.

    Every word is accounted for, but images that coincide after merging at
    ``X.resolution / 10`` share one subtree, so the work scales with the number
    of distinct images rather than ``len(F) ** m``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    k = len(F.maps)
    words = k**m
    if words > budget:
        raise CertificateBudgetError(
            f"{k}^{m} = {words} words exceeds the budget of {budget}; use a smaller m or fewer maps"
        )
    fns = [f.fn for f in F.maps]
    track = frozenset(track)
    first_track = min(track) if track else None
    tol = X.resolution / 10.0
    memo: dict = {}
    NEG = -1.0

    def best(pts, key, r, flagged):
        mk = (key, r, flagged)
        hit = memo.get(mk)
        if hit is not None:
            return hit
        if r == 0:
            d = _diameter_sq(pts)
            out = (d, (), d if flagged else NEG, ())
        elif len(pts) == 1:
            # a point stays a point: every continuation has diameter 0
            rest = (0,) * r
            if flagged:
                out = (0.0, rest, 0.0, rest)
            elif first_track is not None and r > 1:
                out = (0.0, rest, 0.0, (first_track,) + (0,) * (r - 1))
            else:
                out = (0.0, rest, NEG, ())
        else:
            top, top_w, itop, itop_w = NEG, (), NEG, ()
            for idx, fn in enumerate(fns):
                img, ikey = _canon(np.asarray(fn(pts), dtype=float), tol)
                fl = flagged or (idx in track and r > 1)
                d, w, di, wi = best(img, ikey, r - 1, fl)
                if d > top:
                    top, top_w = d, (idx,) + w
                if di > itop:
                    itop, itop_w = di, (idx,) + wi
            out = (top, top_w, itop, itop_w)
        memo[mk] = out
        return out

    pts, key = _canon(X.points, tol)
    d, w, di, wi = best(pts, key, m, False)
    # recursion builds application order (innermost first); report composition order
    return CoverCertificate(
        m=m,
        max_diameter=math.sqrt(d),
        argmax_word=tuple(reversed(w)),
        threshold=threshold,
        words=words,
        distinct_images=len({mk[0] for mk in memo}),
        inner_max_diameter=math.sqrt(di) if (track and di >= 0) else None,
        inner_argmax_word=tuple(reversed(wi)) if (track and di >= 0) else None,
    )


def min_word_length(F: IfsSystem, X: PointCloud, threshold: float, m_max: int) -> int | None:
    """Smallest m <= m_max whose certificate passes, or None."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    for m in range(m_max + 1):
        if certify_composition_diameter(F, X, m, threshold).passed:
            return m
    return None


def singular_values(matrix) -> np.ndarray:
    return np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)


__all__ = [
    "AttractorResult",
    "CertificateBudgetError",
    "CoverCertificate",
    "GeometryError",
    "IfsSystem",
    "LipschitzReport",
    "MapError",
    "MapSpec",
    "apply_map",
    "certify_composition_diameter",
    "chaos_game",
    "check_weak_contraction",
    "estimate_lipschitz",
    "hutchinson",
    "iterate_attractor",
    "map_points",
    "min_word_length",
    "register_map",
]
