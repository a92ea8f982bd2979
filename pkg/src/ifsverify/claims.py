"""Registered claim checks, grouped into suites, producing ClaimReport records."""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import dendrite, ordinals, sharkteeth, snake
from .engine import (
    IfsSystem,
    MapSpec,
    certify_composition_diameter,
    check_weak_contraction,
    estimate_lipschitz,
    hutchinson,
)
from .geometry import PointCloud, hausdorff_distance, polyline_length

SCHEMA_VERSION = 1
STATUSES = ("pass", "fail", "evidence-only")
SUITES = ("snake", "sharkteeth", "dendrite", "scattered")

DEFAULT_CONFIG: dict[str, Any] = {
    "seed": None,
    "snake": {"depth": 50, "angular_step": 1e-3, "radial_step": 1e-3, "pairs": 100_000, "shift_max": 20, "sanders_depth": 100},
    "sharkteeth": {"rows": 8, "resolution": 1e-3, "m": 10, "threshold": 0.02, "pairs": 20_000, "grid": 10_000},
    "dendrite": {"depth": 8, "samples_per_arc": 1024, "straight_depth": 12, "straight_samples": 1025, "pairs": 100_000},
    "scattered": {"max_power": 9, "embed_depth": 4},
    "tolerances": {},
}


class ConfigError(ValueError):
    pass


def merge_config(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge_config(out[k], v)
        else:
            out[k] = v
    return out


def validate_config(cfg: dict) -> None:
    for cid, tol in cfg.get("tolerances", {}).items():
        if not isinstance(tol, (int, float)) or not tol > 0:
            raise ConfigError(f"tolerance for {cid} must be > 0, got {tol!r}")
    seed = cfg.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")


@dataclass
class ClaimReport:
    claim_id: str
    status: str
    worst_witness: Any
    tolerance: float
    budget: dict
    runtime_ms: int = 0

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "claim_id": self.claim_id,
            "status": self.status,
            "worst_witness": self.worst_witness,
            "tolerance": self.tolerance,
            "budget": self.budget,
            "runtime_ms": self.runtime_ms,
        }


REPORT_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "additionalProperties": False,
        "required": ["schema_version", "claim_id", "status", "worst_witness", "tolerance", "budget", "runtime_ms"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "claim_id": {"type": "string"},
            "status": {"enum": list(STATUSES)},
            "worst_witness": {},
            "tolerance": {"type": "number", "minimum": 0},
            "budget": {"type": "object", "additionalProperties": {"type": "integer"}},
            "runtime_ms": {"type": "integer", "minimum": 0},
        },
        "if": {"properties": {"status": {"const": "fail"}}},
        "then": {"properties": {"worst_witness": {"not": {"type": "null"}}}},
    },
}


@dataclass(frozen=True)
class Claim:
    claim_id: str
    suite: str
    tolerance: float
    sampled: bool
    run: Callable[["Context", float], tuple[str, Any, dict]]


@dataclass
class Context:
    """Shared, lazily built spaces so that one suite builds each space once."""

    config: dict
    cache: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.config[name]

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    def get(self, key: str, build: Callable[[], Any]) -> Any:
        if key not in self.cache:
            self.cache[key] = build()
        return self.cache[key]

    def snake_space(self):
        c = self.section("snake")
        return self.get("snake", lambda: snake.build_snake(c["depth"], c["angular_step"], c["radial_step"]))

    def snake_m(self) -> int:
        return self.get("snake_m", lambda: snake.minimal_cover_count(self.snake_space(), rng_seed=self.seed))

    def free_arc(self):
        c = self.section("sharkteeth")
        return self.get("free_arc", lambda: sharkteeth.worked_system(c["rows"], c["resolution"]))

    def certificate(self):
        c = self.section("sharkteeth")
        fs = self.free_arc()
        return self.get(
            "cert",
            lambda: certify_composition_diameter(fs.maps, fs.space.cloud, c["m"], c["threshold"], track=fs.g_indices),
        )

    def dendrite_space(self):
        c = self.section("dendrite")
        return self.get("dendrite", lambda: dendrite.build_dendrite(c["depth"], c["samples_per_arc"]))

    def straight(self):
        c = self.section("dendrite")
        return self.get("straight", lambda: dendrite.straighten_dendrite(c["straight_depth"], c["straight_samples"]))


_CLAIMS: list[Claim] = []


def claim(claim_id: str, suite: str, tolerance: float, sampled: bool = False):
    def deco(fn):
        _CLAIMS.append(Claim(claim_id, suite, tolerance, sampled, fn))
        return fn

    return deco


def claims_for(suite: str) -> list[Claim]:
    if suite == "all":
        return list(_CLAIMS)
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
    return [c for c in _CLAIMS if c.suite == suite]


def _pt(p) -> list[float]:
    return [float(p[0]), float(p[1])] if not hasattr(p, "x") else [p.x, p.y]


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


# --------------------------------------------------------------------------
# snake


@claim("snake.f-below-identity", "snake", 0.0)
def _snake_below(ctx, tol):
    r = np.linspace(0.0, 1.0, 10_001)[1:]
    v = snake.radial_profile_array(r)
    gap = r - v
    k = int(np.argmin(gap))
    return _verdict(bool(np.all(gap > tol))), {"r": float(r[k]), "profile": float(v[k]), "gap": float(gap[k])}, {"grid": len(r)}


@claim("snake.profile-increasing", "snake", 0.0)
def _snake_monotone(ctx, tol):
    r = np.linspace(0.0, 1.0, 10_001)[1:]
    d = np.diff(snake.radial_profile_array(r))
    k = int(np.argmin(d))
    return _verdict(bool(np.all(d > tol))), {"r": float(r[k]), "step": float(d[k])}, {"grid": len(r)}


@claim("snake.weak-contraction", "snake", 0.0, sampled=True)
def _snake_weak(ctx, tol):
    S = ctx.snake_space()
    pairs = ctx.section("snake")["pairs"]
    rep = check_weak_contraction(snake.snake_f(), S.cloud, pairs, ctx.seed)
    wit = {"sup_ratio": rep.sup_ratio, "pair": [_pt(p) for p in rep.argmax_pair], "violations": rep.violation_count}
    return _verdict(rep.passed), wit, {"pairs": rep.pairs_sampled, "points": len(S.cloud)}


@claim("snake.shift-law", "snake", 2.0)
def _snake_shift(ctx, tol):
    S = ctx.snake_space()
    top = min(ctx.section("snake")["shift_max"], S.depth - 2)
    worst, worst_n = -1.0, 0
    for n in range(1, top + 1):
        d = hausdorff_distance(snake.image_cloud(S, f"O_{n}", f"I_{n}"), S.piece_cloud(f"O_{n + 2}", f"I_{n + 2}"))
        if d > worst:
            worst, worst_n = d, n
    bound = tol * S.resolution
    return _verdict(worst <= bound), {"n": worst_n, "hausdorff": worst, "bound": bound}, {"pieces": top}


@claim("snake.cover-maps", "snake", snake.COVER_LIP_CEILING, sampled=True)
def _snake_cover(ctx, tol):
    S = ctx.snake_space()
    m = ctx.snake_m()
    sup = max(check_weak_contraction(snake.cover_map(i, m), S.cloud, 20_000, ctx.seed).sup_ratio for i in range(1, m + 1))
    return _verdict(sup < tol), {"m": m, "sup_ratio": sup}, {"maps": m, "pairs_per_map": 20_000}


@claim("snake.attractor-invariance", "snake", 2.0, sampled=True)
def _snake_invariance(ctx, tol):
    S = ctx.snake_space()
    m = ctx.snake_m()
    F = IfsSystem((snake.snake_f(), *(snake.cover_map(i, m) for i in range(1, m + 1))), "weak")
    d = hausdorff_distance(S.cloud, hutchinson(F, S.cloud))
    bound = 2.0 / S.depth + tol * S.resolution
    return _verdict(d <= bound), {"hausdorff": d, "bound": bound, "m": m}, {"points": len(S.cloud), "maps": len(F)}


@claim("snake.sanders-lengths", "snake", 1e-3)
def _snake_sanders(ctx, tol):
    N = ctx.section("snake")["sanders_depth"]
    rep = snake.sanders_report(N)
    arc = max(rep.arc_length_errors)
    seg = max(rep.segment_length_errors)
    total = rep.finite_part_lengths[-1]
    ok = arc <= tol and seg <= 1e-6 and total >= 24.0
    return _verdict(ok), {"arc_error": arc, "segment_error": seg, "cumulative_length": total}, {"depth": N}


@claim("snake.not-ifs-attractor", "snake", 0.0)
def _snake_negative(ctx, tol):
    N = ctx.section("snake")["sanders_depth"]
    rep = snake.sanders_report(N)
    wit = {
        "cumulative_length": rep.finite_part_lengths[-1],
        "harmonic_lower_bound": 1.5 * math.pi * math.fsum(1.0 / n for n in range(1, N + 1)),
        "divergence_witness": list(rep.divergence_witness) if rep.divergence_witness else None,
    }
    return "evidence-only", wit, {"depth": N}


# --------------------------------------------------------------------------
# shark teeth and free arcs


def _unit_interval(n: int) -> PointCloud:
    x = np.linspace(0.0, 1.0, n)
    return PointCloud(np.column_stack([x, np.zeros_like(x)]), None, 1.0 / (n - 1))


@claim("sharkteeth.tent-lipschitz", "sharkteeth", 1e-6, sampled=True)
def _tent_lip(ctx, tol):
    c = ctx.section("sharkteeth")
    dom = _unit_interval(c["grid"] + 1)
    sups = [estimate_lipschitz(MapSpec.named("tent_f", i), dom, c["pairs"], ctx.seed).sup_ratio for i in range(3)]
    err = max(abs(s - 2.0 / 3.0) for s in sups)
    return _verdict(err <= tol), {"sup_ratios": sups, "max_error": err}, {"pairs": c["pairs"], "points": len(dom)}


@claim("sharkteeth.tent-cover", "sharkteeth", 1e-3)
def _tent_cover(ctx, tol):
    x = np.linspace(0.0, 1.0, ctx.section("sharkteeth")["grid"])
    fine = np.linspace(0.0, 1.0, 100_001)
    img = np.sort(np.concatenate([sharkteeth.tent_contraction(i, fine) for i in range(3)]))
    k = np.clip(np.searchsorted(img, x), 1, len(img) - 1)
    gap = np.minimum(np.abs(x - img[k - 1]), np.abs(img[k] - x))
    j = int(np.argmax(gap))
    return _verdict(float(gap[j]) <= tol), {"x": float(x[j]), "distance": float(gap[j])}, {"grid": len(x)}


@claim("prop1.free-arc", "sharkteeth", 0.0)
def _free_arc(ctx, tol):
    fs = ctx.free_arc()
    sides = fs.space.nonempty_sides()
    return "pass", {"sides": sides, "resolution": fs.space.resolution}, {"points": len(fs.space.cloud)}


@claim("prop1.F-lipschitz", "sharkteeth", 1e-2, sampled=True)
def _f_lip(ctx, tol):
    fs = ctx.free_arc()
    pairs = ctx.section("sharkteeth")["pairs"]
    sups = [estimate_lipschitz(fs.maps.maps[i], fs.space.cloud, pairs, ctx.seed).sup_ratio for i in fs.f_indices]
    worst = max(sups)
    return _verdict(worst <= 2.0 / 3.0 + tol), {"sup_ratios": sups}, {"pairs": pairs, "points": len(fs.space.cloud)}


@claim("prop1.diam-2-3-m", "sharkteeth", 2.0)
def _diam(ctx, tol):
    fs = ctx.free_arc()
    cert = ctx.certificate()
    bound = sharkteeth.diameter_bound(cert.m) + tol * fs.space.resolution
    ok = cert.max_diameter <= bound and cert.passed
    wit = {
        "m": cert.m,
        "max_diameter": cert.max_diameter,
        "bound": bound,
        "threshold": cert.threshold,
        "word": list(cert.argmax_word),
    }
    return _verdict(ok), wit, {"words": cert.words, "distinct_images": cert.distinct_images}


@claim("prop1.inner-g-collapse", "sharkteeth", 2.0)
def _inner(ctx, tol):
    fs = ctx.free_arc()
    cert = ctx.certificate()
    bound = tol * fs.space.resolution
    d = cert.inner_max_diameter if cert.inner_max_diameter is not None else 0.0
    wit = {"max_diameter": d, "bound": bound, "word": list(cert.inner_argmax_word or ())}
    return _verdict(d <= bound), wit, {"words": cert.words}


# --------------------------------------------------------------------------
# dendrite


@claim("dendrite.arc-lengths", "dendrite", 1e-6)
def _dl(ctx, tol):
    D = ctx.dendrite_space()
    errs = [abs(polyline_length(a) - 2.0**n) for n, a in enumerate(D.arcs, start=1)]
    k = int(np.argmax(errs))
    return _verdict(max(errs) <= tol), {"n": k + 1, "error": errs[k]}, {"arcs": len(errs)}


@claim("dendrite.sector-containment", "dendrite", 0.0)
def _dc(ctx, tol):
    D = ctx.dendrite_space()
    bad = {n: dendrite.containment_violations(n, s) for n, s in enumerate(D.arc_samples, start=1)}
    bad.update({n: bad[n] + dendrite.containment_violations(n, a.vertices) for n, a in enumerate(D.arcs, start=1)})
    worst = max(bad, key=lambda n: bad[n])
    total = sum(bad.values())
    return _verdict(total == 0), {"n": worst, "violations": bad[worst]}, {"samples": sum(len(s) for s in D.arc_samples)}


@claim("dendrite.simple-arcs", "dendrite", 0.0)
def _ds(ctx, tol):
    D = ctx.dendrite_space()
    simple = [dendrite.is_simple_arc(a) for a in D.arcs]
    apart = dendrite.arcs_meet_only_at_origin(D.arcs)
    first_bad = next((n for n, ok in enumerate(simple, start=1) if not ok), None)
    return _verdict(all(simple) and apart), {"non_simple_arc": first_bad, "disjoint_off_origin": apart}, {
        "legs": sum(len(a.vertices) - 1 for a in D.arcs)
    }


@claim("dendrite.straight-lipschitz", "dendrite", 0.01, sampled=True)
def _dlip(ctx, tol):
    D = ctx.straight()
    pairs = ctx.section("dendrite")["pairs"]
    F = dendrite.dendrite_ifs()
    sups = [estimate_lipschitz(f, D.cloud, pairs, ctx.seed).sup_ratio for f in F.maps]
    ok = sups[0] <= 0.5 + tol and all(s <= 0.5 + tol / 10.0 for s in sups[1:])
    return _verdict(ok), {"sup_ratios": sups}, {"pairs": pairs, "points": len(D.cloud)}


@claim("dendrite.straight-attractor", "dendrite", 2.0)
def _datt(ctx, tol):
    D = ctx.straight()
    d = hausdorff_distance(D.cloud, hutchinson(dendrite.dendrite_ifs(), D.cloud))
    bound = 2.0**-D.depth + tol * D.cloud.resolution
    return _verdict(d <= bound), {"hausdorff": d, "bound": bound}, {"points": len(D.cloud)}


@claim("dendrite.not-weak-ifs-attractor", "dendrite", 0.0)
def _dneg(ctx, tol):
    D = ctx.dendrite_space()
    lengths = [polyline_length(a) for a in D.arcs]
    radii = [float(np.hypot(*a.vertices[-1])) for a in D.arcs]
    return "evidence-only", {"arc_lengths": lengths, "endpoint_radii": radii}, {"arcs": len(lengths)}


# --------------------------------------------------------------------------
# scattered spaces


@claim("scattered.power-heights", "scattered", 0.0)
def _heights(ctx, tol):
    top = ctx.section("scattered")["max_power"]
    rows = []
    for n in range(0, top + 1):
        b = ordinals.CnfOrdinal.power(n)
        rows.append((n, ordinals.height(b).natural, ordinals.height_by_iteration(b)))
    bad = [r for r in rows if not (r[0] == r[1] == r[2])]
    return _verdict(not bad), {"mismatches": [list(r) for r in bad]}, {"ordinals": len(rows)}


@claim("scattered.omega-omega-limit-height", "scattered", 0.0)
def _oo_height(ctx, tol):
    h = ordinals.height(ordinals.OMEGA_OMEGA)
    ok = h == ordinals.OMEGA and h.is_limit
    return _verdict(ok), {"height": str(h)}, {}


@claim("scattered.embedding-order", "scattered", 0.0)
def _embed(ctx, tol):
    depth = ctx.section("scattered")["embed_depth"]
    pairs = ordinals.embed_ordinals(ordinals.OMEGA_OMEGA, depth)
    xs = [x for x, _ in pairs]
    by_ord = sorted(range(len(pairs)), key=lambda i: pairs[i][1])
    ordered = all(xs[by_ord[i]] > xs[by_ord[i + 1]] for i in range(len(by_ord) - 1))
    return _verdict(ordered), {"points": len(pairs)}, {"depth": depth}


@claim("scattered.omega-omega-not-topological-fractal", "scattered", 0.0)
def _oo_neg(ctx, tol):
    verdict = ordinals.classify_topological_fractal(ordinals.OMEGA_OMEGA)
    heights = [b.height for b in ordinals.omega_omega_blocks(ctx.section("scattered")["embed_depth"])]
    return "evidence-only", {"classification": verdict, "block_heights": heights}, {}


# --------------------------------------------------------------------------


def run_claims(suite: str, config: dict, tolerance: float | None = None, only: set[str] | None = None) -> tuple[list[ClaimReport], list[str]]:
    """Run a suite; returns (reports, skipped claim ids).

    Sampled claims need a seed; without one they are skipped rather than run
    with an arbitrary stream.
    """
    cfg = merge_config(DEFAULT_CONFIG, config)
    validate_config(cfg)
    if tolerance is not None and not tolerance > 0:
        raise ConfigError("tolerance must be > 0")
    if only is not None:
        unknown = sorted(set(only) - {c.claim_id for c in claims_for(suite)})
        if unknown:
            raise ConfigError(f"no claim {', '.join(unknown)} in suite {suite!r}")
    ctx = Context(cfg)
    reports, skipped = [], []
    for c in claims_for(suite):
        if only is not None and c.claim_id not in only:
            continue
        if c.sampled and cfg.get("seed") is None:
            skipped.append(c.claim_id)
            continue
        tol = cfg["tolerances"].get(c.claim_id, c.tolerance)
        if tolerance is not None and c.tolerance > 0:
            tol = tolerance
        t0 = time.perf_counter()
        try:
            status, witness, budget = c.run(ctx, tol)
        except Exception as exc:  # a crashed check is a failed claim, not a crashed run
            status, witness, budget = "fail", {"error": f"{type(exc).__name__}: {exc}"}, {}
        ms = int(round((time.perf_counter() - t0) * 1000))
        reports.append(ClaimReport(c.claim_id, status, witness, float(tol), {k: int(v) for k, v in budget.items()}, ms))
    return reports, skipped


def exit_code(reports: list[ClaimReport]) -> int:
    return 1 if any(r.status == "fail" for r in reports) else 0
