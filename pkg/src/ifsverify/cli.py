"""ifsverify command line: build spaces, verify claims, render clouds, search word lengths."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import claims, dendrite, ordinals, sharkteeth, snake
from .claims import ConfigError, merge_config
from .engine import CertificateBudgetError, IfsSystem, certify_composition_diameter
from .geometry import PointCloud, read_cloud_csv, write_cloud_csv
from .io_utils import atomic_write_json, atomic_write_text
from .render import Style, render_svg

SPACES = ("snake", "sharkteeth", "dendrite", "dendrite-straight", "omega-omega")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

BUILD_DEFAULTS = {
    "snake": {"depth": 50, "angular_step": 1e-3, "radial_step": 1e-3},
    "sharkteeth": {"rows": 8, "samples_per_row": 1025, "resolution": 1e-3},
    "dendrite": {"depth": 8, "samples_per_arc": 1024, "straight_depth": 12, "straight_samples": 1025},
    "scattered": {"embed_depth": 4},
}


class UsageError(Exception):
    pass


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=_u64, default=argparse.SUPPRESS, help="RNG seed (required for sampled checks)")
    g.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="JSON run configuration")
    g.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output path")
    g.add_argument("--tolerance", type=_positive, default=argparse.SUPPRESS, help="override claim tolerances")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ifsverify", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", parents=[common], help="sample a space into a CSV cloud")
    b.add_argument("space", choices=SPACES)
    b.add_argument("--depth", type=int, help="pieces, rows, arcs or truncation depth")
    b.add_argument("--samples", type=int, help="samples per row or arc")
    b.add_argument("--free-arc", action="store_true", help="sharkteeth: build the free-arc instance P instead")
    b.add_argument("--beta", help="omega-omega: embed [0, beta] for this CNF ordinal instead of w^w")
    b.add_argument("--system-out", type=Path, help="also write the IFS of the space as JSON")

    v = sub.add_parser("verify", parents=[common], help="run a claim suite")
    v.add_argument("suite", choices=claims.SUITES + ("all",))
    v.add_argument("--claim", action="append", dest="only", help="run only this claim id (repeatable)")

    r = sub.add_parser("render", parents=[common], help="render a CSV cloud as SVG")
    r.add_argument("input", type=Path)
    r.add_argument("--title", default=None)

    m = sub.add_parser("min-word-length", parents=[common], help="smallest certified composition length")
    m.add_argument("--system", type=Path, required=True)
    m.add_argument("--cloud", type=Path, required=True)
    m.add_argument("--threshold", type=_positive, required=True)
    m.add_argument("--m-max", type=int, default=12)

    h = sub.add_parser("height", parents=[common], help="Cantor-Bendixson height of [0, beta]")
    h.add_argument("beta", help="CNF string such as 'w^3*2 + w + 5' or 'w^w'")
    return parser


def load_config(args) -> dict:
    path = getattr(args, "config", None)
    cfg: dict = {}
    if path is not None:
        try:
            cfg = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
    if hasattr(args, "seed"):
        cfg["seed"] = args.seed
    return cfg


def _write_metadata(csv_path: Path, space: str, params: dict, cloud: PointCloud) -> None:
    meta = {
        "schema_version": claims.SCHEMA_VERSION,
        "space": space,
        "parameters": params,
        "resolution": cloud.resolution,
        "points": len(cloud),
        "labels": sorted(cloud.label_set()) if cloud.labels is not None else [],
    }
    atomic_write_json(csv_path.with_suffix(".json"), meta)


def cmd_build(args, cfg: dict) -> int:
    cfg = merge_config(BUILD_DEFAULTS, cfg)
    space = args.space
    system: IfsSystem | None = None
    if space == "snake":
        c = dict(cfg["snake"])
        if args.depth is not None:
            c["depth"] = args.depth
        if c["depth"] < 1:
            raise UsageError("snake depth must be >= 1")
        S = snake.build_snake(c["depth"], c["angular_step"], c["radial_step"])
        cloud, params = S.cloud, {k: c[k] for k in ("depth", "angular_step", "radial_step")}
        if args.system_out:
            if cfg.get("seed") is None:
                raise UsageError("the snake IFS needs --seed (its cover count is found by sampling)")
            system = snake.snake_system(S, rng_seed=cfg["seed"])
    elif space == "sharkteeth":
        c = dict(cfg["sharkteeth"])
        if args.depth is not None:
            c["rows"] = args.depth
        if args.samples is not None:
            c["samples_per_row"] = args.samples
        if c["rows"] < 1:
            raise UsageError("sharkteeth needs at least one row")
        if args.free_arc:
            if "instance" in c:
                P = sharkteeth.free_arc_from_json(json.dumps(c["instance"]), c["resolution"])
                if args.system_out:
                    raise UsageError("a custom free-arc instance has no serializable IFS")
                params = {"instance": c["instance"], "resolution": c["resolution"]}
            else:
                fs = sharkteeth.worked_system(c["rows"], c["resolution"])
                P, system = fs.space, fs.maps
                params = {"rows": c["rows"], "resolution": c["resolution"], "free_arc": True}
            cloud = P.cloud
        else:
            T = sharkteeth.build_shark_teeth(c["rows"], c["samples_per_row"])
            cloud, params = T.cloud, {"rows": c["rows"], "samples_per_row": c["samples_per_row"]}
            if args.system_out:
                raise UsageError("use --free-arc to get the shark-teeth IFS")
    elif space == "dendrite":
        c = dict(cfg["dendrite"])
        if args.depth is not None:
            c["depth"] = args.depth
        if args.samples is not None:
            c["samples_per_arc"] = args.samples
        D = dendrite.build_dendrite(c["depth"], c["samples_per_arc"])
        cloud, params = D.cloud, {"depth": c["depth"], "samples_per_arc": c["samples_per_arc"]}
        if args.system_out:
            raise UsageError("the dendrite has no IFS; build dendrite-straight instead")
    elif space == "dendrite-straight":
        c = dict(cfg["dendrite"])
        if args.depth is not None:
            c["straight_depth"] = args.depth
        if args.samples is not None:
            c["straight_samples"] = args.samples
        D = dendrite.straighten_dendrite(c["straight_depth"], c["straight_samples"])
        cloud, params = D.cloud, {"depth": c["straight_depth"], "samples_per_arc": c["straight_samples"]}
        system = dendrite.dendrite_ifs()
    else:
        depth = args.depth if args.depth is not None else cfg["scattered"]["embed_depth"]
        beta = ordinals.parse_cnf(args.beta) if args.beta else ordinals.OMEGA_OMEGA
        cloud = ordinals.embed_in_unit_interval(beta, depth)
        params = {"beta": str(beta), "depth": depth}
        if args.system_out:
            raise UsageError("ordinal spaces carry no IFS here")

    out = getattr(args, "out", None) or Path(f"{space}.csv")
    write_cloud_csv(cloud, out)
    _write_metadata(out, space, params, cloud)
    if args.system_out and system is not None:
        atomic_write_text(args.system_out, system.to_json() + "\n")
    print(f"wrote {len(cloud)} points to {out}", file=sys.stderr)
    return EXIT_OK


def report_text(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def cmd_verify(args, cfg: dict) -> int:
    only = set(args.only) if args.only else None
    reports, skipped = claims.run_claims(args.suite, cfg, getattr(args, "tolerance", None), only)
    for r in reports:
        print(f"{r.status:13s} {r.claim_id}  ({r.runtime_ms} ms)", file=sys.stderr)
    for cid in skipped:
        print(f"{'skipped':13s} {cid}  (sampled check: pass --seed)", file=sys.stderr)
    text = report_text(reports)
    out = getattr(args, "out", None)
    if out is not None:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)
    return claims.exit_code(reports)


def cmd_render(args, cfg: dict) -> int:
    cloud = read_cloud_csv(args.input)
    style_cfg = dict(cfg.get("render", {}))
    if args.title is not None:
        style_cfg["title"] = args.title
    svg = render_svg(cloud, Style.from_dict(style_cfg))
    out = getattr(args, "out", None) or args.input.with_suffix(".svg")
    atomic_write_text(out, svg)
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def cmd_min_word_length(args, cfg: dict) -> int:
    if args.m_max < 0:
        raise UsageError("--m-max must be >= 0")
    try:
        F = IfsSystem.from_json(args.system.read_text())
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot read system {args.system}: {exc}") from None
    X = read_cloud_csv(args.cloud)
    found = None
    diam = None
    for m in range(args.m_max + 1):
        cert = certify_composition_diameter(F, X, m, args.threshold)
        diam = cert.max_diameter
        if cert.passed:
            found = m
            break
    result = {
        "m": found if found is not None else "exceeded",
        "threshold": args.threshold,
        "m_max": args.m_max,
        "max_diameter": diam,
    }
    text = json.dumps(result, sort_keys=True) + "\n"
    out = getattr(args, "out", None)
    if out is not None:
        atomic_write_text(out, text)
    sys.stdout.write(text)
    return EXIT_OK if found is not None else EXIT_FAIL


def cmd_height(args, cfg: dict) -> int:
    beta = ordinals.parse_cnf(args.beta)
    h = ordinals.height(beta)
    cls = ordinals.classify_topological_fractal(beta) if not beta.is_zero else ordinals.UNOBSTRUCTED
    print(json.dumps({"beta": str(beta), "height": str(h), "limit": h.is_limit, "classification": cls}, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "build": cmd_build,
    "verify": cmd_verify,
    "render": cmd_render,
    "min-word-length": cmd_min_word_length,
    "height": cmd_height,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError, CertificateBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
