"""Command-line front end: synth, evict, analyze, sweep, memcalc.

Exit codes: 0 success, 2 user or configuration error, 3 internal invariant failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io as _stdio
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import io as gio
from .analysis import ModelGeometry, kv_memory_gb, pairwise_cosine_stats, pca_2d, round_half_up
from .eviction import EvictionPolicy, InvariantError, Refinement, evict
from .graph import SimilarityKind, SourceSelection
from .propagation import AdaptiveNeighbors, FixedNeighbors, PropagationConfig, SignalKind
from .scorers import ScorerKind, WindowConfig
from .synthetic import ClusterSpec, cluster_coverage, gen_clustered_keys

TABLE_TOKENS = [128, 256, 512, 1024, 2048, 16000, 32000, 64000, 128000]

_NEIGHBORS = {
    "type": "object",
    "additionalProperties": False,
    "minProperties": 1,
    "maxProperties": 1,
    "properties": {
        "fixed": {"type": "integer", "minimum": 1},
        "adaptive": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m_max": {"type": "integer", "minimum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}

RUN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "manifest": {"type": "string"},
        "output_dir": {"type": "string"},
        "scorer": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": [k.value for k in ScorerKind]},
                "window": {"type": "integer", "minimum": 1},
                "pool": {"type": "integer", "minimum": 1},
                "knorm_low_is_important": {"type": "boolean"},
            },
        },
        "refine": {"type": "boolean"},
        "selection": {
            "type": "object",
            "additionalProperties": False,
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "k": {"type": "integer", "minimum": 1},
            },
        },
        "similarity": {"enum": [k.value for k in SimilarityKind]},
        "signal": {"enum": [k.value for k in SignalKind]},
        "rounds": {"type": "integer", "minimum": 0, "maximum": 16},
        "neighbors": _NEIGHBORS,
        "strength": {"type": "number", "minimum": 0},
        "budget": {"type": "integer", "minimum": 0},
        "protected_window": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
    },
}

SWEEP_SCHEMA = copy.deepcopy(RUN_SCHEMA)
SWEEP_SCHEMA["properties"]["grid"] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "ratio": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "m": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "rounds": {"type": "array", "minItems": 1, "items": {"type": "integer"}},
        "signal": {"type": "array", "minItems": 1, "items": {"enum": [k.value for k in SignalKind]}},
        "similarity": {
            "type": "array", "minItems": 1, "items": {"enum": [k.value for k in SimilarityKind]}
        },
        "budget": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}},
    },
}
SWEEP_SCHEMA["properties"]["output"] = {"type": "string"}

DEFAULTS = {
    "scorer": {"kind": "window", "window": 32, "pool": 1, "knorm_low_is_important": True},
    "refine": True,
    "selection": {"ratio": 0.3},
    "similarity": "key_key",
    "signal": "decay",
    "rounds": 1,
    "neighbors": {"adaptive": {"m_max": 64, "alpha": 0.001}},
    "strength": 1.0,
    "protected_window": 0,
    "seed": 0,
}

GRID_AXES = ("ratio", "m", "rounds", "signal", "similarity", "budget")


class UserError(Exception):
    pass


def thread_count() -> int:
    raw = os.environ.get("GRAPHKV_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UserError(f"GRAPHKV_THREADS must be an integer, got {raw!r}")


def load_config(path, schema) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UserError(f"config not found: {path}")
    except json.JSONDecodeError as exc:
        raise UserError(f"{path}: invalid JSON: {exc}")
    validate(raw, schema)
    return raw


def validate(cfg: dict, schema) -> None:
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        raise UserError(f"invalid config: {exc.message}")


def merged(cfg: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for key, value in cfg.items():
        if key == "scorer":
            out["scorer"] = {**DEFAULTS["scorer"], **value}
        else:
            out[key] = value
    return out


def policy_from(cfg: dict) -> EvictionPolicy:
    sc = cfg["scorer"]
    refinement = None
    if cfg["refine"]:
        sel = SourceSelection(**cfg["selection"])
        nb = cfg["neighbors"]
        neighbors = FixedNeighbors(nb["fixed"]) if "fixed" in nb else AdaptiveNeighbors(**nb["adaptive"])
        prop = PropagationConfig(cfg["rounds"], neighbors, SignalKind(cfg["signal"]), cfg["strength"])
        refinement = Refinement(sel, SimilarityKind(cfg["similarity"]), prop)
    return EvictionPolicy(
        scorer=ScorerKind(sc["kind"]),
        window=WindowConfig(sc["window"], sc["pool"]),
        knorm_low_is_important=sc["knorm_low_is_important"],
        refinement=refinement,
        protected_window=cfg["protected_window"],
    )


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def _csv_text(header, rows) -> str:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _mean_cos(keys, kept) -> float:
    if len(kept) < 2:
        return float("nan")
    return pairwise_cosine_stats(keys, kept).mean


# -- subcommands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    focus = None
    if args.focus:
        focus = tuple(float(x) for x in args.focus.split(","))
    spec = ClusterSpec(
        seed=args.seed,
        clusters=args.clusters,
        per_cluster=args.per_cluster,
        dim=args.dim,
        sigma=args.sigma,
        query_count=args.queries,
        query_focus=focus,
    )
    wl = gen_clustered_keys(spec)
    path = gio.write_manifest(args.out, wl.cache, wl.labels, spec.to_json())
    print(path)
    return 0


def _run_config(args) -> dict:
    cfg = load_config(args.config, RUN_SCHEMA) if args.config else {}
    overrides = {
        "manifest": args.manifest,
        "output_dir": args.out,
        "budget": args.budget,
        "rounds": args.rounds,
        "signal": args.signal,
        "similarity": args.similarity,
        "protected_window": args.protected_window,
        "seed": args.seed,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if args.ratio is not None:
        cfg["selection"] = {"ratio": args.ratio}
    if args.k is not None:
        cfg["selection"] = {"k": args.k}
    if args.m is not None:
        cfg["neighbors"] = {"fixed": args.m}
    if args.no_refine:
        cfg["refine"] = False
    validate(cfg, RUN_SCHEMA)
    for key in ("manifest", "output_dir", "budget"):
        if key not in cfg:
            raise UserError(f"missing required setting: {key}")
    return merged(cfg)


def _load_manifest(path):
    try:
        return gio.read_manifest(path)
    except FileNotFoundError as exc:
        raise UserError(f"manifest or tensor not found: {exc.filename}")


def cmd_evict(args) -> int:
    cfg = _run_config(args)
    cache, labels, _ = _load_manifest(cfg["manifest"])
    result = evict(cache, cfg["budget"], policy_from(cfg))

    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    kept = [int(i) for i in result.kept_indices]
    if labels is not None:
        coverage = cluster_coverage(kept, labels)
    else:
        coverage = None
    gio.dump_json(out / "kept.json", {
        "kept_indices": kept,
        "budget": cfg["budget"],
        "n": cache.n,
        "coverage": coverage,
        "config": cfg,
    })
    gio.write_tensor(out / "keys_sub.gkt", result.keys_sub)
    gio.write_tensor(out / "values_sub.gkt", result.values_sub)
    gio.write_scores(out / "scores.gkt", result.refined_scores)
    gio.write_scores(out / "base_scores.gkt", result.base_scores)
    print(out / "kept.json")
    return 0


def _read_kept(path) -> list[int]:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UserError(f"kept-index file not found: {path}")
    kept = raw["kept_indices"] if isinstance(raw, dict) else raw
    return [int(i) for i in kept]


def cmd_analyze(args) -> int:
    cache, labels, _ = _load_manifest(args.manifest)
    kept = _read_kept(args.kept)
    if any(i < 0 or i >= cache.n for i in kept):
        raise UserError("kept indices out of range for the manifest")

    rows = []
    for name, subset in (("kept", kept), ("all", list(range(cache.n)))):
        if len(subset) < 2:
            continue
        st = pairwise_cosine_stats(cache.keys, subset)
        cov = cluster_coverage(subset, labels) if labels is not None else ""
        rows.append([name, len(subset), st.pairs, st.mean, st.variance, cov])
    stats_csv = _csv_text(["subset", "tokens", "pairs", "mean", "variance", "coverage"], rows)

    hist_rows = []
    if len(kept) >= 2:
        st = pairwise_cosine_stats(cache.keys, kept)
        for lo, hi, c in zip(st.bin_edges[:-1], st.bin_edges[1:], st.counts):
            hist_rows.append([float(lo), float(hi), int(c)])
    hist_csv = _csv_text(["bin_lo", "bin_hi", "count"], hist_rows)

    pca_rows = []
    if cache.n >= 2 and cache.d >= 2:
        coords, var = pca_2d(cache.keys)
        kept_set = set(kept)
        for i in range(cache.n):
            pca_rows.append([i, float(coords[i, 0]), float(coords[i, 1]), int(i in kept_set)])
    pca_csv = _csv_text(["token", "pc1", "pc2", "kept"], pca_rows)

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.csv").write_text(stats_csv)
        (out / "histogram.csv").write_text(hist_csv)
        (out / "pca.csv").write_text(pca_csv)
    sys.stdout.write(stats_csv)
    return 0


def _sweep_cell(cache, labels, base_cfg, cell) -> list:
    cfg = copy.deepcopy(base_cfg)
    ratio, m, rounds, signal, similarity, budget = cell
    cfg.update(selection={"ratio": ratio}, neighbors={"fixed": m}, rounds=rounds,
               signal=signal, similarity=similarity, budget=budget, refine=True)
    policy = policy_from(cfg)
    graph_kept = evict(cache, budget, policy).kept_indices
    base_kept = evict(cache, budget, policy.baseline()).kept_indices
    cov = lambda kept: cluster_coverage(kept, labels) if labels is not None else ""
    return list(cell) + [
        _mean_cos(cache.keys, graph_kept), cov(graph_kept),
        _mean_cos(cache.keys, base_kept), cov(base_kept),
    ]


def cmd_sweep(args) -> int:
    raw = load_config(args.config, SWEEP_SCHEMA)
    if args.manifest:
        raw["manifest"] = args.manifest
    if args.out:
        raw["output"] = args.out
    if "manifest" not in raw:
        raise UserError("missing required setting: manifest")
    grid = raw.pop("grid", {})
    output = raw.pop("output", None)
    raw.pop("output_dir", None)
    cfg = merged(raw)

    sel = cfg["selection"]
    nb = cfg["neighbors"]
    axes = {
        "ratio": grid.get("ratio", [sel.get("ratio", 0.3)]),
        "m": grid.get("m", [nb["fixed"] if "fixed" in nb else 5]),
        "rounds": grid.get("rounds", [cfg["rounds"]]),
        "signal": grid.get("signal", [cfg["signal"]]),
        "similarity": grid.get("similarity", [cfg["similarity"]]),
        "budget": grid.get("budget", [cfg["budget"]] if "budget" in cfg else None),
    }
    if axes["budget"] is None:
        raise UserError("sweep needs a budget or a budget grid")
    cells = list(itertools.product(*(axes[a] for a in GRID_AXES)))
    cache, labels, _ = _load_manifest(cfg["manifest"])

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        rows = list(pool.map(lambda c: _sweep_cell(cache, labels, cfg, c), cells))

    header = list(GRID_AXES) + ["kept_mean_cos", "coverage", "baseline_mean_cos", "baseline_coverage"]
    text = _csv_text(header, rows)
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_memcalc(args) -> int:
    geom = ModelGeometry(args.layers, args.kv_heads, args.head_dim, args.bytes)
    tokens = [int(t) for t in args.tokens.split(",")] if args.tokens else TABLE_TOKENS
    if any(t < 0 for t in tokens):
        raise UserError("token counts must be non-negative")
    rows = [[t, round_half_up(kv_memory_gb(geom, t), 3)] for t in tokens]
    sys.stdout.write(_csv_text(["tokens", "memory_gb"], rows))
    return 0


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)

    p = argparse.ArgumentParser(prog="graphkv", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a clustered workload")
    s.add_argument("--clusters", type=int, default=5)
    s.add_argument("--per-cluster", type=int, default=20)
    s.add_argument("--dim", type=int, default=64)
    s.add_argument("--sigma", type=float, default=0.05)
    s.add_argument("--queries", type=int, default=32)
    s.add_argument("--focus", help="comma-separated per-cluster query weights")
    s.add_argument("--out", default="workload")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("evict", parents=[common], help="run one eviction")
    e.add_argument("--config")
    e.add_argument("--manifest")
    e.add_argument("--out")
    e.add_argument("--budget", type=int)
    e.add_argument("--rounds", type=int)
    e.add_argument("--signal", choices=[k.value for k in SignalKind])
    e.add_argument("--similarity", choices=[k.value for k in SimilarityKind])
    e.add_argument("--ratio", type=float)
    e.add_argument("--k", type=int)
    e.add_argument("--m", type=int)
    e.add_argument("--protected-window", type=int)
    e.add_argument("--no-refine", action="store_true")
    e.set_defaults(func=cmd_evict)

    a = sub.add_parser("analyze", parents=[common], help="similarity stats, coverage, PCA")
    a.add_argument("--manifest", required=True)
    a.add_argument("--kept", required=True)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("sweep", parents=[common], help="ablation grid to CSV")
    w.add_argument("--config", required=True)
    w.add_argument("--manifest")
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    m = sub.add_parser("memcalc", parents=[common], help="KV memory table")
    m.add_argument("--layers", type=int, default=32)
    m.add_argument("--kv-heads", type=int, default=8)
    m.add_argument("--head-dim", type=int, default=128)
    m.add_argument("--bytes", type=int, default=2)
    m.add_argument("--tokens", help="comma-separated token counts")
    m.set_defaults(func=cmd_memcalc)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth" and args.seed is None:
        args.seed = 42
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"graphkv: internal error: {exc}", file=sys.stderr)
        return 3
    except (UserError, ValueError, KeyError, OSError) as exc:
        print(f"graphkv: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
