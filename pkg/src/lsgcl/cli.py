"""Command-line entry point: preprocess, train, embed, eval-nc, eval-lp, ablate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import config as C
from .encoder import load_checkpoint, save_checkpoint
from .errors import GraphFormatError, NumericError, SamplingError
from .evaluate import MetricRow, evaluate_lp, evaluate_nc, write_report
from .graph import Graph, load_edge_list
from .sampler import load_subgraphs, precompute_subgraphs, save_subgraphs
from .trainer import export_embeddings, save_embeddings, save_loss_trace, train

log = logging.getLogger("lsgcl")

EXIT_INPUT = 2
EXIT_NUMERIC = 3

COMMANDS = ("preprocess", "train", "embed", "eval-nc", "eval-lp", "ablate")
SWEEPS = ("subgraph-size", "sampler", "loss-mode")
ALIASES = {"lr": "learning_rate", "k": "subgraph_size", "alpha": "margin", "dim": "embedding_dim"}


class InputError(Exception):
    pass


class Run:
    """Resolved configuration, output paths and the manifest written next to outputs."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out_dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S")

    def path(self, name: str, filename: str) -> Path:
        p = self.out / filename
        self.artifacts[name] = str(p)
        return p

    def cache_hash(self) -> str:
        return C.config_hash(self.cfg, C.CACHE_KEYS)

    def write_manifest(self, **extra) -> Path:
        manifest = {
            "command": self.command,
            "config": self.cfg,
            "config_hash": C.config_hash(self.cfg),
            "cache_hash": self.cache_hash(),
            "seed": self.cfg["seed"],
            "dataset_paths": {k: self.cfg[k] for k in ("edges", "features", "labels")},
            "artifacts": self.artifacts,
            "started": self.started,
            "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
            **extra,
        }
        p = self.out / f"manifest_{self.command}.json"
        p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p


def load_graph(cfg: dict, need_labels: bool = False) -> Graph:
    for key in ("edges", "features"):
        if not cfg[key]:
            raise InputError(f"no {key} file configured; pass --dataset, --data-dir or --{key}")
        if not Path(cfg[key]).is_file():
            raise InputError(f"{key} file not found: {cfg[key]}")
    labels = cfg["labels"] if cfg["labels"] and Path(cfg["labels"]).is_file() else None
    if need_labels and labels is None:
        raise InputError("this command needs node labels; label file missing")
    return load_edge_list(cfg["edges"], cfg["features"], labels)


def ensure_subgraphs(run: Run, g: Graph, force: bool = False):
    cache = run.path("subgraph_cache", "subgraphs.txt")
    stamp = run.out / "subgraphs.hash"
    if not force and cache.is_file() and stamp.is_file() and stamp.read_text().strip() == run.cache_hash():
        print(f"cache reused: {cache}")
        return load_subgraphs(g, cache), True
    cfg = C.train_config(run.cfg)
    subs = precompute_subgraphs(g, cfg.ppr, cfg.sampler, hops=cfg.hops, seed=run.cfg["seed"])
    save_subgraphs(subs, cache)
    stamp.write_text(run.cache_hash() + "\n")
    print(f"wrote {len(subs)} subgraphs to {cache}")
    return subs, False


def cmd_preprocess(run: Run, args) -> None:
    g = load_graph(run.cfg)
    _, reused = ensure_subgraphs(run, g, args.force)
    run.write_manifest(cache_reused=reused)


def cmd_train(run: Run, args) -> None:
    g = load_graph(run.cfg)
    subs, _ = ensure_subgraphs(run, g, args.force)
    ckpt = run.path("checkpoint", "checkpoint.txt")
    trace_path = run.path("loss_trace", "loss.csv")
    try:
        params, trace = train(g, subs, C.train_config(run.cfg))
    except NumericError:
        for p in (ckpt, trace_path):
            p.unlink(missing_ok=True)
        raise
    save_checkpoint(params, ckpt)
    save_loss_trace(trace, trace_path)
    print(f"trained {len(trace)} epochs, final loss {trace[-1]:.6f}")
    run.write_manifest(epochs_run=len(trace))


def _trained(run: Run, g: Graph, args):
    ckpt = run.out / "checkpoint.txt"
    if not ckpt.is_file():
        raise InputError(f"checkpoint not found: {ckpt}; run 'train' first")
    subs, _ = ensure_subgraphs(run, g, False)
    run.artifacts["checkpoint"] = str(ckpt)
    return subs, load_checkpoint(ckpt)


def cmd_embed(run: Run, args) -> None:
    g = load_graph(run.cfg)
    subs, params = _trained(run, g, args)
    emb = export_embeddings(g, subs, params, run.cfg["view"].upper())
    out = run.path("embeddings", "embeddings.txt")
    save_embeddings(emb, out)
    print(f"wrote {emb.shape[0]}x{emb.shape[1]} embeddings to {out}")
    run.write_manifest()


def _print_rows(rows):
    for r in rows:
        print(f"{r.task},{r.metric},{r.mean:.4f},{r.std:.4f},{r.seeds}")


def cmd_eval_nc(run: Run, args) -> None:
    g = load_graph(run.cfg, need_labels=True)
    subs, params = _trained(run, g, args)
    emb = export_embeddings(g, subs, params, run.cfg["view"].upper())
    rows = evaluate_nc(emb, g, run.cfg["per_class"], range(run.cfg["seeds"]))
    write_report(rows, run.path("report", "report_nc.csv"))
    _print_rows(rows)
    run.write_manifest(runs={r.metric: r.runs for r in rows})


def cmd_eval_lp(run: Run, args) -> None:
    g = load_graph(run.cfg)
    cfg = C.train_config(run.cfg)
    rows = evaluate_lp(
        g, cfg, range(run.cfg["seeds"]), run.cfg["test_frac"], run.cfg["view"].upper(), run.cfg["lp_features"]
    )
    write_report(rows, run.path("report", "report_lp.csv"))
    _print_rows(rows)
    run.write_manifest(runs={r.metric: r.runs for r in rows})


def sweep_points(sweep: str, cfg: dict):
    if sweep == "subgraph-size":
        return [(f"K={k}", {"subgraph_size": int(k)}) for k in cfg["sizes"].split(",")]
    if sweep == "sampler":
        return [(s, {"sampler": s}) for s in ("k-rank", "k-hop", "k-rw")]
    return [(m, {"loss_mode": m}) for m in ("FULL", "NS_ONLY", "NG_ONLY")]


def cmd_ablate(run: Run, args) -> None:
    g = load_graph(run.cfg, need_labels=True)
    rows, failures = [], {}
    for label, change in sweep_points(args.sweep, run.cfg):
        point = {**run.cfg, **change}
        try:
            cfg = C.train_config(point)
            subs = precompute_subgraphs(g, cfg.ppr, cfg.sampler, hops=cfg.hops, seed=point["seed"])
            params, _ = train(g, subs, cfg)
            emb = export_embeddings(g, subs, params, point["view"].upper())
            row = evaluate_nc(emb, g, point["per_class"], range(point["seeds"]))[0]
            row.task = f"{args.sweep}={label}"
        except (ValueError, NumericError, SamplingError) as exc:
            log.error("sweep point %s failed: %s", label, exc)
            failures[label] = str(exc)
            row = MetricRow(f"{args.sweep}={label}", "accuracy", float("nan"), float("nan"), 0)
        rows.append(row)
        print(f"{row.task},{row.metric},{row.mean:.4f},{row.std:.4f},{row.seeds}", flush=True)
    name = args.sweep.replace("-", "_")
    write_report(rows, run.path("report", f"ablation_{name}.csv"))
    run.write_manifest(sweep=args.sweep, failures=failures)


HANDLERS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "embed": cmd_embed,
    "eval-nc": cmd_eval_nc,
    "eval-lp": cmd_eval_lp,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="key = value configuration file")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--out-dir")
    shared.add_argument("--dataset", help="dataset name; 'pubmed' also switches margin and dimension")
    shared.add_argument("--force", action="store_true", help="rebuild the subgraph cache")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="lsgcl",
        description="Subgraph contrastive node embeddings. Any configuration key may be "
        "given as --key value (e.g. --epochs 50 --subgraph-size 10).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[shared])
        if name == "ablate":
            p.add_argument("--sweep", choices=SWEEPS, required=True)
    return parser


def parse_overrides(extra: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise C.ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise C.ConfigError(f"missing value for {tok}")
            value = extra[i + 1]
            i += 2
        key = ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key not in C.DEFAULTS:
            raise C.ConfigError(f"unknown option --{key.replace('_', '-')}")
        out[key] = value
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = parse_overrides(extra)
        for key in ("seed", "out_dir", "dataset"):
            if getattr(args, key) is not None:
                overrides[key] = getattr(args, key)
        file_values = C.parse_config_file(args.config) if args.config else {}
        cfg = C.resolve(file_values, overrides)
        run = Run(args.command, cfg)
        HANDLERS[args.command](run, args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, C.ConfigError, GraphFormatError, OSError, IndexError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, RuntimeError, SamplingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
