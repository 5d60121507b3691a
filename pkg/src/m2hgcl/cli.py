"""Command-line entry point: train, eval, sweep, ablate, expand, synth.

Every command that involves randomness takes one base seed; multi-run
commands derive per-run sub-seeds with a fixed splitting scheme
(numpy SeedSequence), and each run record stores the seeds it used. Run
records hash their deterministic content (config, input hashes, loss curve,
metrics, embedding bytes) so identical seed + config reproduces an identical
``record_hash``. Sweeps and ablations fan runs out across worker processes;
``M2HGCL_THREADS`` caps the worker count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .data import (DatasetManifest, SyntheticSpec, generate_synthetic,
                   load_dataset, load_embeddings, read_labels_file,
                   save_embeddings, write_dataset)
from .evaluation import (AUC_DEFINITION, EvalReport, evaluate_classification,
                         evaluate_clustering)
from .metapath import expand_metapath, expanded_adjacency, metapath_adjacency
from .training import VARIANTS, TrainConfig, train


def derive_seeds(base_seed: int, count: int) -> list[int]:
    """Fixed sub-seed splitting scheme for multi-run commands."""
    return [int(s) for s in np.random.SeedSequence(base_seed).generate_state(count)]


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def hash_inputs(paths: list[Path]) -> str:
    digest = hashlib.sha256()
    for path in paths:
        digest.update(str(path.name).encode())
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def manifest_input_files(manifest_path: Path) -> list[Path]:
    manifest = DatasetManifest.load(manifest_path)
    files = [Path(manifest_path)]
    for nt in manifest.node_types:
        files.append(manifest.resolve(nt["feature_file"]))
    for rel in manifest.relations:
        files.append(manifest.resolve(rel["edge_file"]))
    files.append(manifest.resolve(manifest.labels_file))
    return files


def build_run_record(command: str, config: dict, inputs_hash: str,
                     loss_curve: list[float], eval_report: dict | None,
                     extras: dict | None = None, context: dict | None = None,
                     wall_clock_sec: float = 0.0) -> dict:
    """Run record whose hash covers only run-determined content.

    ``extras`` must be deterministic given seed + config + inputs; paths and
    timings go into the unhashed ``context``.
    """
    record = {
        "command": command,
        "config": config,
        "inputs_hash": inputs_hash,
        "loss_curve": loss_curve,
        "eval_report": eval_report,
        "extras": extras or {},
    }
    record["record_hash"] = _sha256_bytes(_canonical_json(record).encode())
    record["context"] = context or {}
    record["wall_clock_sec"] = wall_clock_sec
    return record


def _load_config(config_path: str | None, overrides: dict) -> TrainConfig:
    raw = {}
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        raw = json.loads(path.read_text(encoding="utf-8"))
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_dict(raw)


def _save_params(params, path: Path) -> None:
    np.savez(path, **{name: t.values for name, t in params.registry().items()})


def _max_workers(n_jobs: int) -> int:
    cap = os.environ.get("M2HGCL_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, limit))


# ---------------------------------------------------------------------------
# single training run (also the sweep/ablate worker)

def run_training_job(manifest_path: str, config_dict: dict, split_fraction: float | None,
                     eval_seeds: list[int], out_dir: str | None) -> dict:
    """Train once, optionally evaluate, optionally write artifacts; returns the record."""
    config = TrainConfig.from_dict(config_dict)
    graph, labels, paths = load_dataset(manifest_path)
    started = time.perf_counter()
    result = train(graph, paths, config)

    report = None
    if split_fraction is not None:
        report = evaluate_classification(result.embedding, labels,
                                         split_fraction, eval_seeds).to_dict()
    wall = time.perf_counter() - started

    extras = {
        "epochs_run": result.epochs_run,
        "stopped_early": result.stopped_early,
        "semantic_weights": [float(v) for v in result.semantic_weights],
        "scale_weights": {k: [float(a), float(b)]
                          for k, (a, b) in result.scale_weights.items()},
        "feature_dims": result.feature_dims,
        "eval_seeds": eval_seeds,
        "embedding_shape": list(result.embedding.shape),
        "embeddings_sha256": _sha256_bytes(
            np.ascontiguousarray(result.embedding.astype("<f4")).tobytes()),
    }
    context = {"manifest": str(manifest_path)}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_embeddings(result.embedding, out / "embeddings.bin")
        _save_params(result.params, out / "params.npz")
        context["embeddings_file"] = str(out / "embeddings.bin")

    record = build_run_record(
        command="train",
        config=config.to_dict(),
        inputs_hash=hash_inputs(manifest_input_files(Path(manifest_path))),
        loss_curve=result.loss_curve,
        eval_report=report,
        extras=extras,
        context=context,
        wall_clock_sec=wall,
    )
    if out_dir is not None:
        (Path(out_dir) / "run_record.json").write_text(
            json.dumps(record, indent=2) + "\n", encoding="utf-8")
    return record


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_target=args.n_target, classes=args.classes,
        aux_sizes=tuple(int(s) for s in args.aux_sizes.split(",")),
        p_in=args.p_in, p_out=args.p_out, feature_noise=args.noise, seed=args.seed)
    graph, labels, paths = generate_synthetic(spec)
    manifest = write_dataset(args.out, args.name, graph, labels, paths)
    print(f"wrote {args.name}: {graph.n_target} target nodes, "
          f"{len(paths)} meta-paths -> {manifest}")
    return 0


def cmd_train(args) -> int:
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise FileNotFoundError(f"manifest not found: {manifest}")
    config = _load_config(args.config, {"variant": args.variant, "seed": args.seed})
    record = run_training_job(str(manifest), config.to_dict(), None, [], args.out)
    final = record["loss_curve"][-1] if record["loss_curve"] else float("nan")
    print(f"trained {config.variant} for {record['extras']['epochs_run']} epochs "
          f"(final loss {final:.6f})")
    print(f"outputs in {args.out} (record hash {record['record_hash'][:12]})")
    return 0


def cmd_eval(args) -> int:
    embeddings = load_embeddings(args.embeddings)
    labels = read_labels_file(Path(args.labels), embeddings.shape[0])
    seeds = derive_seeds(args.seed, args.seeds)
    if args.task == "classify":
        report = evaluate_classification(embeddings, labels, args.split, seeds)
        header = (f"classification ({int(args.split * 100)}% train, "
                  f"{args.seeds} seeds; AUC: {AUC_DEFINITION})")
    else:
        report = evaluate_clustering(embeddings, labels, seeds, k=args.k)
        header = f"clustering (k-means, {args.seeds} seeds)"
    print(report.format_table(header))
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
        print(f"report written to {args.out}")
    return 0


def _parse_grid(grid: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in grid.split(":"))
    except ValueError:
        raise ValueError(f"grid must be 'start:stop:step', got {grid!r}") from None
    if step <= 0 or stop < start:
        raise ValueError(f"invalid grid {grid!r}")
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def _fan_out(jobs: list[tuple]) -> list[dict]:
    workers = _max_workers(len(jobs))
    if workers == 1:
        return [run_training_job(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_training_job, *zip(*jobs)))


def cmd_sweep(args) -> int:
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise FileNotFoundError(f"manifest not found: {manifest}")
    values = _parse_grid(args.grid)
    seeds = derive_seeds(args.seed, args.seeds)
    base = _load_config(args.config, {})

    jobs = []
    for value in values:
        for seed in seeds:
            cfg = base.to_dict()
            cfg[args.param] = value
            cfg["seed"] = seed
            jobs.append((str(manifest), cfg, args.split, [seed], None))
    records = _fan_out(jobs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    per_value: dict[float, list[float]] = {v: [] for v in values}
    for (value, seed), record in zip(((v, s) for v in values for s in seeds), records):
        (out / f"run_{args.param}_{value}_{seed}.json").write_text(
            json.dumps(record, indent=2) + "\n", encoding="utf-8")
        per_value[value].append(record["eval_report"]["macro_f1"]["mean"])
    print(f"sweep over {args.param} ({len(values)} values x {args.seeds} seeds)")
    for value in values:
        scores = np.asarray(per_value[value])
        summary.append({args.param: value, "macro_f1_mean": float(scores.mean()),
                        "macro_f1_std": float(scores.std())})
        print(f"  {args.param}={value:<4} macro_f1={scores.mean():.4f} +/- {scores.std():.4f}")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_ablate(args) -> int:
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise FileNotFoundError(f"manifest not found: {manifest}")
    seeds = derive_seeds(args.seed, args.seeds)
    base = _load_config(args.config, {})

    jobs = []
    for variant in VARIANTS:
        for seed in seeds:
            cfg = base.to_dict()
            cfg["variant"] = variant
            cfg["seed"] = seed
            jobs.append((str(manifest), cfg, args.split, [seed], None))
    records = _fan_out(jobs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    idx = 0
    print(f"ablation over {len(VARIANTS)} variants x {args.seeds} seeds")
    for variant in VARIANTS:
        scores = []
        for seed in seeds:
            record = records[idx]
            idx += 1
            (out / f"run_{variant}_{seed}.json").write_text(
                json.dumps(record, indent=2) + "\n", encoding="utf-8")
            scores.append(record["eval_report"]["macro_f1"]["mean"])
        arr = np.asarray(scores)
        summary.append({"variant": variant, "macro_f1_mean": float(arr.mean()),
                        "macro_f1_std": float(arr.std())})
        print(f"  {variant:<12} macro_f1={arr.mean():.4f} +/- {arr.std():.4f}")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_expand(args) -> int:
    graph, _, paths = load_dataset(args.manifest)
    match = [p for p in paths if p.name == args.metapath]
    if not match:
        raise ValueError(f"meta-path {args.metapath!r} not in manifest "
                         f"(available: {[p.name for p in paths]})")
    path = match[0]
    expanded = expand_metapath(path)
    initial_edges = metapath_adjacency(graph, path).edge_count
    expanded_edges = expanded_adjacency(graph, path).edge_count
    print(f"{path.name} expands to {expanded.name}")
    print(f"  initial subgraph edges:  {initial_edges}")
    print(f"  expanded subgraph edges: {expanded_edges}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="m2hgcl",
        description="Multi-scale meta-path heterogeneous graph contrastive learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic planted-partition dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="synthetic")
    p.add_argument("--n-target", type=int, default=300)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--aux-sizes", default="100,100")
    p.add_argument("--p-in", type=float, default=0.05)
    p.add_argument("--p-out", type=float, default=0.002)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train on a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None, help="JSON file mirroring TrainConfig")
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate saved embeddings")
    p.add_argument("task", choices=["classify", "cluster"])
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split", type=float, default=0.4)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="base seed for sub-seed derivation")
    p.add_argument("--k", type=int, default=None, help="cluster count (default: #classes)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid sweep over tau or alpha")
    p.add_argument("--param", choices=["tau", "alpha"], required=True)
    p.add_argument("--grid", required=True, help="start:stop:step, e.g. 0.1:0.9:0.1")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", type=float, default=0.4)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="run every model variant and compare")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", type=float, default=0.4)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("expand", help="show a meta-path's 4-hop expansion")
    p.add_argument("--manifest", required=True)
    p.add_argument("--metapath", required=True)
    p.set_defaults(func=cmd_expand)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
