"""Command-line entry points: topology, tree, train, energy.

Exit codes: 0 success, 2 configuration error, 3 infeasible topology,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .connectivity import InterPlaneGraph, build_interplane_graph, sampling_grid
from .errors import (
    ConfigurationError,
    DisconnectedConstellationError,
    NumericalError,
    TopologyError,
)
from .geometry import write_positions_csv
from .learning import classification_task, quadratic_task, train
from .learning.models import SpikingClassifier
from .snn import estimate_energy, layer_mac_counts, load_checkpoint, measure_spike_rates, save_checkpoint
from .treeopt import RoutingTree, a1cp_mdst, chain_tree, load_tree_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TOPOLOGY = 3
EXIT_NUMERIC = 4


def _output_dir(config: RunConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(config.output_dir)
    root = os.environ.get("SATLEARN_OUTPUT_ROOT")
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    train_cfg = config.train
    if getattr(args, "seed", None) is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)
    if getattr(args, "engine", None) is not None:
        train_cfg = dataclasses.replace(train_cfg, engine=args.engine)
    tree_cfg = config.tree
    if getattr(args, "tree_method", None) is not None:
        tree_cfg = dataclasses.replace(tree_cfg, method=args.tree_method, file=tree_cfg.file)
    return dataclasses.replace(config, train=train_cfg, tree=tree_cfg)


def _build_graph(config: RunConfig) -> InterPlaneGraph:
    timestamps = sampling_grid(
        config.constellation,
        config.sampling.step_s,
        config.sampling.duration_s,
        config.constants,
    )
    return build_interplane_graph(
        config.constellation,
        timestamps,
        config.link,
        config.constants,
        require_every_timestamp=config.sampling.require_every_timestamp,
    )


def _resolve_tree(config: RunConfig, graph: InterPlaneGraph | None = None) -> RoutingTree:
    if config.tree.method == "explicit-file":
        return load_tree_json(config.tree.file)
    if graph is None:
        graph = _build_graph(config)
    if config.tree.method == "optimized":
        return a1cp_mdst(graph)
    return chain_tree(graph)


def cmd_topology(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = _output_dir(config, args.out)
    graph = _build_graph(config)
    graph.save_json(out / "graph.json")
    (out / "graph.dot").write_text(graph.to_dot())
    if args.positions_csv:
        write_positions_csv(out / "positions.csv", config.constellation, graph.timestamps, config.constants)
    if args.debug_links:
        from .connectivity import write_link_debug_csv

        write_link_debug_csv(
            out / "links_debug.csv", config.constellation, graph.timestamps,
            config.link, config.constants,
        )
    print(
        f"topology: {graph.n_planes} planes, {len(graph.edges)} edges, "
        f"connected={graph.is_connected()}"
    )
    if graph.n_planes == 1:
        print("warning: single-plane constellation, trivial topology")
    print(f"wrote {out / 'graph.json'} and {out / 'graph.dot'}")
    return EXIT_OK


def cmd_tree(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = _output_dir(config, args.out)
    graph = InterPlaneGraph.load_json(args.graph) if args.graph else None
    tree = _resolve_tree(config, graph)
    tree.save_json(out / "tree.json")
    (out / "tree.dot").write_text(tree.to_dot())
    print(
        f"tree ({config.tree.method}): hop-diameter {tree.hop_diameter}, "
        f"tau_tilde {tree.tau_max + 1}, weighted diameter "
        f"{tree.weighted_diameter if tree.weighted_diameter is not None else 'n/a'}"
    )
    print(f"wrote {out / 'tree.json'} and {out / 'tree.dot'}")
    return EXIT_OK


def _build_task(config: RunConfig):
    n = config.constellation.planes
    k = config.constellation.satellites_per_plane
    t = config.train
    d = config.dataset
    if t.model == "quadratic":
        return quadratic_task(
            n, k, dim=d.dim, plane_spread=d.plane_spread, jitter=d.jitter, seed=t.seed
        )
    return classification_task(
        t.model,
        n,
        k,
        heterogeneity=t.heterogeneity,
        seed=t.seed,
        n_train=d.n_train,
        n_test=d.n_test,
        n_classes=d.n_classes,
        n_features=d.n_features,
        image_size=d.image_size,
        hidden=config.model.hidden,
        conv_channels=config.model.conv_channels,
        kernel=config.model.kernel,
        dense_after_conv=config.model.dense_after_conv,
        lif=config.model.lif(),
        hybrid=config.model.hybrid(t.seed),
    )


def _write_summary_csv(out: Path, records) -> None:
    fields = list(records[0].to_json_dict()) if records else []
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.to_json_dict())


def cmd_train(args) -> int:
    import torch

    torch.set_num_threads(1)  # keeps reruns byte-identical
    config = _apply_overrides(load_config(args.config), args)
    out = _output_dir(config, args.out)
    started = time.time()

    tree = _resolve_tree(config)
    task = _build_task(config)
    tree.save_json(out / "tree.json")

    records = []
    metrics_path = out / "metrics.jsonl"
    with open(metrics_path, "w") as metrics_fh:

        def sink(rec):
            records.append(rec)
            metrics_fh.write(json.dumps(rec.to_json_dict(), sort_keys=True))
            metrics_fh.write("\n")
            metrics_fh.flush()

        try:
            result = train(task, config.train, tree, record_sink=sink)
        except NumericalError:
            _write_summary_csv(out, records)
            print(f"training aborted; partial metrics in {metrics_path}", file=sys.stderr)
            raise
    _write_summary_csv(out, records)

    for iteration, vec in result.checkpoints.items():
        vec.tofile(out / f"checkpoint_{iteration:05d}.bin")

    model = task.model_factory()
    model.set_params(result.mean_model)
    if isinstance(model, SpikingClassifier):
        eval_data = task.test_eval_data if task.test_eval_data is not None else task.train_eval_data
        rng = np.random.default_rng(np.random.SeedSequence([config.train.seed, 808]))
        from .snn import rate_encode

        spikes = rate_encode(eval_data.x, model.net.lif.timesteps, rng)
        rates = measure_spike_rates(model.net, spikes)
        save_checkpoint(out / "model", model.net, rates)
    else:
        result.mean_model.tofile(out / "model.bin")
        with open(out / "model.json", "w") as fh:
            json.dump({"dtype": "float64", "n_params": int(result.mean_model.size)}, fh)
            fh.write("\n")

    from .config import _as_jsonable

    manifest = {
        "version": __version__,
        "config_hash": config.config_hash(),
        "config": _as_jsonable(config),
        "seed": config.train.seed,
        "engine": config.train.engine,
        "model": config.train.model,
        "tree": tree.to_json_dict(),
        "stage_seeds": {"init": config.train.seed, "partition": [config.train.seed, 404], "local": [config.train.seed, 1]},
        "iterations_run": len(result.records),
        "rounds_consumed": result.records[-1].rounds if result.records else 0,
        "wall_time_s": time.time() - started,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    final = result.records[-1] if result.records else None
    if final is not None:
        print(
            f"train: {len(result.records)} iterations, {final.rounds} rounds, "
            f"loss {final.train_loss:.6f}"
            + (f", accuracy {final.test_accuracy:.4f}" if final.test_accuracy is not None else "")
        )
    print(f"wrote metrics to {out / 'metrics.jsonl'}")
    return EXIT_OK


def cmd_energy(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = _output_dir(config, args.out)
    net, rates = load_checkpoint(args.checkpoint)
    if rates is None:
        raise ConfigurationError(
            f"checkpoint {args.checkpoint} has no recorded spike rates; "
            "run `satlearn train` with a spiking model first"
        )
    macs = layer_mac_counts(net)
    ann_layers, ann_total = estimate_energy(macs, None, net.lif.timesteps, "ann")
    snn_layers, snn_total = estimate_energy(macs, rates, net.lif.timesteps, "snn")

    with open(out / "energy.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "macs", "input_rate", "ann_joules", "snn_joules", "ratio_ann_over_snn"])
        for (name, m), (_, e_ann), (_, e_snn), rate in zip(macs, ann_layers, snn_layers, rates):
            ratio = e_ann / e_snn if e_snn > 0 else float("inf")
            writer.writerow([name, m, repr(rate), repr(e_ann), repr(e_snn), repr(ratio)])
        writer.writerow(["total", sum(m for _, m in macs), "", repr(ann_total), repr(snn_total),
                         repr(ann_total / snn_total if snn_total > 0 else float("inf"))])
    print(f"energy: ANN {ann_total:.3e} J, SNN {snn_total:.3e} J per inference "
          f"(ratio {ann_total / snn_total if snn_total else float('inf'):.2f}x)")
    print(f"wrote {out / 'energy.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satlearn", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML run configuration")
    common.add_argument("--out", default=None, help="output directory override")
    common.add_argument("--seed", type=int, default=None, help="seed override")
    common.add_argument("--engine", choices=["relaysum", "gossip", "allreduce"], default=None)
    common.add_argument(
        "--tree-method", choices=["optimized", "chain", "explicit-file"], default=None
    )

    p = sub.add_parser("topology", parents=[common], help="build the inter-plane graph")
    p.add_argument("--positions-csv", action="store_true", help="also export satellite positions")
    p.add_argument(
        "--debug-links", action="store_true",
        help="export per-pair distance/Doppler diagnostics (projected and raw speeds)",
    )
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("tree", parents=[common], help="derive the aggregation tree")
    p.add_argument("--graph", default=None, help="existing graph.json to reuse")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("train", parents=[common], help="run decentralized training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("energy", parents=[common], help="ANN vs SNN energy report")
    p.add_argument("--checkpoint", required=True, help="checkpoint path prefix (no extension)")
    p.set_defaults(func=cmd_energy)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DisconnectedConstellationError, TopologyError) as exc:
        print(f"infeasible topology: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except (NumericalError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
