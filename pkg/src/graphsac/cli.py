"""Command-line interface.

Subcommands: ``detect``, ``inject``, ``eval``, ``sweep``, ``verify``,
``gen-sbm``, ``bench``.  Runs are driven by a JSON config file plus flag
overrides; every output directory receives CSV/JSON data files and, on the
report paths, matplotlib figures rendered next to them.

Exit codes: 0 success, 1 failed verification reports, 2 configuration
errors, 3 every draw rejected, 4 I/O or data-format errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import plots
from .diffusion import DiffusionModel
from .errors import (
    AllDrawsRejectedError,
    BoundsError,
    ConfigError,
    GraphsacError,
    IncompleteLabelsError,
    ParseError,
)
from .evaluate import auc_report, ingest_external_scores, rank_auc, sweep_grid
from .baselines import METRICS, baseline_scores
from .graph import GraphLoadOptions, load_graph, load_labels, save_edges, save_labels
from .inject import ingest_perturbed_graph, make_injector
from .oracle import (
    TwoLevelFilter,
    enumerate_ensemble,
    exact_ensemble_means,
    verify_bias_identity,
    verify_concentration,
    verify_diffusion_identity,
    verify_verdict_identity,
)
from .sampler import GraphSacConfig, ScoreVector, run_graphsac
from .sbm import demo_pair, generate_sbm

EXIT_OK = 0
EXIT_REPORT_FAILED = 1
EXIT_CONFIG = 2
EXIT_ALL_REJECTED = 3
EXIT_IO = 4


# ---------------------------------------------------------------- config

def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    # summary.json files embed the config they were produced from
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data


def apply_overrides(config: dict, args) -> dict:
    config = dict(config)
    if getattr(args, "seed", None) is not None:
        config["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        config["output_dir"] = args.out
    detector = dict(config.get("detector", {"kind": "graphsac"}))
    for flag, key in [
        ("threshold", "threshold"),
        ("draws", "num_draws"),
        ("sample_size", "sample_size"),
        ("workers", "workers"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            detector[key] = value
    config["detector"] = detector
    if getattr(args, "no_plots", False):
        config["plots"] = False
    return config


def dataset_from_config(config: dict):
    spec = config.get("dataset")
    if not spec:
        raise ConfigError("config needs a 'dataset' section (or use --demo)")
    if spec.get("demo"):
        return demo_pair(seed=int(spec.get("seed", 7)))
    if "sbm" in spec:
        params = spec["sbm"]
        sizes = params.get("sizes")
        if sizes is None:
            sizes = [int(params["size"])] * int(params["communities"])
        return generate_sbm(
            sizes,
            p_in=float(params["p_in"]),
            p_out=float(params["p_out"]),
            seed=int(params.get("seed", 0)),
        )
    if "edges" in spec and "labels" in spec:
        for key in ("edges", "labels"):
            if not Path(spec[key]).exists():
                raise ConfigError(f"dataset file not found: {spec[key]}")
        options = GraphLoadOptions(
            num_nodes=spec.get("num_nodes"),
            keep_self_loops=bool(spec.get("keep_self_loops", False)),
            remap_ids=bool(spec.get("remap_ids", False)),
        )
        graph = load_graph(spec["edges"], options)
        labels = load_labels(spec["labels"], graph.num_nodes)
        return graph, labels
    raise ConfigError("dataset must give 'edges'+'labels', an 'sbm' block, or 'demo'")


def model_from_config(spec: dict | None) -> DiffusionModel:
    spec = spec or {}
    return DiffusionModel(
        kind=spec.get("kind", "ppr"),
        order=spec.get("order"),
        teleport=float(spec.get("teleport", 0.15)),
        scale=float(spec.get("scale", 5.0)),
    )


def detector_from_config(config: dict) -> GraphSacConfig:
    spec = config.get("detector", {})
    if spec.get("kind", "graphsac") != "graphsac":
        raise ConfigError("this command needs a 'graphsac' detector")
    try:
        return GraphSacConfig(
            sample_size=spec.get("sample_size"),
            num_draws=int(spec.get("num_draws", 50)),
            threshold=float(spec.get("threshold", 0.5)),
            master_seed=int(config.get("seed", 0)),
            model=model_from_config(spec.get("model")),
            workers=int(spec.get("workers", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def injector_from_config(config: dict):
    spec = config.get("injector")
    if not spec:
        return None, None
    kind = spec.get("kind")
    if kind == "perturbed":
        return "perturbed", spec
    count = int(spec.get("count", 0))
    if count < 1:
        raise ConfigError("injector needs a positive 'count'")
    try:
        return make_injector(kind, **{
            k: v for k, v in spec.items() if k not in ("kind", "count")
        }), spec
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def output_dir(config: dict) -> Path:
    default = os.environ.get("GRAPHSAC_OUT", "graphsac-out")
    return plots.ensure_dir(config.get("output_dir", default))


def plots_enabled(config: dict) -> bool:
    return bool(config.get("plots", True))


# ---------------------------------------------------------------- writers

def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_scores_csv(path, values):
    _write_csv(path, ["node", "score"], [(n, repr(float(v))) for n, v in enumerate(values)])


def read_scores_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header[:2] != ["node", "score"]:
            raise ParseError(f"unexpected score header {header!r}", 1)
        pairs = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                pairs[int(row[0])] = float(row[1])
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), lineno) from None
    missing = [n for n in range(len(pairs)) if n not in pairs]
    if missing:
        raise IncompleteLabelsError(missing)
    return np.asarray([pairs[n] for n in range(len(pairs))])


def write_draws_csv(path, draws):
    rows = [
        (
            d.index,
            " ".join(str(v) for v in d.sample),
            repr(d.consensus_ratio),
            int(d.accepted),
            "" if d.contamination is None else d.contamination,
        )
        for d in draws
    ]
    _write_csv(path, ["draw", "sample", "consensus_ratio", "accepted", "contamination"], rows)


def write_anomalies(path, anomalies):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for node in anomalies:
            handle.write(f"{node}\n")


def read_anomalies(path) -> list[int]:
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            text = line.split("#", 1)[0].strip()
            if text:
                out.append(int(text))
    return out


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


# ---------------------------------------------------------------- commands

def _prepare_run(config):
    graph, labels = dataset_from_config(config)
    injector, inj_spec = injector_from_config(config)
    anomalies = None
    if injector == "perturbed":
        result = ingest_perturbed_graph(
            graph, inj_spec["edges"], inj_spec["targets"], labels=labels
        )
        graph, labels, anomalies = result.graph, result.labels, result.anomalies
    elif injector is not None:
        rng = np.random.default_rng(
            np.random.SeedSequence(int(config.get("seed", 0)), spawn_key=(1,))
        )
        result = injector(graph, labels, int(inj_spec["count"]), rng)
        graph, labels, anomalies = result.graph, result.labels, result.anomalies
    return graph, labels, anomalies


def cmd_detect(config) -> int:
    out = output_dir(config)
    graph, labels, anomalies = _prepare_run(config)
    spec = config.get("detector", {"kind": "graphsac"})
    start = time.perf_counter()
    if spec.get("kind", "graphsac") == "baseline":
        metric = spec.get("metric", "conductance")
        if metric not in METRICS:
            raise ConfigError(f"baseline metric must be one of {METRICS}")
        scores = baseline_scores(graph, metric, invert=bool(spec.get("invert", False)))
        draws = ()
        accepted = None
    else:
        detector = detector_from_config(config)
        result = run_graphsac(graph, labels, detector, anomalies=anomalies)
        scores = result.scores
        draws = result.draws
        accepted = result.accepted_count
    wall = time.perf_counter() - start

    write_scores_csv(out / "scores.csv", scores.values)
    write_draws_csv(out / "draws.csv", draws)
    if anomalies is not None:
        write_anomalies(out / "anomalies.txt", anomalies)
    summary = {
        "command": "detect",
        "config": config,
        "num_nodes": graph.num_nodes,
        "num_edges": graph.num_edges,
        "accepted_draws": accepted,
        "wall_time_sec": wall,
    }
    if anomalies is not None:
        summary["auc"] = rank_auc(scores.values, _mask(graph.num_nodes, anomalies))
    write_json(out / "summary.json", summary)
    print(f"detect: wrote {out / 'scores.csv'} ({graph.num_nodes} nodes, {wall:.2f}s)")
    return EXIT_OK


def _mask(n, anomalies):
    mask = np.zeros(n, dtype=bool)
    mask[list(anomalies)] = True
    return mask


def cmd_inject(config) -> int:
    out = output_dir(config)
    if not config.get("injector"):
        raise ConfigError("inject needs an 'injector' section")
    graph, labels, anomalies = _prepare_run(config)
    save_edges(graph, out / "edges.txt")
    save_labels(labels, out / "labels.tsv")
    write_anomalies(out / "anomalies.txt", anomalies)
    write_json(
        out / "inject_meta.json",
        {"command": "inject", "config": config, "num_anomalies": len(anomalies)},
    )
    print(f"inject: planted {len(anomalies)} anomalies into {out}")
    return EXIT_OK


def cmd_eval(config, args) -> int:
    out = output_dir(config)
    anomalies = read_anomalies(args.anomalies)
    if args.external:
        n = args.num_nodes
        if n is None:
            with open(args.scores, "r", encoding="utf-8") as handle:
                n = sum(1 for line in handle if line.strip())
        report = ingest_external_scores(args.scores, _mask(n, anomalies))
        values = None
    else:
        values = read_scores_csv(args.scores)
        scores = ScoreVector(values=values, mask=_mask(len(values), anomalies))
        report = auc_report(scores)
    payload = {
        "auc": report.auc,
        "auc_reversed": 1.0 - report.auc,
        "precision_at_k": report.precision_at_k,
        "k": report.k,
        "num_positives": len(set(anomalies)),
    }
    write_json(out / "report.json", payload)
    _write_csv(
        out / "roc.csv",
        ["fpr", "tpr"],
        [(repr(float(a)), repr(float(b))) for a, b in zip(report.fpr, report.tpr)],
    )
    if plots_enabled(config):
        plots.save_roc(report, out / "roc.png")
        if values is not None:
            plots.save_score_histogram(
                ScoreVector(values=values, mask=_mask(len(values), anomalies)),
                out / "score_hist.png",
            )
    print(f"eval: AUC = {report.auc:.4f} -> {out / 'report.json'}")
    return EXIT_OK


def cmd_sweep(config) -> int:
    out = output_dir(config)
    graph, labels = dataset_from_config(config)
    injector, inj_spec = injector_from_config(config)
    if injector is None or injector == "perturbed":
        raise ConfigError("sweep needs a generative 'injector' section")
    detector = detector_from_config(config)
    sweep_spec = config.get("sweep", {})
    s_fractions = sweep_spec.get("s_fractions", [0.01, 0.02, 0.04, 0.08])
    k_fractions = sweep_spec.get("k_fractions", [0.05, 0.1, 0.15, 0.2])
    seeds = sweep_spec.get("seeds", [0, 1, 2, 3, 4])
    start = time.perf_counter()
    result = sweep_grid(graph, labels, injector, detector, s_fractions, k_fractions, seeds)
    wall = time.perf_counter() - start

    for which, extra in [("auc", False), ("p_c", False), ("k_m", True)]:
        mean, sd = result.mean(which), result.sd(which)
        rows = []
        for si, s in enumerate(result.s_fractions):
            for ki, k in enumerate(result.k_fractions):
                row = [s, k, repr(float(mean[si, ki])), repr(float(sd[si, ki]))]
                if extra:
                    row.append(repr(float(result.max(which)[si, ki])))
                rows.append(row)
        header = ["s_fraction", "k_fraction", "mean", "sd"] + (["max"] if extra else [])
        name = {"auc": "grid_auc.csv", "p_c": "grid_pc.csv", "k_m": "grid_km.csv"}[which]
        _write_csv(out / name, header, rows)
    if plots_enabled(config):
        plots.save_grid_heatmap(result, "auc", out / "grid_auc.png", "mean AUC")
        plots.save_grid_heatmap(result, "p_c", out / "grid_pc.png", "discarded contaminated share")
        plots.save_grid_heatmap(result, "k_m", out / "grid_km.png", "max accepted contamination")
    write_json(
        out / "sweep_summary.json",
        {"command": "sweep", "config": config, "wall_time_sec": wall},
    )
    print(f"sweep: {len(s_fractions)}x{len(k_fractions)} grid, {len(seeds)} seeds "
          f"({wall:.1f}s) -> {out}")
    return EXIT_OK


def _verify_fixture(seed=0):
    """Two-community fixture small enough for exhaustive enumeration."""
    graph, labels = generate_sbm([6, 4], p_in=0.85, p_out=0.08, seed=seed)
    anomalies = (7, 9)
    corrupted = labels.replace_rows({a: (0,) for a in anomalies})
    return graph, labels, corrupted, anomalies


def cmd_verify(config, args) -> int:
    out = output_dir(config)
    checks = args.checks.split(",") if args.checks else [
        "bias", "diffusion", "concentration", "verdict"
    ]
    trials = args.trials
    reports = []
    model = DiffusionModel(kind="ppr", order=3)

    if "bias" in checks or "diffusion" in checks:
        graph, labels, _, _ = _verify_fixture(seed=2)
        ensemble = enumerate_ensemble(graph.num_nodes, 2, (1, 7))
        if "bias" in checks:
            for f in (0.0, 0.1 / len(ensemble.contaminated), None):
                fm = TwoLevelFilter(f) if f is not None else TwoLevelFilter.uniform(ensemble)
                means = exact_ensemble_means(graph, labels, ensemble, model, filter_model=fm)
                reports.append(verify_bias_identity(ensemble, fm, means))
        if "diffusion" in checks:
            reports.append(verify_diffusion_identity(graph, labels, ensemble, model))
    if "concentration" in checks:
        graph, labels = generate_sbm([4, 4], p_in=0.9, p_out=0.1, seed=3)
        ensemble = enumerate_ensemble(8, 2, (1, 6))
        reports.extend(
            verify_concentration(graph, labels, ensemble, model, trials=trials, seed=11)
        )
    if "verdict" in checks:
        graph, _, corrupted, anomalies = _verify_fixture(seed=0)
        ensemble = enumerate_ensemble(10, 3, anomalies)
        vmodel = DiffusionModel(kind="ppr", order=5)
        reports.append(
            verify_verdict_identity(
                graph, corrupted, ensemble, vmodel, threshold=0.6,
                km_candidate=min(len(anomalies), ensemble.sample_size),
            )
        )
        # extreme threshold: accepts everything, so the nonvacuous
        # contamination cap must be reported as violated
        relaxed = verify_verdict_identity(
            graph, corrupted, ensemble, vmodel, threshold=0.0
        )
        reports.append(relaxed)

    write_json(out / "verify_reports.json", [r.to_dict() for r in reports])
    if plots_enabled(config) and any(r.name.startswith("concentration") for r in reports):
        plots.save_concentration_decay(reports, out / "concentration_decay.png")
    failed = 0
    for report in reports:
        expected_violation = report.name == "verdict-identity" and report.details.get("skipped")
        status = "PASS" if report.passed or expected_violation else "FAIL"
        if status == "FAIL":
            failed += 1
        label = report.name + (" [violation reported]" if expected_violation else "")
        print(f"{status} {label}: lhs={report.lhs:.6g} rhs={report.rhs:.6g} gap={report.gap:.3g}")
    print(f"verify: {len(reports)} reports -> {out / 'verify_reports.json'}")
    return EXIT_OK if failed == 0 else EXIT_REPORT_FAILED


def cmd_gen_sbm(config, args) -> int:
    out = output_dir(config)
    sizes = [int(v) for v in args.sizes.split(",")] if args.sizes else (
        [args.size] * args.communities
    )
    graph, labels = generate_sbm(sizes, args.p_in, args.p_out, seed=config.get("seed", 0))
    save_edges(graph, out / "edges.txt")
    save_labels(labels, out / "labels.tsv")
    write_json(
        out / "meta.json",
        {
            "command": "gen-sbm",
            "sizes": sizes,
            "p_in": args.p_in,
            "p_out": args.p_out,
            "seed": config.get("seed", 0),
            "num_nodes": graph.num_nodes,
            "num_edges": graph.num_edges,
        },
    )
    print(f"gen-sbm: {graph.num_nodes} nodes, {graph.num_edges} edges -> {out}")
    return EXIT_OK


def cmd_bench(config, args) -> int:
    out = output_dir(config)
    graph, labels, anomalies = _prepare_run(config)
    detector = detector_from_config(config)
    times = []
    for _ in range(args.repeats):
        start = time.perf_counter()
        run_graphsac(graph, labels, detector, anomalies=anomalies)
        times.append(time.perf_counter() - start)
    payload = {
        "command": "bench",
        "config": config,
        "num_nodes": graph.num_nodes,
        "num_edges": graph.num_edges,
        "repeats": args.repeats,
        "runs_sec": times,
        "mean_sec": float(np.mean(times)),
        "min_sec": float(np.min(times)),
    }
    write_json(out / "bench.json", payload)
    print(f"bench: mean {payload['mean_sec']:.3f}s over {args.repeats} runs -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_common(parser):
    parser.add_argument("--config", help="JSON config file (or a summary.json)")
    parser.add_argument("--demo", action="store_true", help="use the bundled tiny graph")
    parser.add_argument("--edges", help="edge list file")
    parser.add_argument("--labels", help="label file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", help="output directory (default $GRAPHSAC_OUT)")
    parser.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def _add_detector_flags(parser):
    parser.add_argument("--threshold", type=float, help="consensus threshold T")
    parser.add_argument("--draws", type=int, help="number of draws I")
    parser.add_argument("--sample-size", dest="sample_size", type=int, help="seeds per draw S")
    parser.add_argument("--workers", type=int, help="parallel draw workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphsac",
        description="Sampling-and-consensus anomaly detection on labeled graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="score nodes for anomalies")
    _add_common(p)
    _add_detector_flags(p)

    p = sub.add_parser("inject", help="plant ground-truth anomalies")
    _add_common(p)
    p.add_argument("--kind", choices=["rw-labels", "clustered", "rw-edges"])
    p.add_argument("--count", type=int)
    p.add_argument("--walk-length", dest="walk_length", type=int)

    p = sub.add_parser("eval", help="evaluate a score file against ground truth")
    _add_common(p)
    p.add_argument("--scores", required=True, help="scores.csv or external TSV")
    p.add_argument("--anomalies", required=True, help="ground-truth ids, one per line")
    p.add_argument("--external", action="store_true",
                   help="scores file is 'node<TAB>score' from an external method")
    p.add_argument("--num-nodes", dest="num_nodes", type=int)

    p = sub.add_parser("sweep", help="grid sweep over sample and anomaly fractions")
    _add_common(p)
    _add_detector_flags(p)

    p = sub.add_parser("verify", help="brute-force checks of the closed-form analysis")
    _add_common(p)
    p.add_argument("--checks", help="comma list: bias,diffusion,concentration,verdict")
    p.add_argument("--trials", type=int, default=200)

    p = sub.add_parser("gen-sbm", help="generate a stochastic block model dataset")
    _add_common(p)
    p.add_argument("--communities", type=int, default=4)
    p.add_argument("--size", type=int, default=250)
    p.add_argument("--sizes", help="comma list of community sizes (overrides --size)")
    p.add_argument("--p-in", dest="p_in", type=float, default=0.05)
    p.add_argument("--p-out", dest="p_out", type=float, default=0.002)

    p = sub.add_parser("bench", help="time repeated detection runs")
    _add_common(p)
    _add_detector_flags(p)
    p.add_argument("--repeats", type=int, default=3)
    return parser


def _config_from_args(args) -> dict:
    if getattr(args, "config", None):
        config = load_config(args.config)
    else:
        config = {}
    if getattr(args, "demo", False):
        config["dataset"] = {"demo": True}
    elif getattr(args, "edges", None) and getattr(args, "labels", None):
        config["dataset"] = {"edges": args.edges, "labels": args.labels}
    if getattr(args, "kind", None):
        injector = {"kind": args.kind, "count": args.count or 10}
        if getattr(args, "walk_length", None) is not None:
            injector["walk_length"] = args.walk_length
        config["injector"] = injector
    config.setdefault("seed", 0)
    return apply_overrides(config, args)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "detect":
            return cmd_detect(config)
        if args.command == "inject":
            return cmd_inject(config)
        if args.command == "eval":
            return cmd_eval(config, args)
        if args.command == "sweep":
            return cmd_sweep(config)
        if args.command == "verify":
            return cmd_verify(config, args)
        if args.command == "gen-sbm":
            return cmd_gen_sbm(config, args)
        if args.command == "bench":
            return cmd_bench(config, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AllDrawsRejectedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALL_REJECTED
    except (OSError, ParseError, IncompleteLabelsError, BoundsError, GraphsacError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
