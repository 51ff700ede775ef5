"""Ranking evaluation and experiment sweeps.

AUC is computed from midranks, which matches the probabilistic definition
(chance that a random anomaly outranks a random normal node, ties counting
half) and equals the trapezoidal area under the tie-grouped ROC curve.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IncompleteLabelsError, ParseError
from .graph import Graph, LabelMatrix, _open_text
from .sampler import GraphSacConfig, ScoreVector, rank_anomalies, run_graphsac

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    """AUC, the ROC curve behind it, and precision at K."""

    auc: float
    fpr: np.ndarray
    tpr: np.ndarray
    precision_at_k: float
    k: int
    metadata: dict = field(default_factory=dict)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def rank_auc(values: np.ndarray, mask: np.ndarray) -> float:
    """Midrank (Mann-Whitney) AUC of ``values`` against a boolean mask."""
    mask = np.asarray(mask, dtype=bool)
    pos = int(mask.sum())
    neg = len(mask) - pos
    if pos == 0 or neg == 0:
        raise ValueError("ground truth must contain both positives and negatives")
    ranks = _midranks(np.asarray(values, dtype=float))
    u = ranks[mask].sum() - pos * (pos + 1) / 2.0
    return float(u / (pos * neg))


def roc_curve(values: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ROC points from a threshold sweep over the distinct score values.

    Tied scores collapse into a single point, so the trapezoidal area equals
    the midrank AUC exactly.
    """
    mask = np.asarray(mask, dtype=bool)
    order = np.argsort(-np.asarray(values, dtype=float), kind="stable")
    sorted_vals = np.asarray(values, dtype=float)[order]
    sorted_pos = mask[order].astype(np.int64)
    # last index of each distinct-score group
    boundary = np.flatnonzero(np.diff(sorted_vals) != 0)
    last = np.append(boundary, len(sorted_vals) - 1)
    tp = np.cumsum(sorted_pos)[last]
    fp = (last + 1) - tp
    pos = int(mask.sum())
    neg = len(mask) - pos
    tpr = np.concatenate(([0.0], tp / pos))
    fpr = np.concatenate(([0.0], fp / neg))
    return fpr, tpr


def precision_at_k(scores: ScoreVector, k: int) -> float:
    top = rank_anomalies(scores, k)
    return float(scores.mask[top].sum() / k)


def auc_report(scores: ScoreVector, k: int | None = None, metadata: dict | None = None) -> EvalReport:
    """Full evaluation of a scored node set against its ground-truth mask."""
    if scores.mask is None:
        raise ValueError("scores carry no ground-truth mask")
    if k is None:
        k = int(scores.mask.sum())
    fpr, tpr = roc_curve(scores.values, scores.mask)
    return EvalReport(
        auc=rank_auc(scores.values, scores.mask),
        fpr=fpr,
        tpr=tpr,
        precision_at_k=precision_at_k(scores, k),
        k=k,
        metadata=metadata or {},
    )


def ingest_external_scores(source, mask) -> EvalReport:
    """Evaluate an external method's ``node<TAB>score`` file.

    The file must cover every node exactly once; the ground truth mask is
    ours, so comparisons against in-package detectors are like for like.
    """
    mask = np.asarray(mask, dtype=bool)
    values = {}
    with _open_text(source) as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].rstrip("\n")
            if not text.strip():
                continue
            parts = text.split("\t")
            if len(parts) != 2:
                raise ParseError(f"expected 'node<TAB>score', got {text!r}", lineno)
            try:
                node = int(parts[0])
                score = float(parts[1])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not math.isfinite(score):
                raise ParseError(f"non-finite score for node {node}", lineno)
            values[node] = score
    missing = [n for n in range(len(mask)) if n not in values]
    if missing:
        raise IncompleteLabelsError(missing)
    arr = np.asarray([values[n] for n in range(len(mask))])
    return auc_report(ScoreVector(values=arr, mask=mask), metadata={"source": "external"})


@dataclass(frozen=True)
class SweepResult:
    """Per-cell, per-seed outcomes of an (S/N, K/N) grid sweep."""

    s_fractions: tuple[float, ...]
    k_fractions: tuple[float, ...]
    seeds: tuple[int, ...]
    auc: np.ndarray        # shape (len(s), len(k), len(seeds))
    p_c: np.ndarray        # share of contaminated draws the filter discarded
    k_m: np.ndarray        # max contamination among accepted draws

    def mean(self, which: str) -> np.ndarray:
        return np.nanmean(getattr(self, which), axis=2)

    def sd(self, which: str) -> np.ndarray:
        return np.nanstd(getattr(self, which), axis=2)

    def max(self, which: str) -> np.ndarray:
        return np.nanmax(getattr(self, which), axis=2)


def _cell_seed(seed: int, si: int, ki: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(si, ki, stream))


def sweep_grid(
    graph: Graph,
    labels: LabelMatrix,
    injector,
    config: GraphSacConfig,
    s_fractions,
    k_fractions,
    seeds,
) -> SweepResult:
    """Run detection over a grid of sample and anomaly fractions.

    For each cell and seed: plant ``K = round(k_frac * N)`` anomalies, run
    the detector with ``S = round(s_frac * N)`` samples per draw, and record
    AUC, the discarded share of contaminated draws (1.0 when no draw was
    contaminated), and the worst contamination among accepted draws.  Cell
    failures are logged and recorded as NaN; the grid never aborts.
    Results are deterministic per (seed, cell) and independent of cell order.
    """
    s_fractions = tuple(float(v) for v in s_fractions)
    k_fractions = tuple(float(v) for v in k_fractions)
    seeds = tuple(int(v) for v in seeds)
    n = graph.num_nodes
    shape = (len(s_fractions), len(k_fractions), len(seeds))
    auc = np.full(shape, np.nan)
    p_c = np.full(shape, np.nan)
    k_m = np.full(shape, np.nan)

    for si, s_frac in enumerate(s_fractions):
        for ki, k_frac in enumerate(k_fractions):
            for wi, seed in enumerate(seeds):
                try:
                    cell = _run_cell(
                        graph, labels, injector, config, s_frac, k_frac, seed, si, ki
                    )
                except Exception as exc:  # cell-level failures become NaN
                    log.warning(
                        "sweep cell (s=%g, k=%g, seed=%d) failed: %s",
                        s_frac, k_frac, seed, exc,
                    )
                    continue
                auc[si, ki, wi], p_c[si, ki, wi], k_m[si, ki, wi] = cell
    return SweepResult(
        s_fractions=s_fractions,
        k_fractions=k_fractions,
        seeds=seeds,
        auc=auc,
        p_c=p_c,
        k_m=k_m,
    )


def _run_cell(graph, labels, injector, config, s_frac, k_frac, seed, si, ki):
    n = graph.num_nodes
    count = int(round(k_frac * n))
    size = max(1, int(round(s_frac * n)))
    if count == 0:
        return np.nan, 1.0, 0.0
    rng = np.random.default_rng(_cell_seed(seed, si, ki, 0))
    injected = injector(graph, labels, count, rng)
    master = int(_cell_seed(seed, si, ki, 1).generate_state(1)[0])
    cfg = replace(config, sample_size=size, master_seed=master)
    result = run_graphsac(injected.graph, injected.labels, cfg, anomalies=injected.anomalies)

    cell_auc = rank_auc(result.scores.values, result.scores.mask)
    contaminated = [d for d in result.draws if d.contamination]
    if contaminated:
        discarded = sum(1 for d in contaminated if not d.accepted)
        cell_pc = discarded / len(contaminated)
    else:
        cell_pc = 1.0
    accepted_contam = [d.contamination for d in result.draws if d.accepted]
    cell_km = float(max(accepted_contam, default=0))
    return cell_auc, cell_pc, cell_km


def timed_run(graph, labels, config, anomalies=None):
    """Run the detector and report the wall time of the solve alone."""
    start = time.perf_counter()
    result = run_graphsac(graph, labels, config, anomalies=anomalies)
    return result, time.perf_counter() - start
