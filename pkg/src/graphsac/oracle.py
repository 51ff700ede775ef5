"""Brute-force verification of the sampling-bias analysis on small instances.

Everything here enumerates all size-S seed subsets of a small graph and
checks, numerically and with exact counting, the closed-form relations the
detector's design rests on:

* the filtered ensemble mean is a convex combination of the clean-subset
  mean and the contaminated-subset mean, with a weight given in closed form
  by the filter's false-alarm probability and two binomial counts;
* for linear diffusion predictions the clean/contaminated mean gap has a
  closed form in the diffusion columns of the nominal and anomalous nodes;
* the draw average concentrates around the ensemble mean at the
  matrix-Bernstein rate;
* with verdicts from the real consensus filter, an analogous identity holds
  once every clean subset is accepted and accepted contaminated subsets
  carry at most ``K_m`` anomalies.

Identity checks run on the raw linear predictions (no row normalization),
which is what the counting arguments require; the concentration check uses
the pipeline's row-stochastic predictions, which its norm bounds require.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .diffusion import (
    DiffusionModel,
    apply_series,
    diffusion_column_norms,
    predict,
    predict_raw,
)
from .errors import EnumerationCapError, GraphsacError
from .graph import Graph, LabelMatrix
from .sampler import consensus_filter

ENUMERATION_CAP = 2_000_000


def entrywise_norm(mat: np.ndarray) -> float:
    """Sum of absolute values of all entries."""
    return float(np.abs(mat).sum())


@dataclass(frozen=True)
class SubsetEnsemble:
    """All size-S subsets of V, split into clean and contaminated."""

    num_nodes: int
    sample_size: int
    anomalies: tuple[int, ...]
    clean: tuple[tuple[int, ...], ...]
    contaminated: tuple[tuple[int, ...], ...]

    @property
    def total(self) -> int:
        return len(self.clean) + len(self.contaminated)

    @property
    def num_anomalies(self) -> int:
        return len(self.anomalies)

    def cardinalities_match(self) -> bool:
        n, s, k = self.num_nodes, self.sample_size, self.num_anomalies
        return (
            self.total == math.comb(n, s)
            and len(self.clean) == math.comb(n - k, s)
            and len(self.contaminated) == math.comb(n, s) - math.comb(n - k, s)
        )


def enumerate_ensemble(
    num_nodes: int, sample_size: int, anomalies, cap: int = ENUMERATION_CAP
) -> SubsetEnsemble:
    total = math.comb(num_nodes, sample_size)
    if total > cap:
        raise EnumerationCapError(
            f"C({num_nodes},{sample_size}) = {total} exceeds cap {cap}"
        )
    anomaly_set = frozenset(int(a) for a in anomalies)
    clean, contaminated = [], []
    for subset in itertools.combinations(range(num_nodes), sample_size):
        if anomaly_set.isdisjoint(subset):
            clean.append(subset)
        else:
            contaminated.append(subset)
    return SubsetEnsemble(
        num_nodes=num_nodes,
        sample_size=sample_size,
        anomalies=tuple(sorted(anomaly_set)),
        clean=tuple(clean),
        contaminated=tuple(contaminated),
    )


@dataclass(frozen=True)
class TwoLevelFilter:
    """Filter abstraction giving every contaminated subset the same
    sampling probability ``f`` and every clean subset the complementary
    uniform share ``d``."""

    contaminated_prob: float

    def clean_prob(self, ensemble: SubsetEnsemble) -> float:
        mass = len(ensemble.contaminated) * self.contaminated_prob
        if not 0.0 <= mass <= 1.0 + 1e-12:
            raise ValueError(f"contaminated mass {mass} outside [0, 1]")
        if not ensemble.clean:
            raise ValueError("two-level filter needs at least one clean subset")
        return (1.0 - mass) / len(ensemble.clean)

    def false_alarm_prob(self, ensemble: SubsetEnsemble) -> float:
        if not ensemble.contaminated:
            return 0.0
        return ensemble.total / len(ensemble.contaminated) * self.contaminated_prob

    @classmethod
    def uniform(cls, ensemble: SubsetEnsemble) -> "TwoLevelFilter":
        return cls(contaminated_prob=1.0 / ensemble.total)


@dataclass(frozen=True)
class EnsembleMeans:
    """Exact expectations of the prediction over subset ensembles."""

    nominal: np.ndarray            # mean over clean subsets
    anomalous: np.ndarray | None   # mean over contaminated subsets
    filtered: np.ndarray | None    # expectation under the filter-biased law


@dataclass(frozen=True)
class TheoremReport:
    """One verified relation: both sides, the gap, and the verdict."""

    name: str
    lhs: float
    rhs: float
    gap: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gap": self.gap,
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
            "details": _plain(self.details),
        }


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def _report(name, lhs, rhs, tolerance, **details) -> TheoremReport:
    gap = abs(lhs - rhs)
    return TheoremReport(
        name=name,
        lhs=float(lhs),
        rhs=float(rhs),
        gap=float(gap),
        tolerance=float(tolerance),
        passed=bool(gap <= tolerance),
        details=details,
    )


def _prediction(model, graph, labels, subset, normalized):
    if normalized:
        return predict(model, graph, labels, subset)
    return predict_raw(model, graph, labels, subset)


def exact_ensemble_means(
    graph: Graph,
    labels: LabelMatrix,
    ensemble: SubsetEnsemble,
    model: DiffusionModel,
    filter_model: TwoLevelFilter | None = None,
    normalized: bool = False,
) -> EnsembleMeans:
    """Ensemble means by direct enumeration (no sampling, no shortcuts).

    The filtered mean is accumulated subset by subset under the filter's
    per-subset probabilities, so it is an independent route against the
    closed-form convex combination.
    """
    shape = (graph.num_nodes, labels.num_classes)
    clean_sum = np.zeros(shape)
    contam_sum = np.zeros(shape)
    filtered = np.zeros(shape) if filter_model is not None else None
    d = filter_model.clean_prob(ensemble) if filter_model is not None else 0.0
    f = filter_model.contaminated_prob if filter_model is not None else 0.0
    for subset in ensemble.clean:
        value = _prediction(model, graph, labels, subset, normalized)
        clean_sum += value
        if filtered is not None:
            filtered += d * value
    for subset in ensemble.contaminated:
        value = _prediction(model, graph, labels, subset, normalized)
        contam_sum += value
        if filtered is not None:
            filtered += f * value
    nominal = clean_sum / len(ensemble.clean)
    anomalous = contam_sum / len(ensemble.contaminated) if ensemble.contaminated else None
    return EnsembleMeans(nominal=nominal, anomalous=anomalous, filtered=filtered)


def verify_bias_identity(
    ensemble: SubsetEnsemble,
    filter_model: TwoLevelFilter,
    means: EnsembleMeans,
    tolerance: float = 1e-10,
    convex_tolerance: float = 1e-12,
) -> TheoremReport:
    """Check the filtered-mean bias identity under a two-level filter.

    With ``rho = (|contaminated|^2 / |all|) * p_fa`` the enumerated filtered
    mean must satisfy both the norm identity
    ``||P_G - P_N||_1 = rho * ||P_A - P_N||_1`` and, entrywise, the convex
    combination ``P_G = (1 - rho) P_N + rho P_A``.
    """
    if means.filtered is None:
        raise ValueError("means were computed without a filter model")
    p_fa = filter_model.false_alarm_prob(ensemble)
    rho = len(ensemble.contaminated) ** 2 / ensemble.total * p_fa
    lhs = entrywise_norm(means.filtered - means.nominal)
    if means.anomalous is None:
        rhs = 0.0
        convex_gap = float(np.abs(means.filtered - means.nominal).max())
    else:
        rhs = rho * entrywise_norm(means.anomalous - means.nominal)
        combo = (1.0 - rho) * means.nominal + rho * means.anomalous
        convex_gap = float(np.abs(means.filtered - combo).max())
    report = _report(
        "bias-identity",
        lhs,
        rhs,
        tolerance,
        false_alarm=p_fa,
        mixing_weight=rho,
        convex_gap=convex_gap,
        convex_tolerance=convex_tolerance,
        convex_passed=convex_gap <= convex_tolerance,
    )
    return report


def subset_membership_counts(ensemble: SubsetEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """Per-node appearance counts over the clean and contaminated subsets."""
    clean_counts = np.zeros(ensemble.num_nodes, dtype=np.int64)
    contam_counts = np.zeros(ensemble.num_nodes, dtype=np.int64)
    for subset in ensemble.clean:
        clean_counts[list(subset)] += 1
    for subset in ensemble.contaminated:
        contam_counts[list(subset)] += 1
    return clean_counts, contam_counts


def verify_diffusion_identity(
    graph: Graph,
    labels: LabelMatrix,
    ensemble: SubsetEnsemble,
    model: DiffusionModel,
    tolerance: float = 1e-10,
) -> TheoremReport:
    """Closed form for the clean/contaminated mean gap of linear diffusion.

    Uses exact appearance counts: a nominal node sits in ``C(N-K-1, S-1)``
    clean subsets, an anomalous node in ``f_A = C(N-1, S-1)`` contaminated
    ones, and the nominal contaminated-appearance count follows from the
    node-budget identity ``S * |contaminated| = K f_A + (N - K) f_N``.  The
    gap norm must then equal
    ``(f_A / |contaminated|) * || h(A) ((K / (N - K)) Y_nominal - Y_anomalous) ||_1``
    and dominate the column-norm lower bound obtained from it by the reverse
    triangle inequality.
    """
    if not labels.is_single_label:
        raise GraphsacError("diffusion identity requires single-label inputs")
    k = ensemble.num_anomalies
    if k < 1:
        raise GraphsacError("diffusion identity needs at least one anomaly")
    n, s = ensemble.num_nodes, ensemble.sample_size
    if k >= n:
        raise GraphsacError("need at least one nominal node")

    nominal_nodes = [v for v in range(n) if v not in set(ensemble.anomalies)]
    clean_counts, contam_counts = subset_membership_counts(ensemble)

    f_anom = math.comb(n - 1, s - 1)
    clean_per_nominal = math.comb(n - k - 1, s - 1)
    counts_ok = (
        all(clean_counts[v] == clean_per_nominal for v in nominal_nodes)
        and all(clean_counts[a] == 0 for a in ensemble.anomalies)
        and all(contam_counts[a] == f_anom for a in ensemble.anomalies)
    )
    # node-budget identity, exact in integers
    f_nom_budget = s * len(ensemble.contaminated) - k * f_anom
    counts_ok = counts_ok and all(
        (n - k) * contam_counts[v] == f_nom_budget for v in nominal_nodes
    )

    means = exact_ensemble_means(graph, labels, ensemble, model, normalized=False)
    lhs = entrywise_norm(means.nominal - means.anomalous)

    ratio = k / (n - k)
    combined = ratio * labels.masked_dense(nominal_nodes) - labels.masked_dense(
        ensemble.anomalies
    )
    rhs = (
        f_anom
        / len(ensemble.contaminated)
        * entrywise_norm(apply_series(model, graph, combined))
    )

    norms = diffusion_column_norms(model, graph)
    lower_bound = (
        f_anom
        / len(ensemble.contaminated)
        * abs(norms[list(ensemble.anomalies)].sum() - ratio * norms[nominal_nodes].sum())
    )
    report = _report(
        "diffusion-identity",
        lhs,
        rhs,
        tolerance,
        counting_ok=counts_ok,
        anomalous_frequency=f_anom,
        clean_frequency_per_nominal=clean_per_nominal,
        column_norm_lower_bound=lower_bound,
        lower_bound_holds=lhs + 1e-12 >= lower_bound,
    )
    return report


def _subset_predictions(graph, labels, ensemble, model, normalized):
    subsets = list(ensemble.clean) + list(ensemble.contaminated)
    return subsets, np.stack(
        [_prediction(model, graph, labels, s, normalized) for s in subsets]
    )


def concentration_mean_bound(num_nodes: int, num_classes: int, draws: int) -> float:
    logterm = math.log(num_nodes + num_classes)
    return math.sqrt(2.0 * num_nodes * logterm / draws) + (
        2.0 * math.sqrt(num_nodes) * logterm / (3.0 * draws)
    )


def concentration_tail_bound(
    num_nodes: int, num_classes: int, draws: int, t: float
) -> float:
    exponent = -draws * t * t / (num_nodes + 2.0 * math.sqrt(num_nodes) * t / 3.0)
    return min(1.0, (num_nodes + num_classes) * math.exp(exponent))


def verify_concentration(
    graph: Graph,
    labels: LabelMatrix,
    ensemble: SubsetEnsemble,
    model: DiffusionModel,
    filter_model: TwoLevelFilter | None = None,
    draw_counts=(1, 5, 25, 125, 625),
    trials: int = 200,
    seed: int = 0,
    slope_range: tuple[float, float] = (-0.65, -0.35),
) -> list[TheoremReport]:
    """Monte-Carlo check of the draw-average concentration bounds.

    For each draw count I, ``trials`` independent averages of I subset
    predictions (drawn from the filter-biased law, uniform by default) are
    compared to the exact ensemble mean in spectral norm.  The empirical
    mean deviation must sit below the closed-form bound, tail frequencies
    below theirs, and the mean must decay roughly like ``I^{-1/2}``.
    """
    if filter_model is None:
        filter_model = TwoLevelFilter.uniform(ensemble)
    subsets, preds = _subset_predictions(graph, labels, ensemble, model, normalized=True)
    d = filter_model.clean_prob(ensemble)
    f = filter_model.contaminated_prob
    probs = np.concatenate(
        [np.full(len(ensemble.clean), d), np.full(len(ensemble.contaminated), f)]
    )
    probs = probs / probs.sum()
    exact = np.tensordot(probs, preds, axes=1)

    n, c = graph.num_nodes, labels.num_classes
    probes = [0.25 * math.sqrt(n), 0.5 * math.sqrt(n), math.sqrt(n)]
    rng = np.random.default_rng(seed)
    reports = []
    mean_devs = []
    for draws in draw_counts:
        devs = np.empty(trials)
        for trial in range(trials):
            idx = rng.choice(len(subsets), size=draws, p=probs)
            avg = preds[idx].mean(axis=0)
            devs[trial] = np.linalg.norm(avg - exact, 2)
        mean_dev = float(devs.mean())
        mean_devs.append(mean_dev)
        bound = concentration_mean_bound(n, c, draws)
        tails = [
            {
                "t": t,
                "empirical": float((devs >= t).mean()),
                "bound": concentration_tail_bound(n, c, draws, t),
            }
            for t in probes
        ]
        reports.append(
            TheoremReport(
                name=f"concentration-mean[I={draws}]",
                lhs=mean_dev,
                rhs=bound,
                gap=mean_dev - bound,
                tolerance=0.0,
                passed=mean_dev <= bound,
                details={
                    "trials": trials,
                    "max_deviation": float(devs.max()),
                    "hard_cap": 2.0 * math.sqrt(n),
                    "tails": tails,
                    "tails_ok": all(x["empirical"] <= x["bound"] + 1e-12 for x in tails),
                },
            )
        )
    if len(draw_counts) >= 2:
        slope = float(
            np.polyfit(np.log(np.asarray(draw_counts, float)), np.log(mean_devs), 1)[0]
        )
        lo, hi = slope_range
        mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        reports.append(
            TheoremReport(
                name="concentration-decay-slope",
                lhs=slope,
                rhs=mid,
                gap=abs(slope - mid),
                tolerance=half,
                passed=lo <= slope <= hi,
                details={"mean_deviations": mean_devs, "draw_counts": list(draw_counts)},
            )
        )
    return reports


def verify_verdict_identity(
    graph: Graph,
    labels: LabelMatrix,
    ensemble: SubsetEnsemble,
    model: DiffusionModel,
    threshold: float,
    km_candidate: int | None = None,
    tolerance: float = 1e-10,
) -> TheoremReport:
    """Identity for the verdict-conditioned mean of the real consensus filter.

    Preconditions checked subset by subset:

    1. every clean subset is accepted;
    2. every accepted subset carries at most ``km_candidate`` anomalies
       (default: one less than the largest possible contamination, so the
       requirement is non-vacuous).

    When both hold, the enumerated accepted-mean ``P_G`` must satisfy
    ``||P_G - P_N||_1 = p_fa / (p_clean + p_fa (1 - p_clean))
    * ||P_A p_m - P_N (1 - p_clean)||_1`` where ``p_fa`` and ``P_A`` are
    read off the verdicts of the at-most-``K_m`` ensemble and ``p_m`` is its
    probability mass.  The identity is exact when all contaminated subsets
    fall inside that ensemble (``K_m`` maximal) or when none is accepted
    (``K_m = 0``); for intermediate ``K_m`` the details also carry the
    conflation-free variant ``|accepted contaminated| / |accepted| *
    ||P_A - P_N||_1`` which is exact whenever precondition 1 holds.
    """
    k = ensemble.num_anomalies
    max_contamination = min(k, ensemble.sample_size)
    if km_candidate is None:
        km_candidate = max_contamination - 1

    anomaly_set = set(ensemble.anomalies)
    shape = (graph.num_nodes, labels.num_classes)
    clean_sum = np.zeros(shape)
    accepted_clean = 0
    a1_violations = []
    contaminated_records = []  # (subset, contamination, accepted, prediction)
    for subset in ensemble.clean:
        value = predict_raw(model, graph, labels, subset)
        _, accepted = consensus_filter(value, labels, threshold)
        clean_sum += value
        if accepted:
            accepted_clean += 1
        else:
            a1_violations.append(subset)
    for subset in ensemble.contaminated:
        value = predict_raw(model, graph, labels, subset)
        _, accepted = consensus_filter(value, labels, threshold)
        contamination = sum(1 for v in subset if v in anomaly_set)
        contaminated_records.append((subset, contamination, accepted, value))

    accepted_contam = [(s, c, v) for s, c, accepted, v in contaminated_records if accepted]
    k_m = max((c for _, c, _ in accepted_contam), default=0)
    a2_violations = [s for s, c, _ in accepted_contam if c > km_candidate]

    if a1_violations or a2_violations:
        return TheoremReport(
            name="verdict-identity",
            lhs=float("nan"),
            rhs=float("nan"),
            gap=float("nan"),
            tolerance=tolerance,
            passed=False,
            details={
                "skipped": True,
                "km_candidate": km_candidate,
                "smallest_valid_km": k_m,
                "assumption1_violations": [list(s) for s in a1_violations[:20]],
                "assumption1_violation_count": len(a1_violations),
                "assumption2_violations": [list(s) for s in a2_violations[:20]],
                "assumption2_violation_count": len(a2_violations),
            },
        )

    p_nominal = clean_sum / len(ensemble.clean)
    num_accepted = accepted_clean + len(accepted_contam)
    accepted_sum = clean_sum.copy()
    for _, _, value in accepted_contam:
        accepted_sum += value
    p_filtered = accepted_sum / num_accepted
    lhs = entrywise_norm(p_filtered - p_nominal)

    p_clean = len(ensemble.clean) / ensemble.total
    bounded = [rec for rec in contaminated_records if 1 <= rec[1] <= k_m]
    if accepted_contam:
        p_anom = sum(v for _, _, v in accepted_contam) / len(accepted_contam)
        p_fa = len(accepted_contam) / len(bounded)
        p_m = len(bounded) / ensemble.total
        rhs = (
            p_fa
            / (p_clean + p_fa * (1.0 - p_clean))
            * entrywise_norm(p_anom * p_m - p_nominal * (1.0 - p_clean))
        )
        exact_rhs = (
            len(accepted_contam)
            / num_accepted
            * entrywise_norm(p_anom - p_nominal)
        )
    else:
        p_fa, p_m, rhs, exact_rhs = 0.0, 0.0, 0.0, 0.0
    report = _report(
        "verdict-identity",
        lhs,
        rhs,
        tolerance,
        skipped=False,
        smallest_valid_km=k_m,
        km_candidate=km_candidate,
        max_contamination=max_contamination,
        false_alarm=p_fa,
        bounded_mass=p_m,
        accepted_total=num_accepted,
        accepted_contaminated=len(accepted_contam),
        exact_variant_rhs=exact_rhs,
        exact_variant_gap=abs(lhs - exact_rhs),
        degenerate=not accepted_contam,
    )
    return report
