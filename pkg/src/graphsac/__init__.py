"""Sampling-and-consensus anomaly detection on labeled graphs."""

from .baselines import Egonet, baseline_scores, egonet_stats
from .diffusion import (
    DiffusionModel,
    diffusion_column_norms,
    predict,
    predict_raw,
)
from .errors import (
    AllDrawsRejectedError,
    BoundsError,
    ConfigError,
    EnumerationCapError,
    GraphsacError,
    IncompleteLabelsError,
    ParseError,
)
from .evaluate import (
    EvalReport,
    SweepResult,
    auc_report,
    ingest_external_scores,
    rank_auc,
    roc_curve,
    sweep_grid,
)
from .graph import (
    Graph,
    GraphLoadOptions,
    LabelMatrix,
    NormalizedOperator,
    load_graph,
    load_labels,
    normalized_apply,
    save_edges,
    save_labels,
)
from .inject import (
    InjectionResult,
    ingest_perturbed_graph,
    inject_clustered_anomalies,
    inject_rw_label_anomalies,
    inject_rw_structural_anomalies,
    make_injector,
    random_walk,
)
from .oracle import (
    EnsembleMeans,
    SubsetEnsemble,
    TheoremReport,
    TwoLevelFilter,
    enumerate_ensemble,
    exact_ensemble_means,
    verify_bias_identity,
    verify_concentration,
    verify_diffusion_identity,
    verify_verdict_identity,
)
from .sampler import (
    DrawRecord,
    GraphSacConfig,
    GraphSacResult,
    ScoreVector,
    consensus_filter,
    cross_entropy_scores,
    draw_sample,
    rank_anomalies,
    run_graphsac,
)
from .sbm import demo_pair, generate_sbm

__version__ = "0.1.0"
