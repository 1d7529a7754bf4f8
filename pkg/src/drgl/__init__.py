"""Distributionally robust graph learning.

Noise-robust node embeddings trained against least-favorable distributions
inside Wasserstein balls, with downstream classifiers and entropy-based
uncertainty quantification.
"""

from .graph import (
    DatasetFormatError,
    Graph,
    LabelSet,
    NormalizedAdjacency,
    feature_std,
    load_graph,
    normalize_adjacency,
    save_graph,
)
from .noise import NoiseSpec, add_feature_noise, remove_edges
from .encoder import (
    Embeddings,
    EncoderParams,
    backward,
    forward,
    init_encoder,
    load_checkpoint,
    save_checkpoint,
)
from .lfd import (
    DroConfig,
    EmpiricalDistribution,
    LfdSolution,
    LfdSolverError,
    MiniSet,
    empirical_distributions,
    pairwise_costs,
    resolve_radii,
    solve_lfd,
    total_variation,
)
from .grad import MarginGradient, grad_margin_wrt_costs, grad_margin_wrt_embeddings
from .training import TrainConfig, TrainReport, make_minisets, train
from .classify import (
    PredictionSet,
    SoftmaxHead,
    entropy,
    kde_lfd_predict,
    knn_predict,
    label_propagation,
    train_softmax_head,
)
from .synthetic import sbm_graph

__version__ = "0.1.0"
