"""Spectral band filters for graphs.

A toolkit for node classification with adaptive spectral partitioning:
eigendecomposition of the normalized adjacency, eigengap significance
scoring, piecewise-constant band projectors split into signed parts,
polynomial filters, and a compact trainable model, plus executable
polynomial-approximation error bounds.
"""

from specband.graphs import (
    Dataset,
    Graph,
    GraphError,
    SplitMask,
    duplicate_subgraph,
    load_edge_list,
    make_splits,
    normalized_adjacency,
    normalized_adjacency_sparse,
    synth_spectral_dataset,
)
from specband.spectral import (
    DistinctSpectrum,
    Spectrum,
    distinct_eigenvalues,
    eigendecompose,
    grouping_tolerance,
    minimal_poly_residual,
    zero_multiplicity,
)
from specband.partition import (
    PartitionResult,
    discrete_derivative,
    identify_significant_gaps,
    significance_scores,
)
from specband.filters import (
    ConstantFilter,
    FilterBank,
    build_filter_bank,
    constant_filter,
    filter_response,
    poly_apply,
    sparsify,
    split_pos_neg,
)
from specband.model import (
    Model,
    ModelConfig,
    TrainReport,
    ablate,
    adam_step,
    evaluate,
    forward,
    free_eigenvalues_forward,
    loss_and_grads,
    train,
    train_model,
)
from specband.bounds import (
    BoundNotApplicable,
    FilterTarget,
    PolySpec,
    approximation_error,
    best_constrained_poly,
    dense_lower_bound,
    epsilon_density,
    jump_lower_bound,
    markov_check,
)

__version__ = "0.1.0"
