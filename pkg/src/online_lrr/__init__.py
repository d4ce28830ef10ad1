"""Streaming low-rank basis learning and subspace clustering in O(pd) memory."""

from .metrics import (clustering_accuracy, empirical_loss, expressed_variance, full_u_star,
                      grad_point_loss, h_tilde, h_value, point_loss, subspace_expressed_variance,
                      surrogate_value)
from .model import KMeansState, ModelState, SampleCode, SolverParams, SyntheticDataset, lambda3_at
from .pipeline import ColumnStream, RunReport, code_features, kmeans_step, run_fully_online, run_stream
from .solver import (olrsc_step, soft_threshold, solve_u, solve_ve, update_accumulators,
                     update_basis_bcd, update_basis_closed)
from .synth import corrupt_sparse, generate_union_of_subspaces, make_dataset

__all__ = [
    "ColumnStream", "KMeansState", "ModelState", "RunReport", "SampleCode", "SolverParams",
    "SyntheticDataset", "clustering_accuracy", "code_features", "corrupt_sparse", "empirical_loss",
    "expressed_variance", "full_u_star", "generate_union_of_subspaces", "grad_point_loss", "h_tilde",
    "h_value", "kmeans_step", "lambda3_at", "make_dataset", "olrsc_step", "point_loss",
    "run_fully_online", "run_stream", "soft_threshold", "solve_u", "solve_ve", "subspace_expressed_variance",
    "surrogate_value", "update_accumulators", "update_basis_bcd", "update_basis_closed",
]
