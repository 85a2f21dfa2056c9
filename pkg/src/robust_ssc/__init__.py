"""Sparse subspace clustering for noisy data."""

from .asymptotics import AsymptoticState, eta_moment, fixed_point, rho_star
from .errors import (ColumnErrors, DegenerateInputError, DegenerateStepError,
                     InfeasibleError, InvalidBasisError, InvalidConfigError,
                     IterationLimitError, NoSolutionError, ParseError, SSCError)
from .experiment import ExperimentConfig, ResultTable, run_experiment
from .graph import (KNN, ClusteringResult, SpectralDecomposition, denoise,
                    estimate_num_clusters, kmeans, knn_graph, normalized_laplacian,
                    spectral_cluster, ssc_graph)
from .matrix_io import load_labels, load_matrix, save_labels, save_matrix
from .metrics import (DISCOVERY_THRESHOLD, clustering_error, discoveries, roc_sweep,
                      subspace_detection_property)
from .model import (DataMatrix, ModelConfig, Subspace, SubspaceSpec, affinity,
                    diagnostics, fit_subspace_pca, generate, normalize_columns,
                    principal_angles)
from .pipeline import PipelineResult, robust_ssc, similarity_graph
from .regress import (CoefficientMatrix, Dantzig, Lasso, ResidualConstrained,
                      SparseCoefficients, TwoStep, corrected_dantzig, regress_all,
                      solve_l1_equality, solve_l1_residual_constrained, solve_lasso,
                      two_step, xi_variance)

__version__ = "0.1.0"
