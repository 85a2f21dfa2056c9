"""Full clustering pipeline: regress, build graph, count, cluster, denoise."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import (KNN, ClusteringResult, SpectralDecomposition, denoise,
                    estimate_num_clusters, knn_graph, normalized_laplacian,
                    spectral_cluster, ssc_graph)
from .model import normalize_columns
from .regress import CoefficientMatrix, Dictionary, regress_all


@dataclass
class PipelineResult:
    coefficients: Optional[CoefficientMatrix]
    W: np.ndarray
    spectrum: SpectralDecomposition
    l_hat: int
    clustering: ClusteringResult

    @property
    def labels(self):
        return self.clustering.labels


def similarity_graph(Y, method, workers=1, tol=1e-6):
    """Return (W, coefficients); coefficients is None for the K-NN baseline."""
    if isinstance(method, KNN):
        return knn_graph(Y, method.K, method.temperature), None
    coef = regress_all(Dictionary.wrap(Y), method, workers=workers, tol=tol)
    return ssc_graph(coef.B), coef


def robust_ssc(Y, method, n_clusters=None, dim=None, energy=0.9, seed=0, workers=1,
               normalize=False, n_init=20) -> PipelineResult:
    """Cluster the columns of Y and denoise them.

    ``method`` is a regression method from :mod:`robust_ssc.regress` or a
    :class:`~robust_ssc.graph.KNN` baseline. The cluster count is estimated
    from the Laplacian eigengap unless ``n_clusters`` is given; the estimate
    is reported either way.
    """
    Y = np.asarray(Y, dtype=float)
    Yr = normalize_columns(Y) if normalize else Y
    W, coef = similarity_graph(Yr, method, workers=workers)
    spec = normalized_laplacian(W)
    l_hat = estimate_num_clusters(spec)
    L = int(n_clusters) if n_clusters else l_hat
    labels = spectral_cluster(W, L, seed=seed, n_init=n_init, spec=spec)
    result = denoise(Y, labels, dim=dim, energy=None if dim is not None else energy)
    return PipelineResult(coef, W, spec, l_hat, result)
