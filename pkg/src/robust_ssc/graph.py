"""Similarity graphs, spectral clustering and per-cluster PCA denoising."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .model import fit_subspace_pca


@dataclass
class SpectralDecomposition:
    """Eigen-decomposition of the symmetric normalized Laplacian.

    ``eigenvalues`` are sorted descending; ``eigenvectors[:, k]`` belongs to
    ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    laplacian: np.ndarray

    def bottom(self, k):
        """Eigenvectors of the k smallest eigenvalues, smallest first."""
        return self.eigenvectors[:, ::-1][:, :k]


@dataclass
class ClusteringResult:
    labels: np.ndarray
    n_clusters: int
    subspaces: list = field(default_factory=list)
    Xhat: Optional[np.ndarray] = None
    warnings: list = field(default_factory=list)


def ssc_graph(B) -> np.ndarray:
    """W = |B| + |B|^T with the diagonal cleared."""
    A = np.abs(np.asarray(B, dtype=float))
    W = A + A.T
    np.fill_diagonal(W, 0.0)
    return W


def knn_graph(Y, K, temperature) -> np.ndarray:
    """Gaussian-weighted K-nearest-neighbour graph on the columns of Y.

    Edge (i, j) exists when either point is among the other's K nearest
    neighbours (Euclidean) and carries weight exp(-||y_i - y_j||^2 / t).
    Distance ties are broken toward the lower column index.
    """
    Y = np.asarray(Y, dtype=float)
    N = Y.shape[1]
    if not 1 <= K < N:
        raise ValueError(f"K must satisfy 1 <= K < N={N}, got {K}")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    D2 = cdist(Y.T, Y.T, "sqeuclidean")
    np.fill_diagonal(D2, np.inf)
    nn = np.argsort(D2, axis=1, kind="stable")[:, :K]
    mask = np.zeros((N, N), dtype=bool)
    mask[np.repeat(np.arange(N), K), nn.ravel()] = True
    mask |= mask.T
    W = np.where(mask, np.exp(-np.where(mask, D2, 0.0) / temperature), 0.0)
    np.fill_diagonal(W, 0.0)
    return W


def normalized_laplacian(W) -> SpectralDecomposition:
    """I - D^{-1/2} W D^{-1/2}; isolated vertices get a zero D^{-1/2} entry."""
    W = np.asarray(W, dtype=float)
    deg = W.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    Lsym = np.eye(W.shape[0]) - inv_sqrt[:, None] * W * inv_sqrt[None, :]
    Lsym = 0.5 * (Lsym + Lsym.T)
    vals, vecs = np.linalg.eigh(Lsym)
    return SpectralDecomposition(vals[::-1].copy(), vecs[:, ::-1].copy(), Lsym)


def estimate_num_clusters(spec) -> int:
    """Cluster count from the largest gap in the descending Laplacian spectrum.

    Returns N - argmax_i (delta_i - delta_{i+1}) with 1-based i; ties go to
    the smallest i, i.e. the largest count.
    """
    delta = spec.eigenvalues if isinstance(spec, SpectralDecomposition) else np.asarray(spec)
    N = delta.size
    if N < 2:
        raise ValueError("need at least two eigenvalues")
    gaps = delta[:-1] - delta[1:]
    return int(N - (np.argmax(gaps) + 1))


def kmeans_pp_init(X, k, rng):
    N = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = rng.integers(N)
    centers[0] = X[first]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(N)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, N - 1)
        centers[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def _assign(X, centers):
    d2 = cdist(X, centers, "sqeuclidean")
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(X.shape[0]), labels]


def _repair_empty(X, labels, dist, centers, k):
    """Give every empty cluster the point farthest from its current center.

    Only points from clusters with at least two members are moved, so no
    cluster is emptied in the process.
    """
    for c in range(k):
        counts = np.bincount(labels, minlength=k)
        if counts[c] > 0:
            continue
        movable = counts[labels] > 1
        cand = np.where(movable, dist, -np.inf)
        j = int(np.argmax(cand))
        labels[j] = c
        dist[j] = 0.0
        centers[c] = X[j]
    return labels


def kmeans(X, k, rng=None, n_init=20, max_iter=300, tol=1e-10):
    """Lloyd's algorithm with k-means++ seeding and ``n_init`` restarts.

    The restart with the smallest within-cluster sum of squares wins; ties go
    to the earlier restart. Returns (labels, centers, inertia).
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    if not 1 <= k <= N:
        raise ValueError(f"k must lie in [1, {N}]")
    rng = np.random.default_rng(rng)
    best = None
    for _ in range(n_init):
        centers = kmeans_pp_init(X, k, rng)
        labels, dist = _assign(X, centers)
        labels = _repair_empty(X, labels, dist, centers, k)
        prev = np.inf
        for _ in range(max_iter):
            for c in range(k):
                centers[c] = X[labels == c].mean(axis=0)
            labels, dist = _assign(X, centers)
            labels = _repair_empty(X, labels, dist, centers, k)
            inertia = float(np.sum((X - centers[labels]) ** 2))
            if prev - inertia <= tol * max(1.0, inertia):
                break
            prev = inertia
        inertia = float(np.sum((X - centers[labels]) ** 2))
        if best is None or inertia < best[2]:
            best = (labels.copy(), centers.copy(), inertia)
    return best


def spectral_embedding(W, k, spec=None):
    """Rows of the bottom-k Laplacian eigenvectors, scaled to unit length."""
    spec = spec or normalized_laplacian(W)
    V = spec.bottom(k)
    norms = np.linalg.norm(V, axis=1, keepdims=True)
    return np.divide(V, norms, out=np.zeros_like(V), where=norms > 0)


def spectral_cluster(W, n_clusters, seed=0, n_init=20, max_iter=300, spec=None):
    """Normalized spectral clustering of the graph W into ``n_clusters`` groups."""
    N = np.asarray(W).shape[0]
    if not 1 <= n_clusters <= N:
        raise ValueError(f"n_clusters must lie in [1, {N}]")
    if n_clusters == 1:
        return np.zeros(N, dtype=int)
    E = spectral_embedding(W, n_clusters, spec)
    labels, _, _ = kmeans(E, n_clusters, rng=seed, n_init=n_init, max_iter=max_iter)
    return labels


def denoise(Y, labels, dim=None, energy=None) -> ClusteringResult:
    """Fit a subspace per cluster by PCA and project each point onto its fit.

    ``dim`` may be an int or a per-cluster sequence; without it the energy
    rule is used (default 90%). A fixed dim larger than a cluster is clamped
    to the cluster size with a warning.
    """
    Y = np.asarray(Y, dtype=float)
    labels = np.asarray(labels, dtype=int)
    k = int(labels.max()) + 1
    Xhat = np.zeros_like(Y)
    fits, notes = [], []
    for c in range(k):
        idx = np.flatnonzero(labels == c)
        d = None
        if dim is not None:
            d = int(dim if np.ndim(dim) == 0 else dim[c])
            if d > idx.size:
                msg = f"cluster {c} has {idx.size} points; dim clamped from {d}"
                warnings.warn(msg)
                notes.append(msg)
                d = idx.size
        S = fit_subspace_pca(Y[:, idx], dim=d, energy=None if d is not None else energy)
        Xhat[:, idx] = S.project(Y[:, idx])
        fits.append(S)
    return ClusteringResult(labels=labels, n_clusters=k, subspaces=fits, Xhat=Xhat,
                            warnings=notes)


@dataclass(frozen=True)
class KNN:
    """Baseline graph construction: K nearest neighbours with Gaussian weights."""

    K: int
    temperature: float
