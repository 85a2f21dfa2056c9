"""Semi-random union-of-subspaces model, subspace geometry and diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, InvalidBasisError, InvalidConfigError

ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class SubspaceSpec:
    dim: int
    density: float

    @property
    def n_points(self) -> int:
        # Python's round() sends .5 ties to even
        return int(round(self.density * self.dim))


@dataclass
class ModelConfig:
    """Parameters of the noisy multi-subspace model.

    ``noise_sigma`` is relative: each noise vector has i.i.d. N(0, sigma^2/n)
    entries so that E||z||^2 = sigma^2 for unit-norm clean points. With
    ``orthogonal=True`` the subspaces are drawn mutually orthogonal (needs
    sum of dims <= ambient_dim).
    """

    ambient_dim: int
    subspaces: list
    noise_sigma: float = 0.0
    seed: int = 0
    orthogonal: bool = False

    def __post_init__(self):
        self.subspaces = [
            s if isinstance(s, SubspaceSpec) else SubspaceSpec(int(s[0]), float(s[1]))
            for s in self.subspaces
        ]

    def validate(self):
        n = self.ambient_dim
        if n < 1:
            raise InvalidConfigError(f"ambient_dim must be >= 1, got {n}")
        if not self.subspaces:
            raise InvalidConfigError("at least one subspace is required")
        for k, s in enumerate(self.subspaces):
            if s.dim < 1:
                raise InvalidConfigError(f"subspace {k}: dim must be >= 1")
            if s.dim > n:
                raise InvalidConfigError(
                    f"subspace {k}: dim {s.dim} exceeds ambient dimension {n}")
            if s.density < 1 or s.n_points < s.dim:
                raise InvalidConfigError(
                    f"subspace {k}: density {s.density} gives fewer points than dim")
        if self.noise_sigma < 0:
            raise InvalidConfigError("noise_sigma must be nonnegative")
        if self.orthogonal and sum(s.dim for s in self.subspaces) > n:
            raise InvalidConfigError("orthogonal subspaces need sum of dims <= ambient_dim")

    @property
    def dims(self):
        return [s.dim for s in self.subspaces]


@dataclass
class Subspace:
    basis: np.ndarray

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=float)
        if self.basis.ndim == 1:
            self.basis = self.basis[:, None]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, Y):
        U = self.basis
        return U @ (U.T @ Y)

    def check_orthonormal(self, tol=ORTHO_TOL):
        dev = np.abs(self.basis.T @ self.basis - np.eye(self.dim)).max()
        if dev > tol:
            raise InvalidBasisError(f"basis deviates from orthonormal by {dev:.3e}")


@dataclass
class DataMatrix:
    """Samples as columns of ``Y`` (n x N), with optional ground truth."""

    Y: np.ndarray
    X: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    subspaces: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def N(self) -> int:
        return self.Y.shape[1]

    @property
    def Z(self):
        return None if self.X is None else self.Y - self.X

    @property
    def n_clusters(self) -> int:
        if self.labels is None:
            raise ValueError("no labels attached")
        return int(self.labels.max()) + 1

    def dims_per_label(self):
        """Subspace dimension per label, from the attached bases."""
        return np.array([s.dim for s in self.subspaces], dtype=int)


@dataclass
class SubspaceGeometry:
    cos_angles: np.ndarray
    affinity: float

    @property
    def angles(self):
        return np.arccos(self.cos_angles)


@dataclass
class TheoryDiagnostics:
    affinities: np.ndarray
    max_affinity_per_subspace: np.ndarray
    affinity_bound: float
    affinity_ok: np.ndarray
    densities: np.ndarray
    density_ok: np.ndarray
    density_capped: np.ndarray
    noise_ok: bool
    dim_ok: bool
    constants: dict


def generate(config: ModelConfig) -> DataMatrix:
    """Draw a dataset from the semi-random model.

    Bases are orthonormalized Gaussian matrices (Haar-distributed), clean
    points are uniform on the unit sphere of their subspace, and noise is
    i.i.d. N(0, sigma^2/n). Columns are grouped by subspace in config order.
    """
    config.validate()
    n = config.ambient_dim
    rng = np.random.default_rng(config.seed)

    dims = config.dims
    if config.orthogonal:
        Q = _haar_basis(rng, n, sum(dims))
        edges = np.cumsum([0] + dims)
        bases = [Q[:, edges[k]:edges[k + 1]] for k in range(len(dims))]
    else:
        bases = [_haar_basis(rng, n, d) for d in dims]

    blocks, labels = [], []
    for k, (spec, U) in enumerate(zip(config.subspaces, bases)):
        W = rng.standard_normal((spec.dim, spec.n_points))
        W /= np.linalg.norm(W, axis=0)
        blocks.append(U @ W)
        labels.append(np.full(spec.n_points, k, dtype=int))
    X = np.hstack(blocks)
    # renormalize: U @ w is unit only up to rounding
    X /= np.linalg.norm(X, axis=0)
    labels = np.concatenate(labels)

    sigma = config.noise_sigma
    if sigma > 0:
        Y = X + rng.standard_normal(X.shape) * (sigma / math.sqrt(n))
    else:
        Y = X.copy()
    return DataMatrix(Y=Y, X=X, labels=labels, subspaces=[Subspace(U) for U in bases])


def _haar_basis(rng, n, d):
    G = rng.standard_normal((n, d))
    Q, R = np.linalg.qr(G)
    # sign fix makes the distribution exactly Haar
    return Q * np.sign(np.diag(R))


def normalize_columns(Y):
    """Scale every column to unit l2 norm.

    Accepts a bare array or a :class:`DataMatrix` (only ``Y`` is rescaled).
    Raises :class:`DegenerateInputError` on a zero column.
    """
    if isinstance(Y, DataMatrix):
        return DataMatrix(Y=normalize_columns(Y.Y), X=Y.X, labels=Y.labels,
                          subspaces=Y.subspaces)
    Y = np.asarray(Y, dtype=float)
    norms = np.linalg.norm(Y, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateInputError(f"column {zero[0]} has zero norm", index=int(zero[0]))
    return Y / norms


def principal_angles(A, B) -> SubspaceGeometry:
    """Cosines of the principal angles between span(A) and span(B).

    The cosines are the singular values of A^T B, clamped to [0, 1]. The
    affinity is their root-mean-square over the min(d, d') angles.
    """
    A = A if isinstance(A, Subspace) else Subspace(A)
    B = B if isinstance(B, Subspace) else Subspace(B)
    A.check_orthonormal()
    B.check_orthonormal()
    s = np.linalg.svd(A.basis.T @ B.basis, compute_uv=False)
    k = min(A.dim, B.dim)
    cos = np.clip(np.sort(s[:k])[::-1], 0.0, 1.0)
    return SubspaceGeometry(cos_angles=cos, affinity=float(np.sqrt(np.sum(cos**2) / k)))


def affinity(A, B) -> float:
    return principal_angles(A, B).affinity


def energy_dimension(singular_values, energy=0.9) -> int:
    """Smallest d whose top-d singular values hold ``energy`` of their sum."""
    s = np.asarray(singular_values, dtype=float)
    total = s.sum()
    if total == 0:
        return 1
    csum = np.cumsum(s)
    # relative slack so exact low-rank data is not tipped over by rounding
    d = int(np.searchsorted(csum, energy * total * (1 - 1e-12))) + 1
    return min(max(d, 1), s.size)


def fit_subspace_pca(points, dim=None, energy=None) -> Subspace:
    """Best-fitting linear subspace (non-centered PCA) of the given columns.

    Exactly one of ``dim`` (fixed dimension) or ``energy`` (fraction in
    (0, 1] of the singular value sum to retain) should be given; with
    neither, ``energy=0.9`` is used.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[1] == 0:
        raise DegenerateInputError("cannot fit a subspace to an empty set of points")
    if dim is not None and energy is not None:
        raise ValueError("give either dim or energy, not both")
    U, s, _ = np.linalg.svd(P, full_matrices=False)
    if dim is None:
        energy = 0.9 if energy is None else energy
        if not 0 < energy <= 1:
            raise ValueError(f"energy fraction must lie in (0, 1], got {energy}")
        dim = energy_dimension(s, energy)
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return Subspace(U[:, :min(dim, U.shape[1])])


def diagnostics(data: DataMatrix, subspaces: Sequence = None, kappa0=1.0,
                rho_star=2.8188, sigma_star=1.0, c0=1.0, sigma=None) -> TheoryDiagnostics:
    """Check the model against the affinity, sampling and noise/dimension conditions.

    Nothing is enforced; the returned booleans only report which conditions
    hold for the supplied constants.
    """
    subspaces = list(subspaces if subspaces is not None else data.subspaces)
    L = len(subspaces)
    N = data.N
    counts = np.bincount(data.labels, minlength=L)
    dims = np.array([S.dim if isinstance(S, Subspace) else Subspace(S).dim
                     for S in subspaces])

    aff = np.eye(L)
    for a in range(L):
        for b in range(a + 1, L):
            aff[a, b] = aff[b, a] = affinity(subspaces[a], subspaces[b])
    off = aff - np.diag(np.diag(aff))
    max_aff = off.max(axis=1) if L > 1 else np.zeros(1)
    bound = kappa0 / math.log(N)

    rho = counts / dims
    if sigma is None:
        sigma = _estimate_sigma(data)
    return TheoryDiagnostics(
        affinities=aff,
        max_affinity_per_subspace=max_aff,
        affinity_bound=bound,
        affinity_ok=max_aff <= bound,
        densities=rho,
        density_ok=rho >= rho_star,
        density_capped=rho > np.exp(dims / 2.0),
        noise_ok=bool(sigma < sigma_star),
        dim_ok=bool(dims.max() < c0 * data.n / math.log(N) ** 2),
        constants={"kappa0": kappa0, "rho_star": rho_star, "sigma_star": sigma_star,
                   "c0": c0, "sigma": sigma},
    )


def _estimate_sigma(data):
    if data.X is None:
        return float("nan")
    Z = data.Y - data.X
    return float(np.sqrt(np.mean(np.sum(Z**2, axis=0) / np.sum(data.X**2, axis=0))))
