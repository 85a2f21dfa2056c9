"""Discovery rates and clustering error."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ColumnErrors, SSCError

log = logging.getLogger(__name__)

DISCOVERY_THRESHOLD = 1e-3


@dataclass
class DiscoveryReport:
    columns: np.ndarray
    true_counts: np.ndarray
    false_counts: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    threshold: float
    normalization: str
    dims: np.ndarray = None

    @property
    def mean_tpr(self) -> float:
        return float(self.tpr.mean()) if self.tpr.size else float("nan")

    @property
    def mean_fpr(self) -> float:
        return float(self.fpr.mean()) if self.fpr.size else float("nan")

    @property
    def total_false(self) -> int:
        return int(self.false_counts.sum())

    def by_dim(self):
        """Mean (FPR, TPR) over columns grouped by their subspace dimension."""
        if self.dims is None:
            return {}
        return {int(d): (float(self.fpr[self.dims == d].mean()),
                         float(self.tpr[self.dims == d].mean()))
                for d in np.unique(self.dims)}


@dataclass
class ClusterErrorReport:
    error: float
    mapping: dict
    confusion: np.ndarray = field(repr=False)
    misclassified: int = 0


def discoveries(B, labels, threshold=DISCOVERY_THRESHOLD, dims=None, n=None,
                columns=None, normalization="ambient") -> DiscoveryReport:
    """Count true and false discoveries in the columns of B.

    Entry B[j, i] is a discovery for point i when |B[j, i]| > threshold; it
    is true when points i and j carry the same label. ``dims`` gives the
    subspace dimension per label. With ``normalization="ambient"`` the rates
    are TPR = true/d(i) and FPR = false/(n - d(i)); ``"opportunities"``
    divides false discoveries by N - N(i) instead. Without ``dims`` the
    opportunities form is used throughout (TPR = true/(N(i) - 1)).
    """
    B = np.asarray(B)
    N = B.shape[1]
    if labels is None or len(labels) != N:
        raise SSCError(f"labels must cover all {N} columns of B")
    labels = np.asarray(labels, dtype=int)
    if normalization not in ("ambient", "opportunities"):
        raise ValueError(f"unknown normalization {normalization!r}")
    cols = np.arange(N) if columns is None else np.asarray(columns, dtype=int)

    sizes = np.bincount(labels)
    hit = np.abs(B[:, cols]) > threshold
    hit[cols, np.arange(cols.size)] = False
    same = labels[:, None] == labels[cols][None, :]
    true_c = np.sum(hit & same, axis=0)
    false_c = np.sum(hit & ~same, axis=0)

    Ni = sizes[labels[cols]]
    col_dims = None
    if dims is not None:
        col_dims = np.asarray(dims, dtype=int)[labels[cols]]
    if dims is None:
        normalization = "opportunities"
        tpr = true_c / np.maximum(Ni - 1, 1)
    else:
        tpr = true_c / col_dims
    if normalization == "ambient":
        if n is None:
            raise ValueError("ambient dimension n is needed for the ambient normalization")
        fpr = false_c / np.maximum(n - col_dims, 1)
    else:
        fpr = false_c / np.maximum(N - Ni, 1)
    return DiscoveryReport(cols, true_c, false_c, tpr.astype(float), fpr.astype(float),
                           threshold, normalization, col_dims)


def subspace_detection_property(B, labels, threshold=DISCOVERY_THRESHOLD) -> bool:
    """True when no column of B has a cross-cluster entry above threshold."""
    return discoveries(B, labels, threshold).total_false == 0


def clustering_error(pred_labels, true_labels) -> ClusterErrorReport:
    """Percentage of misclassified points under the best label matching.

    The matching is a maximum-weight one-to-one assignment between predicted
    and true labels (alphabets may differ in size); unmatched predicted
    labels count as errors.
    """
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    if pred.shape != true.shape:
        raise SSCError(f"label length mismatch: {pred.size} vs {true.size}")
    if pred.size == 0:
        return ClusterErrorReport(0.0, {}, np.zeros((0, 0), dtype=int))
    p_vals, p_idx = np.unique(pred, return_inverse=True)
    t_vals, t_idx = np.unique(true, return_inverse=True)
    C = np.zeros((p_vals.size, t_vals.size), dtype=int)
    np.add.at(C, (p_idx, t_idx), 1)
    rows, cols = linear_sum_assignment(C, maximize=True)
    matched = int(C[rows, cols].sum())
    wrong = pred.size - matched
    mapping = {p_vals[r].item(): t_vals[c].item() for r, c in zip(rows, cols)}
    return ClusterErrorReport(100.0 * wrong / pred.size, mapping, C, wrong)


def roc_sweep(solve, grid, labels, columns, threshold=DISCOVERY_THRESHOLD, dims=None,
              n=None, normalization="ambient"):
    """Mean (FPR, TPR) of ``solve(g)`` for each grid value ``g``.

    ``solve`` maps a grid value to a coefficient matrix (or an object with a
    ``B`` attribute). A failing grid point is logged and reported as NaN;
    the sweep continues. Columns that fail inside a batch solve are dropped
    from that grid point only.
    """
    out = []
    all_columns = columns
    for g in grid:
        columns = all_columns
        try:
            res = solve(g)
        except ColumnErrors as exc:
            log.warning("grid point %s: %s; scoring the solved columns", g, exc)
            res = exc.partial
            if columns is None:
                columns = np.arange(res.B.shape[1])
            columns = np.setdiff1d(columns, list(exc.failures))
        except SSCError as exc:
            log.warning("grid point %s failed: %s", g, exc)
            out.append((g, float("nan"), float("nan")))
            continue
        B = getattr(res, "B", res)
        rep = discoveries(B, labels, threshold, dims=dims, n=n, columns=columns,
                          normalization=normalization)
        out.append((g, rep.mean_fpr, rep.mean_tpr))
    return out
