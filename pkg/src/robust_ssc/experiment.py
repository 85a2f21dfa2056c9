"""Synthetic experiments: generate data, sweep a penalty grid, score, write CSV.

An experiment is a JSON document; see :class:`ExperimentConfig` for the
fields. Outputs in the target directory:

``results.csv``
    one row per grid value with mean FPR/TPR over the sampled columns and,
    when clustering is enabled, the clustering error and estimated count.
``roc.csv``
    the same rates split by subspace dimension (``dim=all`` is the mean).
``step1.csv``
    two-step method only: the first-step l1 value of each sampled column.
``failures.csv``
    columns whose solve raised, if any.

Every file starts with ``#`` comment lines carrying the config hash and seed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateStepError, InvalidConfigError, SSCError
from .graph import (estimate_num_clusters, knn_graph, normalized_laplacian,
                    spectral_cluster, ssc_graph)
from .metrics import clustering_error, discoveries
from .model import ModelConfig, SubspaceSpec, generate, normalize_columns
from .regress import (Dantzig, Dictionary, Lasso, ResidualConstrained,
                      dantzig_lambda_heuristic, default_alpha0, regress_all)

log = logging.getLogger(__name__)

METHODS = ("lasso", "two_step", "dantzig", "knn_baseline")
RESULT_COLUMNS = ["experiment", "lambda_multiplier", "fpr", "tpr", "clustering_error",
                  "l_hat", "wall_ms"]
ROC_COLUMNS = ["experiment", "lambda_multiplier", "dim", "fpr", "tpr"]


class OverwriteRefused(SSCError):
    kind = "overwrite_refused"


@dataclass
class ExperimentConfig:
    """One synthetic experiment.

    ``grid`` holds multipliers applied to the method's base parameter:
    lam = m / sqrt(d(i)) for ``lasso`` (or m * params["lambda"] with
    ``lambda_rule: "fixed"``), alpha0 = m * params["alpha0"] for
    ``two_step``, lam = m * sqrt(2/n) sigma sqrt(1 + sigma^2) for
    ``dantzig`` and temperature = m * params["temperature"] for
    ``knn_baseline``. ``samples_per_dim`` columns are scored per distinct
    subspace dimension (all columns when None). ``cluster`` additionally
    solves every column and runs spectral clustering at each grid value.
    """

    model: ModelConfig
    method: str = "lasso"
    params: dict = field(default_factory=dict)
    grid: list = field(default_factory=lambda: [1.0])
    samples_per_dim: Optional[int] = None
    cluster: bool = False
    num_clusters: Optional[int] = None
    normalize: bool = False
    threshold: float = 1e-3
    fpr_normalization: str = "ambient"
    name: str = "experiment"
    seed: int = 0
    workers: int = 1

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        m = dict(d.pop("model"))
        m["subspaces"] = [SubspaceSpec(int(s["dim"]), float(s["density"])) if isinstance(s, dict)
                          else SubspaceSpec(int(s[0]), float(s[1])) for s in m["subspaces"]]
        seed = int(d.get("seed", m.get("seed", 0)))
        m["seed"] = seed
        d["seed"] = seed
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(model=ModelConfig(**m), **d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InvalidConfigError(f"{path}: {exc}") from exc

    def to_dict(self):
        d = asdict(self)
        d["model"]["subspaces"] = [[s.dim, s.density] for s in self.model.subspaces]
        return d

    def with_seed(self, seed):
        d = self.to_dict()
        d["seed"] = int(seed)
        d["model"]["seed"] = int(seed)
        return ExperimentConfig.from_dict(d)

    def validate(self):
        self.model.validate()
        if self.method not in METHODS:
            raise InvalidConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.grid:
            raise InvalidConfigError("grid must be nonempty")
        if any(not g > 0 for g in self.grid):
            raise InvalidConfigError("grid multipliers must be positive")
        if self.fpr_normalization not in ("ambient", "opportunities"):
            raise InvalidConfigError("fpr_normalization must be 'ambient' or 'opportunities'")
        if self.samples_per_dim is not None:
            counts = {}
            for s in self.model.subspaces:
                counts[s.dim] = counts.get(s.dim, 0) + s.n_points
            if self.samples_per_dim < 1 or self.samples_per_dim > min(counts.values()):
                raise InvalidConfigError(
                    f"samples_per_dim={self.samples_per_dim} exceeds available columns "
                    f"{counts}")
        if self.method == "knn_baseline":
            for key in ("K", "temperature"):
                if key not in self.params:
                    raise InvalidConfigError(f"knn_baseline needs params.{key}")
        if self.method in ("two_step", "dantzig") and self.sigma <= 0:
            raise InvalidConfigError(f"{self.method} needs a positive sigma")

    @property
    def sigma(self) -> float:
        return float(self.params.get("sigma", self.model.noise_sigma))

    def hash(self) -> str:
        """SHA-256 of the canonical config, excluding the worker count."""
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ResultTable:
    experiment: str
    config_hash: str
    seed: int
    rows: list
    roc: list
    step1: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def header(self):
        return f"# config_sha256={self.config_hash}\n# seed={self.seed}\n"

    def results_csv(self) -> str:
        return self.header() + _csv(RESULT_COLUMNS, self.rows)

    def roc_csv(self) -> str:
        return self.header() + _csv(ROC_COLUMNS, self.roc)

    def write(self, out_dir, force=False):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        existing = out / "results.csv"
        if existing.exists() and not force:
            old = read_header(existing).get("config_sha256")
            if old != self.config_hash:
                raise OverwriteRefused(
                    f"{existing} was produced by config {old}; pass --force to overwrite")
        files = {"results.csv": self.results_csv(), "roc.csv": self.roc_csv()}
        if self.step1:
            files["step1.csv"] = self.header() + _csv(
                ["lambda_multiplier", "column", "dim", "step1_value"], self.step1)
        if self.failures:
            files["failures.csv"] = self.header() + _csv(
                ["lambda_multiplier", "column", "kind", "message"], self.failures)
        for stale in ("step1.csv", "failures.csv"):
            if stale not in files and (out / stale).exists():
                (out / stale).unlink()
        for name, text in files.items():
            (out / name).write_text(text)
        return [out / name for name in files]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if np.isnan(v) else repr(v)
    if isinstance(v, np.floating):
        return _fmt(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def read_header(path) -> dict:
    """Key/value pairs from the leading ``# key=value`` lines of an output file."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
    return meta


def read_table(path):
    """Rows of an output CSV as dicts (comment header skipped)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def sample_columns(labels, dims, per_dim, rng):
    """Pick ``per_dim`` columns at random for every distinct subspace dimension."""
    col_dims = np.asarray(dims)[labels]
    if per_dim is None:
        return np.arange(labels.size)
    picked = []
    for d in np.unique(col_dims):
        pool = np.flatnonzero(col_dims == d)
        picked.append(rng.choice(pool, size=per_dim, replace=False))
    return np.sort(np.concatenate(picked))


def run_experiment(config: ExperimentConfig, out_dir=None, force=False, timing=False,
                   workers=None) -> ResultTable:
    """Generate the dataset of ``config``, sweep its grid and tabulate the rates.

    Results depend only on the config (seed included): the worker count
    changes how columns are scheduled, never what is computed. Wall times
    are recorded only with ``timing=True``, since they cannot reproduce.
    """
    workers = config.workers if workers is None else workers
    data = generate(config.model)
    Y = normalize_columns(data.Y) if config.normalize else data.Y
    labels = data.labels
    dims = np.array(config.model.dims)
    n, N = Y.shape
    col_dims = dims[labels]

    rng = np.random.default_rng([config.seed, 1])
    cols = sample_columns(labels, dims, config.samples_per_dim, rng)
    solve_cols = None if config.cluster else cols
    D = Dictionary(Y)
    sigma = config.sigma

    rows, roc, step1_rows, failures = [], [], [], []
    step1 = None
    if config.method == "two_step":
        t0 = time.perf_counter()
        s1 = regress_all(D, ResidualConstrained(2.0 * sigma), columns=solve_cols,
                         workers=workers, raise_on_error=False)
        step1 = s1.step1
        step1_ms = 1e3 * (time.perf_counter() - t0)
        for i, exc in s1.failures.items():
            failures.append({"lambda_multiplier": "", "column": i, "kind": exc.kind,
                             "message": str(exc)})
        for i in cols:
            step1_rows.append({"lambda_multiplier": "", "column": int(i),
                               "dim": int(col_dims[i]), "step1_value": float(step1[i])})

    for mult in config.grid:
        t0 = time.perf_counter()
        threshold = config.threshold
        bad = set()
        if config.method == "knn_baseline":
            B = knn_graph(Y, int(config.params["K"]),
                          mult * float(config.params["temperature"]))
            threshold = 0.0
        else:
            method, bad = _grid_method(config, mult, col_dims, step1, n, sigma)
            targets = np.arange(N) if solve_cols is None else solve_cols
            for i in targets:
                if i in bad:
                    failures.append({"lambda_multiplier": mult, "column": int(i),
                                     "kind": DegenerateStepError.kind,
                                     "message": "no usable step-1 value; lam undefined"})
            targets = np.array([i for i in targets if i not in bad], dtype=int)
            coef = regress_all(D, method, columns=targets, workers=workers,
                               raise_on_error=False)
            B = coef.B
            for i, exc in sorted(coef.failures.items()):
                failures.append({"lambda_multiplier": mult, "column": i, "kind": exc.kind,
                                 "message": str(exc)})
            bad = bad | set(coef.failures)
        scored = np.array([i for i in cols if i not in bad], dtype=int)
        rep = discoveries(B, labels, threshold, dims=dims, n=n, columns=scored,
                          normalization=config.fpr_normalization)
        err = l_hat = None
        if config.cluster:
            W = B if config.method == "knn_baseline" else ssc_graph(B)
            spec = normalized_laplacian(W)
            l_hat = estimate_num_clusters(spec)
            L = config.num_clusters or l_hat
            pred = spectral_cluster(W, L, seed=np.random.SeedSequence([config.seed, 2]),
                                    spec=spec)
            err = clustering_error(pred, labels).error
        wall = 1e3 * (time.perf_counter() - t0)
        if step1 is not None:
            wall += step1_ms / len(config.grid)
        rows.append({"experiment": config.name, "lambda_multiplier": float(mult),
                     "fpr": rep.mean_fpr, "tpr": rep.mean_tpr, "clustering_error": err,
                     "l_hat": l_hat, "wall_ms": round(wall, 3) if timing else None})
        roc.append({"experiment": config.name, "lambda_multiplier": float(mult), "dim": "all",
                    "fpr": rep.mean_fpr, "tpr": rep.mean_tpr})
        for d, (f, t) in sorted(rep.by_dim().items()):
            roc.append({"experiment": config.name, "lambda_multiplier": float(mult),
                        "dim": d, "fpr": f, "tpr": t})

    table = ResultTable(config.name, config.hash(), config.seed, rows, roc, step1_rows,
                        failures)
    if out_dir is not None:
        table.write(out_dir, force=force)
    return table


def _grid_method(config, mult, col_dims, step1, n, sigma):
    """Regression method for one grid value, plus columns that cannot be solved."""
    p = config.params
    if config.method == "lasso":
        if p.get("lambda_rule", "inv_sqrt_dim") == "fixed":
            return Lasso(mult * float(p["lambda"])), set()
        return Lasso(mult / np.sqrt(col_dims.astype(float))), set()
    if config.method == "two_step":
        alpha0 = mult * float(p.get("alpha0", default_alpha0(sigma)))
        lam = np.full(step1.size, np.inf)
        ok = np.isfinite(step1) & (step1 > 0)
        lam[ok] = alpha0 / step1[ok]
        return Lasso(lam), set(np.flatnonzero(~ok).tolist())
    if config.method == "dantzig":
        return Dantzig(sigma, mult * dantzig_lambda_heuristic(n, sigma)), set()
    raise InvalidConfigError(f"no regression for method {config.method!r}")
