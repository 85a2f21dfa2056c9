"""Command-line interface.

Exit status is 0 on success, 1 on input/output or model errors (with one
JSON line on stderr) and 2 on bad flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import asymptotics
from .errors import InvalidConfigError, SSCError
from .experiment import ExperimentConfig, run_experiment
from .graph import (KNN, estimate_num_clusters, normalized_laplacian,
                    spectral_cluster, ssc_graph)
from .matrix_io import load_labels, load_matrix, save_labels, save_matrix
from .metrics import DISCOVERY_THRESHOLD, clustering_error, discoveries
from .model import ModelConfig, generate
from .pipeline import robust_ssc
from .regress import Dantzig, Lasso, TwoStep, dantzig_lambda_heuristic, regress_all


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from exc


def _model_config(path, seed=None):
    d = _read_json(path)
    m = dict(d.get("model", d))
    if seed is not None:
        m["seed"] = seed
    elif "seed" in d and "model" in d:
        m.setdefault("seed", d["seed"])
    try:
        return ModelConfig(**m)
    except TypeError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from exc


def _ext(fmt):
    return ".csv" if fmt == "csv" else ".bin"


def _find(directory, stem):
    for suffix in (".csv", ".bin"):
        p = Path(directory) / f"{stem}{suffix}"
        if p.exists():
            return p
    raise FileNotFoundError(f"no {stem}.csv or {stem}.bin in {directory}")


def _input_matrix(path):
    p = Path(path)
    return load_matrix(_find(p, "Y") if p.is_dir() else p)


def _input_labels(args):
    if getattr(args, "labels", None):
        return load_labels(args.labels)
    p = Path(args.input)
    if p.is_dir() and (p / "labels.txt").exists():
        return load_labels(p / "labels.txt")
    return None


def _method(args, n):
    if args.method == "lasso":
        if args.lam is None:
            raise InvalidConfigError("--lam is required for lasso")
        return Lasso(args.lam)
    if args.method in ("two_step", "dantzig") and args.sigma is None:
        raise InvalidConfigError(f"--sigma is required for {args.method}")
    if args.method == "two_step":
        return TwoStep(args.sigma, args.alpha0)
    if args.method == "dantzig":
        lam = args.lam if args.lam is not None else dantzig_lambda_heuristic(n, args.sigma)
        return Dantzig(args.sigma, lam)
    if args.method == "knn_baseline":
        return KNN(args.k, args.temperature)
    raise InvalidConfigError(f"unknown method {args.method!r}")


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_generate(args):
    cfg = _model_config(args.config, args.seed)
    data = generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = _ext(args.format)
    save_matrix(out / f"Y{ext}", data.Y)
    save_matrix(out / f"X{ext}", data.X)
    save_labels(out / "labels.txt", data.labels)
    for k, S in enumerate(data.subspaces):
        save_matrix(out / f"basis_{k}{ext}", S.basis)
    meta = {"ambient_dim": cfg.ambient_dim, "dims": cfg.dims, "noise_sigma": cfg.noise_sigma,
            "seed": cfg.seed, "N": data.N}
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    _emit({"out": str(out), "n": data.n, "N": data.N})


def cmd_regress(args):
    Y = _input_matrix(args.input)
    method = _method(args, Y.shape[0])
    if isinstance(method, KNN):
        raise InvalidConfigError("regress needs a regression method, not knn_baseline")
    coef = regress_all(Y, method, workers=args.workers, tol=args.tol)
    save_matrix(args.out, coef.B, fmt=args.format)
    _emit({"out": str(args.out), "nnz": int(np.count_nonzero(coef.B)),
           "max_iterations": int(coef.iterations.max())})


def cmd_cluster(args):
    B = load_matrix(args.input)
    W = B if args.graph else ssc_graph(B)
    spec = normalized_laplacian(W)
    l_hat = estimate_num_clusters(spec)
    L = args.n_clusters or l_hat
    labels = spectral_cluster(W, L, seed=args.seed, spec=spec)
    save_labels(args.out, labels)
    _emit({"out": str(args.out), "l_hat": l_hat, "n_clusters": int(L)})


def cmd_evaluate(args):
    truth = load_labels(args.labels)
    report = {}
    if args.coefficients:
        B = load_matrix(args.coefficients)
        dims = json.loads(args.dims) if args.dims else None
        n = args.n
        norm = args.fpr_normalization if dims is not None else "opportunities"
        rep = discoveries(B, truth, args.threshold, dims=dims, n=n, normalization=norm)
        report.update(fpr=rep.mean_fpr, tpr=rep.mean_tpr, false_discoveries=rep.total_false,
                      detection_property=rep.total_false == 0, normalization=norm)
    if args.pred:
        err = clustering_error(load_labels(args.pred), truth)
        report.update(clustering_error=err.error, misclassified=err.misclassified)
    if not report:
        raise InvalidConfigError("evaluate needs --coefficients and/or --pred")
    _emit(report)


def cmd_roc(args):
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = Path(args.out)
    table = run_experiment(cfg, out, force=args.force, timing=args.timing,
                           workers=args.workers)
    written = [str(out / "results.csv"), str(out / "roc.csv")]
    if args.svg:
        from .plotting import render_roc_figures
        written += [str(p) for p in render_roc_figures(out / "roc.csv")]
    _emit({"config_sha256": table.config_hash, "rows": len(table.rows),
           "failures": len(table.failures), "written": written})


def cmd_asymptotics(args):
    if args.which == "rho-star":
        a, d, r = asymptotics.rho_star()
        print(f"alpha_star={a:.6f}")
        print(f"delta_star={d:.6f}")
        print(f"rho_star={r:.6f}")
        return
    st = asymptotics.fixed_point(args.delta, args.sigma, args.lam)
    _emit({"delta": st.delta, "sigma": st.sigma, "lambda": st.lam, "alpha": st.alpha,
           "tau_star": st.tau_star, "eta_moment": st.eta_moment, "norm_sq": st.norm_sq,
           "residuals": list(st.residuals)})


def cmd_pipeline(args):
    Y = _input_matrix(args.input)
    method = _method(args, Y.shape[0])
    res = robust_ssc(Y, method, n_clusters=args.n_clusters, dim=args.dim, seed=args.seed,
                     workers=args.workers, normalize=args.normalize)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_labels(out / "labels.txt", res.labels)
    save_matrix(out / f"Xhat{_ext(args.format)}", res.clustering.Xhat)
    summary = {"l_hat": res.l_hat, "n_clusters": res.clustering.n_clusters,
               "subspace_dims": [S.dim for S in res.clustering.subspaces],
               "warnings": res.clustering.warnings}
    truth = _input_labels(args)
    if truth is not None:
        summary["clustering_error"] = clustering_error(res.labels, truth).error
        if res.coefficients is not None:
            rep = discoveries(res.coefficients.B, truth, DISCOVERY_THRESHOLD)
            summary["detection_property"] = rep.total_false == 0
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    _emit(summary)


def _method_flags(p):
    p.add_argument("--method", choices=["lasso", "two_step", "dantzig", "knn_baseline"],
                   default="two_step")
    p.add_argument("--lam", type=float, help="penalty (lasso, dantzig)")
    p.add_argument("--sigma", type=float, help="noise level (two_step, dantzig)")
    p.add_argument("--alpha0", type=float, help="two-step scale; default max(0.25, 0.708 sigma)")
    p.add_argument("--k", type=int, default=10, help="neighbours for knn_baseline")
    p.add_argument("--temperature", type=float, default=1.0)


def build_parser():
    ap = argparse.ArgumentParser(prog="robust-ssc",
                                 description="Noisy sparse subspace clustering toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a synthetic union-of-subspaces dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["csv", "bin"], default="csv")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("regress", help="self-regress every column, write B")
    p.add_argument("--input", required=True, help="matrix file or generated directory")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--format", choices=["csv", "bin"])
    _method_flags(p)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("cluster", help="spectral clustering of a coefficient matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-clusters", type=int)
    p.add_argument("--graph", action="store_true", help="input is already a similarity graph")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("evaluate", help="discovery rates and clustering error")
    p.add_argument("--labels", required=True)
    p.add_argument("--coefficients")
    p.add_argument("--pred")
    p.add_argument("--threshold", type=float, default=DISCOVERY_THRESHOLD)
    p.add_argument("--dims", help="JSON list of subspace dims per label")
    p.add_argument("--n", type=int, help="ambient dimension")
    p.add_argument("--fpr-normalization", choices=["ambient", "opportunities"], default="ambient")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("roc", help="run an experiment config and write the result tables")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--force", action="store_true")
    p.add_argument("--svg", action="store_true")
    p.add_argument("--timing", action="store_true", help="fill wall_ms (breaks byte identity)")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("asymptotics", help="large-system LASSO predictions")
    asub = p.add_subparsers(dest="which", required=True)
    asub.add_parser("rho-star").set_defaults(func=cmd_asymptotics)
    q = asub.add_parser("fixed-point")
    q.add_argument("--delta", type=float, required=True)
    q.add_argument("--sigma", type=float, default=1.0)
    q.add_argument("--lam", type=float, required=True)
    q.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("pipeline", help="regress, cluster and denoise")
    p.add_argument("--input", required=True, help="matrix file or generated directory")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="ground truth, for scoring")
    p.add_argument("--n-clusters", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=["csv", "bin"], default="csv")
    _method_flags(p)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except SSCError as exc:
        err = {"error": exc.kind, "message": str(exc)}
        for attr in ("line", "column"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        print(json.dumps(err), file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        kind = "io_error" if isinstance(exc, OSError) else "invalid_input"
        print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
