"""SVG figures rendered from ``roc.csv``.

The figures read only the CSV so they can never disagree with it. Output
is byte-stable: no timestamp metadata and a fixed SVG id salt.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiment import read_table  # noqa: E402


def _series(rows):
    by_dim = {}
    for r in rows:
        by_dim.setdefault(r["dim"], []).append(
            (float(r["lambda_multiplier"]), _num(r["fpr"]), _num(r["tpr"])))
    return {k: sorted(v) for k, v in by_dim.items()}


def _num(s):
    return float(s) if s not in ("", None) else float("nan")


def _save(fig, path):
    with plt.rc_context({"svg.hashsalt": "robust-ssc", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_roc_figures(roc_csv, out_dir=None):
    """Write ``fpr.svg``, ``tpr.svg`` and ``roc.svg`` next to ``roc_csv``.

    Returns the written paths.
    """
    roc_csv = Path(roc_csv)
    out = Path(out_dir) if out_dir else roc_csv.parent
    series = _series(read_table(roc_csv))
    order = sorted(series, key=lambda k: (k == "all", int(k) if k.isdigit() else 0))
    paths = []
    for name, xi, yi, xlabel, ylabel in (
            ("fpr.svg", 0, 1, "lambda multiplier", "FPR"),
            ("tpr.svg", 0, 2, "lambda multiplier", "TPR"),
            ("roc.svg", 1, 2, "FPR", "TPR")):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for key in order:
            pts = series[key]
            ax.plot([p[xi] for p in pts], [p[yi] for p in pts], marker="o", ms=3,
                    lw=2 if key == "all" else 1,
                    label="mean" if key == "all" else f"d={key}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / name
        _save(fig, path)
        paths.append(path)
    return paths
