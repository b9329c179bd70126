"""Delimited tables and matplotlib figures for training/evaluation results.

Figures are written as SVG with a fixed hash salt and no timestamp so that
re-running a command reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import SchemaError  # noqa: E402
from .metrics import REPORT_ROWS, EvalReport  # noqa: E402

RC = {
    "svg.hashsalt": "feverscreen",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.dpi": 100,
}

SPLIT_COLORS = {"train": "tab:blue", "val": "tab:green", "test": "tab:red",
                "overall": "tab:gray"}
SPLIT_TITLES = {"train": "Training", "val": "Validation", "test": "Test", "overall": "All"}


def _num(v):
    # JSON/CSV friendly: non-finite -> empty
    return "" if v is None or (isinstance(v, float) and not math.isfinite(v)) else repr(float(v))


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- delimited output ------------------------------------------------------

def write_curve_csv(report, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_mse", "val_mse", "test_mse"])
        for e, tr, va, te in report.curve_rows():
            w.writerow([e, _num(tr), _num(va), _num(te)])


def read_curve_csv(path) -> list[tuple]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head != ["epoch", "train_mse", "val_mse", "test_mse"]:
            raise SchemaError(f"{path}: not a training-curve CSV")
        for row in reader:
            rows.append((int(row[0]),) + tuple(float(v) if v else math.nan for v in row[1:]))
    return rows


def write_roc_csv(points, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "tpr", "fpr"])
        for t, a, b in points:
            w.writerow([repr(float(t)), repr(float(a)), repr(float(b))])


def write_table_csv(report: EvalReport, path) -> None:
    """ROC performance table: one row per multiset, overall last."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["multiset", "false_positive_rate", "true_positive_rate",
                    "specificity", "accuracy", "regression_r"])
        for key, caption in REPORT_ROWS:
            if key not in report.splits:
                continue
            r = report.splits[key]
            w.writerow([caption, _num(r.fpr), _num(r.tpr), _num(r.specificity),
                        _num(r.accuracy), _num(r.regression_r)])


def write_confusion_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["split", "tp", "tn", "fp", "fn", "accuracy"])
        for key, _ in REPORT_ROWS:
            if key in report.splits:
                r = report.splits[key]
                cm = r.confusion
                w.writerow([key, cm.tp, cm.tn, cm.fp, cm.fn, _num(r.accuracy)])


def write_report_json(report: EvalReport, path) -> None:
    Path(path).write_text(json.dumps(report.as_dict(), indent=1, allow_nan=False) + "\n",
                          encoding="utf-8")


def format_table(report: EvalReport) -> str:
    """Plain-text rendering of the confusion counts and rate table."""
    lines = [f"{'multiset':<30} {'TP':>5} {'TN':>5} {'FP':>5} {'FN':>5} "
             f"{'ACC':>7} {'TPR':>7} {'FPR':>7} {'SPEC':>7} {'R':>7}"]

    def f(v):
        return f"{v:7.3f}" if v is not None else f"{'-':>7}"

    for key, caption in REPORT_ROWS:
        if key not in report.splits:
            continue
        r = report.splits[key]
        cm = r.confusion
        lines.append(f"{caption:<30} {cm.tp:5d} {cm.tn:5d} {cm.fp:5d} {cm.fn:5d} "
                     f"{f(r.accuracy)} {f(r.tpr)} {f(r.fpr)} {f(r.specificity)} "
                     f"{f(r.regression_r)}")
    return "\n".join(lines)


# --- figures ---------------------------------------------------------------

def plot_training_curves(rows, path, best_epoch=None) -> None:
    """MSE per epoch for each split on a log axis, best validation marked."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        epochs = [r[0] for r in rows]
        for col, key in ((1, "train"), (2, "val"), (3, "test")):
            ys = [r[col] for r in rows]
            if all(math.isnan(y) for y in ys):
                continue
            ax.plot(epochs, ys, marker=".", color=SPLIT_COLORS[key], label=SPLIT_TITLES[key])
        if best_epoch:
            best = next(r[2] for r in rows if r[0] == best_epoch)
            ax.axvline(best_epoch, color="k", ls=":", lw=0.8)
            ax.plot([best_epoch], [best], "o", mfc="none", mec="k", ms=9, label="Best")
            ax.set_title(f"Best validation MSE {best:.5g} at epoch {best_epoch}")
        ax.set_yscale("log")
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean squared error")
        ax.legend()
        fig.tight_layout()
        _save(fig, path)


def plot_roc(points, path, title="ROC (all samples)") -> None:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.2, 4.2))
        if points:
            pts = sorted(points, key=lambda p: (p[2], p[1]))
            ax.step([p[2] for p in pts], [p[1] for p in pts], where="post", color="tab:blue")
        ax.plot([0, 1], [0, 1], color="0.6", ls="--", lw=0.8)
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)


def _confusion_panel(ax, result, title):
    cm = result.confusion
    n = cm.total
    # rows: predicted class 1, 0; columns: target class 1, 0
    cells = [[cm.tp, cm.fp], [cm.fn, cm.tn]]
    ax.imshow([[1, 0], [0, 1]], cmap="Greens", vmin=-1, vmax=2)
    for i in range(2):
        for j in range(2):
            ax.text(j, i, f"{cells[i][j]}\n{100 * cells[i][j] / n:.1f}%",
                    ha="center", va="center", fontsize=9)
    ax.set_xticks([0, 1], ["1", "0"])
    ax.set_yticks([0, 1], ["1", "0"])
    ax.set_xlabel("target class")
    ax.set_ylabel("output class")
    ax.set_title(f"{title}: {100 * result.accuracy:.1f}% correct")
    ax.grid(False)


def plot_confusion_matrices(report: EvalReport, path) -> None:
    keys = [k for k in ("train", "val", "test", "overall") if k in report.splits]
    with plt.rc_context(RC):
        ncols = 2 if len(keys) > 1 else 1
        nrows = math.ceil(len(keys) / ncols)
        fig, axes = plt.subplots(nrows, ncols, figsize=(3.4 * ncols, 3.2 * nrows),
                                 squeeze=False)
        for ax, key in zip(axes.flat, keys):
            _confusion_panel(ax, report.splits[key], SPLIT_TITLES[key])
        for ax in list(axes.flat)[len(keys):]:
            ax.set_visible(False)
        fig.tight_layout()
        _save(fig, path)
