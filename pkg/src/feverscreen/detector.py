"""NARX-style detector around a trained network.

Builds lagged inputs, scores readings, sweeps ROC thresholds, and
evaluates / minimises the predictive tracking cost

    J = sum_{j=n1..n2} (y_r(t+j) - y_m(t+j))^2
        + p * sum_{j=1..nu} (u(t+j-1) - u(t+j-2))^2
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import metrics
from .errors import (CompatibilityError, EmptyCandidatesError, InsufficientDataError,
                     InvariantError, SpecError)
from .nn import Network, forward


@dataclass(frozen=True)
class NarxConfig:
    input_delays: int = 9
    output_delays: int = 2
    threshold: float = 0.5

    def __post_init__(self):
        if self.input_delays < 1 or self.output_delays < 0:
            raise SpecError("input_delays >= 1 and output_delays >= 0 required")

    @property
    def window(self) -> int:
        return self.input_delays + self.output_delays


def build_narx_input(readings: Sequence[float], cfg: NarxConfig = NarxConfig()) -> np.ndarray:
    """Most recent ``input_delays + output_delays`` readings, oldest first.

    The first ``input_delays`` entries are the delayed reference inputs and
    the trailing ``output_delays`` entries are the plant-output lags.
    """
    r = np.asarray(readings, dtype=float)
    if r.ndim != 1 or r.size < cfg.window:
        raise InsufficientDataError(f"need {cfg.window} readings of history, got {r.size}")
    return r[r.size - cfg.window:].copy()


@dataclass(frozen=True)
class Verdict:
    score: float
    positive: bool
    threshold: float

    def as_record(self) -> dict:
        return {"score": self.score, "verdict": "positive" if self.positive else "negative",
                "threshold": self.threshold}


def classify(net: Network, readings, cfg: NarxConfig = NarxConfig()) -> Verdict:
    window = build_narx_input(readings, cfg)
    score = float(forward(net, net.normalization.apply(window))[0])
    return Verdict(score, score >= cfg.threshold, cfg.threshold)


def score_windows(net: Network, windows) -> np.ndarray:
    """Network scores for an (n, L) array of raw-reading windows."""
    return forward(net, net.normalization.apply(np.asarray(windows, dtype=float)))[:, 0]


@dataclass(frozen=True)
class RocCurve:
    points: tuple  # (threshold, tpr, fpr), thresholds ascending
    degenerate: Optional[str] = None


def roc_from_scores(scores, labels, n_thresholds: int = 101) -> RocCurve:
    """Sweep ``n_thresholds`` uniform thresholds over the score range.

    One extra threshold just above the highest score closes the curve at
    (FPR, TPR) = (0, 0). Single-class input yields an empty, flagged curve.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    if s.size == 0 or s.shape != y.shape:
        raise SpecError("scores and labels must be non-empty and of equal length")
    if n_thresholds < 2:
        raise SpecError("n_thresholds must be >= 2")
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return RocCurve((), degenerate="single-class labels")
    lo, hi = float(s.min()), float(s.max())
    thresholds = list(np.linspace(lo, hi, n_thresholds)) + [float(np.nextafter(hi, np.inf))]
    points = []
    for thr in thresholds:
        cm = metrics.confusion_matrix((s >= thr).astype(int), y)
        points.append((float(thr), metrics.tpr(cm), metrics.fpr(cm)))
    return RocCurve(tuple(points))


def roc_sweep(net: Network, windows, labels, n_thresholds: int = 101) -> RocCurve:
    return roc_from_scores(score_windows(net, windows), labels, n_thresholds)


@dataclass(frozen=True)
class CostSpec:
    """Inputs of the tracking cost.

    ``y_r`` and ``y_m`` hold samples t+n1 .. t+n2; ``u`` holds
    t-1 .. t+nu-1 (so ``u[0]`` is the value before the horizon starts).
    """

    y_r: tuple
    y_m: tuple
    u: tuple
    n1: int = 1
    n2: int = 2
    nu: int = 1
    p: float = 0.05

    def validate(self):
        if not self.n1 <= self.n2:
            raise SpecError(f"n1 ({self.n1}) must not exceed n2 ({self.n2})")
        if self.nu < 1:
            raise SpecError("nu must be >= 1")
        if not self.p >= 0:
            raise SpecError("p must be >= 0")
        span = self.n2 - self.n1 + 1
        if len(self.y_r) != span or len(self.y_m) != span:
            raise SpecError(f"y_r and y_m must cover {span} samples (t+{self.n1}..t+{self.n2})")
        if len(self.u) != self.nu + 1:
            raise SpecError(f"u must cover {self.nu + 1} samples (t-1..t+{self.nu - 1})")


def evaluate_cost_J(spec: CostSpec) -> float:
    spec.validate()
    err = np.asarray(spec.y_r, dtype=float) - np.asarray(spec.y_m, dtype=float)
    du = np.diff(np.asarray(spec.u, dtype=float))
    return float(np.sum(err ** 2) + spec.p * np.sum(du ** 2))


def minimize_cost_J(template: CostSpec, candidate_grid,
                    predict: Optional[Callable[[np.ndarray], Sequence[float]]] = None):
    """Exhaustive search for the candidate ``u`` sequence with the least cost.

    ``predict`` maps a candidate to the model response ``y_m`` over the
    horizon; without it ``template.y_m`` is used for every candidate.
    Returns ``(best_u, best_J)``; ties go to the earliest candidate.
    """
    grid = np.asarray(candidate_grid, dtype=float)
    if grid.size == 0:
        raise EmptyCandidatesError("candidate grid is empty")
    if grid.ndim != 2:
        raise SpecError("candidate grid must be a sequence of u-sequences")
    template.validate()
    if grid.shape[1] != template.nu + 1:
        raise SpecError(f"candidates must have {template.nu + 1} entries")
    y_r = np.asarray(template.y_r, dtype=float)
    if predict is None:
        track = np.full(len(grid), np.sum((y_r - np.asarray(template.y_m, dtype=float)) ** 2))
    else:
        y_m = np.array([np.asarray(predict(u), dtype=float) for u in grid])
        if y_m.shape != (len(grid), y_r.size):
            raise SpecError("predict must return one value per horizon sample")
        track = np.sum((y_r - y_m) ** 2, axis=1)
    costs = track + template.p * np.sum(np.diff(grid, axis=1) ** 2, axis=1)
    best = int(np.argmin(costs))
    return grid[best].copy(), float(costs[best])


def with_candidate(template: CostSpec, u, y_m=None) -> CostSpec:
    """Copy of ``template`` with ``u`` (and optionally ``y_m``) swapped in."""
    kw = {"u": tuple(float(v) for v in u)}
    if y_m is not None:
        kw["y_m"] = tuple(float(v) for v in y_m)
    return replace(template, **kw)


def evaluate(net: Network, dataset, cfg: NarxConfig = NarxConfig(),
             n_thresholds: int = 101) -> metrics.EvalReport:
    """Score every split of ``dataset`` and pool them into an overall row."""
    if dataset.window_length != net.n_inputs:
        raise CompatibilityError(f"model takes {net.n_inputs} inputs but dataset windows "
                                 f"have {dataset.window_length} readings")
    scores = score_windows(net, dataset.features)
    labels = dataset.labels
    splits = {}
    if dataset.split is not None:
        for name in ("train", "val", "test"):
            idx = np.asarray(getattr(dataset.split, name), dtype=int)
            if idx.size:
                splits[name] = metrics.split_result(scores[idx], labels[idx], cfg.threshold)
    overall = metrics.split_result(scores, labels, cfg.threshold)
    if splits and sum((r.confusion for r in splits.values()),
                      metrics.ConfusionMatrix()) != overall.confusion:
        raise InvariantError("pooled split counts disagree with overall counts")
    splits["overall"] = overall
    roc = roc_from_scores(scores, labels, n_thresholds)
    return metrics.EvalReport(splits, cfg.threshold, list(roc.points), roc.degenerate)
