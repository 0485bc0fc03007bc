"""Score calibration and forensic evaluation metrics.

Raw document scores are well-ordered but not interpretable as evidence
strength. A two-parameter logistic map, fit by maximum likelihood on held-out
training problems, turns a raw score into a calibrated log likelihood ratio:
the posterior log odds from the logistic model minus the training prior log
odds. Decisions threshold the calibrated log LR at zero.

Quality of the likelihood ratios is measured by the log-loss cost Cllr. Its
discrimination floor Cllr_min comes from replacing the scores with the best
monotone recalibration (pool-adjacent-violators), and the difference
Cllr_cal = Cllr - Cllr_min isolates pure calibration loss.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CalibrationError

# Absolute slope bound; hitting it means the classes are perfectly separable
# and the unbounded MLE does not exist.
SLOPE_CAP = 1e3

_GRAD_TOL = 1e-8
_MAX_ITER = 200
_LN2 = math.log(2.0)


def _check_labels(labels: Sequence[str]) -> np.ndarray:
    y = np.empty(len(labels))
    for i, lab in enumerate(labels):
        if lab == "Y":
            y[i] = 1.0
        elif lab == "N":
            y[i] = 0.0
        else:
            raise ValueError(f"labels must be 'Y' or 'N': {lab!r}")
    return y


@dataclass(frozen=True)
class CalibrationModel:
    """Fitted logistic map from raw score to calibrated log LR.

    ``separated`` flags a fit that hit the slope cap because the training
    classes were perfectly separable; the produced log LRs are then bounded
    by the cap rather than genuinely unbounded.
    """

    intercept: float
    slope: float
    prior_log_odds: float
    separated: bool = False

    def apply(self, score: float) -> float:
        """Calibrated log LR: posterior log odds minus prior log odds."""
        if not math.isfinite(score):
            raise ValueError(f"score must be finite: {score}")
        return self.intercept + self.slope * score - self.prior_log_odds

    def to_json_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "slope": self.slope,
            "prior_log_odds": self.prior_log_odds,
            "separated": self.separated,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "CalibrationModel":
        return cls(
            intercept=obj["intercept"],
            slope=obj["slope"],
            prior_log_odds=obj["prior_log_odds"],
            separated=obj["separated"],
        )


def fit_calibration(scores: Sequence[float], labels: Sequence[str]) -> CalibrationModel:
    """Fit the logistic map by Newton-Raphson maximum likelihood.

    Starts at (0, 0); a balanced constant-score input therefore returns
    exactly (0, 0). Requires both classes present and finite scores. With
    perfectly separable classes the slope is capped at SLOPE_CAP, the
    intercept centers the decision boundary between the classes, and the
    model is flagged.
    """
    x = np.asarray(scores, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("scores must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("scores must be finite")
    y = _check_labels(labels)
    if y.size != x.size:
        raise ValueError("scores and labels must have equal length")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise CalibrationError("calibration requires both Y and N training scores")
    prior_log_odds = math.log(n_pos / (y.size - n_pos))

    # Strictly separable classes have no finite MLE; Newton would drift
    # until numerics stall, so resolve the direction up front.
    pos, neg = x[y == 1.0], x[y == 0.0]
    if float(np.max(neg)) < float(np.min(pos)):
        return _separated_model(x, y, 1.0, prior_log_odds)
    if float(np.max(pos)) < float(np.min(neg)):
        return _separated_model(x, y, -1.0, prior_log_odds)

    a, b = 0.0, 0.0
    converged = False
    for _ in range(_MAX_ITER):
        z = a + b * x
        p = 1.0 / (1.0 + np.exp(-z))
        g0 = float(np.sum(y - p))
        g1 = float(np.sum(x * (y - p)))
        if max(abs(g0), abs(g1)) <= _GRAD_TOL:
            converged = True
            break
        w = p * (1.0 - p)
        A = float(np.sum(w))
        B = float(np.sum(w * x))
        C = float(np.sum(w * x * x))
        det = A * C - B * B
        if not math.isfinite(det) or det <= 1e-12 * max(A * C, 1.0):
            # Ill-conditioned curvature (e.g. constant scores): ridge it.
            ridge = 1e-6 * max(A, C, 1.0)
            A += ridge
            C += ridge
            det = A * C - B * B
        da = (C * g0 - B * g1) / det
        db = (A * g1 - B * g0) / det
        step = max(abs(da), abs(db))
        if step > 10.0:
            da *= 10.0 / step
            db *= 10.0 / step
        a += da
        b += db
        if abs(b) > SLOPE_CAP:
            return _separated_model(x, y, b, prior_log_odds)
    if not converged:
        # Flat likelihood surfaces stop short of the gradient tolerance;
        # the fit is still usable, so report rather than fail.
        warnings.warn("calibration fit did not reach gradient tolerance", RuntimeWarning)
    return CalibrationModel(
        intercept=a, slope=b, prior_log_odds=prior_log_odds, separated=False
    )


def _separated_model(
    x: np.ndarray, y: np.ndarray, b: float, prior_log_odds: float
) -> CalibrationModel:
    slope = SLOPE_CAP if b > 0 else -SLOPE_CAP
    if slope > 0:
        boundary = (np.max(x[y == 0.0]) + np.min(x[y == 1.0])) / 2.0
    else:
        boundary = (np.max(x[y == 1.0]) + np.min(x[y == 0.0])) / 2.0
    return CalibrationModel(
        intercept=-slope * boundary,
        slope=slope,
        prior_log_odds=prior_log_odds,
        separated=True,
    )


def apply_calibration(model: CalibrationModel, score: float) -> float:
    return model.apply(score)


def decide(log_lr: float) -> str:
    """Same-author decision: Y strictly above zero, N otherwise (ties to N)."""
    if not math.isfinite(log_lr):
        raise ValueError(f"log LR must be finite: {log_lr}")
    return "Y" if log_lr > 0.0 else "N"


def log10_lr(log_lr: float) -> float:
    """Natural-log LR rescaled to base 10, the usual forensic reporting scale."""
    return log_lr / math.log(10.0)


# ----------------------------------------------------------------------
# Cllr


@dataclass(frozen=True)
class LRSet:
    """Likelihood ratios on the linear scale, split by ground truth."""

    same_source: tuple[float, ...]
    different_source: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.same_source or not self.different_source:
            raise ValueError("both LR classes must be non-empty")
        for lr in (*self.same_source, *self.different_source):
            if math.isnan(lr) or lr <= 0.0:
                raise ValueError(f"likelihood ratios must be positive: {lr}")

    @classmethod
    def from_log_lrs(
        cls, same_source: Sequence[float], different_source: Sequence[float]
    ) -> "LRSet":
        return cls(
            tuple(math.exp(v) for v in same_source),
            tuple(math.exp(v) for v in different_source),
        )


def cllr(lrs: LRSet) -> float:
    """Log-loss cost of a set of likelihood ratios.

    Equals 1 for uninformative LRs (all 1), approaches 0 as same-source LRs
    grow and different-source LRs shrink.
    """
    mean_same = math.fsum(math.log2(1.0 + 1.0 / lr) for lr in lrs.same_source) / len(
        lrs.same_source
    )
    mean_diff = math.fsum(math.log2(1.0 + lr) for lr in lrs.different_source) / len(
        lrs.different_source
    )
    return 0.5 * (mean_same + mean_diff)


def cllr_from_log_lrs(
    same_source: Sequence[float], different_source: Sequence[float]
) -> float:
    """Cllr straight from log LRs, stable for magnitudes that would overflow
    the linear scale."""
    if len(same_source) == 0 or len(different_source) == 0:
        raise ValueError("both LR classes must be non-empty")
    same = np.asarray(same_source, dtype=float)
    diff = np.asarray(different_source, dtype=float)
    if np.any(np.isnan(same)) or np.any(np.isnan(diff)):
        raise ValueError("log LRs must not be NaN")
    mean_same = float(np.mean(np.logaddexp(0.0, -same))) / _LN2
    mean_diff = float(np.mean(np.logaddexp(0.0, diff))) / _LN2
    return 0.5 * (mean_same + mean_diff)


# ----------------------------------------------------------------------
# pool-adjacent-violators


def pav_fit(scores: Sequence[float], labels: Sequence[str]) -> np.ndarray:
    """Best monotone fit of same-source indicators to scores (least squares).

    Returns the fitted posterior per item in input order. Items with equal
    scores form one atom before pooling, since a monotone function of the
    score cannot distinguish them; atoms are complete before any pooling so
    a late tied item can never leak into an earlier merged block. Pooled
    means are exact integer-sum ratios.
    """
    y = _check_labels(labels)
    x = np.asarray(scores, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("scores must be a non-empty 1-d sequence")
    if x.size != y.size:
        raise ValueError("scores and labels must have equal length")
    if not np.all(np.isfinite(x)):
        raise ValueError("scores must be finite")

    order = np.argsort(x, kind="stable")
    # atoms as [sum_of_labels, item_count, list_of_original_positions]
    atoms: list[list] = []
    prev_score = None
    for idx in order:
        score = x[idx]
        if prev_score is not None and score == prev_score:
            atoms[-1][0] += int(y[idx])
            atoms[-1][1] += 1
            atoms[-1][2].append(int(idx))
        else:
            atoms.append([int(y[idx]), 1, [int(idx)]])
        prev_score = score

    blocks: list[list] = []
    for atom in atoms:
        blocks.append(atom)
        # pool while the mean sequence decreases
        while len(blocks) >= 2:
            s1, n1, i1 = blocks[-2]
            s2, n2, i2 = blocks[-1]
            if s1 * n2 > s2 * n1:  # mean(prev) > mean(last), exact in ints
                blocks[-2:] = [[s1 + s2, n1 + n2, i1 + i2]]
            else:
                break

    fitted = np.empty(x.size)
    for s, n, idxs in blocks:
        value = s / n
        for idx in idxs:
            fitted[idx] = value
    return fitted


def _cllr_min_from_logs(
    log_same: Sequence[float], log_diff: Sequence[float]
) -> tuple[float, float]:
    scores = [*log_same, *log_diff]
    labels = ["Y"] * len(log_same) + ["N"] * len(log_diff)
    fitted = pav_fit(scores, labels)
    prior = math.log(len(log_same) / len(log_diff))
    # Pure runs at the extremes would map to infinite LRs; add-one smoothing
    # over each run's size keeps them finite while vanishing as runs grow.
    run_zero = int(np.sum(fitted == 0.0))
    run_one = int(np.sum(fitted == 1.0))
    log_lrs = np.empty(len(scores))
    for i, p in enumerate(fitted):
        if p <= 0.0:
            p = 1.0 / (run_zero + 2.0)
        elif p >= 1.0:
            p = (run_one + 1.0) / (run_one + 2.0)
        log_lrs[i] = math.log(p / (1.0 - p)) - prior
    n_same = len(log_same)
    floor = cllr_from_log_lrs(log_lrs[:n_same], log_lrs[n_same:])
    full = cllr_from_log_lrs(log_same, log_diff)
    return floor, full - floor


def cllr_min(lrs: LRSet) -> tuple[float, float]:
    """Discrimination floor of an LR set, and the calibration loss above it.

    The input LRs are monotonically recalibrated by PAV (on the log scale,
    which preserves ranks); block posteriors convert back to LRs by dividing
    out the empirical prior odds. The pure runs at either extreme get
    add-one smoothing over the run size, so a perfectly separated input has
    a floor of log2(1 + 1/(n+1)) rather than zero, decaying with n. Returns
    (cllr_min, cllr_cal) with cllr_cal = cllr - cllr_min.
    """
    return _cllr_min_from_logs(
        [math.log(v) for v in lrs.same_source],
        [math.log(v) for v in lrs.different_source],
    )


# ----------------------------------------------------------------------
# classification metrics


def roc_auc(scores: Sequence[float], labels: Sequence[str]) -> float:
    """Area under the ROC curve via average ranks; ties count one half."""
    y = _check_labels(labels)
    x = np.asarray(scores, dtype=float)
    if x.size != y.size or x.size == 0:
        raise ValueError("scores and labels must be non-empty and equal length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC requires both classes")
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    i = 0
    sorted_x = x[order]
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = float(np.sum(ranks[y == 1.0]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def classification_metrics(
    decisions: Sequence[str], labels: Sequence[str]
) -> dict[str, float]:
    """Confusion counts and the derived rates, with Y as the positive class.

    Undefined rates (empty denominators) are reported as 0.0.
    """
    if len(decisions) != len(labels) or not decisions:
        raise ValueError("decisions and labels must be non-empty and equal length")
    tp = fn = fp = tn = 0
    for dec, lab in zip(decisions, labels):
        if dec not in ("Y", "N"):
            raise ValueError(f"decisions must be 'Y' or 'N': {dec!r}")
        if lab not in ("Y", "N"):
            raise ValueError(f"labels must be 'Y' or 'N': {lab!r}")
        if lab == "Y":
            tp += dec == "Y"
            fn += dec == "N"
        else:
            fp += dec == "Y"
            tn += dec == "N"
    total = tp + fn + fp + tn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "tp": tp,
        "fn": fn,
        "fp": fp,
        "tn": tn,
        "accuracy": (tp + tn) / total,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


@dataclass(frozen=True)
class MetricsReport:
    """Everything the evaluation protocol reports for one test split."""

    accuracy: float
    auc: float
    precision: float
    recall: float
    f1: float
    tp: int
    fn: int
    fp: int
    tn: int
    cllr: float
    cllr_min: float
    cllr_cal: float

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fn": self.fn,
            "fp": self.fp,
            "tn": self.tn,
            "cllr": self.cllr,
            "cllr_min": self.cllr_min,
            "cllr_cal": self.cllr_cal,
        }


def build_metrics_report(
    log_lrs: Sequence[float], labels: Sequence[str]
) -> MetricsReport:
    """Assemble the report from calibrated log LRs and ground truth."""
    decisions = [decide(v) for v in log_lrs]
    counts = classification_metrics(decisions, labels)
    same = [v for v, lab in zip(log_lrs, labels) if lab == "Y"]
    diff = [v for v, lab in zip(log_lrs, labels) if lab == "N"]
    full = cllr_from_log_lrs(same, diff)
    floor, cal = _cllr_min_from_logs(same, diff)
    return MetricsReport(
        accuracy=counts["accuracy"],
        auc=roc_auc(list(log_lrs), labels),
        precision=counts["precision"],
        recall=counts["recall"],
        f1=counts["f1"],
        tp=counts["tp"],
        fn=counts["fn"],
        fp=counts["fp"],
        tn=counts["tn"],
        cllr=full,
        cllr_min=floor,
        cllr_cal=cal,
    )
