"""Learn the interpretability model from survey feedback.

Pipeline: merge raw per-answer records into one regression sample per
distinct feature quadruple (label = correctness ratio x mean normalized
confidence, as a percent), weight samples by inverse label-bin frequency,
fit a weighted elastic-net linear model with stochastic gradient descent,
validate with leave-one-out cross-validation over a small hyperparameter
grid, and average the per-fold coefficients of the winning setting.

Features enter the regression as raw integer counts and labels as
percents; that is what makes the resulting coefficient magnitudes directly
comparable to the published model.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .phi_features import FeatureVector

#: Merged samples built from fewer answers than this are dropped.
MIN_ANSWERS = 10

#: Inverse-frequency weighting uses this many equal-width label bins.
N_LABEL_BINS = 10

ANSWER_HEADER = ["l", "n_o", "n_nao", "n_naoc", "correct", "confidence"]
SAMPLE_HEADER = ["l", "n_o", "n_nao", "n_naoc", "n_answers", "label"]


class DivergenceError(RuntimeError):
    """SGD produced a non-finite loss; the learning rate is too large."""


@dataclass(frozen=True)
class SurveyAnswer:
    features: FeatureVector
    correct: bool
    confidence: int

    def __post_init__(self):
        if self.confidence not in (1, 2, 3, 4):
            raise ValueError(f"confidence must be 1..4, got {self.confidence}")


@dataclass(frozen=True)
class SurveySample:
    features: FeatureVector
    n_answers: int
    correctness_ratio: float | None
    mean_conf_norm: float | None
    label: float  # percent in [0, 100]
    weight: float = 1.0


@dataclass(frozen=True)
class ElasticNetHyper:
    alpha: float
    l1_ratio: float
    eta0: float = 0.02
    power_t: float = 0.25
    epochs: int = 300

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 <= self.l1_ratio <= 1.0:
            raise ValueError("l1_ratio must be in [0, 1]")


#: Default tuning grid; alpha decades crossed with three L1/L2 mixes.
DEFAULT_GRID = tuple(
    ElasticNetHyper(alpha=a, l1_ratio=r)
    for a in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    for r in (0.1, 0.5, 0.9)
)


def build_regression_dataset(answers: list[SurveyAnswer]) -> list[SurveySample]:
    """Merge answers sharing a feature quadruple into single samples.

    Correctness ratio and mean normalized confidence ((c - 1) / 3) are
    computed per group; the label is their product as a percent. Groups
    with fewer than MIN_ANSWERS answers are dropped. Simulatability and
    decomposability answers are pooled (the input does not distinguish
    them). Output order is canonical in the feature quadruple, so the
    result does not depend on answer order.
    """
    groups: dict[FeatureVector, list[SurveyAnswer]] = defaultdict(list)
    for ans in answers:
        groups[ans.features].append(ans)
    samples = []
    for fv in sorted(groups, key=lambda f: (f.l, f.n_o, f.n_nao, f.n_naoc)):
        grp = groups[fv]
        if len(grp) < MIN_ANSWERS:
            continue
        ratio = sum(a.correct for a in grp) / len(grp)
        conf = sum((a.confidence - 1) / 3 for a in grp) / len(grp)
        samples.append(
            SurveySample(
                features=fv,
                n_answers=len(grp),
                correctness_ratio=ratio,
                mean_conf_norm=conf,
                label=100.0 * ratio * conf,
            )
        )
    return samples


def bin_weights(labels: np.ndarray) -> np.ndarray:
    """Inverse label-bin-frequency weights, mean-normalized to 1.

    Ten equal-width bins over [0, 100]; a sample's weight is
    total / (occupied_bins * bin_count), so the weights of each occupied
    bin sum to the same share and the overall sum equals the sample count.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if labels.size == 0:
        return np.zeros(0)
    if labels.min() < 0 or labels.max() > 100:
        raise ValueError("labels must lie in [0, 100]")
    bins = np.minimum((labels / (100.0 / N_LABEL_BINS)).astype(int), N_LABEL_BINS - 1)
    counts = np.bincount(bins, minlength=N_LABEL_BINS)
    occupied = int((counts > 0).sum())
    return labels.size / (occupied * counts[bins].astype(np.float64))


def _check_design(samples) -> tuple[np.ndarray, np.ndarray]:
    X = np.array(
        [[s.features.l, s.features.n_o, s.features.n_nao, s.features.n_naoc] for s in samples],
        dtype=np.float64,
    )
    y = np.array([s.label for s in samples], dtype=np.float64)
    return X, y


def fit_elastic_net_sgd(
    samples: list[SurveySample],
    weights: np.ndarray,
    hyper: ElasticNetHyper,
    rng: np.random.Generator,
) -> np.ndarray:
    """Weighted elastic net fit by proximal stochastic gradient descent.

    Minimizes  sum_i w_i (y_i - b - x_i . w)^2 / sum_i w_i
             + alpha * (l1_ratio * ||w||_1 + (1 - l1_ratio) / 2 * ||w||_2^2)
    over raw-count features and percent labels. Each epoch visits the
    samples in a fresh shuffled order; the data gradient step is followed
    by multiplicative L2 shrinkage and an L1 soft-threshold, so arbitrarily
    strong penalties stay stable. Two purely numerical devices speed up
    convergence without touching the minimized objective: features are
    centered internally (an exact reparametrization of the unpenalized
    intercept) and slope steps are diagonally preconditioned by inverse
    feature variance (the counts differ wildly in scale). The reported
    coefficients are the tail average of the last quarter of the iterates.
    The intercept is never penalized.
    Returns [intercept, w_l, w_no, w_nao, w_naoc].
    """
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to fit")
    X, y = _check_design(samples)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != y.shape:
        raise ValueError("weights must align with samples")
    w = w / w.mean()  # unit-mean weights keep the loss scale stable

    n = len(y)
    mu = (w[:, None] * X).mean(axis=0)
    Xc = X - mu
    precond = 1.0 / np.maximum((w[:, None] * Xc * Xc).mean(axis=0), 1.0)
    p1, p2, p3, p4 = precond.tolist()
    xs = Xc.tolist()
    ys = y.tolist()
    ws = w.tolist()
    b = 0.0
    c1 = c2 = c3 = c4 = 0.0
    eta0 = hyper.eta0
    power = hyper.power_t
    a_l1 = hyper.alpha * hyper.l1_ratio
    a_l2 = hyper.alpha * (1.0 - hyper.l1_ratio)
    total = hyper.epochs * n
    tail_start = total - max(1, total // 4)
    s0 = s1 = s2 = s3 = s4 = 0.0
    n_tail = 0
    t = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(n).tolist()
        for i in order:
            t += 1
            eta = eta0 / t ** power
            x1, x2, x3, x4 = xs[i]
            # gradient step on the weighted squared error at sample i
            r = 2.0 * ws[i] * (ys[i] - b - c1 * x1 - c2 * x2 - c3 * x3 - c4 * x4)
            e1 = eta * p1
            e2 = eta * p2
            e3 = eta * p3
            e4 = eta * p4
            b += eta * r
            c1 += e1 * r * x1
            c2 += e2 * r * x2
            c3 += e3 * r * x3
            c4 += e4 * r * x4
            if a_l2 > 0.0:
                c1 *= max(0.0, 1.0 - e1 * a_l2)
                c2 *= max(0.0, 1.0 - e2 * a_l2)
                c3 *= max(0.0, 1.0 - e3 * a_l2)
                c4 *= max(0.0, 1.0 - e4 * a_l2)
            if a_l1 > 0.0:
                c1 = _soft(c1, e1 * a_l1)
                c2 = _soft(c2, e2 * a_l1)
                c3 = _soft(c3, e3 * a_l1)
                c4 = _soft(c4, e4 * a_l1)
            if t > tail_start:
                s0 += b
                s1 += c1
                s2 += c2
                s3 += c3
                s4 += c4
                n_tail += 1
        if not all(map(math.isfinite, (b, c1, c2, c3, c4))):
            raise DivergenceError(
                f"SGD diverged (non-finite coefficients) at eta0={hyper.eta0}"
            )
    coef = np.array([s0, s1, s2, s3, s4]) / n_tail
    coef[0] -= coef[1:] @ mu  # undo the internal feature centering
    return coef


def _soft(v: float, th: float) -> float:
    if v > th:
        return v - th
    if v < -th:
        return v + th
    return 0.0


def predict(X: np.ndarray, coef: np.ndarray) -> np.ndarray:
    return coef[0] + np.asarray(X, dtype=np.float64) @ coef[1:]


def weighted_r2(y: np.ndarray, yhat: np.ndarray, w: np.ndarray) -> float:
    """R^2 against the weighted-mean baseline."""
    y = np.asarray(y, float)
    yhat = np.asarray(yhat, float)
    w = np.asarray(w, float)
    ybar = (w * y).sum() / w.sum()
    ss_res = (w * (y - yhat) ** 2).sum()
    ss_tot = (w * (y - ybar) ** 2).sum()
    return float(1.0 - ss_res / ss_tot)


def weighted_mae(y: np.ndarray, yhat: np.ndarray, w: np.ndarray) -> float:
    w = np.asarray(w, float)
    return float((w * np.abs(np.asarray(y, float) - np.asarray(yhat, float))).sum() / w.sum())


@dataclass(frozen=True)
class LooResult:
    best_hyper: ElasticNetHyper
    r2_train: float  # mean weighted R^2 over fold training sets
    r2_test: float  # pooled weighted R^2 of the held-out predictions
    mae: float  # pooled weighted MAE of the held-out predictions
    fold_coefficients: np.ndarray  # N x 5, one row per fold
    coefficients: np.ndarray  # per-coordinate mean over folds


def loo_cross_validate(
    samples: list[SurveySample],
    weights: np.ndarray,
    grid: tuple[ElasticNetHyper, ...] = DEFAULT_GRID,
    seed: int = 0,
) -> LooResult:
    """Leave-one-out model selection and coefficient averaging.

    For every grid point each fold holds out one sample and fits on the
    rest (fold rng stream derived from (seed, grid index, fold index), so
    folds are independent and order-free). The winning hyperparameters
    maximize the pooled held-out weighted R^2; the final model is the
    per-coordinate mean of that setting's fold coefficients.
    """
    n = len(samples)
    if n < 3:
        raise ValueError("need at least 3 samples for leave-one-out")
    X, y = _check_design(samples)
    w = np.asarray(weights, dtype=np.float64)

    best = None
    for gi, hyper in enumerate(grid):
        fold_coefs = np.empty((n, 5))
        preds = np.empty(n)
        train_r2 = np.empty(n)
        for k in range(n):
            keep = [i for i in range(n) if i != k]
            rng = np.random.default_rng([seed, gi, k])
            coef = fit_elastic_net_sgd(
                [samples[i] for i in keep], w[keep], hyper, rng
            )
            fold_coefs[k] = coef
            preds[k] = predict(X[k : k + 1], coef)[0]
            train_r2[k] = weighted_r2(y[keep], predict(X[keep], coef), w[keep])
        r2_test = weighted_r2(y, preds, w)
        cand = LooResult(
            best_hyper=hyper,
            r2_train=float(train_r2.mean()),
            r2_test=r2_test,
            mae=weighted_mae(y, preds, w),
            fold_coefficients=fold_coefs,
            coefficients=fold_coefs.mean(axis=0),
        )
        if best is None or cand.r2_test > best.r2_test:
            best = cand
    return best


def prepare_samples(answers: list[SurveyAnswer]) -> list[SurveySample]:
    """Merge answers and attach inverse-bin-frequency weights."""
    samples = build_regression_dataset(answers)
    ws = bin_weights(np.array([s.label for s in samples]))
    return [replace(s, weight=float(wi)) for s, wi in zip(samples, ws)]


# --- CSV interfaces ----------------------------------------------------------

def load_answers_csv(path: str | Path) -> list[SurveyAnswer]:
    """Read the per-answer survey export (one row per answer)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ANSWER_HEADER:
            raise ValueError(f"{path}: expected header {','.join(ANSWER_HEADER)}")
        out = []
        for row in reader:
            if not row:
                continue
            l, n_o, n_nao, n_naoc, correct, conf = row
            out.append(
                SurveyAnswer(
                    features=FeatureVector(int(l), int(n_o), int(n_nao), int(n_naoc)),
                    correct=bool(int(correct)),
                    confidence=int(conf),
                )
            )
    return out


def load_samples_csv(path: str | Path) -> list[SurveySample]:
    """Read a pre-merged sample CSV (one row per feature quadruple)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != SAMPLE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(SAMPLE_HEADER)}")
        out = []
        for row in reader:
            if not row:
                continue
            l, n_o, n_nao, n_naoc, n_answers, label = row
            out.append(
                SurveySample(
                    features=FeatureVector(int(l), int(n_o), int(n_nao), int(n_naoc)),
                    n_answers=int(n_answers),
                    correctness_ratio=None,
                    mean_conf_norm=None,
                    label=float(label),
                )
            )
    return out


def write_samples_csv(samples: list[SurveySample], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLE_HEADER)
        for s in samples:
            f = s.features
            writer.writerow([f.l, f.n_o, f.n_nao, f.n_naoc, s.n_answers, f"{s.label:.17g}"])


def coefficients_json(result: LooResult) -> dict:
    """The coefficient file schema consumed by nsgp.phi_features."""
    b, w_l, w_no, w_nao, w_naoc = result.coefficients
    return {
        "intercept": b,
        "w_l": w_l,
        "w_no": w_no,
        "w_nao": w_nao,
        "w_naoc": w_naoc,
        "cv_r2_train": result.r2_train,
        "cv_r2_test": result.r2_test,
        "cv_mae": result.mae,
    }
