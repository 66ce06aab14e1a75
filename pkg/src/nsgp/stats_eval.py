"""Post-processing of final populations and the statistical machinery of
the comparative evaluation.

The validation front re-scores a final population on the validation split
(reusing each individual's training-fitted scaling transform), keeps the
non-dominated subset, and re-evaluates the survivors on the test split.
Front members are selected by trade-off percentile, compared across runs
with the Wilcoxon signed-rank test, and corrected with Holm-Bonferroni.

Errors at this layer are NMSE: scaled MSE divided by the training target
variance, so a mean predictor scores 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .expr_core import DEFAULT_EPS, EpsilonConfig, eval_tree, parse_infix
from .moea import Individual, nondominated_sort_objectives
from .objectives import WORST_ERR, scaled_mse
from .phi_features import (
    DEFAULT_COEFFICIENTS,
    FeatureVector,
    PhiCoefficients,
    extract_features,
    phi_objective,
)

FRONT_CSV_HEADER = [
    "tree", "l", "n_o", "n_nao", "n_naoc",
    "phi_objective", "err_train", "err_val", "err_test",
]


@dataclass(frozen=True)
class FrontMember:
    tree_text: str
    features: FeatureVector
    phi_obj: float
    err_train: float
    err_val: float
    err_test: float
    interp: float  # objective actually used for dominance (phi_obj or l)


@dataclass(frozen=True)
class FrontRecord:
    """Validation-front archive of one run, ascending in validation error."""

    members: tuple[FrontMember, ...]
    source_run: int
    mode: str

    def __post_init__(self):
        for a, b in zip(self.members, self.members[1:]):
            if not (a.err_val < b.err_val and a.interp > b.interp):
                raise ValueError("front members must be strictly sorted and non-dominated")

    def __len__(self) -> int:
        return len(self.members)


def _nmse(y: np.ndarray, yhat: np.ndarray, scaling, var_y_train: float) -> float:
    if not np.isfinite(yhat).all():
        return WORST_ERR
    v = scaled_mse(y, yhat, scaling) / var_y_train
    return float(v) if math.isfinite(v) else WORST_ERR


def validation_front(
    population: Sequence[Individual],
    X_val: np.ndarray,
    y_val: np.ndarray,
    X_test: np.ndarray,
    y_test: np.ndarray,
    var_y_train: float,
    *,
    phi_coeffs: PhiCoefficients = DEFAULT_COEFFICIENTS,
    source_run: int = 0,
    mode: str = "phi",
    eps: EpsilonConfig = DEFAULT_EPS,
) -> FrontRecord:
    """Non-dominated subset of a final population under validation error.

    Validation predictions reuse each individual's training-fitted scaling
    coefficients. Members with identical (err_val, interp) collapse to one
    canonical representative, so the result does not depend on population
    order. Test error is computed only for the surviving members.
    """
    if len(population) == 0:
        raise ValueError("population is empty")
    rows = []
    for ind in population:
        err_val = _nmse(y_val, eval_tree(ind.tree, X_val, eps), ind.scaling, var_y_train)
        rows.append((ind, err_val))

    objs = np.array([(ev, ind.obj.interp) for ind, ev in rows])
    front0 = nondominated_sort_objectives(objs)[0]

    # canonical representative per duplicated objective pair
    candidates = sorted(
        (
            (rows[i][1], rows[i][0].obj.interp, rows[i][0].obj.err, str(rows[i][0].tree), rows[i][0])
            for i in front0
        ),
        key=lambda r: r[:4],
    )
    members = []
    last_key = None
    for err_val, interp, err_train_scaled, text, ind in candidates:
        key = (err_val, interp)
        if key == last_key:
            continue
        last_key = key
        err_test = _nmse(y_test, eval_tree(ind.tree, X_test, eps), ind.scaling, var_y_train)
        fv = extract_features(ind.tree)
        members.append(
            FrontMember(
                tree_text=text,
                features=fv,
                phi_obj=phi_objective(fv, phi_coeffs),
                err_train=err_train_scaled / 100.0,  # evolution scale back to NMSE
                err_val=err_val,
                err_test=err_test,
                interp=interp,
            )
        )
    return FrontRecord(members=tuple(members), source_run=source_run, mode=mode)


def select_tau(front: FrontRecord, tau: int) -> FrontMember:
    """Member at trade-off percentile tau of the MSE-ascending front.

    tau=1 is the best-error member, tau=100 the best-interpretability one.
    """
    if not 1 <= tau <= 100:
        raise ValueError(f"tau must be in 1..100, got {tau}")
    if len(front) == 0:
        raise ValueError("front is empty")
    idx = math.ceil(tau * len(front) / 100) - 1
    idx = min(max(idx, 0), len(front) - 1)
    return front.members[idx]


# --- hypothesis testing -------------------------------------------------------

def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> float:
    """Two-sided paired Wilcoxon signed-rank p-value.

    Zero differences are dropped (all-zero pairs give p = 1 by convention).
    Tied absolute differences receive average ranks. The null distribution
    is exact (computed by dynamic programming over doubled ranks) up to
    n = 25 and a tie-corrected normal approximation above that, without
    continuity correction.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("paired samples must have equal length")
    d = x - y
    d = d[d != 0]
    n = d.size
    if n == 0:
        return 1.0

    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks.sum()) - w_plus

    if n <= 25:
        # doubled ranks are integers even with .5 average ranks
        r2 = np.rint(2 * ranks).astype(np.int64)
        target = int(round(2 * min(w_plus, w_minus)))
        total = int(r2.sum())
        counts = np.zeros(total + 1, dtype=np.int64)
        counts[0] = 1
        for r in r2:
            shifted = np.zeros_like(counts)
            shifted[r:] = counts[: total + 1 - r]
            counts = counts + shifted
        p = 2.0 * int(counts[: target + 1].sum()) / 2**n
        return min(1.0, p)

    mu = n * (n + 1) / 4.0
    tie_counts = np.unique(np.rint(2 * ranks).astype(np.int64), return_counts=True)[1]
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(((tie_counts**3 - tie_counts) / 48.0).sum())
    z = (w_plus - mu) / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def holm_bonferroni(p_values: Sequence[float], alpha: float = 0.05) -> list[bool]:
    """Step-down multiple-comparison correction; flags in input order."""
    p = list(p_values)
    if any(not 0.0 <= v <= 1.0 for v in p):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    reject = [False] * m
    order = sorted(range(m), key=lambda i: p[i])
    for i, idx in enumerate(order):
        if p[idx] <= alpha / (m - i):
            reject[idx] = True
        else:
            break
    return reject


# --- persistence and comparison ----------------------------------------------

def write_front_csv(front: FrontRecord, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FRONT_CSV_HEADER)
        for m in front.members:
            f = m.features
            writer.writerow(
                [
                    m.tree_text, f.l, f.n_o, f.n_nao, f.n_naoc,
                    f"{m.phi_obj:.17g}", f"{m.err_train:.17g}",
                    f"{m.err_val:.17g}", f"{m.err_test:.17g}",
                ]
            )


def read_front_csv(path: str | Path, source_run: int = 0, mode: str = "phi") -> FrontRecord:
    path = Path(path)
    members = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FRONT_CSV_HEADER:
            raise ValueError(f"{path}: unexpected front header {header}")
        for row in reader:
            if not row:
                continue
            tree, l, n_o, n_nao, n_naoc, phi_obj, err_train, err_val, err_test = row
            fv = FeatureVector(int(l), int(n_o), int(n_nao), int(n_naoc))
            members.append(
                FrontMember(
                    tree_text=tree,
                    features=fv,
                    phi_obj=float(phi_obj),
                    err_train=float(err_train),
                    err_val=float(err_val),
                    err_test=float(err_test),
                    interp=float(phi_obj) if mode == "phi" else float(fv.l),
                )
            )
            parse_infix(tree)  # integrity check: tree text must be readable
    return FrontRecord(members=tuple(members), source_run=source_run, mode=mode)


def comparison_report(
    fronts_a: dict[int, FrontRecord],
    fronts_b: dict[int, FrontRecord],
    taus: Sequence[int],
    alpha: float = 0.05,
    labels: tuple[str, str] = ("phi", "size"),
) -> dict:
    """Per-tau medians plus paired, Holm-Bonferroni-corrected Wilcoxon tests.

    Both directories must contain the same seeds; runs are paired by seed.
    The correction family is the tau list, separately for the train and
    test error columns.
    """
    seeds = sorted(fronts_a)
    if seeds != sorted(fronts_b):
        raise ValueError(
            f"unpaired runs: {sorted(fronts_a)} vs {sorted(fronts_b)}"
        )
    if not seeds:
        raise ValueError("no runs to compare")

    def stats(fronts: dict[int, FrontRecord], tau: int) -> dict:
        sel = [select_tau(fronts[s], tau) for s in seeds]
        return {
            "median_train_nmse": float(np.median([m.err_train for m in sel])),
            "median_test_nmse": float(np.median([m.err_test for m in sel])),
            "median_phi": float(np.median([m.phi_obj for m in sel])),
            "median_l": float(np.median([m.features.l for m in sel])),
            "median_front_size": float(np.median([len(fronts[s]) for s in seeds])),
            "train_nmse": [m.err_train for m in sel],
            "test_nmse": [m.err_test for m in sel],
        }

    rows = []
    for tau in taus:
        sa = stats(fronts_a, tau)
        sb = stats(fronts_b, tau)
        p_train = wilcoxon_signed_rank(sa["train_nmse"], sb["train_nmse"])
        p_test = wilcoxon_signed_rank(sa["test_nmse"], sb["test_nmse"])
        rows.append(
            {
                "tau": int(tau),
                labels[0]: {k: v for k, v in sa.items() if k.startswith("median")},
                labels[1]: {k: v for k, v in sb.items() if k.startswith("median")},
                "p_train": p_train,
                "p_test": p_test,
            }
        )
    sig_train = holm_bonferroni([r["p_train"] for r in rows], alpha)
    sig_test = holm_bonferroni([r["p_test"] for r in rows], alpha)
    for row, st, se in zip(rows, sig_train, sig_test):
        row["significant_train"] = bool(st)
        row["significant_test"] = bool(se)
    return {
        "labels": list(labels),
        "n_runs": len(seeds),
        "seeds": seeds,
        "alpha": alpha,
        "rows": rows,
    }
