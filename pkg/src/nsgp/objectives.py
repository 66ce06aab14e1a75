"""Objective computation for one candidate formula.

The error objective is the mean squared error after an optimal affine
rescaling of the predictions (fit on training data only), normalized so
that predicting the training mean scores exactly 100. The interpretability
objective is either the learned penalty from :mod:`nsgp.phi_features` or
plain node count, per configuration.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .expr_core import DEFAULT_EPS, EpsilonConfig, ExprTree, eval_tree
from .phi_features import DEFAULT_COEFFICIENTS, PhiCoefficients, extract_features, phi_objective

#: Error assigned to individuals whose predictions are not finite.
WORST_ERR = 1.0e12

MODES = ("phi", "size")


class ScalingCoeffs(NamedTuple):
    a: float  # intercept
    b: float  # slope


class ObjectiveVector(NamedTuple):
    err: float
    interp: float


def linear_scaling_coeffs(y: np.ndarray, yhat: np.ndarray) -> ScalingCoeffs:
    """Least-squares affine transform of predictions onto targets.

    b = cov(y, yhat) / var(yhat) and a = mean(y) - b * mean(yhat), with the
    degenerate zero-variance prediction vector mapped to (mean(y), 0).
    Population (divide-by-N) moments throughout.
    """
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1 or y.size < 1:
        raise ValueError("y and yhat must be equal-length 1-D vectors")
    with np.errstate(over="ignore", invalid="ignore"):
        ym = y.mean()
        hm = yhat.mean()
        dh = yhat - hm
        var_h = float(dh @ dh) / y.size
        if var_h == 0.0:
            return ScalingCoeffs(a=float(ym), b=0.0)
        cov = float((y - ym) @ dh) / y.size
        b = cov / var_h
        return ScalingCoeffs(a=float(ym - b * hm), b=float(b))


def scaled_mse(y: np.ndarray, yhat: np.ndarray, coeffs: ScalingCoeffs) -> float:
    """Mean of (y - a - b*yhat)^2 with the supplied coefficients.

    The coefficients are used verbatim; they are never re-fit here, so
    validation and test errors reuse the training-split transform.
    """
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ValueError("y and yhat must have equal length")
    with np.errstate(over="ignore", invalid="ignore"):
        r = y - coeffs.a - coeffs.b * yhat
        return float(r @ r) / y.size


def normalize_err(mse: float, var_y_train: float) -> float:
    """Scale an MSE so the constant mean predictor scores 100."""
    if not var_y_train > 0:
        raise ValueError(
            f"training target variance must be positive, got {var_y_train}"
        )
    return 100.0 * mse / var_y_train


def evaluate_individual(
    tree: ExprTree,
    X: np.ndarray,
    y: np.ndarray,
    mode: str = "phi",
    *,
    var_y: float | None = None,
    phi_coeffs: PhiCoefficients = DEFAULT_COEFFICIENTS,
    eps: EpsilonConfig = DEFAULT_EPS,
) -> tuple[ObjectiveVector, ScalingCoeffs]:
    """Objective vector of a tree on the training split.

    Returns the (error, interpretability) pair plus the fitted scaling
    coefficients, which the caller keeps for validation/test re-evaluation.
    A non-finite prediction vector gets the sentinel error and falls back
    to mean-predictor scaling so later re-evaluation stays well defined.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    y = np.asarray(y, dtype=np.float64)
    if var_y is None:
        var_y = float(y.var())
    if mode == "phi":
        interp = phi_objective(extract_features(tree), phi_coeffs)
    else:
        interp = float(tree.size)

    yhat = eval_tree(tree, X, eps)
    if not np.isfinite(yhat).all():
        return (
            ObjectiveVector(err=WORST_ERR, interp=interp),
            ScalingCoeffs(a=float(y.mean()), b=0.0),
        )
    coeffs = linear_scaling_coeffs(y, yhat)
    err = normalize_err(scaled_mse(y, yhat, coeffs), var_y)
    if not np.isfinite(err):
        return (
            ObjectiveVector(err=WORST_ERR, interp=interp),
            ScalingCoeffs(a=float(y.mean()), b=0.0),
        )
    return ObjectiveVector(err=float(err), interp=interp), coeffs
