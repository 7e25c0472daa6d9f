"""Batch-level L-Softmax loss.

Only the target-class logit differs from plain softmax. With a = ‖W_y‖, b = ‖x‖,
d = W_yᵀx and c = d / (ab), the target logit blended with weight λ is

    f_y = (λ·d + a·b·ψ(c)) / (1 + λ)

and its gradients are assembled by chain rule through ψ'(c):

    ∂(abψ)/∂x = ψ'·W_y + (ψ - c·ψ')·a·x/b
    ∂(abψ)/∂W_y = ψ'·x + (ψ - c·ψ')·b·W_y/a

For m=2 the expanded closed forms are available through :func:`target_logit_grads_m2`.
"""

import logging
from dataclasses import dataclass
from math import floor
from typing import Optional, Tuple

import numpy as np

from .angular import psi, psi_derivative, segment_of
from .exceptions import ShapeMismatch, ValidationError, ZeroNorm
from .models.training import LambdaDecay, LambdaSchedule

ZERO_NORM_EPSILON = 1e-12

logger = logging.getLogger("lsoftmax")


@dataclass(frozen=True)
class LossResult:
    """Mean batch loss, the logits actually used, and (from :func:`backward`) gradients."""

    loss: float
    logits: np.ndarray
    grad_x: Optional[np.ndarray] = None
    grad_w: Optional[np.ndarray] = None


@dataclass(frozen=True)
class _TargetTerms:
    w: np.ndarray  # N × D, classifier row of each sample's label
    w_norm: np.ndarray
    x_norm: np.ndarray
    dot: np.ndarray
    cos: np.ndarray


def _validate(features: np.ndarray, labels: np.ndarray, weights: np.ndarray):
    if features.ndim != 2 or weights.ndim != 2:
        raise ShapeMismatch(
            f"features and weights must be 2-D, got {features.shape} and {weights.shape}"
        )
    if features.shape[0] < 1:
        raise ShapeMismatch("feature batch is empty")
    if features.shape[1] != weights.shape[1]:
        raise ShapeMismatch(
            f"feature dimension {features.shape[1]} does not match classifier dimension "
            f"{weights.shape[1]}"
        )
    if labels.shape != (features.shape[0],):
        raise ShapeMismatch(
            f"labels shape {labels.shape} does not match batch size {features.shape[0]}"
        )
    if labels.min() < 0 or labels.max() >= weights.shape[0]:
        raise ValidationError(f"labels must lie in [0, {weights.shape[0] - 1}]")


def _norms(vectors: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=-1)
    small = norms < ZERO_NORM_EPSILON
    if np.any(small):
        index = int(np.flatnonzero(np.atleast_1d(small))[0])
        raise ZeroNorm(f"{what} {index} has norm below {ZERO_NORM_EPSILON:g}")
    return norms


def _target_terms(features: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> _TargetTerms:
    w = weights[labels]
    _norms(weights, "classifier row")
    w_norm = np.linalg.norm(w, axis=1)
    x_norm = _norms(features, "feature vector")
    dot = np.einsum("nd,nd->n", w, features)
    cos = np.clip(dot / (w_norm * x_norm), -1.0, 1.0)
    return _TargetTerms(w=w, w_norm=w_norm, x_norm=x_norm, dot=dot, cos=cos)


def _as_arrays(features, labels, weights) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    _validate(features, labels, weights)
    return features, labels, weights


def target_logit(w: np.ndarray, x: np.ndarray, m: int) -> float:
    """f = ‖w‖‖x‖·ψ(ĉ) for a single class vector and feature. Equals wᵀx when m=1."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != x.shape:
        raise ShapeMismatch(f"class vector {w.shape} and feature {x.shape} differ")
    w_norm = float(_norms(w, "classifier vector"))
    x_norm = float(_norms(x, "feature vector"))
    dot = float(w @ x)
    if m == 1:
        return dot
    return w_norm * x_norm * psi(dot / (w_norm * x_norm), m)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy of ``logits`` and its gradient with respect to the logits.

    Probabilities use per-sample max subtraction so ``exp`` never overflows.
    """
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    log_prob = shifted - np.log(denom)
    loss = -float(np.mean(log_prob[np.arange(n), labels]))
    grad = exp / denom
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _blended_target(terms: _TargetTerms, m: int, lambda_: float) -> np.ndarray:
    margin_logit = terms.w_norm * terms.x_norm * psi(terms.cos, m)
    return (lambda_ * terms.dot + margin_logit) / (1.0 + lambda_)


def _logits(features, labels, weights, m, lambda_) -> Tuple[np.ndarray, Optional[_TargetTerms]]:
    logits = features @ weights.T
    if m == 1:
        # ψ = cos and the blend is the identity: the target logit is the plain inner product.
        _norms(weights, "classifier row")
        _norms(features, "feature vector")
        return logits, None
    terms = _target_terms(features, labels, weights)
    logits[np.arange(features.shape[0]), labels] = _blended_target(terms, m, lambda_)
    return logits, terms


def forward(features, labels, weights, m: int, lambda_: float = 0.0) -> LossResult:
    """L-Softmax loss value (batch mean) and the logits used.

    :param features: ``N × D`` feature batch.
    :param labels: Length-``N`` integer labels in ``[0, K-1]``.
    :param weights: ``K × D`` bias-free classifier matrix.
    :param m: Integer margin, ``m >= 1``.
    :param lambda_: Nonnegative blend weight for the target logit.
    """
    if lambda_ < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lambda_}")
    features, labels, weights = _as_arrays(features, labels, weights)
    logits, _ = _logits(features, labels, weights, m, lambda_)
    loss, _ = softmax_cross_entropy(logits, labels)
    return LossResult(loss=loss, logits=logits)


def target_logit_grads(terms: _TargetTerms, features: np.ndarray, m: int):
    """General-m gradients of ‖W_y‖‖x‖ψ(c) with respect to x and W_y, through c."""
    p = psi(terms.cos, m)
    dp = psi_derivative(terms.cos, m)
    radial = (p - terms.cos * dp)[:, None]
    grad_x = dp[:, None] * terms.w + radial * (terms.w_norm / terms.x_norm)[:, None] * features
    grad_w = dp[:, None] * features + radial * (terms.x_norm / terms.w_norm)[:, None] * terms.w
    return grad_x, grad_w


def target_logit_grads_m2(w: np.ndarray, x: np.ndarray):
    """The m=2 target logit and its gradients in expanded closed form.

    Works row-wise on ``N × D`` arrays of class vectors ``w`` and features ``x``::

        f    = s·2d²/(ab) - (2k + s)·ab
        ∂f/∂x = s·(4d·w/(ab) - 2d²·x/(a·b³)) - (2k + s)·a·x/b
        ∂f/∂w = s·(4d·x/(ab) - 2d²·w/(a³·b)) - (2k + s)·b·w/a

    with s = (-1)^k and k = 1 iff d/(ab) <= cos(π/2).
    """
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    a = np.linalg.norm(w, axis=1)[:, None]
    b = np.linalg.norm(x, axis=1)[:, None]
    d = np.einsum("nd,nd->n", w, x)[:, None]
    k = segment_of(np.clip(d / (a * b), -1.0, 1.0), 2).astype(np.float64)
    s = np.where(k == 0, 1.0, -1.0)
    offset = 2.0 * k + s
    logit = s * 2.0 * d**2 / (a * b) - offset * a * b
    grad_x = s * (4.0 * d * w / (a * b) - 2.0 * d**2 * x / (a * b**3)) - offset * a * x / b
    grad_w = s * (4.0 * d * x / (a * b) - 2.0 * d**2 * w / (a**3 * b)) - offset * b * w / a
    return logit[:, 0], grad_x, grad_w


def backward(
    features, labels, weights, m: int, lambda_: float = 0.0, use_fast_path: bool = True
) -> LossResult:
    """Loss, logits, and exact gradients with respect to features and classifier weights.

    Non-target logits follow the standard softmax gradients. The target logit differentiates
    through the λ blend. With ``m == 2`` and ``use_fast_path`` the expanded closed forms are
    used instead of the chain rule through ψ'.
    """
    if lambda_ < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lambda_}")
    features, labels, weights = _as_arrays(features, labels, weights)
    n = features.shape[0]
    rows = np.arange(n)

    logits, terms = _logits(features, labels, weights, m, lambda_)
    loss, grad_logits = softmax_cross_entropy(logits, labels)

    if terms is None:
        grad_x = grad_logits @ weights
        grad_w = grad_logits.T @ features
        return LossResult(loss=loss, logits=logits, grad_x=grad_x, grad_w=grad_w)

    grad_target = grad_logits[rows, labels].copy()
    other = grad_logits.copy()
    other[rows, labels] = 0.0

    if m == 2 and use_fast_path:
        _, margin_dx, margin_dw = target_logit_grads_m2(terms.w, features)
    else:
        margin_dx, margin_dw = target_logit_grads(terms, features, m)

    target_dx = (lambda_ * terms.w + margin_dx) / (1.0 + lambda_)
    target_dw = (lambda_ * features + margin_dw) / (1.0 + lambda_)

    grad_x = other @ weights + grad_target[:, None] * target_dx
    grad_w = other.T @ features
    # np.add.at accumulates in index order: the reduction is reproducible bit for bit.
    np.add.at(grad_w, labels, grad_target[:, None] * target_dw)
    return LossResult(loss=loss, logits=logits, grad_x=grad_x, grad_w=grad_w)


def plain_softmax(features, labels, weights) -> LossResult:
    """Reference softmax cross-entropy of ``XWᵀ`` with gradients, independent of ψ."""
    features, labels, weights = _as_arrays(features, labels, weights)
    logits = features @ weights.T
    loss, grad_logits = softmax_cross_entropy(logits, labels)
    return LossResult(
        loss=loss,
        logits=logits,
        grad_x=grad_logits @ weights,
        grad_w=grad_logits.T @ features,
    )


def predict(features, weights) -> np.ndarray:
    """Test-time rule: argmax of plain inner products W_jᵀx. The margin plays no role."""
    features = np.asarray(features, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != weights.shape[1]:
        raise ShapeMismatch(
            f"feature shape {features.shape} incompatible with classifier shape {weights.shape}"
        )
    return np.argmax(features @ weights.T, axis=1)


def lambda_at(schedule: LambdaSchedule, iteration: int) -> float:
    """λ(t): non-increasing in t, ``lambda_initial`` at t=0, never below ``lambda_min``."""
    if iteration < 0:
        raise ValidationError(f"iteration must be nonnegative, got {iteration}")
    if schedule.kind == LambdaDecay.inverse:
        value = schedule.lambda_initial / (1.0 + schedule.inverse_rate * iteration)
    else:
        value = schedule.lambda_initial * schedule.gamma ** floor(iteration / schedule.window)
    return max(schedule.lambda_min, value)
