"""Central finite-difference gradient checker.

Every differentiable component of the package is tested against :func:`check`. The checker
never mutates the point it differentiates: each difference works on its own copy.
"""

import concurrent.futures
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np

from . import loss
from .angular import near_boundary
from .exceptions import NonFiniteFunction, ShapeMismatch, ValidationError

DEFAULT_STEP = 1e-6
DEFAULT_TOLERANCE = 1e-6
RELATIVE_EPSILON = 1e-12
NOISE_FLOOR_RATIO = 1e-2  #: per-coordinate absolute error accepted, as a fraction of the tolerance
BOUNDARY_TOLERANCE = 1e-4

logger = logging.getLogger("lsoftmax")


@dataclass(frozen=True)
class GradCheckReport:
    """Comparison of a claimed gradient against central differences.

    ``worst_index`` is the flat index of the coordinate with the largest relative error;
    ``analytic`` and ``numeric`` are the two values there.
    """

    max_relative_error: float
    max_absolute_error: float
    worst_index: int
    analytic: float
    numeric: float
    h: float
    relative_errors: np.ndarray
    absolute_errors: np.ndarray

    def passed(self, tolerance: float, absolute_tolerance: Optional[float] = None) -> bool:
        """True when every coordinate is within ``tolerance`` relatively, or within
        ``absolute_tolerance`` (default ``tolerance * 1e-2``) absolutely.
        """
        if absolute_tolerance is None:
            absolute_tolerance = tolerance * NOISE_FLOOR_RATIO
        ok = (self.relative_errors <= tolerance) | (self.absolute_errors <= absolute_tolerance)
        return bool(np.all(ok))


def relative_error(analytic, numeric) -> np.ndarray:
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), RELATIVE_EPSILON)
    return np.abs(analytic - numeric) / scale


def _central_difference(
    f: Callable[[np.ndarray], float], point: np.ndarray, index: int, h: float
) -> float:
    shifted = point.copy()
    flat = shifted.reshape(-1)
    flat[index] = point.flat[index] + h
    upper = float(f(shifted))
    flat[index] = point.flat[index] - h
    lower = float(f(shifted))
    if not (np.isfinite(upper) and np.isfinite(lower)):
        raise NonFiniteFunction(f"Function is not finite when shifting coordinate {index}")
    return (upper - lower) / (2.0 * h)


def numeric_gradient(
    f: Callable[[np.ndarray], float],
    point: np.ndarray,
    h: float = DEFAULT_STEP,
    max_concurrency: Optional[int] = None,
) -> np.ndarray:
    """Central differences ``(f(x + h·e_i) - f(x - h·e_i)) / 2h`` for every coordinate.

    :param max_concurrency: Difference coordinates on a thread pool of this size. Results are
        gathered in coordinate order so the output does not depend on scheduling.
    """
    point = np.array(point, dtype=np.float64)
    indices = range(point.size)
    if not max_concurrency or max_concurrency < 2:
        values = [_central_difference(f, point, i, h) for i in indices]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_concurrency) as executor:
            logger.debug("GradCheckConcurrent size=%s workers=%s", point.size, max_concurrency)
            futures = [executor.submit(_central_difference, f, point, i, h) for i in indices]
            concurrent.futures.wait(futures)
        values = [future.result() for future in futures]
    return np.asarray(values, dtype=np.float64).reshape(point.shape)


def check(
    f: Callable[[np.ndarray], float],
    grad_f: Callable[[np.ndarray], np.ndarray],
    point,
    h: float = DEFAULT_STEP,
    max_concurrency: Optional[int] = None,
) -> GradCheckReport:
    """Compare ``grad_f(point)`` with central differences of ``f`` around ``point``.

    :raises NonFiniteFunction: A shifted evaluation was NaN or Inf.
    :raises ShapeMismatch: The claimed gradient does not have the shape of ``point``.
    """
    point = np.array(point, dtype=np.float64)
    analytic = np.asarray(grad_f(point.copy()), dtype=np.float64)
    if analytic.shape != point.shape:
        raise ShapeMismatch(f"gradient shape {analytic.shape} != point shape {point.shape}")
    numeric = numeric_gradient(f, point, h, max_concurrency)

    relative = relative_error(analytic, numeric).reshape(-1)
    absolute = np.abs(analytic - numeric).reshape(-1)
    worst = int(np.argmax(relative)) if relative.size else 0
    return GradCheckReport(
        max_relative_error=float(relative.max()) if relative.size else 0.0,
        max_absolute_error=float(absolute.max()) if absolute.size else 0.0,
        worst_index=worst,
        analytic=float(analytic.flat[worst]) if relative.size else 0.0,
        numeric=float(numeric.flat[worst]) if relative.size else 0.0,
        h=h,
        relative_errors=relative,
        absolute_errors=absolute,
    )


# LOSS CHECKS


def random_loss_instance(
    seed: int,
    m: int,
    n: int = 8,
    d: int = 5,
    k: int = 6,
    weight_scale: float = 0.5,
    boundary_tol: float = BOUNDARY_TOLERANCE,
    max_attempts: int = 1000,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A random ``(features, labels, weights)`` batch whose target cosines all stay at least
    ``boundary_tol`` away from the interior ψ segment boundaries.
    """
    rng = np.random.default_rng(seed)
    weights = weight_scale * rng.standard_normal((k, d))
    labels = rng.integers(0, k, size=n)
    features = rng.standard_normal((n, d))
    for _ in range(max_attempts):
        w = weights[labels]
        cos = np.einsum("nd,nd->n", w, features) / (
            np.linalg.norm(w, axis=1) * np.linalg.norm(features, axis=1)
        )
        bad = np.asarray(near_boundary(np.clip(cos, -1.0, 1.0), m, boundary_tol))
        if not bad.any():
            return features, labels, weights
        features[bad] = rng.standard_normal((int(bad.sum()), d))
    raise ValidationError(f"Could not draw a boundary-free instance in {max_attempts} attempts")


@dataclass(frozen=True)
class LossCheckReport:
    m: int
    lambda_: float
    seed: int
    features: GradCheckReport
    weights: GradCheckReport

    @property
    def max_relative_error(self) -> float:
        return max(self.features.max_relative_error, self.weights.max_relative_error)

    @property
    def max_absolute_error(self) -> float:
        return max(self.features.max_absolute_error, self.weights.max_absolute_error)

    def passed(self, tolerance: float, absolute_tolerance: Optional[float] = None) -> bool:
        return self.features.passed(tolerance, absolute_tolerance) and self.weights.passed(
            tolerance, absolute_tolerance
        )


def check_loss_gradients(
    m: int,
    lambda_: float,
    seed: int,
    h: float = DEFAULT_STEP,
    max_concurrency: Optional[int] = None,
    **instance_kwargs,
) -> LossCheckReport:
    """Check ``backward``'s feature and classifier gradients of the blended loss."""
    features, labels, weights = random_loss_instance(seed, m, **instance_kwargs)

    def loss_of_features(x):
        return loss.forward(x, labels, weights, m, lambda_).loss

    def loss_of_weights(w):
        return loss.forward(features, labels, w, m, lambda_).loss

    report = LossCheckReport(
        m=m,
        lambda_=lambda_,
        seed=seed,
        features=check(
            loss_of_features,
            lambda x: loss.backward(x, labels, weights, m, lambda_).grad_x,
            features,
            h,
            max_concurrency,
        ),
        weights=check(
            loss_of_weights,
            lambda w: loss.backward(features, labels, w, m, lambda_).grad_w,
            weights,
            h,
            max_concurrency,
        ),
    )
    logger.debug(
        "GradCheckLoss m=%s lambda=%g seed=%s max_rel=%.3e",
        m,
        lambda_,
        seed,
        report.max_relative_error,
    )
    return report


def run_suite(
    margins: Iterable[int],
    seeds: Iterable[int],
    lambdas: Iterable[float] = (0.0, 1.0, 100.0),
    max_concurrency: Optional[int] = None,
) -> List[LossCheckReport]:
    """One :func:`check_loss_gradients` report per (m, λ, seed) combination."""
    lambdas, seeds = list(lambdas), list(seeds)
    return [
        check_loss_gradients(m, lambda_, seed, max_concurrency=max_concurrency)
        for m in margins
        for lambda_ in lambdas
        for seed in seeds
    ]
