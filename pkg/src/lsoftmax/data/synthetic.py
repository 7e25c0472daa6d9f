from typing import Sequence

import numpy as np

from ..exceptions import ValidationError
from . import DatasetSplit, Subset, normalize
from .splits import split

DEFAULT_RADIUS = 5.0


def blob_centers(classes: int, dim: int, radius: float = DEFAULT_RADIUS) -> np.ndarray:
    """Class centers at equal angles on a circle in the first two coordinates."""
    angles = 2.0 * np.pi * np.arange(classes) / classes
    centers = np.zeros((classes, dim))
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    return centers


def make_blobs(
    n_per_class: int,
    classes: int,
    dim: int,
    spread: float,
    seed: int,
    radius: float = DEFAULT_RADIUS,
    fractions: Sequence[float] = (1.0, 0.0, 0.0),
    subtract_mean: bool = True,
) -> DatasetSplit:
    """Isotropic Gaussian blobs, one per class, deterministic per seed."""
    if classes < 2 or dim < 2:
        raise ValidationError(f"blobs need classes >= 2 and dim >= 2, got {classes}, {dim}")
    if n_per_class < 1 or spread < 0:
        raise ValidationError("blobs need n_per_class >= 1 and spread >= 0")
    rng = np.random.default_rng(seed)
    centers = blob_centers(classes, dim, radius)
    labels = np.repeat(np.arange(classes), n_per_class)
    inputs = centers[labels] + spread * rng.standard_normal((labels.size, dim))
    dataset = split(Subset(inputs=inputs, labels=labels), fractions, seed, num_classes=classes)
    return normalize(dataset) if subtract_mean else dataset
