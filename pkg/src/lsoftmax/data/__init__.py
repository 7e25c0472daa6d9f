from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Subset:
    """Inputs (``N × ...``) and integer labels of one split part."""

    inputs: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def take(self, index: np.ndarray) -> "Subset":
        return Subset(inputs=self.inputs[index], labels=self.labels[index])


@dataclass(frozen=True)
class Normalization:
    """Preprocessing record: inputs were multiplied by ``pixel_scale`` and then had the
    per-feature training mean ``mean`` subtracted.
    """

    mean: np.ndarray
    pixel_scale: float = 1.0


@dataclass(frozen=True)
class DatasetSplit:
    train: Subset
    val: Subset
    test: Subset
    num_classes: int
    normalization: Optional[Normalization] = field(default=None)

    @property
    def input_shape(self):
        return tuple(self.train.inputs.shape[1:])


def empty_like(subset: Subset) -> Subset:
    return Subset(
        inputs=np.zeros((0,) + subset.inputs.shape[1:]),
        labels=np.zeros(0, dtype=np.int64),
    )


def normalize(split: DatasetSplit, pixel_scale: float = 1.0) -> DatasetSplit:
    """Subtract the training-set per-feature mean from every part (training statistics only)."""
    if len(split.train) == 0:
        mean = np.zeros(split.train.inputs.shape[1:])
    else:
        mean = split.train.inputs.mean(axis=0)

    def apply(subset: Subset) -> Subset:
        return Subset(inputs=subset.inputs - mean, labels=subset.labels)

    return DatasetSplit(
        train=apply(split.train),
        val=apply(split.val),
        test=apply(split.test),
        num_classes=split.num_classes,
        normalization=Normalization(mean=mean, pixel_scale=pixel_scale),
    )


from .splits import split  # noqa: E402
from .synthetic import make_blobs  # noqa: E402

__all__ = [
    "DatasetSplit",
    "Normalization",
    "Subset",
    "empty_like",
    "make_blobs",
    "normalize",
    "split",
]
