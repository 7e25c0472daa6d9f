import math
from typing import Sequence

import numpy as np

from ..exceptions import EmptySplit, ValidationError
from . import DatasetSplit, Subset


def split_sizes(total: int, fractions: Sequence[float]) -> list:
    if len(fractions) != 3:
        raise ValidationError(f"expected train/val/test fractions, got {list(fractions)}")
    if any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ValidationError(f"split fractions must be nonnegative and sum to 1: {fractions}")
    sizes = [round(f * total) for f in fractions[:-1]]
    sizes.append(total - sum(sizes))
    if sizes[-1] < 0:
        raise ValidationError(f"split fractions {fractions} overflow {total} samples")
    for name, fraction, size in zip(("train", "val", "test"), fractions, sizes):
        if fraction > 0 and size == 0:
            raise EmptySplit(f"{name} fraction {fraction} of {total} samples yields no samples")
    return sizes


def split(
    data: Subset, fractions: Sequence[float], seed: int, num_classes: int
) -> DatasetSplit:
    """Seeded permutation followed by contiguous slicing into train/val/test.

    Parts are disjoint and exhaustive. A zero fraction yields an empty part; a positive
    fraction that rounds to zero samples raises ``EmptySplit``.
    """
    sizes = split_sizes(len(data), fractions)
    order = np.random.default_rng(seed).permutation(len(data))
    bounds = np.cumsum([0] + sizes)
    parts = [data.take(order[bounds[i] : bounds[i + 1]]) for i in range(3)]
    return DatasetSplit(train=parts[0], val=parts[1], test=parts[2], num_classes=num_classes)
