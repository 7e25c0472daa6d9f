import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np

from ..exceptions import DimensionMismatch, EmptySplit, UnknownDataset
from . import DatasetSplit, Subset, normalize
from .idx import images_to_tensor, read_idx_file
from .splits import split

MNIST_FILES: Dict[str, str] = {
    "train_images": "train-images-idx3-ubyte.gz",
    "train_labels": "train-labels-idx1-ubyte.gz",
    "test_images": "t10k-images-idx3-ubyte.gz",
    "test_labels": "t10k-labels-idx1-ubyte.gz",
}  #: Standard MNIST file names as distributed.

MNIST_CLASSES = 10

logger = logging.getLogger("lsoftmax")


def locate(directory: Union[str, Path], file_name: str) -> Path:
    """Find ``file_name`` in ``directory``, compressed or already decompressed."""
    directory = Path(directory)
    for candidate in (directory / file_name, directory / file_name.removesuffix(".gz")):
        if candidate.exists():
            return candidate
    raise UnknownDataset(f"MNIST file '{file_name}' not found in {directory}")


def mnist_available(directory: Optional[Union[str, Path]]) -> bool:
    if not directory:
        return False
    try:
        for name in MNIST_FILES.values():
            locate(directory, name)
    except UnknownDataset:
        return False
    return True


def _load_pair(directory: Path, images_key: str, labels_key: str) -> Subset:
    images = read_idx_file(locate(directory, MNIST_FILES[images_key]))
    labels = read_idx_file(locate(directory, MNIST_FILES[labels_key]))
    if images.shape[0] != labels.shape[0]:
        raise DimensionMismatch(
            f"{images.shape[0]} images but {labels.shape[0]} labels in {directory}", offset=4
        )
    return Subset(inputs=images_to_tensor(images), labels=labels.astype(np.int64))


def _subsample(subset: Subset, size: int, rng: np.random.Generator) -> Subset:
    if not size or size >= len(subset):
        return subset
    return subset.take(np.sort(rng.permutation(len(subset))[:size]))


def load_mnist(
    directory: Union[str, Path],
    fractions: Sequence[float] = (1.0, 0.0, 0.0),
    train_subset: int = 0,
    test_subset: int = 0,
    seed: int = 0,
) -> DatasetSplit:
    """Load MNIST into a mean-subtracted ``DatasetSplit``.

    The training file is optionally subsampled to ``train_subset`` images and then divided
    by ``fractions``; only its train and val parts are kept. The test split always comes
    from the test file (optionally subsampled to ``test_subset``). Pixels are scaled to
    [0, 1] before the training mean is subtracted.
    """
    train_fraction, val_fraction, _ = fractions
    kept = train_fraction + val_fraction
    if kept <= 0:
        raise EmptySplit("MNIST needs a positive train or val fraction of the training file")
    directory = Path(directory)
    rng = np.random.default_rng(seed)
    train_file = _load_pair(directory, "train_images", "train_labels")
    test_file = _load_pair(directory, "test_images", "test_labels")
    train_file = _subsample(train_file, train_subset, rng)
    test_file = _subsample(test_file, test_subset, rng)

    parts = split(
        train_file, (train_fraction / kept, val_fraction / kept, 0.0), seed, MNIST_CLASSES
    )
    logger.info(
        "MnistLoaded train=%s val=%s test=%s", len(parts.train), len(parts.val), len(test_file)
    )
    dataset = DatasetSplit(
        train=parts.train, val=parts.val, test=test_file, num_classes=MNIST_CLASSES
    )
    return normalize(dataset, pixel_scale=1.0 / 255.0)
