import gzip

import numpy as np
import pytest

from lsoftmax.data import Subset, make_blobs, normalize, split
from lsoftmax.data.idx import (
    IMAGES_MAGIC,
    images_to_tensor,
    parse_idx,
    read_idx_file,
    serialize_idx,
)
from lsoftmax.data.mnist import MNIST_FILES, load_mnist, mnist_available
from lsoftmax.data.splits import split_sizes
from lsoftmax.exceptions import (
    BadMagic,
    DimensionMismatch,
    EmptySplit,
    TruncatedPayload,
    UnknownDataset,
    ValidationError,
)

# IDX


def test_idx_parses_images_and_labels(rng):
    images = rng.integers(0, 256, size=(4, 3, 2), dtype=np.uint8)
    labels = np.array([3, 1, 4, 1], dtype=np.uint8)
    assert np.array_equal(parse_idx(serialize_idx(images)), images)
    assert np.array_equal(parse_idx(serialize_idx(labels)), labels)


def test_idx_header_layout():
    payload = serialize_idx(np.zeros((2, 28, 28), dtype=np.uint8))
    assert payload[:4] == IMAGES_MAGIC.to_bytes(4, "big")
    assert int.from_bytes(payload[4:8], "big") == 2
    assert int.from_bytes(payload[8:12], "big") == 28
    assert len(payload) == 16 + 2 * 28 * 28


def test_idx_bad_magic():
    payload = bytearray(serialize_idx(np.zeros(3, dtype=np.uint8)))
    payload[3] = 0x0D
    with pytest.raises(BadMagic) as excinfo:
        parse_idx(bytes(payload))
    assert excinfo.value.offset == 0


def test_idx_truncated_payload():
    payload = serialize_idx(np.ones((2, 4, 4), dtype=np.uint8))
    with pytest.raises(TruncatedPayload) as excinfo:
        parse_idx(payload[:-5])
    assert excinfo.value.offset == len(payload) - 5
    with pytest.raises(TruncatedPayload):
        parse_idx(payload[:10])
    with pytest.raises(TruncatedPayload):
        parse_idx(b"\x00\x00")


def test_idx_trailing_bytes_and_zero_extent():
    payload = serialize_idx(np.ones(5, dtype=np.uint8))
    with pytest.raises(DimensionMismatch) as excinfo:
        parse_idx(payload + b"\x00\x00")
    assert excinfo.value.offset == len(payload)
    with pytest.raises(DimensionMismatch):
        parse_idx(serialize_idx(np.zeros((3, 0, 4), dtype=np.uint8)))


def test_idx_writer_rejects_other_arrays():
    with pytest.raises(DimensionMismatch):
        serialize_idx(np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(DimensionMismatch):
        serialize_idx(np.zeros(3, dtype=np.float64))


def test_read_idx_file_plain_and_gzip(tmp_path, rng):
    images = rng.integers(0, 256, size=(3, 5, 5), dtype=np.uint8)
    plain = tmp_path / "images-idx3-ubyte"
    plain.write_bytes(serialize_idx(images))
    compressed = tmp_path / "images-idx3-ubyte.gz"
    compressed.write_bytes(gzip.compress(serialize_idx(images)))
    assert np.array_equal(read_idx_file(plain), images)
    assert np.array_equal(read_idx_file(compressed), images)


def test_images_to_tensor():
    tensor = images_to_tensor(np.array([[[0, 255], [51, 102]]], dtype=np.uint8))
    assert tensor.shape == (1, 1, 2, 2)
    assert tensor.dtype == np.float64
    assert np.allclose(tensor[0, 0], [[0.0, 1.0], [0.2, 0.4]])


# SPLITS


def test_split_sizes():
    assert split_sizes(100, (0.8, 0.1, 0.1)) == [80, 10, 10]
    assert split_sizes(10, (1.0, 0.0, 0.0)) == [10, 0, 0]
    assert split_sizes(7, (0.5, 0.25, 0.25)) == [4, 2, 1]


def test_split_sizes_errors():
    with pytest.raises(EmptySplit):
        split_sizes(5, (0.9, 0.05, 0.05))
    with pytest.raises(ValidationError):
        split_sizes(10, (0.5, 0.6, -0.1))
    with pytest.raises(ValidationError):
        split_sizes(10, (0.5, 0.5))


def test_split_is_disjoint_exhaustive_and_seeded():
    data = Subset(inputs=np.arange(50.0)[:, None], labels=np.arange(50) % 5)
    first = split(data, (0.6, 0.2, 0.2), seed=11, num_classes=5)
    second = split(data, (0.6, 0.2, 0.2), seed=11, num_classes=5)
    values = np.concatenate([first.train.inputs, first.val.inputs, first.test.inputs])[:, 0]
    assert sorted(values) == list(np.arange(50.0))
    assert (len(first.train), len(first.val), len(first.test)) == (30, 10, 10)
    assert np.array_equal(first.train.inputs, second.train.inputs)
    assert np.array_equal(first.train.labels, first.train.inputs[:, 0].astype(int) % 5)


def test_normalize_uses_training_mean():
    data = Subset(inputs=np.arange(20.0).reshape(10, 2), labels=np.zeros(10, dtype=int))
    parts = split(data, (0.5, 0.3, 0.2), seed=0, num_classes=1)
    normalized = normalize(parts, pixel_scale=0.5)
    mean = parts.train.inputs.mean(axis=0)
    assert np.allclose(normalized.train.inputs.mean(axis=0), 0.0)
    assert np.allclose(normalized.test.inputs, parts.test.inputs - mean)
    assert normalized.normalization.pixel_scale == 0.5
    assert np.array_equal(normalized.normalization.mean, mean)


# BLOBS


def test_blobs_shapes_and_determinism():
    first = make_blobs(n_per_class=20, classes=4, dim=3, spread=0.5, seed=5)
    second = make_blobs(n_per_class=20, classes=4, dim=3, spread=0.5, seed=5)
    other = make_blobs(n_per_class=20, classes=4, dim=3, spread=0.5, seed=6)
    assert first.train.inputs.shape == (80, 3)
    assert first.num_classes == 4
    assert np.bincount(first.train.labels).tolist() == [20] * 4
    assert np.array_equal(first.train.inputs, second.train.inputs)
    assert not np.array_equal(first.train.inputs, other.train.inputs)
    assert len(first.val) == 0 and len(first.test) == 0


def test_blobs_are_mean_subtracted_and_separable():
    data = make_blobs(n_per_class=30, classes=2, dim=2, spread=0.5, seed=0)
    assert np.allclose(data.train.inputs.mean(axis=0), 0.0, atol=1e-12)
    side = np.sign(data.train.inputs[:, 0])
    assert np.all(side[data.train.labels == 0] > 0)
    assert np.all(side[data.train.labels == 1] < 0)


def test_blobs_validation():
    with pytest.raises(ValidationError):
        make_blobs(n_per_class=10, classes=1, dim=2, spread=0.5, seed=0)
    with pytest.raises(ValidationError):
        make_blobs(n_per_class=10, classes=3, dim=2, spread=-1.0, seed=0)


# MNIST LOADER


def write_fake_mnist(directory, rng, n_train=40, n_test=12, compress=True):
    directory.mkdir(parents=True, exist_ok=True)
    arrays = {
        "train_images": rng.integers(0, 256, size=(n_train, 28, 28), dtype=np.uint8),
        "train_labels": (np.arange(n_train) % 10).astype(np.uint8),
        "test_images": rng.integers(0, 256, size=(n_test, 28, 28), dtype=np.uint8),
        "test_labels": (np.arange(n_test) % 10).astype(np.uint8),
    }
    for key, array in arrays.items():
        payload = serialize_idx(array)
        name = MNIST_FILES[key]
        if compress:
            (directory / name).write_bytes(gzip.compress(payload))
        else:
            (directory / name.removesuffix(".gz")).write_bytes(payload)
    return arrays


@pytest.mark.parametrize("compress", [True, False])
def test_load_mnist_from_directory(tmp_path, rng, compress):
    arrays = write_fake_mnist(tmp_path / "mnist", rng, compress=compress)
    assert mnist_available(tmp_path / "mnist")
    data = load_mnist(tmp_path / "mnist", fractions=(0.75, 0.25, 0.0), seed=1)
    assert (len(data.train), len(data.val), len(data.test)) == (30, 10, 12)
    assert data.input_shape == (1, 28, 28)
    assert data.num_classes == 10
    assert data.normalization.pixel_scale == pytest.approx(1 / 255)
    assert np.allclose(data.train.inputs.mean(axis=0), 0.0, atol=1e-12)
    restored = data.test.inputs + data.normalization.mean
    assert np.allclose(restored[:, 0] * 255.0, arrays["test_images"])


def test_load_mnist_subsets(tmp_path, rng):
    write_fake_mnist(tmp_path, rng)
    data = load_mnist(tmp_path, fractions=(1.0, 0.0, 0.0), train_subset=20, test_subset=5)
    assert (len(data.train), len(data.val), len(data.test)) == (20, 0, 5)


def test_load_mnist_needs_training_fraction(tmp_path, rng):
    write_fake_mnist(tmp_path, rng)
    with pytest.raises(EmptySplit):
        load_mnist(tmp_path, fractions=(0.0, 0.0, 1.0))


def test_mnist_missing_files(tmp_path):
    assert not mnist_available(None)
    assert not mnist_available(tmp_path)
    with pytest.raises(UnknownDataset):
        load_mnist(tmp_path)


def test_mnist_label_count_mismatch(tmp_path, rng):
    write_fake_mnist(tmp_path, rng)
    (tmp_path / MNIST_FILES["test_labels"]).write_bytes(
        gzip.compress(serialize_idx(np.zeros(3, dtype=np.uint8)))
    )
    with pytest.raises(DimensionMismatch):
        load_mnist(tmp_path)
