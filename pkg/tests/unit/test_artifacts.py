import struct

import numpy as np
import pytest

from lsoftmax.artifacts import (
    METRICS_COLUMNS,
    PARAMS_MAGIC,
    parse_params,
    read_metrics,
    read_params,
    serialize_params,
    write_metrics,
    write_params,
)
from lsoftmax.exceptions import ParamsFormatError
from lsoftmax.optim import IterationRecord


def sample_params(rng):
    return {
        "0.conv2d.weight": rng.standard_normal((4, 1, 3, 3)),
        "0.conv2d.bias": np.array([0.0, -0.0, 1e-308, np.pi]),
        "1.prelu.slope": np.full(4, 0.25),
        "classifier.weight": rng.standard_normal((10, 2)),
    }


def test_params_are_bit_exact(tmp_path, rng):
    params = sample_params(rng)
    path = write_params(params, tmp_path / "nested" / "final_params.bin")
    restored = read_params(path)
    assert list(restored) == list(params)
    for name, value in params.items():
        assert restored[name].dtype == np.float64
        assert restored[name].shape == value.shape
        assert restored[name].tobytes() == value.tobytes(), name


def test_params_header_layout():
    payload = serialize_params({"w": np.array([[1.0, 2.0]])})
    assert payload[:4] == PARAMS_MAGIC
    assert struct.unpack_from("<II", payload, 4) == (1, 1)
    assert struct.unpack_from("<H", payload, 12) == (1,)
    assert payload[14:15] == b"w"
    assert struct.unpack_from("<III", payload, 15) == (2, 1, 2)
    assert struct.unpack_from("<2d", payload, 27) == (1.0, 2.0)
    assert len(payload) == 27 + 16


def test_params_scalar_and_unicode_names():
    params = {"λ": np.array(3.5), "empty": np.zeros((0, 3))}
    restored = parse_params(serialize_params(params))
    assert restored["λ"].shape == ()
    assert float(restored["λ"]) == 3.5
    assert restored["empty"].shape == (0, 3)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda p: b"XXXX" + p[4:],
        lambda p: p[:4] + struct.pack("<I", 2) + p[8:],
        lambda p: p[:-3],
        lambda p: p + b"\x00",
        lambda p: p[:13],
    ],
    ids=["magic", "version", "truncated", "trailing", "header"],
)
def test_params_corruption_is_rejected(mutate, rng):
    payload = serialize_params(sample_params(rng))
    with pytest.raises(ParamsFormatError):
        parse_params(mutate(payload))


def test_metrics_round_trip(tmp_path):
    records = [
        IterationRecord(iteration=0, lambda_=1000.0, learning_rate=0.1, train_loss=2.302585),
        IterationRecord(
            iteration=1, lambda_=0.1 + 0.2, learning_rate=0.01, train_loss=1.0 / 3, val_error=0.25
        ),
    ]
    path = write_metrics(records, tmp_path / "metrics.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(METRICS_COLUMNS)
    assert lines[1].endswith(",")
    assert read_metrics(path) == records


def test_metrics_wrong_columns(tmp_path):
    path = tmp_path / "metrics.csv"
    path.write_text("iteration,loss\n0,1.0\n")
    with pytest.raises(ParamsFormatError):
        read_metrics(path)
