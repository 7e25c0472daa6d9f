import hashlib

import pytest
import requests

from lsoftmax.data.fetch import fetch, fetch_mnist, file_digest
from lsoftmax.data.mnist import MNIST_FILES
from lsoftmax.exceptions import ChecksumMismatch, NetworkFailure, UnknownDataset

CONTENT = {name: f"payload of {name}".encode() * 100 for name in MNIST_FILES.values()}
DIGESTS = {name: hashlib.md5(data).hexdigest() for name, data in CONTENT.items()}


class FakeResponse:
    def __init__(self, body: bytes, status: int = 200):
        self.body = body
        self.status = status

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def raise_for_status(self):
        if self.status >= 400:
            raise requests.HTTPError(f"{self.status} Error")

    def iter_content(self, chunk_size):
        for start in range(0, len(self.body), 7):
            yield self.body[start : start + 7]


class FakeSession:
    """Serves ``CONTENT`` by file name and records every requested URL."""

    def __init__(self, overrides=None, status=200):
        self.overrides = overrides or {}
        self.status = status
        self.requested = []

    def get(self, url, stream=False, timeout=None):
        self.requested.append(url)
        name = url.rsplit("/", 1)[-1]
        return FakeResponse(self.overrides.get(name, CONTENT[name]), self.status)


def test_fetch_downloads_and_verifies(tmp_path):
    session = FakeSession()
    paths = fetch_mnist(
        tmp_path / "mnist", base_url="http://mirror/", digests=DIGESTS, session=session
    )
    assert [p.name for p in paths] == list(MNIST_FILES.values())
    assert session.requested == [f"http://mirror/{name}" for name in MNIST_FILES.values()]
    for path in paths:
        assert path.read_bytes() == CONTENT[path.name]
        assert file_digest(path) == DIGESTS[path.name]
    assert not list((tmp_path / "mnist").glob("*.part"))


def test_fetch_skips_verified_and_replaces_corrupt(tmp_path):
    names = list(MNIST_FILES.values())
    for name in names:
        (tmp_path / name).write_bytes(CONTENT[name])
    (tmp_path / names[1]).write_bytes(b"corrupted")
    session = FakeSession()
    fetch_mnist(tmp_path, base_url="http://mirror", digests=DIGESTS, session=session)
    assert session.requested == [f"http://mirror/{names[1]}"]
    assert (tmp_path / names[1]).read_bytes() == CONTENT[names[1]]


def test_fetch_checksum_mismatch(tmp_path):
    first = next(iter(MNIST_FILES.values()))
    session = FakeSession(overrides={first: b"tampered"})
    with pytest.raises(ChecksumMismatch):
        fetch_mnist(tmp_path, digests=DIGESTS, session=session)


def test_fetch_network_failure_leaves_no_partial_file(tmp_path):
    with pytest.raises(NetworkFailure):
        fetch_mnist(tmp_path, digests=DIGESTS, session=FakeSession(status=503))
    assert list(tmp_path.iterdir()) == []


def test_fetch_unknown_dataset(tmp_path):
    with pytest.raises(UnknownDataset):
        fetch("cifar10", tmp_path)
