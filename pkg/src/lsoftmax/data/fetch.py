import hashlib
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import requests
from requests.adapters import HTTPAdapter

from ..exceptions import ChecksumMismatch, NetworkFailure, UnknownDataset
from .mnist import MNIST_FILES

DEFAULT_MNIST_URL = "https://ossci-datasets.s3.amazonaws.com/mnist/"
CHUNK_SIZE = 1024 * 1024  # 1 MB

MNIST_MD5: Dict[str, str] = {
    "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
    "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
    "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
}  #: Published MD5 digests of the compressed MNIST files.

logger = logging.getLogger("lsoftmax")


def file_digest(path: Path) -> str:
    digest = hashlib.md5()
    with open(path, "rb") as fobj:
        for chunk in iter(lambda: fobj.read(CHUNK_SIZE), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _download_session(max_retries: int = 3) -> requests.Session:
    session = requests.Session()
    adapter = HTTPAdapter(max_retries=max_retries, pool_connections=4, pool_maxsize=4)
    session.mount(prefix="http://", adapter=adapter)
    session.mount(prefix="https://", adapter=adapter)
    return session


def _download(session: requests.Session, url: str, target: Path, timeout: int):
    partial = target.with_name(target.name + ".part")
    try:
        with session.get(url, stream=True, timeout=timeout) as response:
            response.raise_for_status()
            with open(partial, "wb") as fobj:
                for chunk in response.iter_content(chunk_size=CHUNK_SIZE):
                    fobj.write(chunk)
    except requests.RequestException as error:
        partial.unlink(missing_ok=True)
        raise NetworkFailure(f"Download of {url} failed: {error}") from error
    partial.replace(target)


def fetch_mnist(
    dest: Union[str, Path],
    base_url: str = DEFAULT_MNIST_URL,
    digests: Optional[Dict[str, str]] = None,
    session: Optional[requests.Session] = None,
    timeout: int = 60,
) -> List[Path]:
    """Download the four MNIST files into ``dest`` and verify their digests.

    Files already present with a valid digest are skipped; a corrupted file is reported and
    downloaded again. A digest mismatch after downloading raises ``ChecksumMismatch``.

    :return: Paths of the four verified files.
    """
    digests = MNIST_MD5 if digests is None else digests
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    session = session or _download_session()

    paths = []
    for file_name in MNIST_FILES.values():
        target = dest / file_name
        expected = digests[file_name]
        if target.exists():
            actual = file_digest(target)
            if actual == expected:
                logger.info("FetchSkip %s (digest verified)", target)
                paths.append(target)
                continue
            logger.warning(
                "FetchCorrupt %s digest %s != %s, downloading again", target, actual, expected
            )

        url = base_url.rstrip("/") + "/" + file_name
        logger.info("FetchDownload %s", url)
        _download(session, url, target, timeout)
        actual = file_digest(target)
        logger.debug("FetchDigest %s %s", target, actual)
        if actual != expected:
            raise ChecksumMismatch(f"{target} has digest {actual}, expected {expected}")
        paths.append(target)
    return paths


def fetch(dataset: str, dest: Union[str, Path], **kwargs) -> List[Path]:
    if dataset.lower() != "mnist":
        raise UnknownDataset(f"Unknown dataset '{dataset}' (known: mnist)")
    return fetch_mnist(dest, **kwargs)
