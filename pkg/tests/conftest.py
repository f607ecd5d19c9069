from __future__ import annotations

from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
MNIST_DIR = REPO_ROOT / "data" / "mnist"

MNIST_FILES = {
    "train_images": MNIST_DIR / "train-images-idx3-ubyte.gz",
    "train_labels": MNIST_DIR / "train-labels-idx1-ubyte.gz",
    "test_images": MNIST_DIR / "t10k-images-idx3-ubyte.gz",
    "test_labels": MNIST_DIR / "t10k-labels-idx1-ubyte.gz",
}


def mnist_available() -> bool:
    return all(p.exists() for p in MNIST_FILES.values())


requires_mnist = pytest.mark.skipif(
    not mnist_available(), reason="MNIST IDX files not present under data/mnist"
)


@pytest.fixture(scope="session")
def mnist_paths() -> dict[str, Path]:
    if not mnist_available():
        pytest.skip("MNIST IDX files not present under data/mnist")
    return MNIST_FILES
