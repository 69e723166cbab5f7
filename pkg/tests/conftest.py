"""Shared fixtures: synthetic datasets and victims trained once per session."""

import os

import numpy as np
import pytest

from badge.data import Dataset, ImageBatch, load_mnist, make_blobs
from badge.victim import train_victim


def pytest_configure(config):
    config._criterion_lines = []


@pytest.fixture
def criterion(request):
    """Records one verdict line per acceptance criterion.

    The lines are echoed again in the terminal summary so they stay
    visible even though pytest captures per-test stdout.
    """
    def record(number, status, detail):
        line = "criterion %s: %s - %s" % (number, status, detail)
        print(line)
        request.config._criterion_lines.append(line)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

MNIST_NAMES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def mnist_paths():
    """Locate the four IDX files, or return None when they are absent.

    Looks under $BADGE_MNIST first, then data/mnist/ in the repo root;
    accepts gzipped copies.
    """
    roots = []
    if os.environ.get("BADGE_MNIST"):
        roots.append(os.environ["BADGE_MNIST"])
    roots.append(os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    for root in roots:
        paths = []
        for name in MNIST_NAMES:
            for candidate in (name, name + ".gz"):
                path = os.path.join(root, candidate)
                if os.path.exists(path):
                    paths.append(path)
                    break
        if len(paths) == len(MNIST_NAMES):
            return paths
    return None


@pytest.fixture(scope="session")
def mnist_data():
    paths = mnist_paths()
    if paths is None:
        pytest.skip("MNIST IDX files not found; set BADGE_MNIST or run "
                    "scripts/fetch_mnist.py")
    return load_mnist(*paths)


@pytest.fixture(scope="session")
def blobs4():
    return make_blobs(seed=0, n_per_class=200, n_classes=4, dim=16)


@pytest.fixture(scope="session")
def blobs4_mlp(blobs4):
    return train_victim("mlp", blobs4, epochs=30, lr=0.1, seed=0)


@pytest.fixture(scope="session")
def blobs4_linear(blobs4):
    return train_victim("linear", blobs4, epochs=30, lr=0.1, seed=0)


def build_digits16() -> Dataset:
    """16x16 digit images in [0, 255]: sklearn's 8x8 digits, pixel-doubled.

    Serves as a small offline stand-in for handwritten-digit data; the
    last fifth of the samples forms the test split.
    """
    from sklearn.datasets import load_digits

    raw = load_digits()
    up = np.repeat(np.repeat(raw.images, 2, axis=1), 2, axis=2)
    pixels = np.rint(up.reshape(len(up), -1) * (255.0 / 16.0))
    labels = raw.target.astype(np.int64)
    n_test = len(pixels) // 5
    train = ImageBatch(pixels[:-n_test], labels[:-n_test], (1, 16, 16))
    test = ImageBatch(pixels[-n_test:], labels[-n_test:], (1, 16, 16))
    return Dataset(train=train, test=test, n_classes=10)


@pytest.fixture(scope="session")
def digits16():
    pytest.importorskip("sklearn")
    return build_digits16()


@pytest.fixture(scope="session")
def digits16_cnn(digits16):
    return train_victim("cnn", digits16, epochs=8, lr=0.1, seed=0)
