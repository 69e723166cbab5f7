"""Dataset ingestion and batching.

Images are kept as flat float64 rows in raw 8-bit range [0, 255]: the
attack perturbs raw pixels, so no dataset-level normalization happens
here.  Model-side normalization is the victim's own business.
"""

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, FormatError, LengthError, ParameterError
from .rng import ROLE_BLOBS, ROLE_SHUFFLE, keyed_rng

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
VALUE_RANGE = (0.0, 255.0)


@dataclass(frozen=True)
class ImageBatch:
    """A set of images as flat pixel rows plus integer labels.

    pixels: (n, input_dim) float64, each value an integer in [0, 255]
    labels: (n,) integer class indices
    shape:  (channels, height, width) of one image
    """

    pixels: np.ndarray
    labels: np.ndarray
    shape: tuple

    def __post_init__(self):
        if self.pixels.ndim != 2:
            raise ParameterError("pixels must be 2-D, got %d-D" % self.pixels.ndim)
        if self.labels.shape != (self.pixels.shape[0],):
            raise ConsistencyError(
                "got %d label(s) for %d image(s)"
                % (self.labels.shape[0], self.pixels.shape[0])
            )
        c, h, w = self.shape
        if c * h * w != self.pixels.shape[1]:
            raise ConsistencyError(
                "shape %r does not match input_dim %d" % (self.shape, self.pixels.shape[1])
            )

    def __len__(self):
        return self.pixels.shape[0]

    @property
    def input_dim(self):
        return self.pixels.shape[1]

    def take(self, idx) -> "ImageBatch":
        return ImageBatch(self.pixels[idx], self.labels[idx], self.shape)


@dataclass(frozen=True)
class Dataset:
    train: ImageBatch
    test: ImageBatch
    n_classes: int
    value_range: tuple = VALUE_RANGE


def one_hot(labels, n_classes) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ParameterError("label outside [0, %d)" % n_classes)
    out = np.zeros((labels.shape[0], n_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _maybe_gunzip(raw: bytes) -> bytes:
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _read_u32s(raw, count, what):
    need = 4 * count
    if len(raw) < need:
        raise LengthError("%s header truncated: %d bytes" % (what, len(raw)))
    return struct.unpack(">" + "I" * count, raw[:need])


def parse_idx(image_bytes: bytes, label_bytes: bytes, shape=None) -> ImageBatch:
    """Parse a big-endian IDX image/label file pair into an ImageBatch.

    Accepts raw or gzip-compressed bytes.  Image payload is u8 pixels in
    row-major order; magic numbers are 2051 (images) and 2049 (labels).
    """
    image_bytes = _maybe_gunzip(image_bytes)
    label_bytes = _maybe_gunzip(label_bytes)

    magic, n_img, rows, cols = _read_u32s(image_bytes, 4, "image")
    if magic != IMAGE_MAGIC:
        raise FormatError("image magic %d, expected %d" % (magic, IMAGE_MAGIC))
    body = image_bytes[16:]
    if len(body) != n_img * rows * cols:
        raise LengthError(
            "image payload is %d bytes, header declares %d"
            % (len(body), n_img * rows * cols)
        )

    lmagic, n_lab = _read_u32s(label_bytes, 2, "label")
    if lmagic != LABEL_MAGIC:
        raise FormatError("label magic %d, expected %d" % (lmagic, LABEL_MAGIC))
    lbody = label_bytes[8:]
    if len(lbody) != n_lab:
        raise LengthError("label payload is %d bytes, header declares %d" % (len(lbody), n_lab))
    if n_img != n_lab:
        raise ConsistencyError("%d images but %d labels" % (n_img, n_lab))

    pixels = np.frombuffer(body, dtype=np.uint8).reshape(n_img, rows * cols)
    labels = np.frombuffer(lbody, dtype=np.uint8).astype(np.int64)
    if shape is None:
        shape = (1, rows, cols)
    return ImageBatch(pixels.astype(np.float64), labels, shape)


def load_mnist(train_images, train_labels, test_images, test_labels) -> Dataset:
    """Load the four standard IDX files (optionally .gz) into a Dataset."""
    parts = []
    for img_path, lab_path in ((train_images, train_labels), (test_images, test_labels)):
        with open(img_path, "rb") as fh:
            img = fh.read()
        with open(lab_path, "rb") as fh:
            lab = fh.read()
        parts.append(parse_idx(img, lab))
    return Dataset(train=parts[0], test=parts[1], n_classes=10)


def make_blobs(seed, n_per_class, n_classes, dim, separation=4.0) -> Dataset:
    """Synthetic Gaussian-blob classification data in raw pixel range.

    Class k is an isotropic unit Gaussian around an axis-aligned center
    at distance `separation` from the origin (axis k % dim, sign flips
    once the axes are exhausted), so any two centers are at least
    separation * sqrt(2) apart.  Samples are affinely rescaled into
    [0, 255] and rounded; every 5th sample goes to the test split.
    """
    if n_classes < 2:
        raise ParameterError("need at least 2 classes, got %d" % n_classes)
    if dim < 2:
        raise ParameterError("need dim >= 2, got %d" % dim)
    if n_classes > 2 * dim:
        raise ParameterError("at most %d classes fit in %d dims" % (2 * dim, dim))
    if n_per_class < 5:
        raise ParameterError("need n_per_class >= 5 for the 80/20 split")
    if separation <= 0:
        raise ParameterError("separation must be positive")

    rng = keyed_rng(ROLE_BLOBS, seed)
    centers = np.zeros((n_classes, dim))
    for k in range(n_classes):
        centers[k, k % dim] = separation * (1.0 if k < dim else -1.0)

    raw = rng.standard_normal((n_classes, n_per_class, dim)) + centers[:, None, :]
    raw = raw.reshape(n_classes * n_per_class, dim)
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)

    lo, hi = raw.min(), raw.max()
    pixels = np.rint((raw - lo) / (hi - lo) * 255.0)

    side = int(round(dim**0.5))
    shape = (1, side, side) if side * side == dim else (1, 1, dim)

    idx = np.arange(len(labels))
    test_mask = idx % 5 == 4
    train = ImageBatch(pixels[~test_mask], labels[~test_mask], shape)
    test = ImageBatch(pixels[test_mask], labels[test_mask], shape)
    return Dataset(train=train, test=test, n_classes=n_classes)


def batches(batch: ImageBatch, batch_size, shuffle_seed, epoch=0):
    """Split a batch into shuffled mini-batches (last one may be short).

    The permutation is keyed by (shuffle_seed, epoch), so epoch k of a
    resumed run shuffles identically to epoch k of a fresh run.
    """
    if batch_size < 1:
        raise ParameterError("batch_size must be >= 1, got %d" % batch_size)
    perm = keyed_rng(ROLE_SHUFFLE, shuffle_seed, epoch).permutation(len(batch))
    return [batch.take(perm[i : i + batch_size]) for i in range(0, len(perm), batch_size)]
