"""MNIST ingestion (IDX files), preprocessing and balanced splits."""

from __future__ import annotations

import gzip
import os
from dataclasses import dataclass

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxFormatError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DataError(ValueError):
    pass


def _read_bytes(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def parse_idx(raw: bytes) -> np.ndarray:
    """Decode an unsigned-byte IDX container (images or labels)."""
    if len(raw) < 4:
        raise IdxFormatError("file too short for magic number", len(raw))
    magic = int.from_bytes(raw[:4], "big")
    if magic not in (IMAGE_MAGIC, LABEL_MAGIC):
        raise IdxFormatError(f"bad magic 0x{magic:08x}", 0)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError("truncated dimension header", len(raw))
    dims = [int.from_bytes(raw[4 + 4 * i: 8 + 4 * i], "big") for i in range(ndim)]
    size = int(np.prod(dims))
    if len(raw) < header + size:
        raise IdxFormatError(f"truncated payload: expected {size} bytes", len(raw))
    if len(raw) > header + size:
        raise IdxFormatError("trailing bytes after payload", header + size)
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def read_idx(path) -> np.ndarray:
    """Read an IDX file (plain or gzip-compressed)."""
    return parse_idx(_read_bytes(path))


def write_idx(path, array):
    """Write a uint8 array as IDX; gzip-compressed when ``path`` ends in ``.gz``."""
    array = np.asarray(array, dtype=np.uint8)
    magic = IMAGE_MAGIC if array.ndim == 3 else LABEL_MAGIC
    if array.ndim not in (1, 3):
        raise ValueError("IDX writer supports labels (1-d) and images (3-d)")
    raw = magic.to_bytes(4, "big") + b"".join(d.to_bytes(4, "big") for d in array.shape)
    raw += array.tobytes()
    if str(path).endswith(".gz"):
        raw = gzip.compress(raw, mtime=0)
    with open(path, "wb") as fh:
        fh.write(raw)


def _find(data_dir, stem):
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        p = os.path.join(data_dir, name)
        if os.path.exists(p):
            return p
    raise FileNotFoundError(f"no {stem}[.gz] under {data_dir}")


def load_mnist(data_dir, split="train"):
    """Return ``(images uint8 (N, 28, 28), labels uint8 (N,))``."""
    img_stem, lbl_stem = FILES[split]
    images = read_idx(_find(data_dir, img_stem))
    labels = read_idx(_find(data_dir, lbl_stem))
    if images.ndim != 3 or labels.ndim != 1:
        raise DataError("unexpected IDX ranks for MNIST")
    if len(images) != len(labels):
        raise DataError(f"{len(images)} images but {len(labels)} labels")
    return images, labels


def center_crop_22(image):
    """Keep rows/cols 3..24 of a 28x28 image (3-pixel margin on each side)."""
    image = np.asarray(image)
    if image.shape[-2:] != (28, 28):
        raise ValueError(f"expected 28x28 input, got {image.shape[-2:]}")
    return image[..., 3:25, 3:25]


def scale_to_angles(image):
    """Map byte intensities 0..255 onto rotation angles 0..pi."""
    return np.asarray(image, dtype=float) * (np.pi / 255.0)


def downsample_mean(images, factor=2):
    """Average-pool the last two axes by ``factor``."""
    images = np.asarray(images, dtype=float)
    h, w = images.shape[-2:]
    if h % factor or w % factor:
        raise ValueError(f"{h}x{w} not divisible by {factor}")
    shape = images.shape[:-2] + (h // factor, factor, w // factor, factor)
    return images.reshape(shape).mean(axis=(-3, -1))


def one_hot(labels, classes):
    classes = list(classes)
    lookup = {c: i for i, c in enumerate(classes)}
    out = np.zeros((len(labels), len(classes)))
    out[np.arange(len(labels)), [lookup[int(c)] for c in labels]] = 1.0
    return out


@dataclass
class Dataset:
    images: np.ndarray   # (N, 1, H, W) angles
    labels: np.ndarray   # (N, n_classes) one-hot
    classes: tuple = tuple(range(10))
    indices: np.ndarray | None = None

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataError("image and label counts differ")

    def __len__(self):
        return len(self.images)

    @property
    def targets(self):
        return self.labels.argmax(axis=1)

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(self.images[idx], self.labels[idx], self.classes,
                       None if self.indices is None else self.indices[idx])


def balanced_indices(labels, per_class, classes, rng, exclude=None):
    labels = np.asarray(labels)
    picked = []
    for c in classes:
        pool = np.flatnonzero(labels == c)
        if exclude is not None:
            pool = np.setdiff1d(pool, exclude)
        if len(pool) < per_class:
            raise DataError(f"class {c}: need {per_class} samples, only {len(pool)} available")
        picked.append(np.sort(rng.choice(pool, size=per_class, replace=False)))
    return np.concatenate(picked)


def preprocess(raw_images, downsample=1):
    """Crop, scale to angles, optionally mean-downsample, add channel axis."""
    x = scale_to_angles(center_crop_22(raw_images))
    if downsample > 1:
        x = downsample_mean(x, downsample)
    return x[:, None, :, :]


def balanced_subset(images, labels, n_train=6000, n_test=600, classes=tuple(range(10)),
                    seed=0, test_images=None, test_labels=None, downsample=1):
    """Draw class-balanced, disjoint train/test sets.

    With ``test_images``/``test_labels`` the test set comes from that pool;
    otherwise both are drawn (disjointly) from ``images``.
    """
    classes = tuple(int(c) for c in classes)
    if n_train % len(classes) or n_test % len(classes):
        raise DataError("split sizes must divide evenly across classes")
    rng = np.random.default_rng(seed)
    tr = balanced_indices(labels, n_train // len(classes), classes, rng)
    if test_images is None:
        te = balanced_indices(labels, n_test // len(classes), classes, rng, exclude=tr)
        test_images, test_labels = images, labels
    else:
        te = balanced_indices(test_labels, n_test // len(classes), classes, rng)

    def make(imgs, lbls, idx):
        return Dataset(preprocess(imgs[idx], downsample), one_hot(lbls[idx], classes), classes, idx)

    return make(images, labels, tr), make(test_images, test_labels, te)


def stub_dataset(n, size=7, classes=(0, 1), seed=0):
    """Synthetic angle images for harness runs; class ``k`` brightens row band ``k``."""
    rng = np.random.default_rng(seed)
    classes = tuple(classes)
    y = np.arange(n) % len(classes)
    x = rng.uniform(0.0, 0.5, size=(n, 1, size, size))
    band = max(1, size // len(classes))
    for i, k in enumerate(y):
        x[i, 0, k * band:(k + 1) * band, :] += 2.0
    labels = np.array([classes[k] for k in y])
    return Dataset(np.clip(x, 0, np.pi), one_hot(labels, classes), classes, np.arange(n))
