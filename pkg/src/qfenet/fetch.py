"""Obtain MNIST as IDX files.

The official archives are tried first.  When they are unreachable, the
5000-digit MNIST subset bundled with the ``mlxtend`` wheel (500 per class,
original 28x28 bytes) is exported as ``train-*`` IDX files instead.
"""

from __future__ import annotations

import gzip
import os
import urllib.request

import numpy as np

from .data import FILES, write_idx

MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
)


def fetch_official(dest, timeout=30):
    os.makedirs(dest, exist_ok=True)
    names = [n + ".gz" for pair in FILES.values() for n in pair]
    for base in MIRRORS:
        try:
            for name in names:
                target = os.path.join(dest, name)
                if not os.path.exists(target):
                    with urllib.request.urlopen(base + name, timeout=timeout) as resp:
                        payload = resp.read()
                    with open(target, "wb") as fh:
                        fh.write(payload)
            return True
        except OSError:
            continue
    return False


def export_bundled_subset(dest):
    """Write mlxtend's 5000-sample MNIST subset as train IDX files."""
    from importlib.resources import files

    path = files("mlxtend") / "data" / "data" / "mnist_5k.csv.gz"
    with gzip.open(path) as fh:
        table = np.loadtxt(fh, delimiter=",", dtype=np.float64)
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)
    os.makedirs(dest, exist_ok=True)
    img_name, lbl_name = FILES["train"]
    write_idx(os.path.join(dest, img_name + ".gz"), images)
    write_idx(os.path.join(dest, lbl_name + ".gz"), labels)
    return len(labels)


def ensure_mnist(dest, allow_download=True):
    """Make sure ``dest`` holds at least the training IDX pair; returns a source tag."""
    img_name, _ = FILES["train"]
    if any(os.path.exists(os.path.join(dest, img_name + ext)) for ext in ("", ".gz")):
        return "present"
    if allow_download and fetch_official(dest):
        return "official"
    export_bundled_subset(dest)
    return "bundled-subset"
