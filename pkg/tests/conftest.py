import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from qfenet.statevector import Gate  # noqa: E402

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_gate(rng, n):
    kinds = ["H", "RX", "RY", "RZ"] + (["CNOT", "CZ"] if n > 1 else [])
    kind = kinds[rng.integers(len(kinds))]
    if kind in ("CNOT", "CZ"):
        c, t = rng.choice(n, size=2, replace=False)
        return Gate(kind, int(t), int(c))
    q = int(rng.integers(n))
    if kind == "H":
        return Gate("H", q)
    return Gate(kind, q, angle=float(rng.uniform(-2 * np.pi, 2 * np.pi)))


@pytest.fixture(scope="session")
def mnist_dir():
    """IDX directory with real digits; exports the bundled subset when needed."""
    from qfenet.fetch import ensure_mnist

    path = os.environ.get("QFENET_MNIST_DIR", os.path.join(ROOT, "data", "mnist"))
    try:
        ensure_mnist(path, allow_download=False)
    except ModuleNotFoundError:
        pytest.skip("no MNIST files and mlxtend is not installed")
    return path
