"""
A quantum filter sliding over a digit
=====================================

One 3x3 filter is a 9-qubit circuit: the patch pixels are loaded as RY
angles, a trainable ansatz follows, and <Z0> is read out.  Sliding it over
a 22x22 digit gives a 20x20 feature map, the quantum analogue of a
convolution.  Uses the MNIST IDX files in data/mnist when present,
otherwise a synthetic image.
"""
import os

import numpy as np

from qfenet import QfeLayer, counter, maxpool_forward
from qfenet.data import load_mnist, preprocess, stub_dataset

here = os.path.dirname(os.path.abspath(__file__))
data_dir = os.path.join(here, "..", "data", "mnist")
try:
    images, labels = load_mnist(data_dir)
    digit = preprocess(images[:1])[0]
    print("digit label:", labels[0])
except FileNotFoundError:
    digit = stub_dataset(1, size=22).images[0]
    print("no MNIST files found; using a synthetic 22x22 image")

rng = np.random.default_rng(1)
layer = QfeLayer(1, 2, ("sim15", 1), activation="identity",
                 weights=rng.uniform(-np.pi, np.pi, (2, 1, 18)))

before = counter.count
fmap, _ = layer.forward(digit)
print("input", digit.shape, "-> feature maps", fmap.shape,
      f"({counter.count - before} circuit runs)")
pooled, _ = maxpool_forward(fmap)
print("after 2x2 max pooling:", pooled.shape)

# Coarse text rendering of the first feature map.
shades = " .:-=+*#%@"
lo, hi = fmap[0].min(), fmap[0].max()
for row in fmap[0]:
    print("".join(shades[int((v - lo) / (hi - lo + 1e-12) * 9)] for v in row))
