"""Model assembly from layer strings and the two named architectures."""

from __future__ import annotations

import numpy as np

from .circuits import AnsatzPreset
from .config import ConfigError
from .layers import Dense, GlobalAvgPool, MaxPool, QfeLayer, ShapeError, softmax_cross_entropy
from .optim import init_fc_weights, init_qfe_weights
from .statevector import Observable

MODEL_PRESETS = {
    "model1": "qfe:4,pool,qfe:8,pool,fc:120,fc:84,fc:10",
    "model2": "qfe:4,pool,qfe:8,qfe:10,gap",
}


def parse_layers(text):
    out = []
    for token in filter(None, (t.strip() for t in text.split(","))):
        kind, _, arg = token.partition(":")
        if kind in ("qfe", "fc"):
            if not arg:
                raise ConfigError(f"layer {token!r} needs a width")
            out.append((kind, int(arg)))
        elif kind in ("pool", "gap"):
            out.append((kind, None))
        else:
            raise ConfigError(f"unknown layer kind {kind!r}")
    return out


class Model:
    def __init__(self, layers, input_shape):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.shapes = [self.input_shape]
        shape = self.input_shape
        for layer in self.layers:
            try:
                shape = layer.output_shape(shape)
            except ShapeError as exc:
                raise ConfigError(f"layers do not compose: {exc}") from None
            self.shapes.append(shape)

    @property
    def output_size(self):
        return int(np.prod(self.shapes[-1]))

    def forward(self, x, want_grads=False):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, want_grads)
            caches.append(cache)
        return np.ravel(x), caches

    def backward(self, caches, d_logits):
        grads = {}
        g = np.asarray(d_logits, dtype=float).reshape(self.shapes[-1])
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            g, pg = layer.backward(cache, g)
            for k, v in pg.items():
                grads[f"{layer.name}.{k}"] = v
            if g is None:
                break
        return grads

    def loss_and_grads(self, x, onehot):
        logits, caches = self.forward(x, want_grads=True)
        loss, d_logits = softmax_cross_entropy(logits, onehot)
        return loss, logits, self.backward(caches, d_logits)

    def parameters(self):
        return {
            f"{layer.name}.{k}": v
            for layer in self.layers for k, v in layer.params().items()
        }

    def set_parameters(self, params):
        for layer in self.layers:
            for k, v in layer.params().items():
                new = np.asarray(params[f"{layer.name}.{k}"], dtype=float)
                if new.shape != v.shape:
                    raise ShapeError(f"{layer.name}.{k}: shape {new.shape} != {v.shape}")
                v[...] = new

    def sims_per_sample(self, want_grads=True):
        return sum(
            layer.sims_per_sample(shape, want_grads)
            for layer, shape in zip(self.layers, self.shapes)
            if isinstance(layer, QfeLayer)
        )


def build_model(layer_text, input_shape, preset, rng, kernel=3, activation="sigmoid",
                observables=None, fanout=False, n_classes=10):
    """Instantiate layers, draw initial weights and check the shape chain.

    The first QFE layer skips input derivatives: its input is data.
    """
    layout = parse_layers(MODEL_PRESETS.get(layer_text, layer_text))
    layers = []
    shape = tuple(input_shape)
    counts = {"qfe": 0, "pool": 0, "fc": 0}
    fc_total = sum(1 for kind, _ in layout if kind == "fc")
    first_qfe = True
    for kind, width in layout:
        if kind == "qfe":
            counts["qfe"] += 1
            layer = QfeLayer(shape[0], width, preset, kernel=kernel, observables=observables,
                             activation=activation, fanout=fanout, input_grads=not first_qfe,
                             name=f"qfe{counts['qfe']}")
            layer.weights[...] = init_qfe_weights(layer.weights.shape, rng)
            first_qfe = False
        elif kind == "pool":
            counts["pool"] += 1
            layer = MaxPool(2, name=f"pool{counts['pool']}")
        elif kind == "gap":
            layer = GlobalAvgPool()
        else:
            counts["fc"] += 1
            n_in = int(np.prod(shape))
            last = counts["fc"] == fc_total
            layer = Dense(n_in, width, activation="identity" if last else "relu",
                          W=init_fc_weights((width, n_in), rng), name=f"fc{counts['fc']}")
        try:
            shape = layer.output_shape(shape)
        except ShapeError as exc:
            raise ConfigError(f"layers do not compose: {exc}") from None
        layers.append(layer)
    model = Model(layers, input_shape)
    if model.output_size != n_classes:
        raise ConfigError(f"model emits {model.output_size} outputs, expected {n_classes} classes")
    return model


def model_from_config(config, input_shape, rng):
    layer_text = config.model_layers or config.model_preset
    if layer_text not in MODEL_PRESETS and not config.model_layers:
        raise ConfigError(f"unknown model preset {config.model_preset!r}")
    observables = [Observable.parse(t) for t in config.model_observable.split(";") if t.strip()]
    fanout = str(config.model_fanout).lower() in ("1", "true", "yes")
    return build_model(
        layer_text, input_shape, AnsatzPreset(config.ansatz_name, config.ansatz_layers), rng,
        kernel=config.model_kernel, activation=config.model_activation,
        observables=observables, fanout=fanout, n_classes=len(config.classes),
    )
