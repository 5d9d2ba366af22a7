"""Circuit templates: the angle encoder and the ansatz presets.

A template is an ordered gate list whose rotation angles are either fixed
numbers or references to parameter slots.  Slots come in two origins:
``"input"`` (data loaded by the encoder) and ``"weight"`` (trainable).
A slot may be read by several gates; each read carries a linear scale so the
bound angle is ``scale * value``.

Preset gate lists, per layer, on ``n`` qubits (``w`` = fresh weight slot):

``sim1``
    RX(w) on qubits 0..n-1, then RZ(w) on qubits 0..n-1.
``sim2``
    sim1 rotations, then CNOT(control=i, target=i-1) for i = n-1 down to 1.
``sim9``
    H on every qubit, CZ(i, i+1) for i = 0..n-2, RX(w) on every qubit.
``sim14``
    RY(w) on every qubit; CRX(w) with control i, target (i+1) mod n for
    i = n-1 down to 0; RY(w) on every qubit; CRX(w) with control i, target
    (i-1) mod n for i = 0..n-1.
``sim15``
    sim14 with the controlled rotations replaced by plain CNOTs (so only the
    two RY layers carry weights).
``qaoa``
    For each neighbour pair (i, i+1): CNOT(i, i+1), RZ(w) on i+1,
    CNOT(i, i+1); then RX(w) on every qubit.

A controlled RX is emitted as primitive gates so every weighted gate stays a
single-qubit rotation::

    RY_t(-pi/2)  CNOT(c, t)  RZ_t(-w/2)  CNOT(c, t)  RZ_t(w/2)  RY_t(pi/2)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .statevector import GATE_KINDS, ROTATIONS, Gate

INPUT = "input"
WEIGHT = "weight"

PRESETS = ("sim1", "sim2", "sim9", "sim14", "sim15", "qaoa")


class ConfigurationError(ValueError):
    pass


class BindingError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSlot:
    index: int
    origin: str

    def __post_init__(self):
        if self.origin not in (INPUT, WEIGHT):
            raise ValueError(f"slot origin must be {INPUT!r} or {WEIGHT!r}")


@dataclass(frozen=True)
class ParamRef:
    slot: ParamSlot
    scale: float = 1.0


@dataclass(frozen=True)
class TemplateGate:
    kind: str
    target: int
    control: int | None = None
    angle: float | ParamRef | None = None

    @property
    def is_parameterized(self):
        return isinstance(self.angle, ParamRef)


@dataclass(frozen=True)
class AnsatzPreset:
    name: str
    layers: int = 1

    def __post_init__(self):
        if self.name not in PRESETS:
            raise ConfigurationError(f"unknown ansatz preset {self.name!r}; choose from {PRESETS}")
        if int(self.layers) < 1:
            raise ConfigurationError("ansatz needs at least one layer")


class CircuitTemplate:
    def __init__(self, n_qubits, gates, n_input_slots=0, n_weight_slots=0):
        self.n_qubits = int(n_qubits)
        self.gates = tuple(gates)
        self.n_input_slots = int(n_input_slots)
        self.n_weight_slots = int(n_weight_slots)
        self._validate()

    def _validate(self):
        seen_inputs = set()
        counts = {INPUT: self.n_input_slots, WEIGHT: self.n_weight_slots}
        for g in self.gates:
            if g.kind not in GATE_KINDS:
                raise ConfigurationError(f"unknown gate kind {g.kind!r}")
            for q in (g.target,) if g.control is None else (g.target, g.control):
                if not 0 <= q < self.n_qubits:
                    raise ConfigurationError(f"qubit {q} outside {self.n_qubits}-qubit template")
            if g.is_parameterized:
                if g.kind not in ROTATIONS:
                    raise ConfigurationError(f"{g.kind} cannot carry a parameter slot")
                slot = g.angle.slot
                if not 0 <= slot.index < counts[slot.origin]:
                    raise ConfigurationError(f"slot {slot} exceeds declared count")
                if slot.origin == INPUT:
                    seen_inputs.add(slot.index)
        if len(seen_inputs) != self.n_input_slots:
            raise ConfigurationError("every input slot must be read by at least one gate")

    def __eq__(self, other):
        return isinstance(other, CircuitTemplate) and (
            self.n_qubits, self.gates, self.n_input_slots, self.n_weight_slots
        ) == (other.n_qubits, other.gates, other.n_input_slots, other.n_weight_slots)

    def __hash__(self):
        return hash((self.n_qubits, self.gates, self.n_input_slots, self.n_weight_slots))

    def __repr__(self):
        return (
            f"CircuitTemplate(n_qubits={self.n_qubits}, gates={len(self.gates)}, "
            f"inputs={self.n_input_slots}, weights={self.n_weight_slots})"
        )

    def n_slots(self, origin):
        return self.n_input_slots if origin == INPUT else self.n_weight_slots

    def occurrences(self, slot):
        """``[(gate_position, scale), ...]`` for every gate reading ``slot``."""
        if not 0 <= slot.index < self.n_slots(slot.origin):
            raise BindingError(f"invalid slot {slot}")
        return [
            (pos, g.angle.scale)
            for pos, g in enumerate(self.gates)
            if g.is_parameterized and g.angle.slot == slot
        ]

    def parameterized_positions(self, origin):
        """Positions of gates reading slots of ``origin``, in circuit order."""
        return [
            pos for pos, g in enumerate(self.gates)
            if g.is_parameterized and g.angle.slot.origin == origin
        ]

    def then(self, other):
        """Concatenate ``other`` after ``self``; slot indices of ``other`` are offset."""
        if other.n_qubits != self.n_qubits:
            raise ConfigurationError("cannot compose templates of different widths")
        offset = {INPUT: self.n_input_slots, WEIGHT: self.n_weight_slots}
        moved = []
        for g in other.gates:
            if g.is_parameterized:
                s = g.angle.slot
                g = TemplateGate(
                    g.kind, g.target, g.control,
                    ParamRef(ParamSlot(s.index + offset[s.origin], s.origin), g.angle.scale),
                )
            moved.append(g)
        return CircuitTemplate(
            self.n_qubits,
            self.gates + tuple(moved),
            self.n_input_slots + other.n_input_slots,
            self.n_weight_slots + other.n_weight_slots,
        )

    def compiled(self):
        return _compile(self)


def _compile(template):
    """Array form of a template used by the batched kernels."""
    cached = getattr(template, "_arrays", None)
    if cached is not None:
        return cached
    n = len(template.gates)
    kinds = np.empty(n, dtype=np.int64)
    targets = np.empty(n, dtype=np.int64)
    controls = np.full(n, -1, dtype=np.int64)
    fixed = np.zeros(n, dtype=np.float64)
    in_slot = np.full(n, -1, dtype=np.int64)
    w_slot = np.full(n, -1, dtype=np.int64)
    scale = np.zeros(n, dtype=np.float64)
    for pos, g in enumerate(template.gates):
        kinds[pos] = _kernels.OPCODES[g.kind]
        targets[pos] = g.target
        if g.control is not None:
            controls[pos] = g.control
        if g.is_parameterized:
            scale[pos] = g.angle.scale
            if g.angle.slot.origin == INPUT:
                in_slot[pos] = g.angle.slot.index
            else:
                w_slot[pos] = g.angle.slot.index
        elif g.angle is not None:
            fixed[pos] = g.angle
    arrays = dict(kinds=kinds, targets=targets, controls=controls, fixed=fixed,
                  in_slot=in_slot, w_slot=w_slot, scale=scale)
    object.__setattr__(template, "_arrays", arrays)
    return arrays


def bound_angles(template, inputs, weights):
    """Resolve gate angles for a batch of input rows.

    ``inputs`` is (batch, n_input_slots) or a single row; returns
    (batch, n_gates) or (n_gates,).
    """
    arr = template.compiled()
    inputs = np.asarray(inputs, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    single = inputs.ndim == 1
    inputs = np.atleast_2d(inputs)
    if inputs.shape[1] != template.n_input_slots:
        raise BindingError(f"expected {template.n_input_slots} inputs, got {inputs.shape[1]}")
    if weights.shape != (template.n_weight_slots,):
        raise BindingError(f"expected {template.n_weight_slots} weights, got {weights.shape}")
    angles = np.broadcast_to(arr["fixed"], (inputs.shape[0], len(arr["fixed"]))).copy()
    has_in = arr["in_slot"] >= 0
    has_w = arr["w_slot"] >= 0
    angles[:, has_in] += arr["scale"][has_in] * inputs[:, arr["in_slot"][has_in]]
    angles[:, has_w] += arr["scale"][has_w] * weights[arr["w_slot"][has_w]]
    return angles[0] if single else angles


def bind(template: CircuitTemplate, inputs, weights) -> list[Gate]:
    """Resolve every angle and return a concrete gate list."""
    angles = bound_angles(template, inputs, weights)
    return [
        Gate(g.kind, g.target, g.control, float(angles[pos]) if g.kind in ROTATIONS else None)
        for pos, g in enumerate(template.gates)
    ]


def build_encoder(n_qubits: int) -> CircuitTemplate:
    """One RY per qubit, angle = input slot of the same index."""
    if n_qubits < 1:
        raise ConfigurationError("encoder needs at least one qubit")
    gates = [TemplateGate("RY", q, None, ParamRef(ParamSlot(q, INPUT))) for q in range(n_qubits)]
    return CircuitTemplate(n_qubits, gates, n_input_slots=n_qubits)


class _Builder:
    def __init__(self):
        self.gates = []
        self.n_weights = 0

    def fresh(self):
        self.n_weights += 1
        return ParamSlot(self.n_weights - 1, WEIGHT)

    def rot(self, kind, q, slot=None, scale=1.0):
        self.gates.append(TemplateGate(kind, q, None, ParamRef(slot or self.fresh(), scale)))

    def fixed(self, kind, q, angle=None):
        self.gates.append(TemplateGate(kind, q, None, angle))

    def two(self, kind, control, target):
        self.gates.append(TemplateGate(kind, target, control))

    def crx(self, control, target):
        slot = self.fresh()
        self.fixed("RY", target, -np.pi / 2)
        self.two("CNOT", control, target)
        self.rot("RZ", target, slot, -0.5)
        self.two("CNOT", control, target)
        self.rot("RZ", target, slot, 0.5)
        self.fixed("RY", target, np.pi / 2)


def _layer(b, name, n):
    if name in ("sim1", "sim2"):
        for q in range(n):
            b.rot("RX", q)
        for q in range(n):
            b.rot("RZ", q)
        if name == "sim2":
            for i in range(n - 1, 0, -1):
                b.two("CNOT", i, i - 1)
    elif name == "sim9":
        for q in range(n):
            b.fixed("H", q)
        for i in range(n - 1):
            b.two("CZ", i, i + 1)
        for q in range(n):
            b.rot("RX", q)
    elif name in ("sim14", "sim15"):
        ent = b.crx if name == "sim14" else (lambda c, t: b.two("CNOT", c, t))
        for q in range(n):
            b.rot("RY", q)
        for i in range(n - 1, -1, -1):
            ent(i, (i + 1) % n)
        for q in range(n):
            b.rot("RY", q)
        for i in range(n):
            ent(i, (i - 1) % n)
    elif name == "qaoa":
        for i in range(n - 1):
            b.two("CNOT", i, i + 1)
            b.rot("RZ", i + 1)
            b.two("CNOT", i, i + 1)
        for q in range(n):
            b.rot("RX", q)


def _as_preset(preset, layers=None):
    if isinstance(preset, AnsatzPreset):
        return preset
    return AnsatzPreset(str(preset).lower(), 1 if layers is None else int(layers))


@lru_cache(maxsize=128)
def _build_ansatz(preset, n_qubits):
    if n_qubits < 1 or (preset.name != "sim1" and n_qubits < 2):
        raise ConfigurationError(f"preset {preset.name} needs at least 2 qubits, got {n_qubits}")
    b = _Builder()
    for _ in range(preset.layers):
        _layer(b, preset.name, n_qubits)
    return CircuitTemplate(n_qubits, b.gates, n_weight_slots=b.n_weights)


def build_ansatz(preset, n_qubits: int, layers=None) -> CircuitTemplate:
    """Build the weight-only template for ``preset`` stacked ``layers`` times.

    ``preset`` is an :class:`AnsatzPreset` or a preset name (then ``layers``
    defaults to 1).
    """
    return _build_ansatz(_as_preset(preset, layers), int(n_qubits))


_PER_LAYER = {
    "sim1": lambda n: 2 * n,
    "sim2": lambda n: 2 * n,
    "sim9": lambda n: n,
    "sim14": lambda n: 4 * n,
    "sim15": lambda n: 2 * n,
    "qaoa": lambda n: 2 * n - 1,
}


def weight_count(preset, n_qubits: int, layers=None) -> int:
    preset = _as_preset(preset, layers)
    if n_qubits < 1 or (preset.name != "sim1" and n_qubits < 2):
        raise ConfigurationError(f"preset {preset.name} needs at least 2 qubits, got {n_qubits}")
    return preset.layers * _PER_LAYER[preset.name](n_qubits)


@lru_cache(maxsize=128)
def filter_circuit(preset, n_qubits, layers=None) -> CircuitTemplate:
    """Encoder followed by the ansatz on the same register."""
    return build_encoder(n_qubits).then(build_ansatz(preset, n_qubits, layers))
