"""Exact dense statevector simulation of small qubit registers.

Conventions
-----------
* Qubit 0 is the least-significant bit of the amplitude index, so for two
  qubits the basis state with only qubit 0 set is index 1.
* Rotations are ``R_a(phi) = exp(-i * phi * A / 2)`` for ``A`` in X, Y, Z.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels

MAX_QUBITS = 16
GATE_KINDS = ("H", "RX", "RY", "RZ", "CNOT", "CZ")
ROTATIONS = ("RX", "RY", "RZ")
TWO_QUBIT = ("CNOT", "CZ")

IMAG_TOL = 1e-10


class SimulationCounter:
    """Thread-safe tally of full circuit simulations."""

    def __init__(self):
        self._lock = threading.Lock()
        self.count = 0

    def add(self, n):
        with self._lock:
            self.count += int(n)

    def reset(self):
        with self._lock:
            self.count = 0


#: Incremented once per simulated circuit (shifted variants included).
counter = SimulationCounter()


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if (self.control is not None) != (self.kind in TWO_QUBIT):
            raise ValueError(f"{self.kind} control must be given iff the gate is two-qubit")
        if (self.angle is not None) != (self.kind in ROTATIONS):
            raise ValueError(f"{self.kind} angle must be given iff the gate is a rotation")
        if self.control is not None and self.control == self.target:
            raise ValueError("control and target must differ")

    @property
    def qubits(self):
        return (self.target,) if self.control is None else (self.control, self.target)


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.amplitudes) != 1 << self.n_qubits:
            raise ValueError("amplitude count must be 2**n_qubits")

    @property
    def norm_sq(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def _check_size(n_qubits):
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")


def zero_state(n_qubits: int) -> Statevector:
    _check_size(n_qubits)
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


def _check_qubits(n_qubits, qubits):
    for q in qubits:
        if not 0 <= q < n_qubits:
            raise IndexError(f"qubit {q} out of range for {n_qubits}-qubit register")


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    """Return ``U_gate |state>`` as a new statevector."""
    _check_qubits(state.n_qubits, gate.qubits)
    psi = state.amplitudes.astype(np.complex128, copy=True)
    _kernels.apply_op(
        psi,
        _kernels.OPCODES[gate.kind],
        gate.target,
        -1 if gate.control is None else gate.control,
        0.0 if gate.angle is None else float(gate.angle),
    )
    return Statevector(state.n_qubits, psi)


def apply_gates(state: Statevector, gates) -> Statevector:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def run_circuit(n_qubits: int, gates) -> Statevector:
    """Simulate ``gates`` on ``|0...0>``; counts as one circuit simulation."""
    counter.add(1)
    return apply_gates(zero_state(n_qubits), gates)


class Observable:
    """Real-weighted sum of Pauli strings.

    ``terms`` is a sequence of ``(coefficient, {qubit: "X" | "Y" | "Z"})``.
    An empty Pauli map is the identity.
    """

    def __init__(self, terms):
        clean = []
        for coeff, paulis in terms:
            coeff = float(coeff)
            if not np.isfinite(coeff):
                raise ValueError("observable coefficients must be finite")
            paulis = {int(q): str(p).upper() for q, p in dict(paulis).items()}
            for p in paulis.values():
                if p not in "XYZ" or len(p) != 1:
                    raise ValueError(f"unknown Pauli {p!r}")
            clean.append((coeff, tuple(sorted(paulis.items()))))
        self.terms = tuple(clean)

    @classmethod
    def z(cls, qubit=0, coeff=1.0):
        return cls([(coeff, {qubit: "Z"})])

    @classmethod
    def identity(cls, coeff=1.0):
        return cls([(coeff, {})])

    @classmethod
    def parse(cls, text):
        """Parse ``"0.5*Z0 + X1Y2 - 1"`` style strings."""
        terms = []
        for chunk in re.sub(r"(?<![eE*])-", "+-", text).split("+"):
            chunk = chunk.strip().replace(" ", "")
            if not chunk:
                continue
            coeff, _, body = chunk.rpartition("*") if "*" in chunk else ("", "", chunk)
            if not coeff:
                if body.startswith("-"):
                    coeff, body = "-1", body[1:]
                else:
                    coeff = "1"
                if body and body[0] not in "XYZ":
                    coeff, body = str(float(coeff) * float(body)), ""
            paulis = {}
            i = 0
            while i < len(body):
                p = body[i].upper()
                j = i + 1
                while j < len(body) and body[j].isdigit():
                    j += 1
                if p not in "XYZ" or j == i + 1:
                    raise ValueError(f"cannot parse observable term {chunk!r}")
                paulis[int(body[i + 1:j])] = p
                i = j
            terms.append((float(coeff), paulis))
        return cls(terms)

    def __add__(self, other):
        return Observable(
            [(c, dict(p)) for c, p in self.terms] + [(c, dict(p)) for c, p in other.terms]
        )

    def __eq__(self, other):
        return isinstance(other, Observable) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __repr__(self):
        parts = []
        for c, paulis in self.terms:
            body = "".join(f"{p}{q}" for q, p in paulis) or "I"
            parts.append(f"{c:g}*{body}")
        return "Observable(" + " + ".join(parts) + ")"

    def __str__(self):
        return " + ".join(
            f"{c!r}*" + ("".join(f"{p}{q}" for q, p in paulis) or "1") for c, paulis in self.terms
        )

    @property
    def max_qubit(self):
        return max((q for _, paulis in self.terms for q, _ in paulis), default=-1)

    @property
    def weight(self):
        return sum(abs(c) for c, _ in self.terms)


@lru_cache(maxsize=256)
def _term_tables(paulis, n_qubits):
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    xmask = zmask = 0
    n_y = 0
    for q, p in paulis:
        if p in "XY":
            xmask |= 1 << q
        if p in "YZ":
            zmask |= 1 << q
        if p == "Y":
            n_y += 1
    parity = np.zeros_like(idx)
    masked = idx & zmask
    while masked.any():
        parity ^= masked & 1
        masked >>= 1
    signs = 1.0 - 2.0 * parity
    signs.setflags(write=False)
    return xmask, signs, 1j ** n_y


def compile_observables(observables, n_qubits):
    """Pack observables into the flat arrays consumed by the kernels."""
    xmasks, signs, phases, coeffs, owners = [], [], [], [], []
    for k, obs in enumerate(observables):
        _check_qubits(n_qubits, [q for _, paulis in obs.terms for q, _ in paulis])
        for coeff, paulis in obs.terms:
            x, s, ph = _term_tables(paulis, n_qubits)
            xmasks.append(x)
            signs.append(s)
            phases.append(ph)
            coeffs.append(coeff)
            owners.append(k)
    return (
        np.array(xmasks, dtype=np.int64),
        np.array(signs, dtype=np.float64).reshape(len(xmasks), 1 << n_qubits),
        np.array(phases, dtype=np.complex128),
        np.array(coeffs, dtype=np.float64),
        np.array(owners, dtype=np.int64),
    )


def expectation(state: Statevector, obs: Observable) -> float:
    """``sum_k c_k <state|P_k|state>``; asserts the imaginary residue is negligible."""
    if not obs.terms:
        return 0.0
    xm, signs, phases, coeffs, _ = compile_observables([obs], state.n_qubits)
    vals = _kernels.pauli_terms(state.amplitudes.astype(np.complex128), xm, signs, phases)
    total = complex(np.dot(coeffs, vals))
    if abs(total.imag) > IMAG_TOL:
        raise ArithmeticError(f"expectation has imaginary part {total.imag:.3e}")
    return total.real
