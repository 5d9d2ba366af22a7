"""Parameter-shift derivatives of circuit expectation values.

Every rotation ``R(a) = exp(-i a P / 2)`` with a Pauli generator gives

    d<H>/da = (<H>(a + pi/2) - <H>(a - pi/2)) / 2

exactly.  A slot read by several gates with linear scales ``c`` is
differentiated occurrence by occurrence and summed with weights ``c``.
Input slots (the encoder angles) are handled the same way as weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .circuits import INPUT, WEIGHT, CircuitTemplate, ParamSlot, bind, bound_angles
from .statevector import ROTATIONS, Gate, Observable, compile_observables, counter, expectation, run_circuit

SHIFT = np.pi / 2


class SlotError(ValueError):
    pass


class UnsupportedGateError(TypeError):
    pass


@dataclass
class PatchGradient:
    d_inputs: np.ndarray
    d_weights: np.ndarray
    value: float


def expectation_value(template: CircuitTemplate, inputs, weights, obs: Observable) -> float:
    """Simulate the bound template from ``|0...0>`` and measure ``obs``."""
    return expectation(run_circuit(template.n_qubits, bind(template, inputs, weights)), obs)


def _shifted_gates(template, inputs, weights, positions, shift):
    gates = bind(template, inputs, weights)
    for pos in positions:
        g = gates[pos]
        gates[pos] = Gate(g.kind, g.target, g.control, g.angle + shift)
    return gates


def shifted_expectation(template, inputs, weights, obs, slot: ParamSlot, shift, occurrence=None):
    """Expectation with gate angles reading ``slot`` displaced by ``shift``.

    With ``occurrence=None`` every gate that reads the slot is displaced at
    once; otherwise only the ``occurrence``-th reader (in circuit order).
    """
    try:
        occ = template.occurrences(slot)
    except ValueError as exc:
        raise SlotError(str(exc)) from None
    if not np.isfinite(shift):
        raise ValueError("shift must be finite")
    positions = [pos for pos, _ in occ]
    if occurrence is not None:
        positions = [positions[occurrence]]
    gates = _shifted_gates(template, inputs, weights, positions, shift)
    return expectation(run_circuit(template.n_qubits, gates), obs)


def slot_derivative(template, inputs, weights, obs, slot: ParamSlot) -> float:
    """Exact ``d<obs>/d(slot)`` by the two-term shift rule, summed over readers."""
    try:
        occ = template.occurrences(slot)
    except ValueError as exc:
        raise SlotError(str(exc)) from None
    total = 0.0
    for k, (pos, scale) in enumerate(occ):
        if template.gates[pos].kind not in ROTATIONS:
            raise UnsupportedGateError(f"slot {slot} feeds a {template.gates[pos].kind} gate")
        plus = shifted_expectation(template, inputs, weights, obs, slot, SHIFT, occurrence=k)
        minus = shifted_expectation(template, inputs, weights, obs, slot, -SHIFT, occurrence=k)
        total += scale * (plus - minus) / 2
    return total


def _occurrence_matrix(template, origin, positions):
    """(n_slots, n_positions) matrix of scales mapping gate derivatives to slots."""
    arr = template.compiled()
    col = arr["in_slot"] if origin == INPUT else arr["w_slot"]
    mat = np.zeros((template.n_slots(origin), len(positions)))
    for j, pos in enumerate(positions):
        mat[col[pos], j] = arr["scale"][pos]
    return mat


def _run_batch(template, angles, observables, branches):
    arr = template.compiled()
    xm, signs, phases, coeffs, owners = compile_observables(observables, template.n_qubits)
    n_patch = angles.shape[0]
    n_obs = len(observables)
    values = np.zeros((n_patch, n_obs))
    plus = np.zeros((n_patch, len(branches), n_obs))
    minus = np.zeros_like(plus)
    _kernels.shift_rule_batch(
        template.n_qubits, arr["kinds"], arr["targets"], arr["controls"],
        np.ascontiguousarray(angles), np.asarray(branches, dtype=np.int64),
        xm, signs, phases, coeffs, owners, n_obs, values, plus, minus,
    )
    counter.add(n_patch * (2 * len(branches) + 1))
    return values, plus, minus


def batch_values(template, inputs, weights, observables):
    """Unshifted expectations for many input rows: (rows, observables)."""
    angles = np.atleast_2d(bound_angles(template, inputs, weights))
    values, _, _ = _run_batch(template, angles, observables, [])
    return values


def batch_gradients(template, inputs, weights, observables, input_grads=True, weight_grads=True):
    """Values and shift-rule derivatives for many input rows.

    Returns ``(values, d_inputs, d_weights)`` shaped (rows, obs),
    (rows, obs, n_input_slots) and (rows, obs, n_weight_slots).  A skipped
    derivative block is returned as ``None`` and costs no simulations.
    """
    angles = np.atleast_2d(bound_angles(template, inputs, weights))
    in_pos = template.parameterized_positions(INPUT) if input_grads else []
    w_pos = template.parameterized_positions(WEIGHT) if weight_grads else []
    branches = sorted(in_pos + w_pos)
    values, plus, minus = _run_batch(template, angles, observables, branches)
    per_gate = (plus - minus) / 2
    where = {pos: j for j, pos in enumerate(branches)}
    out = []
    for origin, positions in ((INPUT, in_pos), (WEIGHT, w_pos)):
        if not positions:
            want = input_grads if origin == INPUT else weight_grads
            out.append(np.zeros(values.shape + (0,)) if want else None)
            continue
        mat = _occurrence_matrix(template, origin, positions)
        block = per_gate[:, [where[p] for p in positions], :]
        out.append(np.einsum("sg,pgk->pks", mat, block))
    return values, out[0], out[1]


def patch_gradient(encoder, ansatz, inputs, weights, obs: Observable) -> PatchGradient:
    """Value and all input/weight derivatives for one patch.

    Costs ``2 * (shifted gate occurrences) + 1`` circuit simulations, which
    is ``2 * (n_inputs + n_weights) + 1`` when no slot is shared.
    """
    circuit = encoder.then(ansatz)
    values, d_in, d_w = batch_gradients(circuit, np.asarray(inputs, float)[None], weights, [obs])
    return PatchGradient(d_inputs=d_in[0, 0], d_weights=d_w[0, 0], value=float(values[0, 0]))
