"""Numba kernels for in-place statevector updates.

Amplitude index bit ``q`` holds qubit ``q`` (qubit 0 is the least-significant
bit).  Every kernel mutates its ``psi`` argument and releases the GIL so
callers can fan patches out over threads.
"""

import numpy as np
from numba import njit

OP_H, OP_RX, OP_RY, OP_RZ, OP_CNOT, OP_CZ = 0, 1, 2, 3, 4, 5
OPCODES = {"H": OP_H, "RX": OP_RX, "RY": OP_RY, "RZ": OP_RZ, "CNOT": OP_CNOT, "CZ": OP_CZ}

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


@njit(cache=True, nogil=True)
def apply_1q(psi, q, m00, m01, m10, m11):
    bit = 1 << q
    low = bit - 1
    for k in range(psi.shape[0] >> 1):
        i = ((k >> q) << (q + 1)) | (k & low)
        j = i | bit
        a = psi[i]
        b = psi[j]
        psi[i] = m00 * a + m01 * b
        psi[j] = m10 * a + m11 * b


@njit(cache=True, nogil=True)
def _insert_zero_bits(k, lo, hi):
    k = ((k >> lo) << (lo + 1)) | (k & ((1 << lo) - 1))
    return ((k >> hi) << (hi + 1)) | (k & ((1 << hi) - 1))


@njit(cache=True, nogil=True)
def apply_cnot(psi, control, target):
    lo = min(control, target)
    hi = max(control, target)
    cbit = 1 << control
    tbit = 1 << target
    for k in range(psi.shape[0] >> 2):
        i = _insert_zero_bits(k, lo, hi) | cbit
        j = i | tbit
        a = psi[i]
        psi[i] = psi[j]
        psi[j] = a


@njit(cache=True, nogil=True)
def apply_cz(psi, control, target):
    lo = min(control, target)
    hi = max(control, target)
    both = (1 << control) | (1 << target)
    for k in range(psi.shape[0] >> 2):
        i = _insert_zero_bits(k, lo, hi) | both
        psi[i] = -psi[i]


@njit(cache=True, nogil=True)
def apply_op(psi, kind, target, control, angle):
    if kind == OP_CNOT:
        apply_cnot(psi, control, target)
    elif kind == OP_CZ:
        apply_cz(psi, control, target)
    elif kind == OP_H:
        h = _INV_SQRT2 + 0j
        apply_1q(psi, target, h, h, h, -h)
    else:
        c = np.cos(0.5 * angle)
        s = np.sin(0.5 * angle)
        if kind == OP_RX:
            apply_1q(psi, target, c + 0j, -1j * s, -1j * s, c + 0j)
        elif kind == OP_RY:
            apply_1q(psi, target, c + 0j, -s + 0j, s + 0j, c + 0j)
        else:
            apply_1q(psi, target, np.exp(-0.5j * angle), 0j, 0j, np.exp(0.5j * angle))


@njit(cache=True, nogil=True)
def run_ops(psi, kinds, targets, controls, angles, start, stop):
    for g in range(start, stop):
        apply_op(psi, kinds[g], targets[g], controls[g], angles[g])


@njit(cache=True, nogil=True)
def pauli_terms(psi, xmasks, signs, phases):
    """Return ``<psi|P_t|psi>`` for every compiled Pauli term ``t`` (complex)."""
    out = np.zeros(xmasks.shape[0], dtype=np.complex128)
    dim = psi.shape[0]
    for t in range(xmasks.shape[0]):
        x = xmasks[t]
        acc = 0j
        if x == 0:
            for i in range(dim):
                a = psi[i]
                acc += (a.real * a.real + a.imag * a.imag) * signs[t, i]
        else:
            for i in range(dim):
                acc += np.conj(psi[i ^ x]) * psi[i] * signs[t, i]
        out[t] = acc * phases[t]
    return out


@njit(cache=True, nogil=True)
def _observe(psi, xmasks, signs, phases, coeffs, owners, n_obs, out):
    vals = pauli_terms(psi, xmasks, signs, phases)
    for k in range(n_obs):
        out[k] = 0.0
    for t in range(vals.shape[0]):
        out[owners[t]] += coeffs[t] * vals[t].real


@njit(cache=True, nogil=True)
def apply_op_real(psi, kind, target, control, angle):
    """``apply_op`` restricted to the real gates H, RY, CNOT, CZ."""
    if kind == OP_CNOT:
        apply_cnot(psi, control, target)
    elif kind == OP_CZ:
        apply_cz(psi, control, target)
    elif kind == OP_H:
        apply_1q(psi, target, _INV_SQRT2, _INV_SQRT2, _INV_SQRT2, -_INV_SQRT2)
    else:
        c = np.cos(0.5 * angle)
        s = np.sin(0.5 * angle)
        apply_1q(psi, target, c, -s, s, c)


REAL_OPS = (OP_H, OP_RY, OP_CNOT, OP_CZ)


def _make_shift_rule_batch(apply, dtype):
    @njit(cache=True, nogil=True)
    def batch(n_qubits, kinds, targets, controls, angles, branches,
              xmasks, signs, phases, coeffs, owners, n_obs, values, plus, minus):
        n_gates = kinds.shape[0]
        n_branch = branches.shape[0]
        dim = 1 << n_qubits
        half_pi = 0.5 * np.pi
        psi = np.empty(dim, dtype=dtype)
        tmp = np.empty(dim, dtype=dtype)
        for p in range(angles.shape[0]):
            psi[:] = 0.0
            psi[0] = 1.0
            row = angles[p]
            b = 0
            for g in range(n_gates):
                if b < n_branch and branches[b] == g:
                    for sgn in range(2):
                        tmp[:] = psi
                        shift = half_pi if sgn == 0 else -half_pi
                        apply(tmp, kinds[g], targets[g], controls[g], row[g] + shift)
                        for h in range(g + 1, n_gates):
                            apply(tmp, kinds[h], targets[h], controls[h], row[h])
                        if sgn == 0:
                            _observe(tmp, xmasks, signs, phases, coeffs, owners, n_obs, plus[p, b])
                        else:
                            _observe(tmp, xmasks, signs, phases, coeffs, owners, n_obs, minus[p, b])
                    b += 1
                apply(psi, kinds[g], targets[g], controls[g], row[g])
            _observe(psi, xmasks, signs, phases, coeffs, owners, n_obs, values[p])

    return batch


_batch_complex = _make_shift_rule_batch(apply_op, np.complex128)
_batch_real = _make_shift_rule_batch(apply_op_real, np.float64)


def shift_rule_batch(n_qubits, kinds, targets, controls, angles, branches,
                     xmasks, signs, phases, coeffs, owners, n_obs, values, plus, minus):
    """Evaluate a circuit and its +/- pi/2 shifted variants for many patches.

    ``angles`` is (patches, gates).  ``branches`` lists gate positions whose
    angle is shifted, in increasing order.  Each shifted circuit is simulated
    exactly; the unshifted prefix it shares with the base circuit is computed
    once.  Results go to ``values`` (patches, obs) and ``plus``/``minus``
    (patches, branches, obs).  Circuits built only from real gates run in
    real arithmetic.
    """
    real = all(int(k) in REAL_OPS for k in kinds)
    fn = _batch_real if real else _batch_complex
    fn(n_qubits, kinds, targets, controls, angles, branches,
       xmasks, signs, phases, coeffs, owners, n_obs, values, plus, minus)
