"""
Statevector basics
==================

A few small circuits, checked by hand.  Qubit 0 is the least significant
bit of the amplitude index, so on two qubits the basis order is
|q1 q0> = 00, 01, 10, 11.
"""
import numpy as np

from qfenet import Gate, Observable, apply_gate, apply_gates, expectation, zero_state

np.set_printoptions(precision=4, suppress=True)

# One Hadamard gives the uniform superposition.
plus = apply_gate(zero_state(1), Gate("H", 0))
print("H|0>           ", plus.amplitudes)

# RY(pi/3) tilts |0> so that <Z> = cos(pi/3) = 0.5.
tilted = apply_gate(zero_state(1), Gate("RY", 0, angle=np.pi / 3))
print("<Z> after RY   ", expectation(tilted, Observable.z(0)))

# A Bell pair: H on qubit 0, then CNOT with qubit 0 as control.
bell = apply_gates(zero_state(2), [Gate("H", 0), Gate("CNOT", target=1, control=0)])
print("Bell amplitudes", bell.amplitudes)
zz = Observable.parse("Z0Z1")
xx = Observable.parse("X0X1")
print("<Z0Z1>, <X0X1> ", expectation(bell, zz), expectation(bell, xx))

# Observables are weighted Pauli strings and may mix terms.
h = Observable.parse("0.5*Z0 - 0.25*X0X1 + 1")
print("<0.5 Z0 - 0.25 X0X1 + 1> on the Bell state:", expectation(bell, h))
