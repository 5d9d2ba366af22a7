"""
Parameter-shift gradients
=========================

Every trainable angle in a filter circuit enters through a Pauli rotation,
so its derivative is half the difference of two evaluations shifted by
+-pi/2.  This script compares the rule with central finite differences for
each circuit family, then shows how much the rule costs.
"""
import numpy as np

from qfenet import PRESETS, Observable, batch_gradients, counter, expectation_value, filter_circuit

rng = np.random.default_rng(0)
obs = Observable.z(0)


def finite_difference(f, x, h=1e-5):
    out = np.empty_like(x)
    for i in range(len(x)):
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        out[i] = (f(up) - f(down)) / (2 * h)
    return out


print(f"{'ansatz':8s}{'slots':>7s}{'max |shift - fd|':>20s}{'sims/patch':>12s}")
for name in PRESETS:
    circuit = filter_circuit(name, 4, 2)
    x = rng.uniform(0, np.pi, 4)
    w = rng.uniform(-np.pi, np.pi, circuit.n_weight_slots)

    before = counter.count
    _, d_in, d_w = batch_gradients(circuit, x[None], w, [obs])
    sims = counter.count - before

    fd_w = finite_difference(lambda v: expectation_value(circuit, x, v, obs), w)
    fd_x = finite_difference(lambda v: expectation_value(circuit, v, w, obs), x)
    err = max(np.abs(d_w[0, 0] - fd_w).max(), np.abs(d_in[0, 0] - fd_x).max())
    print(f"{name:8s}{circuit.n_input_slots + circuit.n_weight_slots:7d}{err:20.2e}{sims:12d}")

# sim14 uses controlled-RX gates; each one is decomposed into two RZ
# rotations that share a weight, so it needs more than 2*slots+1 circuits.
