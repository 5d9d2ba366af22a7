import numpy as np
import pytest

from oracles import dense_expectation
from qfenet.circuits import (
    INPUT,
    PRESETS,
    WEIGHT,
    AnsatzPreset,
    BindingError,
    CircuitTemplate,
    ConfigurationError,
    ParamRef,
    ParamSlot,
    TemplateGate,
    bind,
    build_ansatz,
    build_encoder,
    filter_circuit,
    weight_count,
)
from qfenet.statevector import ROTATIONS, Gate, Observable, apply_gates, zero_state


def test_encoder_structure():
    enc = build_encoder(9)
    assert len(enc.gates) == 9
    assert enc.n_input_slots == 9 and enc.n_weight_slots == 0
    for i, g in enumerate(enc.gates):
        assert g.kind == "RY" and g.target == i
        assert g.angle == ParamRef(ParamSlot(i, INPUT))


def test_encoder_zero_input_is_identity():
    gates = bind(build_encoder(1), [0.0], [])
    out = apply_gates(zero_state(1), gates)
    np.testing.assert_allclose(out.amplitudes, [1, 0], atol=1e-15)


def test_encoder_flips_qubit_zero():
    out = apply_gates(zero_state(2), bind(build_encoder(2), [np.pi, 0.0], []))
    # qubit 0 set -> index 1
    np.testing.assert_allclose(out.amplitudes, [0, 1, 0, 0], atol=1e-15)


def test_bind_encoder_zero_angles():
    assert bind(build_encoder(2), [0, 0], []) == [Gate("RY", 0, angle=0.0), Gate("RY", 1, angle=0.0)]


@pytest.mark.parametrize("name,n,layers,expected", [
    ("sim1", 9, 1, 18),
    ("sim15", 4, 1, 8),
    ("sim1", 2, 2, 8),
    ("sim2", 3, 1, 6),
    ("sim9", 9, 3, 27),
    ("sim14", 4, 2, 32),
    ("qaoa", 9, 1, 17),
])
def test_weight_counts(name, n, layers, expected):
    assert weight_count(name, n, layers) == expected
    assert build_ansatz(AnsatzPreset(name, layers), n).n_weight_slots == expected


@pytest.mark.parametrize("name", PRESETS)
def test_zero_layers_rejected(name):
    with pytest.raises(ConfigurationError):
        AnsatzPreset(name, 0)


def test_unknown_preset_and_too_few_qubits():
    with pytest.raises(ConfigurationError):
        AnsatzPreset("sim7")
    for name in ("sim2", "sim9", "sim14", "sim15", "qaoa"):
        with pytest.raises(ConfigurationError):
            build_ansatz(name, 1)
        with pytest.raises(ConfigurationError):
            weight_count(name, 1)
    assert build_ansatz("sim1", 1).n_weight_slots == 2


def test_bind_length_mismatch():
    t = build_ansatz("sim15", 3)
    with pytest.raises(BindingError):
        bind(t, [], np.zeros(t.n_weight_slots - 1))
    with pytest.raises(BindingError):
        bind(build_encoder(3), [0.0, 0.0], [])


def test_sim1_two_layers_declared_order():
    t = build_ansatz(AnsatzPreset("sim1", 2), 2)
    sentinels = 100.0 + np.arange(8)
    gates = bind(t, [], sentinels)
    assert [(g.kind, g.target, g.angle) for g in gates] == [
        ("RX", 0, 100.0), ("RX", 1, 101.0), ("RZ", 0, 102.0), ("RZ", 1, 103.0),
        ("RX", 0, 104.0), ("RX", 1, 105.0), ("RZ", 0, 106.0), ("RZ", 1, 107.0),
    ]


@pytest.mark.parametrize("name", PRESETS)
@pytest.mark.parametrize("n", [2, 3, 9])
@pytest.mark.parametrize("layers", [1, 3])
def test_slot_audit(name, n, layers):
    t = build_ansatz(AnsatzPreset(name, layers), n)
    sentinels = 1000.0 * (1 + np.arange(t.n_weight_slots))
    gates = bind(t, [], sentinels)
    seen = {}
    for tg, g in zip(t.gates, gates):
        if tg.is_parameterized:
            assert tg.kind in ROTATIONS
            k = tg.angle.slot.index
            assert g.angle == pytest.approx(tg.angle.scale * sentinels[k])
            seen.setdefault(k, []).append(tg.angle.scale)
        else:
            assert g.angle is None or abs(g.angle) < 1000.0
    assert sorted(seen) == list(range(t.n_weight_slots))
    if name == "sim14":
        assert sum(len(v) == 2 for v in seen.values()) == 2 * n * layers
    else:
        assert all(v == [1.0] for v in seen.values())


@pytest.mark.parametrize("name", PRESETS)
def test_templates_deterministic(name):
    assert build_ansatz(AnsatzPreset(name, 2), 4) == CircuitTemplate(
        4, build_ansatz(AnsatzPreset(name, 2), 4).gates, 0, weight_count(name, 4, 2)
    )
    assert filter_circuit(name, 4, 2) == build_encoder(4).then(build_ansatz(name, 4, 2))


def test_sim15_gate_list():
    t = build_ansatz("sim15", 3)
    described = [(g.kind, g.control, g.target) for g in t.gates]
    assert described == [
        ("RY", None, 0), ("RY", None, 1), ("RY", None, 2),
        ("CNOT", 2, 0), ("CNOT", 1, 2), ("CNOT", 0, 1),
        ("RY", None, 0), ("RY", None, 1), ("RY", None, 2),
        ("CNOT", 0, 2), ("CNOT", 1, 0), ("CNOT", 2, 1),
    ]


def test_qaoa_gate_list():
    t = build_ansatz("qaoa", 3)
    described = [(g.kind, g.control, g.target, g.is_parameterized) for g in t.gates]
    assert described == [
        ("CNOT", 0, 1, False), ("RZ", None, 1, True), ("CNOT", 0, 1, False),
        ("CNOT", 1, 2, False), ("RZ", None, 2, True), ("CNOT", 1, 2, False),
        ("RX", None, 0, True), ("RX", None, 1, True), ("RX", None, 2, True),
    ]


def _crx_matrix(phi):
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    rx = np.array([[c, -1j * s], [-1j * s, c]])
    # control qubit 0 (LSB), target qubit 1
    m = np.eye(4, dtype=complex)
    for t_in in range(2):
        for t_out in range(2):
            m[1 + 2 * t_out, 1 + 2 * t_in] = rx[t_out, t_in]
    return m


def test_crx_decomposition_is_exact(rng):
    from oracles import circuit_unitary
    from qfenet.circuits import _Builder

    for phi in rng.uniform(-2 * np.pi, 2 * np.pi, 10):
        b = _Builder()
        b.crx(0, 1)
        t = CircuitTemplate(2, b.gates, 0, b.n_weights)
        u = circuit_unitary(bind(t, [], [phi]), 2)
        np.testing.assert_allclose(u, _crx_matrix(phi), atol=1e-12)


def test_template_validation():
    slot = ParamSlot(0, WEIGHT)
    with pytest.raises(ConfigurationError):
        CircuitTemplate(1, [TemplateGate("RX", 0, None, ParamRef(slot))], 0, 0)
    with pytest.raises(ConfigurationError):
        CircuitTemplate(2, [TemplateGate("RY", 0, None, ParamRef(ParamSlot(0, INPUT)))], 2, 0)
    with pytest.raises(ConfigurationError):
        CircuitTemplate(1, [TemplateGate("RX", 3, None, 0.1)], 0, 0)


def test_shared_slot_binding():
    slot = ParamSlot(0, WEIGHT)
    t = CircuitTemplate(1, [TemplateGate("RX", 0, None, ParamRef(slot, 0.5)),
                            TemplateGate("RZ", 0, None, ParamRef(slot, -2.0))], 0, 1)
    assert [g.angle for g in bind(t, [], [3.0])] == [1.5, -6.0]
    assert t.occurrences(slot) == [(0, 0.5), (1, -2.0)]


@pytest.mark.parametrize("name", PRESETS)
def test_filter_circuit_expectation_matches_dense(name, rng):
    from qfenet.gradients import expectation_value

    c = filter_circuit(name, 3, 2)
    obs = Observable.parse("Z0 + 0.5*X1X2")
    for _ in range(3):
        x = rng.uniform(0, np.pi, 3)
        w = rng.uniform(-np.pi, np.pi, c.n_weight_slots)
        ref = dense_expectation(bind(c, x, w), 3, obs)
        assert expectation_value(c, x, w, obs) == pytest.approx(ref, abs=1e-12)
