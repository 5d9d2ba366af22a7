"""Hybrid quantum-classical CNNs with trainable circuit filters, simulated exactly."""

from .circuits import (
    PRESETS,
    AnsatzPreset,
    bind,
    build_ansatz,
    build_encoder,
    filter_circuit,
    weight_count,
)
from .config import RunConfig, load_config
from .gradients import (
    PatchGradient,
    batch_gradients,
    batch_values,
    expectation_value,
    patch_gradient,
    slot_derivative,
)
from .layers import QfeLayer, maxpool_forward, qfe_backward, qfe_forward
from .statevector import (
    Gate,
    Observable,
    Statevector,
    apply_gate,
    apply_gates,
    counter,
    expectation,
    zero_state,
)

__version__ = "0.1.0"
