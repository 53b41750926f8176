"""Architecture builders, variants and the dense-matrix oracle."""

import numpy as np
import pytest

from qag.circuits import (
    ARCHITECTURES,
    build_all,
    build_architecture,
    center_qubit,
    circuit_summary,
    spec_from_dict,
    spec_to_dict,
    variant_transform,
)
from qag.errors import CircuitError
from qag.models import GateKind
from qag.simulator import run_circuit

EXPECTED_PARAMS = {
    "Linear": 16,
    "TTN": 29,
    "TTN_Rz": 58,
    "MERA": 45,
    "MERA_Rz": 90,
    "MERA-up": 23,
    "MERA-up_d2": 46,
    "MERA-up_Rz": 46,
    "MERA-up_d2_Rz": 92,
}


@pytest.mark.parametrize("name", ARCHITECTURES)
def test_parameter_counts(name):
    assert build_architecture(name).n_params == EXPECTED_PARAMS[name]


@pytest.mark.parametrize("name", ARCHITECTURES)
def test_dense_oracle_four_qubits(name, dense):
    circuit = build_architecture(name, 4)
    params = np.random.default_rng(len(name)).uniform(-np.pi, np.pi, circuit.n_params)
    state = run_circuit(circuit, params)
    np.testing.assert_allclose(state.amplitudes, dense(circuit.gates, 4, params), atol=1e-10)


def test_slots_contiguous_and_in_order():
    for circuit in build_all().values():
        slots = [g.slot for g in circuit.gates if g.slot is not None]
        assert slots == list(range(circuit.n_params))


def test_gate_alphabet():
    for name, circuit in build_all().items():
        kinds = {g.kind for g in circuit.gates}
        assert GateKind.H not in kinds
        assert (GateKind.RZ in kinds) == name.endswith("_Rz")
        for g in circuit.gates:
            if g.kind is GateKind.RY:
                assert g.slot is not None and g.angle is None


def test_rz_follows_every_ry():
    circuit = build_architecture("TTN_Rz")
    gates = circuit.gates
    for i, g in enumerate(gates):
        if g.kind is GateKind.RY:
            assert gates[i + 1].kind is GateKind.RZ
            assert gates[i + 1].target == g.target


def test_d2_repeats_the_base_layout():
    base = build_architecture("MERA-up")
    doubled = build_architecture("MERA-up_d2")
    layout = [(g.kind, g.target, g.control) for g in base.gates]
    assert [(g.kind, g.target, g.control) for g in doubled.gates] == layout * 2


def test_mera_up_starts_from_center():
    circuit = build_architecture("MERA-up")
    first, second = circuit.gates[:2]
    assert first.kind is GateKind.RY and first.target == center_qubit(8) == 3
    assert second.kind is GateKind.CX and (second.control, second.target) == (3, 7)


def test_mera_up_fan_out_targets_are_rotated_first():
    gates = build_architecture("MERA-up").gates
    fan_out = [i for i, g in enumerate(gates) if g.kind is GateKind.CX][:7]
    assert sorted([gates[i].target for i in fan_out] + [3]) == list(range(8))
    for i in fan_out[1:]:
        rotated = {g.target for g in gates[:i] if g.kind is GateKind.RY}
        assert gates[i].target in rotated


def test_variant_errors():
    base = build_architecture("Linear")
    with pytest.raises(CircuitError):
        variant_transform(base, "d3")
    rz = variant_transform(base, "Rz")
    with pytest.raises(CircuitError):
        variant_transform(rz, "Rz")
    assert rz.n_params == 2 * base.n_params


def test_unknown_architecture_and_size():
    with pytest.raises(CircuitError):
        build_architecture("Star")
    with pytest.raises(CircuitError):
        build_architecture("TTN", 6)


def test_summary():
    summary = circuit_summary(build_architecture("Linear"))
    assert summary["n_params"] == 16
    assert summary["cx_count"] == 7
    assert summary["cx_edges"] == [(q, q + 1) for q in range(7)]
    # Ry layer, 7 sequential CX, Ry layer
    assert summary["depth"] == 9


def test_dict_form():
    circuit = build_architecture("MERA_Rz")
    payload = spec_to_dict(circuit)
    assert payload["n_params"] == 90
    assert spec_from_dict(payload) == circuit
