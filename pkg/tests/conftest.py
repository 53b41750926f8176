"""Shared fixtures: small datasets and a dense-matrix reference simulator."""

from functools import reduce

import numpy as np
import pytest

from qag.data import ShowerDataset, SynthParams, split, synth_generate
from qag.models import GateKind

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)


def _single(kind: GateKind, angle):
    if kind is GateKind.H:
        return _H
    half = angle / 2
    if kind is GateKind.RY:
        return np.array([[np.cos(half), -np.sin(half)], [np.sin(half), np.cos(half)]], dtype=np.complex128)
    return np.diag([np.exp(-1j * half), np.exp(1j * half)])


def dense_unitary(gate, n_qubits: int, params=()) -> np.ndarray:
    """Full 2**n x 2**n matrix of one gate, built with Kronecker products."""
    if gate.kind is GateKind.CX:
        dim = 2**n_qubits
        matrix = np.zeros((dim, dim), dtype=np.complex128)
        for i in range(dim):
            j = i ^ (1 << gate.target) if (i >> gate.control) & 1 else i
            matrix[j, i] = 1.0
        return matrix
    angle = params[gate.slot] if gate.slot is not None else gate.angle
    factors = [
        _single(gate.kind, angle) if q == gate.target else np.eye(2)
        for q in reversed(range(n_qubits))
    ]
    return reduce(np.kron, factors)


def dense_run(gates, n_qubits: int, params=()) -> np.ndarray:
    state = np.zeros(2**n_qubits, dtype=np.complex128)
    state[0] = 1.0
    for gate in gates:
        state = dense_unitary(gate, n_qubits, params) @ state
    return state


@pytest.fixture
def dense():
    return dense_run


@pytest.fixture(scope="session")
def synth_params():
    return SynthParams(n_samples=600)


@pytest.fixture(scope="session")
def shower_data(synth_params) -> ShowerDataset:
    return synth_generate(synth_params, seed=11)


@pytest.fixture(scope="session")
def shower_split(shower_data):
    return split(shower_data, 300, 200, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
