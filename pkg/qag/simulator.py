"""
Statevector simulation of H/Ry/Rz/CX circuits with shot sampling.

States are handled in batches of shape (B, 2**n). Single-qubit gates are
applied by reshaping each state to (2**(n-1-k), 2, 2**k) and contracting the
middle axis with a per-row 2x2 matrix; CX is a fixed index permutation.

Noisy sampling uses Monte-Carlo trajectories: every shot draws, for each CX
edge with error probability p > 0, whether a uniformly random non-identity
two-qubit Pauli is injected after the gate. Shots with the same injection
pattern share one simulation, so a shot budget of a few hundred costs only
as many statevector runs as there are distinct patterns.
"""

import logging
from functools import lru_cache
from typing import List, Optional, Sequence, Union

import numpy as np

from qag.errors import SimulationError
from qag.models import CircuitSpec, Gate, GateKind, StateVector
from qag.noise import NoiseModel

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0)

# Index 0..3 -> I, X, Y, Z
_PAULIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# =============================================================================
# Gate kernels
# =============================================================================


def _rotation_matrices(kind: GateKind, angles: np.ndarray) -> np.ndarray:
    """Return (B, 2, 2) rotation matrices for a vector of angles."""
    half = np.asarray(angles, dtype=np.float64) / 2.0
    out = np.zeros(half.shape + (2, 2), dtype=np.complex128)
    if kind is GateKind.RY:
        c, s = np.cos(half), np.sin(half)
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
    elif kind is GateKind.RZ:
        out[..., 0, 0] = np.exp(-1j * half)
        out[..., 1, 1] = np.exp(1j * half)
    else:
        raise SimulationError(f"{kind.value} is not a rotation gate")
    return out


def _apply_single(states: np.ndarray, matrix: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    batch = states.shape[0]
    view = states.reshape(batch, 2 ** (n_qubits - 1 - qubit), 2, 2**qubit)
    if matrix.ndim == 2:
        out = np.einsum("ij,bajc->baic", matrix, view)
    else:
        out = np.einsum("bij,bajc->baic", matrix, view)
    return out.reshape(batch, -1)


@lru_cache(maxsize=256)
def _cx_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    index = np.arange(2**n_qubits)
    flipped = index ^ (1 << target)
    return np.where(index & (1 << control), flipped, index)


@lru_cache(maxsize=16)
def _bit_table(n_qubits: int) -> np.ndarray:
    """(2**n, n) table of basis-index bits, little-endian."""
    index = np.arange(2**n_qubits)[:, None]
    return (index >> np.arange(n_qubits)[None, :]) & 1


def _check_qubits(gate: Gate, n_qubits: int) -> None:
    for q in gate.qubits:
        if not 0 <= q < n_qubits:
            raise SimulationError(f"qubit index {q} out of range for {n_qubits} qubits")


def _resolve_angles(gate: Gate, params: Optional[np.ndarray]) -> np.ndarray:
    if gate.slot is not None and params is not None:
        if gate.slot >= params.shape[-1]:
            raise SimulationError(
                f"gate slot {gate.slot} needs at least {gate.slot + 1} parameters, got {params.shape[-1]}"
            )
        angles = np.asarray(params[..., gate.slot])
    elif gate.angle is not None:
        angles = np.asarray(gate.angle, dtype=np.float64)
    else:
        raise SimulationError(f"unbound {gate.kind.value} gate on qubit {gate.target}")
    if not np.all(np.isfinite(angles)):
        raise SimulationError(f"non-finite angle for {gate.kind.value} gate on qubit {gate.target}")
    return angles


def _apply_paulis(states: np.ndarray, codes: np.ndarray, control: int, target: int, n_qubits: int) -> np.ndarray:
    """Inject two-qubit Paulis; code = 4 * control_pauli + target_pauli."""
    states = _apply_single(states, _PAULIS[codes // 4], control, n_qubits)
    return _apply_single(states, _PAULIS[codes % 4], target, n_qubits)


def _evolve(
    states: np.ndarray,
    gates: Sequence[Gate],
    n_qubits: int,
    params: Optional[np.ndarray] = None,
    injections: Optional[dict] = None,
) -> np.ndarray:
    """Core loop; ``injections`` maps gate position to per-row Pauli codes."""
    for position, gate in enumerate(gates):
        _check_qubits(gate, n_qubits)
        if gate.kind is GateKind.H:
            states = _apply_single(states, _HADAMARD, gate.target, n_qubits)
        elif gate.kind is GateKind.CX:
            states = states[:, _cx_permutation(n_qubits, gate.control, gate.target)]
            if injections and position in injections:
                states = _apply_paulis(states, injections[position], gate.control, gate.target, n_qubits)
        else:
            angles = _resolve_angles(gate, params)
            if angles.ndim == 0:
                matrix = _rotation_matrices(gate.kind, angles[None])[0]
            else:
                matrix = _rotation_matrices(gate.kind, angles)
            states = _apply_single(states, matrix, gate.target, n_qubits)
    return states


# =============================================================================
# Public API
# =============================================================================


def bind(circuit: CircuitSpec, params: Sequence[float]) -> List[Gate]:
    """Return the gate list of ``circuit`` with every slot replaced by its angle."""
    values = np.asarray(params, dtype=np.float64)
    if values.shape != (circuit.n_params,):
        raise SimulationError(
            f"'{circuit.name}' has {circuit.n_params} parameters, got {values.size}"
        )
    if not np.all(np.isfinite(values)):
        raise SimulationError(f"non-finite parameters for '{circuit.name}'")
    return [g.bound(values[g.slot]) if g.slot is not None else g for g in circuit.gates]


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply one bound gate and return the new state."""
    amplitudes = _evolve(state.amplitudes[None, :], [gate], state.n_qubits)[0]
    return StateVector(state.n_qubits, amplitudes)


def evolve_batch(
    states: np.ndarray,
    gates: Sequence[Gate],
    n_qubits: int,
    params: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Apply ``gates`` to each row of ``states`` (shape (B, 2**n)).

    Slot gates take their angle from ``params``, either one shared vector or
    one row per state.
    """
    states = np.asarray(states, dtype=np.complex128)
    if states.ndim != 2 or states.shape[1] != 2**n_qubits:
        raise SimulationError(f"states must have shape (B, {2**n_qubits}), got {states.shape}")
    if params is not None:
        params = np.asarray(params, dtype=np.float64)
        if params.ndim == 2 and params.shape[0] != states.shape[0]:
            raise SimulationError(
                f"got {params.shape[0]} parameter rows for {states.shape[0]} states"
            )
    return _evolve(states, gates, n_qubits, params)


def run_circuit(
    circuit: Union[CircuitSpec, Sequence[Gate]],
    params: Sequence[float] = (),
    n_qubits: Optional[int] = None,
    initial_state: Optional[StateVector] = None,
) -> StateVector:
    """Run a circuit from |0...0> (or ``initial_state``) with ``params`` bound.

    A plain gate list needs ``n_qubits`` unless an initial state is given.
    """
    if isinstance(circuit, CircuitSpec):
        gates = bind(circuit, params)
        n_qubits = circuit.n_qubits
    else:
        gates = list(circuit)
        slots = sorted({g.slot for g in gates if g.slot is not None})
        n_slots = len(slots)
        if slots != list(range(n_slots)):
            raise SimulationError(f"parameter slots must be 0..{n_slots - 1} without gaps, got {slots}")
        if len(params) != n_slots:
            raise SimulationError(f"circuit has {n_slots} parameter slots, got {len(params)} parameters")
        if n_slots:
            values = np.asarray(params, dtype=np.float64)
            gates = [g.bound(values[g.slot]) if g.slot is not None else g for g in gates]
        if n_qubits is None:
            if initial_state is None:
                raise SimulationError("n_qubits is required for a bare gate list")
            n_qubits = initial_state.n_qubits
    if initial_state is None:
        initial_state = StateVector.zero(n_qubits)
    elif initial_state.n_qubits != n_qubits:
        raise SimulationError(
            f"initial state has {initial_state.n_qubits} qubits, circuit needs {n_qubits}"
        )
    amplitudes = _evolve(initial_state.amplitudes[None, :], gates, n_qubits)[0]
    return StateVector(n_qubits, amplitudes)


def probabilities(state: StateVector) -> np.ndarray:
    return state.probabilities()


def marginal_zero(state: StateVector, qubit: int) -> float:
    """Probability of measuring qubit ``qubit`` in |0>."""
    if not 0 <= qubit < state.n_qubits:
        raise SimulationError(f"qubit index {qubit} out of range for {state.n_qubits} qubits")
    bits = _bit_table(state.n_qubits)[:, qubit]
    return float(np.sum(state.probabilities()[bits == 0]))


def _basis_probs(amplitudes: np.ndarray) -> np.ndarray:
    probs = np.abs(amplitudes) ** 2
    return probs / probs.sum(axis=-1, keepdims=True)


def _noisy_basis_counts(
    state: np.ndarray,
    gates: Sequence[Gate],
    n_qubits: int,
    shots: int,
    positions: List[int],
    error_probs: np.ndarray,
    rng: np.random.Generator,
    params: Optional[np.ndarray],
) -> np.ndarray:
    hits = rng.random((shots, len(positions))) < error_probs
    paulis = rng.integers(1, 16, size=(shots, len(positions)))
    patterns = np.where(hits, paulis, 0)
    unique, inverse = np.unique(patterns, axis=0, return_inverse=True)
    group_sizes = np.bincount(inverse.reshape(-1), minlength=len(unique))
    logger.debug("%d shots collapsed into %d trajectories", shots, len(unique))

    injections = {pos: unique[:, j] for j, pos in enumerate(positions)}
    replicated = np.repeat(state[None, :], len(unique), axis=0)
    finals = _evolve(replicated, gates, n_qubits, params, injections)
    probs = _basis_probs(finals)
    counts = np.zeros(2**n_qubits, dtype=np.int64)
    for size, p in zip(group_sizes, probs):
        counts += rng.multinomial(int(size), p)
    return counts


def _apply_readout(zeros: np.ndarray, shots: int, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    zeros = zeros.copy()
    for q in range(zeros.shape[0]):
        r = noise.readout(q)
        if r > 0.0:
            kept = rng.binomial(zeros[q], 1.0 - r)
            flipped_in = rng.binomial(shots - zeros[q], r)
            zeros[q] = kept + flipped_in
    return zeros


def sample_counts_batch(
    states: np.ndarray,
    shots: int,
    noise: Optional[NoiseModel],
    gates: Sequence[Gate],
    rngs: Sequence[np.random.Generator],
    n_qubits: int,
    params: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Run ``gates`` on each input state and count |0> outcomes per qubit.

    Returns an integer array of shape (B, n_qubits). Row ``b`` draws all of
    its randomness from ``rngs[b]``.
    """
    if shots < 1:
        raise SimulationError(f"shots must be >= 1, got {shots}")
    states = np.asarray(states, dtype=np.complex128)
    if len(rngs) != states.shape[0]:
        raise SimulationError(f"need one generator per state, got {len(rngs)} for {states.shape[0]}")
    if params is not None:
        params = np.asarray(params, dtype=np.float64)
    if noise is not None and noise.n_qubits < n_qubits:
        raise SimulationError(
            f"noise model '{noise.label}' covers {noise.n_qubits} qubits, circuit has {n_qubits}"
        )

    positions, error_probs = [], []
    if noise is not None:
        for pos, gate in enumerate(gates):
            if gate.kind is GateKind.CX:
                p = noise.cx_probability(gate.control, gate.target)
                if p > 0.0:
                    positions.append(pos)
                    error_probs.append(p)
    error_probs = np.asarray(error_probs, dtype=np.float64)

    zero_mask = 1 - _bit_table(n_qubits)
    out = np.zeros((states.shape[0], n_qubits), dtype=np.int64)
    if positions:
        for b, rng in enumerate(rngs):
            row_params = params[b] if params is not None and params.ndim == 2 else params
            basis_counts = _noisy_basis_counts(
                states[b], gates, n_qubits, shots, positions, error_probs, rng, row_params
            )
            out[b] = basis_counts @ zero_mask
    else:
        probs = _basis_probs(_evolve(states, gates, n_qubits, params))
        for b, rng in enumerate(rngs):
            out[b] = rng.multinomial(shots, probs[b]) @ zero_mask

    if noise is not None:
        for b, rng in enumerate(rngs):
            out[b] = _apply_readout(out[b], shots, noise, rng)
    return out


def sample_counts(
    state: StateVector,
    shots: int,
    noise: Optional[NoiseModel] = None,
    circuit: Sequence[Gate] = (),
    seed: SeedLike = None,
) -> np.ndarray:
    """Measure every qubit ``shots`` times after running ``circuit`` on ``state``.

    Returns the per-qubit number of |0> outcomes. With an empty ``circuit`` the
    given state is measured directly.
    """
    rng = as_generator(seed)
    return sample_counts_batch(
        state.amplitudes[None, :], shots, noise, list(circuit), [rng], state.n_qubits
    )[0]
