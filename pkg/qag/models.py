"""
Data models shared across the QAG toolkit.

Basis-state indices are little-endian: qubit k is bit k of the index, so the
amplitude of |q_{n-1} ... q_1 q_0> sits at index sum(q_k << k).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from qag.errors import CircuitError, SimulationError

MAX_QUBITS = 12
NORM_TOL = 1e-8


class GateKind(str, Enum):
    """Gate alphabet of the generator circuits."""

    H = "H"
    RY = "Ry"
    RZ = "Rz"
    CX = "CX"

    @property
    def is_rotation(self) -> bool:
        return self in (GateKind.RY, GateKind.RZ)


@dataclass(frozen=True)
class Gate:
    """A single gate.

    Rotation gates either carry a bound ``angle`` (radians) or a parameter
    ``slot`` index into the trainable parameter vector of a circuit.
    """

    kind: GateKind
    target: int
    control: Optional[int] = None
    angle: Optional[float] = None
    slot: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        if self.kind is GateKind.CX:
            if self.control is None:
                raise SimulationError("CX gate requires a control qubit")
            if self.control == self.target:
                raise SimulationError(f"CX control and target are both qubit {self.target}")
        elif self.control is not None:
            raise SimulationError(f"{self.kind.value} gate cannot have a control qubit")
        if not self.kind.is_rotation and (self.angle is not None or self.slot is not None):
            raise SimulationError(f"{self.kind.value} gate takes no angle")

    @property
    def qubits(self) -> Tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    def bound(self, angle: float) -> "Gate":
        return Gate(self.kind, self.target, angle=float(angle))

    def to_dict(self) -> dict:
        entry = {"kind": self.kind.value, "target": self.target}
        if self.control is not None:
            entry["control"] = self.control
        if self.slot is not None:
            entry["slot"] = self.slot
        if self.angle is not None:
            entry["angle"] = self.angle
        return entry

    @classmethod
    def from_dict(cls, entry: dict) -> "Gate":
        return cls(
            kind=GateKind(entry["kind"]),
            target=int(entry["target"]),
            control=entry.get("control"),
            angle=entry.get("angle"),
            slot=entry.get("slot"),
        )


def H(target: int) -> Gate:
    return Gate(GateKind.H, target)


def RY(target: int, angle: Optional[float] = None, slot: Optional[int] = None) -> Gate:
    return Gate(GateKind.RY, target, angle=angle, slot=slot)


def RZ(target: int, angle: Optional[float] = None, slot: Optional[int] = None) -> Gate:
    return Gate(GateKind.RZ, target, angle=angle, slot=slot)


def CX(control: int, target: int) -> Gate:
    return Gate(GateKind.CX, target, control=control)


@dataclass(frozen=True)
class CircuitSpec:
    """Ordered gate list with parameter slots 0..n_params-1."""

    name: str
    n_qubits: int
    gates: Tuple[Gate, ...] = ()
    variants: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "variants", tuple(self.variants))
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CircuitError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        for gate in self.gates:
            if max(gate.qubits) >= self.n_qubits or min(gate.qubits) < 0:
                raise CircuitError(f"gate {gate} addresses a qubit outside [0, {self.n_qubits})")
        slots = sorted(g.slot for g in self.gates if g.slot is not None)
        if slots != list(range(len(slots))):
            raise CircuitError(f"parameter slots of '{self.name}' are not 0..{len(slots) - 1}")

    @property
    def n_params(self) -> int:
        return sum(1 for g in self.gates if g.slot is not None)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "variants": list(self.variants),
            "gates": [g.to_dict() for g in self.gates],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CircuitSpec":
        return cls(
            name=payload["name"],
            n_qubits=int(payload["n_qubits"]),
            gates=tuple(Gate.from_dict(g) for g in payload["gates"]),
            variants=tuple(payload.get("variants", ())),
        )


@dataclass
class StateVector:
    """Pure state of ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise SimulationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise SimulationError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )
        norm = np.linalg.norm(self.amplitudes)
        if not abs(norm - 1.0) <= NORM_TOL:
            raise SimulationError(f"state is not normalised: norm {norm:.12g}")

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amplitudes = np.zeros(2**n_qubits, dtype=np.complex128)
        amplitudes[0] = 1.0
        return cls(n_qubits, amplitudes)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        amplitudes = np.zeros(2**n_qubits, dtype=np.complex128)
        amplitudes[index] = 1.0
        return cls(n_qubits, amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2
