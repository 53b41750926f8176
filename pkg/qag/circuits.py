"""
Circuit zoo: the nine trainable QAG architectures.

Every builder returns a :class:`CircuitSpec` whose Ry gates carry parameter
slots in order of appearance. Parameter counts at 8 qubits::

    Linear 16    TTN 29    TTN_Rz 58
    MERA 45      MERA_Rz 90
    MERA-up 23   MERA-up_d2 46   MERA-up_Rz 46   MERA-up_d2_Rz 92
"""

import logging
from typing import Dict, List, Sequence

from qag.errors import CircuitError
from qag.models import CX, RY, RZ, CircuitSpec, Gate, GateKind

logger = logging.getLogger(__name__)

ARCHITECTURES = (
    "Linear",
    "TTN",
    "TTN_Rz",
    "MERA",
    "MERA_Rz",
    "MERA-up",
    "MERA-up_d2",
    "MERA-up_Rz",
    "MERA-up_d2_Rz",
)

VARIANTS = ("d2", "Rz")

SUPPORTED_QUBITS = (2, 4, 8)


class _Builder:
    """Accumulates gates and hands out parameter slots sequentially."""

    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.gates: List[Gate] = []
        self.next_slot = 0

    def ry(self, qubits: Sequence[int]) -> None:
        for q in sorted(qubits):
            self.gates.append(RY(q, slot=self.next_slot))
            self.next_slot += 1

    def cx(self, edges: Sequence[tuple]) -> None:
        self.gates.extend(CX(c, t) for c, t in edges)

    def entangler(self) -> None:
        """Offset neighbour pairs (1,2), (3,4), ..."""
        self.cx([(q, q + 1) for q in range(1, self.n_qubits - 1, 2)])

    def spec(self, name: str) -> CircuitSpec:
        return CircuitSpec(name=name, n_qubits=self.n_qubits, gates=tuple(self.gates))


def center_qubit(n_qubits: int) -> int:
    return n_qubits // 2 - 1


def _strides(n_qubits: int) -> List[int]:
    strides, s = [], 1
    while s < n_qubits:
        strides.append(s)
        s *= 2
    return strides


def _linear(b: _Builder) -> None:
    n = b.n_qubits
    b.ry(range(n))
    b.cx([(q, q + 1) for q in range(n - 1)])
    b.ry(range(n))


def _ttn(b: _Builder) -> None:
    n = b.n_qubits
    b.ry(range(n))
    for s in _strides(n):
        targets = [t for t in range(n) if (t + 1) % (2 * s) == 0]
        b.cx([(t - s, t) for t in targets])
        b.ry(targets)
    for s in reversed(_strides(n)):
        sources = [t for t in range(n) if (t + 1) % (2 * s) == 0]
        b.cx([(t, t - s) for t in sources])
        b.ry([q for q in range(n) if (q + 1) % s == 0])


def _mera_down(b: _Builder) -> None:
    """Coarse-grain onto the center qubit; its rotation belongs to the up half."""
    n = b.n_qubits
    b.ry(range(n))
    b.entangler()
    b.ry(range(n))
    strides = _strides(n)
    for s in strides[:-1]:
        targets = [t for t in range(n) if (t + 1) % (2 * s) == 0]
        b.cx([(t - s, t) for t in targets])
        b.ry(targets)
    b.cx([(n - 1, center_qubit(n))])


def _mera_up(b: _Builder) -> None:
    """Fan out from the center qubit, halving the CX distance per level.

    The center is rotated before the first CX and each later level rotates
    its new targets before its CX; a CX onto an unrotated |+> target is the
    identity.
    """
    n = b.n_qubits
    informed = [center_qubit(n)]
    for level, d in enumerate(reversed(_strides(n))):
        if d == n // 2:
            edges = [(q, q + d) for q in informed]
        else:
            edges = [(q, q - d) for q in informed]
        b.ry(informed if level == 0 else [t for _, t in edges])
        b.cx(edges)
        informed = sorted(set(informed) | {t for _, t in edges})
    b.ry(range(n))
    b.entangler()
    b.ry(range(n))


_BASES = {
    "Linear": (_linear,),
    "TTN": (_ttn,),
    "MERA": (_mera_down, _mera_up),
    "MERA-up": (_mera_up,),
}

_BASES_BY_LENGTH = sorted(_BASES, key=len, reverse=True)


def _renumber(gates: Sequence[Gate]) -> List[Gate]:
    out, slot = [], 0
    for g in gates:
        if g.slot is not None:
            out.append(Gate(g.kind, g.target, slot=slot))
            slot += 1
        else:
            out.append(g)
    return out


def variant_transform(base: CircuitSpec, variant: str) -> CircuitSpec:
    """Apply ``d2`` (repeat every gate) or ``Rz`` (Rz after every Ry)."""
    if variant not in VARIANTS:
        raise CircuitError(f"unknown variant '{variant}' (expected one of {', '.join(VARIANTS)})")
    if variant in base.variants:
        raise CircuitError(f"variant '{variant}' already applied to '{base.name}'")
    if variant == "d2":
        gates = list(base.gates) * 2
    else:
        gates = []
        for g in base.gates:
            gates.append(g)
            if g.kind is GateKind.RY:
                gates.append(RZ(g.target, slot=0))
    gates = _renumber(gates)
    return CircuitSpec(
        name=f"{base.name}_{variant}",
        n_qubits=base.n_qubits,
        gates=tuple(gates),
        variants=base.variants + (variant,),
    )


def build_architecture(name: str, n_qubits: int = 8) -> CircuitSpec:
    """Build one of :data:`ARCHITECTURES` on ``n_qubits`` qubits."""
    if name not in ARCHITECTURES:
        raise CircuitError(f"unknown architecture '{name}' (expected one of {', '.join(ARCHITECTURES)})")
    if n_qubits not in SUPPORTED_QUBITS:
        raise CircuitError(
            f"architectures need a power-of-two qubit count in {SUPPORTED_QUBITS}, got {n_qubits}"
        )
    base_name = next(b for b in _BASES_BY_LENGTH if name == b or name.startswith(b + "_"))
    variants = name[len(base_name) + 1 :].split("_") if name != base_name else []
    builder = _Builder(n_qubits)
    for part in _BASES[base_name]:
        part(builder)
    spec = builder.spec(base_name)
    for variant in variants:
        spec = variant_transform(spec, variant)
    logger.debug("Built %s on %d qubits: %d parameters", name, n_qubits, spec.n_params)
    return spec


def build_all(n_qubits: int = 8) -> Dict[str, CircuitSpec]:
    return {name: build_architecture(name, n_qubits) for name in ARCHITECTURES}


def circuit_summary(spec: CircuitSpec) -> dict:
    """Gate counts, depth and CX edges of a circuit."""
    levels = [0] * spec.n_qubits
    for g in spec.gates:
        layer = max(levels[q] for q in g.qubits) + 1
        for q in g.qubits:
            levels[q] = layer
    edges = [(g.control, g.target) for g in spec.gates if g.kind is GateKind.CX]
    return {
        "name": spec.name,
        "n_qubits": spec.n_qubits,
        "n_params": spec.n_params,
        "n_gates": len(spec.gates),
        "cx_count": len(edges),
        "depth": max(levels) if spec.gates else 0,
        "cx_edges": edges,
    }


def spec_to_dict(spec: CircuitSpec) -> dict:
    return spec.to_dict()


def spec_from_dict(payload: dict) -> CircuitSpec:
    return CircuitSpec.from_dict(payload)
