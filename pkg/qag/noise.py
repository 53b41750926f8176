"""
Hardware noise models: per-qubit readout flips and per-edge CX errors.

JSON forms accepted by :meth:`NoiseModel.from_mapping`::

    {"label": "device", "readout_error": [0.02, ...], "cx_error": {"0-1": 0.01}, "cx_default": 0.0}
    {"label": "flat", "readout": 0.03, "cx": 0.03}
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np

from qag.errors import ConfigError, SimulationError
from qag.models import Gate, GateKind

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


def _check_probability(value: float, what: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0 or not np.isfinite(value):
        raise SimulationError(f"{what} must be a probability in [0, 1], got {value}")
    return value


def _parse_edge(key: str) -> Edge:
    try:
        control, target = (int(part) for part in str(key).split("-"))
    except ValueError as exc:
        raise ConfigError(f"cx_error key must look like 'c-t', got '{key}'") from exc
    return control, target


@dataclass(frozen=True)
class NoiseModel:
    """Readout and two-qubit gate error probabilities for one device snapshot."""

    label: str
    readout_error: Tuple[float, ...]
    cx_error: Dict[Edge, float] = field(default_factory=dict)
    cx_default: float = 0.0

    def __post_init__(self):
        readout = tuple(
            _check_probability(p, f"readout_error[{q}]") for q, p in enumerate(self.readout_error)
        )
        if not readout:
            raise SimulationError("noise model needs at least one qubit")
        object.__setattr__(self, "readout_error", readout)
        edges = {}
        for (control, target), p in dict(self.cx_error).items():
            edges[(int(control), int(target))] = _check_probability(p, f"cx_error[{control}-{target}]")
        object.__setattr__(self, "cx_error", edges)
        object.__setattr__(self, "cx_default", _check_probability(self.cx_default, "cx_default"))

    @property
    def n_qubits(self) -> int:
        return len(self.readout_error)

    @property
    def is_noiseless(self) -> bool:
        return (
            not any(self.readout_error)
            and not any(self.cx_error.values())
            and self.cx_default == 0.0
        )

    def readout(self, qubit: int) -> float:
        if not 0 <= qubit < self.n_qubits:
            raise SimulationError(f"noise model '{self.label}' has no qubit {qubit}")
        return self.readout_error[qubit]

    def cx_probability(self, control: int, target: int) -> float:
        """Error for a CX edge; the reversed edge is used when only it is listed."""
        if (control, target) in self.cx_error:
            return self.cx_error[(control, target)]
        if (target, control) in self.cx_error:
            return self.cx_error[(target, control)]
        return self.cx_default

    # -------------------------------------------------------------------------
    # Constructors
    # -------------------------------------------------------------------------

    @classmethod
    def noiseless(cls, n_qubits: int) -> "NoiseModel":
        return cls(label="noiseless", readout_error=(0.0,) * n_qubits)

    @classmethod
    def uniform(
        cls, n_qubits: int, readout: float = 0.0, cx: float = 0.0, label: Optional[str] = None
    ) -> "NoiseModel":
        if label is None:
            label = f"readout={readout:g},cx={cx:g}"
        return cls(label=label, readout_error=(readout,) * n_qubits, cx_default=cx)

    def with_readout(self, qubit: int, probability: float, label: Optional[str] = None) -> "NoiseModel":
        """Copy with one qubit's readout error replaced (a calibration change)."""
        self.readout(qubit)
        readout = list(self.readout_error)
        readout[qubit] = probability
        return NoiseModel(
            label=label or f"{self.label}+q{qubit}:{probability:g}",
            readout_error=tuple(readout),
            cx_error=dict(self.cx_error),
            cx_default=self.cx_default,
        )

    @classmethod
    def from_mapping(cls, payload: dict, n_qubits: int = 8) -> "NoiseModel":
        if not isinstance(payload, dict):
            raise ConfigError(f"noise model must be a JSON object, got {type(payload).__name__}")
        label = str(payload.get("label", "custom"))
        if "readout_error" in payload:
            readout = payload["readout_error"]
            if isinstance(readout, (int, float)):
                readout = [readout] * n_qubits
            edges = {_parse_edge(k): v for k, v in payload.get("cx_error", {}).items()}
            return cls(
                label=label,
                readout_error=tuple(readout),
                cx_error=edges,
                cx_default=payload.get("cx_default", 0.0),
            )
        if "readout" in payload or "cx" in payload:
            return cls.uniform(
                n_qubits,
                readout=payload.get("readout", 0.0),
                cx=payload.get("cx", 0.0),
                label=payload.get("label"),
            )
        raise ConfigError("noise model needs 'readout_error' or the scalar 'readout'/'cx' keys")

    @classmethod
    def from_json(cls, path: Union[str, Path], n_qubits: int = 8) -> "NoiseModel":
        path = Path(path)
        try:
            with open(path) as f:
                payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        model = cls.from_mapping(payload, n_qubits=n_qubits)
        logger.info("Loaded noise model '%s' from %s", model.label, path)
        return model

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "readout_error": list(self.readout_error),
            "cx_error": {f"{c}-{t}": p for (c, t), p in sorted(self.cx_error.items())},
            "cx_default": self.cx_default,
        }

    def to_json(self, path: Union[str, Path]) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


def cx_edges(gates: Iterable[Gate]) -> list:
    return [(g.control, g.target) for g in gates if g.kind is GateKind.CX]


def noise_level(noise: NoiseModel, gates: Iterable[Gate]) -> float:
    """Sweep x-axis position: mean of the average readout and average CX error.

    The CX average runs over the CX gates of ``gates``; a circuit without CX
    gates falls back to ``cx_default``.
    """
    edges = cx_edges(gates)
    readout = float(np.mean(noise.readout_error))
    if edges:
        cx = float(np.mean([noise.cx_probability(c, t) for c, t in edges]))
    else:
        cx = noise.cx_default
    return 0.5 * (readout + cx)


def sweep_model(config: str, level: float, n_qubits: int) -> NoiseModel:
    """Uniform model for one point of a noise sweep configuration."""
    if config == "readout":
        return NoiseModel.uniform(n_qubits, readout=level, label=f"readout@{level:g}")
    if config in ("cnot", "cx"):
        return NoiseModel.uniform(n_qubits, cx=level, label=f"cnot@{level:g}")
    if config == "combined":
        return NoiseModel.uniform(n_qubits, readout=level, cx=level, label=f"combined@{level:g}")
    raise ConfigError(f"unknown noise configuration '{config}' (expected readout, cnot or combined)")
