"""Quantum Angle Generator toolkit."""

from qag.circuits import ARCHITECTURES, build_architecture, variant_transform
from qag.codec import EncodingConfig, decode_counts, generate_images, prepare_state_circuit
from qag.data import ShowerDataset, SynthParams, load_dataset, save_dataset, split, synth_generate
from qag.errors import QAGError
from qag.evaluation import EvalReport, evaluate
from qag.models import CircuitSpec, Gate, GateKind, StateVector
from qag.noise import NoiseModel
from qag.simulator import apply_gate, run_circuit, sample_counts
from qag.trainer import TrainConfig, TrainState, repeat_trials, spsa_step, train

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "CircuitSpec",
    "EncodingConfig",
    "EvalReport",
    "Gate",
    "GateKind",
    "NoiseModel",
    "QAGError",
    "ShowerDataset",
    "StateVector",
    "SynthParams",
    "TrainConfig",
    "TrainState",
    "apply_gate",
    "build_architecture",
    "decode_counts",
    "evaluate",
    "generate_images",
    "load_dataset",
    "prepare_state_circuit",
    "repeat_trials",
    "run_circuit",
    "sample_counts",
    "save_dataset",
    "spsa_step",
    "split",
    "synth_generate",
    "train",
    "variant_transform",
]
