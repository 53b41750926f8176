"""
Characteristic circuit numbers: parameter count, expressibility score and
entanglement capability.

Expressibility compares the distribution of fidelities between states built
from random parameter pairs with the Haar law P(F) = (N-1)(1-F)^(N-2),
N = 2**n. The score is 1 - KL(P_circuit || P_Haar), so 1 is best.

Entanglement capability is the sampled mean of the Meyer-Wallach measure
Q = 2 (1 - mean_k Tr(rho_k^2)) over single-qubit reduced states rho_k.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional

import numpy as np
from tqdm import tqdm

from qag.circuits import ARCHITECTURES, build_architecture, circuit_summary
from qag.errors import CircuitError
from qag.models import CircuitSpec, StateVector
from qag.simulator import evolve_batch

logger = logging.getLogger(__name__)

N_BINS = 75
EMPTY_BIN_PROB = 1e-9
CHUNK = 512
BOOTSTRAP_ROUNDS = 50

# name -> (n_params, expressibility, entanglement capability, MSE mean, MSE std)
PUBLISHED = {
    "Linear": (16, 0.8191, 0.261, 0.00113, 0.0008),
    "TTN": (29, 0.8068, 0.462, 0.00245, 0.0012),
    "TTN_Rz": (58, 0.9912, 0.918, 0.00440, 0.0022),
    "MERA": (45, 0.9564, 0.855, 0.00220, 0.0011),
    "MERA_Rz": (90, 0.9997, 0.959, 0.00634, 0.0036),
    "MERA-up": (23, 0.9377, 0.894, 0.00059, 0.0004),
    "MERA-up_d2": (46, 0.9715, 0.906, 0.00038, 0.0002),
    "MERA-up_Rz": (46, 0.9961, 0.926, 0.00047, 0.0005),
    "MERA-up_d2_Rz": (92, 0.9999, 0.954, 0.00094, 0.0008),
}


def _sample_states(circuit: CircuitSpec, params: np.ndarray) -> np.ndarray:
    zero = np.repeat(StateVector.zero(circuit.n_qubits).amplitudes[None, :], params.shape[0], axis=0)
    return evolve_batch(zero, circuit.gates, circuit.n_qubits, params=params)


def _chunks(total: int, size: int) -> Iterable[int]:
    done = 0
    while done < total:
        yield min(size, total - done)
        done += size


def sample_fidelities(
    circuit: CircuitSpec, n_pairs: int, seed: int = 0, progress: bool = False
) -> np.ndarray:
    """|<psi(a)|psi(b)>|^2 for ``n_pairs`` parameter pairs drawn from [0, 2pi)."""
    rng = np.random.default_rng(seed)
    out = []
    for size in tqdm(list(_chunks(n_pairs, CHUNK)), desc=f"fidelities {circuit.name}", disable=not progress):
        a = rng.uniform(0.0, 2.0 * np.pi, size=(size, circuit.n_params))
        b = rng.uniform(0.0, 2.0 * np.pi, size=(size, circuit.n_params))
        overlap = np.sum(np.conj(_sample_states(circuit, a)) * _sample_states(circuit, b), axis=1)
        out.append(np.abs(overlap) ** 2)
    return np.clip(np.concatenate(out), 0.0, 1.0)


def haar_log_bin_probs(n_qubits: int, n_bins: int = N_BINS) -> np.ndarray:
    """log of the Haar fidelity mass per bin, computed without underflow."""
    dim = 2**n_qubits
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    left, right = edges[:-1], edges[1:]
    with np.errstate(divide="ignore"):
        log_left = (dim - 1) * np.log1p(-left)
        ratio = np.where(right < 1.0, ((1.0 - right) / (1.0 - left)) ** (dim - 1), 0.0)
    return log_left + np.log1p(-ratio)


def kl_to_haar(fidelities: np.ndarray, n_qubits: int, n_bins: int = N_BINS) -> float:
    counts, _ = np.histogram(fidelities, bins=n_bins, range=(0.0, 1.0))
    p = counts / counts.sum()
    p = np.where(p > 0, p, EMPTY_BIN_PROB)
    return float(np.sum(p * (np.log(p) - haar_log_bin_probs(n_qubits, n_bins))))


@dataclass
class ExpressibilityResult:
    score: float
    kl: float
    stderr: float
    n_pairs: int
    n_bins: int
    seed: int


def expressibility(
    circuit: CircuitSpec,
    n_pairs: int = 5000,
    n_bins: int = N_BINS,
    seed: int = 0,
    progress: bool = False,
) -> ExpressibilityResult:
    """Expressibility score with a bootstrap standard error."""
    if n_pairs < 1000:
        raise CircuitError(f"n_pairs must be >= 1000, got {n_pairs}")
    if n_bins < 10:
        raise CircuitError(f"n_bins must be >= 10, got {n_bins}")
    fidelities = sample_fidelities(circuit, n_pairs, seed, progress)
    kl = kl_to_haar(fidelities, circuit.n_qubits, n_bins)
    rng = np.random.default_rng([seed, 1])
    boot = [
        kl_to_haar(rng.choice(fidelities, size=fidelities.size, replace=True), circuit.n_qubits, n_bins)
        for _ in range(BOOTSTRAP_ROUNDS)
    ]
    return ExpressibilityResult(1.0 - kl, kl, float(np.std(boot)), n_pairs, n_bins, seed)


def expressibility_score(circuit: CircuitSpec, n_pairs: int = 5000, n_bins: int = N_BINS, seed: int = 0) -> float:
    return expressibility(circuit, n_pairs, n_bins, seed).score


def meyer_wallach(states: np.ndarray, n_qubits: int) -> np.ndarray:
    """Meyer-Wallach Q for each row of ``states``."""
    batch = states.shape[0]
    purity = np.zeros(batch)
    for k in range(n_qubits):
        view = states.reshape(batch, 2 ** (n_qubits - 1 - k), 2, 2**k)
        rho = np.einsum("baic,bajc->bij", view, np.conj(view))
        purity += np.sum(np.abs(rho) ** 2, axis=(1, 2))
    return np.clip(2.0 * (1.0 - purity / n_qubits), 0.0, 1.0)


@dataclass
class EntanglementResult:
    mean: float
    stderr: float
    n_samples: int
    seed: int


def entanglement(
    circuit: CircuitSpec, n_samples: int = 5000, seed: int = 0, progress: bool = False
) -> EntanglementResult:
    if n_samples < 1000:
        raise CircuitError(f"n_samples must be >= 1000, got {n_samples}")
    rng = np.random.default_rng(seed)
    values = []
    for size in tqdm(list(_chunks(n_samples, CHUNK)), desc=f"entanglement {circuit.name}", disable=not progress):
        params = rng.uniform(0.0, 2.0 * np.pi, size=(size, circuit.n_params))
        values.append(meyer_wallach(_sample_states(circuit, params), circuit.n_qubits))
    q = np.concatenate(values)
    return EntanglementResult(float(np.mean(q)), float(np.std(q) / np.sqrt(q.size)), n_samples, seed)


def entanglement_capability(circuit: CircuitSpec, n_samples: int = 5000, seed: int = 0) -> float:
    return entanglement(circuit, n_samples, seed).mean


# =============================================================================
# Report
# =============================================================================


@dataclass
class CircuitReport:
    name: str
    n_params: int
    expr_score: float
    expr_stderr: float
    ent_capability: float
    ent_stderr: float
    n_gates: int
    cx_count: int
    depth: int
    n_pairs: int
    n_samples: int
    n_bins: int
    seed: int
    published_n_params: Optional[int] = None
    published_expr: Optional[float] = None
    published_ent: Optional[float] = None
    published_mse: Optional[float] = None
    published_mse_std: Optional[float] = None
    mse_mean: Optional[float] = None
    mse_std: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def circuit_report(
    circuit: CircuitSpec,
    n_pairs: int = 5000,
    n_samples: int = 5000,
    n_bins: int = N_BINS,
    seed: int = 0,
    progress: bool = False,
) -> CircuitReport:
    expr = expressibility(circuit, n_pairs, n_bins, seed, progress)
    ent = entanglement(circuit, n_samples, seed, progress)
    summary = circuit_summary(circuit)
    published = PUBLISHED.get(circuit.name, (None,) * 5)
    return CircuitReport(
        name=circuit.name,
        n_params=circuit.n_params,
        expr_score=expr.score,
        expr_stderr=expr.stderr,
        ent_capability=ent.mean,
        ent_stderr=ent.stderr,
        n_gates=summary["n_gates"],
        cx_count=summary["cx_count"],
        depth=summary["depth"],
        n_pairs=n_pairs,
        n_samples=n_samples,
        n_bins=n_bins,
        seed=seed,
        published_n_params=published[0],
        published_expr=published[1],
        published_ent=published[2],
        published_mse=published[3],
        published_mse_std=published[4],
    )


def full_report(
    n_qubits: int = 8,
    n_pairs: int = 5000,
    n_samples: int = 5000,
    n_bins: int = N_BINS,
    seed: int = 0,
    names: Iterable[str] = ARCHITECTURES,
    progress: bool = False,
) -> List[CircuitReport]:
    reports = []
    for name in names:
        report = circuit_report(build_architecture(name, n_qubits), n_pairs, n_samples, n_bins, seed, progress)
        logger.info(
            "%-14s N_p=%3d expr=%.4f ent=%.3f", name, report.n_params, report.expr_score, report.ent_capability
        )
        reports.append(report)
    return reports


def ordering_checks(reports: Iterable[CircuitReport]) -> Dict[str, bool]:
    """Qualitative relations between architectures that the reports should satisfy."""
    by_name = {r.name: r for r in reports}
    checks = {}
    weak = [n for n in ("Linear", "TTN") if n in by_name]
    strong = [n for n in ("MERA_Rz", "MERA-up_d2_Rz") if n in by_name]
    if weak and strong:
        for metric in ("expr_score", "ent_capability"):
            checks[f"{metric}: Linear/TTN below MERA_Rz/MERA-up_d2_Rz"] = max(
                getattr(by_name[n], metric) for n in weak
            ) < min(getattr(by_name[n], metric) for n in strong)
    for name, report in by_name.items():
        if name.endswith("_Rz") and name[: -len("_Rz")] in by_name:
            base = by_name[name[: -len("_Rz")]]
            slack = 2.0 * (report.expr_stderr + base.expr_stderr)
            checks[f"expr_score: {name} >= {base.name}"] = report.expr_score + slack >= base.expr_score
            slack = 2.0 * (report.ent_stderr + base.ent_stderr)
            checks[f"ent_capability: {name} >= {base.name}"] = report.ent_capability + slack >= base.ent_capability
    return checks
