"""Noisy execution of GHZ circuits.

Two backends:

* a Monte-Carlo trajectory simulator that evolves exact statevectors with
  stochastic Pauli insertions after each gate (n_data + n_flags <= 20);
* the fast analytic emulator, in which coherence decays as
  ``(1 - p_2q)**N_cx * (1 - p_1q)**N_1q`` and parity shots are binomial.

Plus the count post-processing used by every pipeline: flag post-selection,
parity expectation and GHZ population.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, GateCounts, GateKind
from .errors import EmptyPostSelectionError, ResourceLimitError
from .rng import generator

MAX_TRAJECTORY_QUBITS = 20
SHOT_BLOCK = 4096
_CACHE_BYTES = 256 * 2 ** 20

DEPOLARIZING_CONVENTIONS = ("uniform", "nonidentity")


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing gate noise, symmetric readout flips and an injected phase.

    ``depolarizing="uniform"`` applies, with probability p, a Pauli drawn
    uniformly from all 4**k (identity included), i.e. the channel
    ``(1 - p) rho + p I / 2**k``.  ``"nonidentity"`` draws only from the
    4**k - 1 non-identity Paulis.
    """

    p_1q: float = 0.0
    p_2q: float = 0.0
    p_ro: float = 0.0
    phase_offset: float = 0.0
    depolarizing: str = "uniform"

    def __post_init__(self):
        for name in ("p_1q", "p_2q", "p_ro"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not -math.pi < self.phase_offset <= math.pi:
            raise ValueError(f"phase_offset must lie in (-pi, pi], got {self.phase_offset}")
        if self.depolarizing not in DEPOLARIZING_CONVENTIONS:
            raise ValueError(f"unknown depolarizing convention {self.depolarizing!r}")

    def gate_error(self, kind: GateKind) -> float:
        if kind is GateKind.MEASURE_Z:
            return 0.0
        return self.p_2q if kind is GateKind.CNOT else self.p_1q

    def to_dict(self) -> dict:
        return {"p_1q": self.p_1q, "p_2q": self.p_2q, "p_ro": self.p_ro,
                "phase_offset": self.phase_offset, "depolarizing": self.depolarizing}

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        return cls(**{k: data[k] for k in ("p_1q", "p_2q", "p_ro", "phase_offset", "depolarizing")
                      if k in data})


@dataclass
class CountsTable:
    """Measured bitstrings. Data bits come first, then flag bits."""

    n_bits: int
    counts: dict[str, int]
    data: list[int] = field(default_factory=list)
    flags: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.data and not self.flags:
            self.data = list(range(self.n_bits))
        if len(self.data) + len(self.flags) != self.n_bits:
            raise ValueError("bit layout does not match n_bits")
        for key, value in self.counts.items():
            if len(key) != self.n_bits or set(key) - {"0", "1"}:
                raise ValueError(f"bad bitstring {key!r} for {self.n_bits} bits")
            if value < 0:
                raise ValueError("counts must be non-negative")

    @property
    def shots(self) -> int:
        return sum(self.counts.values())

    def merged(self, other: "CountsTable") -> "CountsTable":
        if (self.n_bits, self.data, self.flags) != (other.n_bits, other.data, other.flags):
            raise ValueError("cannot merge tables with different layouts")
        return CountsTable(self.n_bits, dict(Counter(self.counts) + Counter(other.counts)),
                           list(self.data), list(self.flags))

    def to_dict(self) -> dict:
        return {"n_bits": self.n_bits,
                "bit_layout": {"data": list(self.data), "flags": list(self.flags)},
                "counts": dict(sorted(self.counts.items()))}

    @classmethod
    def from_dict(cls, data: dict) -> "CountsTable":
        layout = data.get("bit_layout", {})
        return cls(int(data["n_bits"]), {k: int(v) for k, v in data["counts"].items()},
                   list(layout.get("data", [])), list(layout.get("flags", [])))


@dataclass(frozen=True)
class ParitySample:
    phi: float
    parity: float
    shots: int

    def __post_init__(self):
        if abs(self.parity) > 1.0 + 1e-12:
            raise ValueError(f"parity {self.parity} outside [-1, 1]")
        if self.shots < 1:
            raise ValueError("a parity sample needs at least one shot")


# statevector kernels --------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_PAULI = (
    None,
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _single_qubit_matrix(kind: GateKind, angle) -> np.ndarray:
    if kind is GateKind.H:
        return _H
    if kind is GateKind.X:
        return _PAULI[1]
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if kind is GateKind.RZ:
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]])
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    raise ValueError(f"no matrix for {kind}")


def _apply_1q(state: np.ndarray, matrix: np.ndarray, q: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(matrix, state, axes=([1], [q])), 0, q)


def _apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    state = state.copy()
    index = [slice(None)] * state.ndim
    index[control] = 1
    sub = state[tuple(index)]
    axis = target if target < control else target - 1
    sub[...] = np.flip(sub, axis=axis).copy()
    return state


def _apply_pauli(state: np.ndarray, code: int, qubits) -> np.ndarray:
    # code in [0, 4**len(qubits)); base-4 digits are I, X, Y, Z per qubit
    for pos, q in enumerate(qubits):
        digit = (code >> (2 * (len(qubits) - 1 - pos))) & 3
        if digit:
            state = _apply_1q(state, _PAULI[digit], q)
    return state


def _check_terminal_measurements(circuit: Circuit):
    measured = set()
    for gate in circuit.gates:
        if measured.intersection(gate.qubits):
            raise ValueError(f"gate {gate} acts on an already measured qubit")
        if gate.is_measurement:
            measured.update(gate.qubits)


def evolve(circuit: Circuit, errors=None) -> np.ndarray:
    """Statevector (shape ``(2,) * n``) after all non-measurement gates.

    ``errors`` maps gate index -> Pauli code applied right after that gate.
    Qubit 0 is the leading axis, so flat index bits read qubit 0 first.
    """
    n = circuit.n_qubits
    state = np.zeros((2,) * n, dtype=complex)
    state[(0,) * n] = 1.0
    errors = errors or {}
    for index, gate in enumerate(circuit.gates):
        if gate.is_measurement:
            continue
        if gate.kind is GateKind.CNOT:
            state = _apply_cnot(state, *gate.qubits)
        else:
            state = _apply_1q(state, _single_qubit_matrix(gate.kind, gate.angle), gate.qubits[0])
        code = errors.get(index)
        if code:
            state = _apply_pauli(state, code, gate.qubits)
    return state


def final_statevector(circuit: Circuit) -> np.ndarray:
    """Noiseless flat statevector before measurement."""
    return evolve(circuit).reshape(-1)


class _NoisePlan:
    """Noisy gate locations and the per-shot Pauli draw."""

    def __init__(self, circuit: Circuit, noise: NoiseModel):
        self.locations = []
        for index, gate in enumerate(circuit.gates):
            p = noise.gate_error(gate.kind)
            if p > 0.0:
                self.locations.append((index, p, 4 ** len(gate.qubits)))
        self.probs = np.array([loc[1] for loc in self.locations])
        self.sizes = np.array([loc[2] for loc in self.locations])
        self.nonidentity = noise.depolarizing == "nonidentity"

    def sample(self, rng: np.random.Generator, shots: int) -> np.ndarray:
        """Pauli codes, shape (shots, n_locations); 0 means no error."""
        g = len(self.locations)
        occur = rng.random((shots, g)) < self.probs
        pick = rng.random((shots, g))
        if self.nonidentity:
            codes = 1 + np.floor(pick * (self.sizes - 1)).astype(np.int64)
        else:
            codes = np.floor(pick * self.sizes).astype(np.int64)
        return np.where(occur, codes, 0)

    def errors(self, row) -> dict:
        return {self.locations[i][0]: int(c) for i, c in enumerate(row) if c}


def _check_size(circuit: Circuit):
    if circuit.n_qubits > MAX_TRAJECTORY_QUBITS:
        raise ResourceLimitError(
            f"trajectory backend supports at most {MAX_TRAJECTORY_QUBITS} qubits, "
            f"circuit has {circuit.n_qubits}")


def _grouped_patterns(plan: _NoisePlan, rng, shots):
    codes = plan.sample(rng, shots)
    if codes.shape[1] == 0:
        return np.zeros((1, 0), dtype=np.int64), np.zeros(shots, dtype=np.int64)
    unique, inverse = np.unique(codes, axis=0, return_inverse=True)
    return unique, inverse.reshape(-1)


def run_statevector_trajectories(circuit: Circuit, noise: NoiseModel, shots: int,
                                 seed: int) -> CountsTable:
    """Sample measurement counts, one independent noise trajectory per shot.

    Shots are processed in fixed blocks of ``SHOT_BLOCK`` with a stream
    derived from (seed, block index); trajectories that drew the same error
    pattern share one statevector evolution.
    """
    _check_size(circuit)
    _check_terminal_measurements(circuit)
    if shots < 1:
        raise ValueError("shots must be positive")
    measured = circuit.measured_qubits()
    if not measured:
        raise ValueError("circuit has no measurements")
    n = circuit.n_qubits
    unmeasured = tuple(q for q in range(n) if q not in measured)
    n_bits = len(measured)
    shifts = np.arange(n_bits - 1, -1, -1, dtype=np.int64)
    plan = _NoisePlan(circuit, noise)
    cdfs: dict[bytes, np.ndarray] = {}
    cache_bytes = 0
    totals = Counter()

    for block, start in enumerate(range(0, shots, SHOT_BLOCK)):
        size = min(SHOT_BLOCK, shots - start)
        rng = generator(seed, block)
        patterns, inverse = _grouped_patterns(plan, rng, size)
        u_born = rng.random(size)
        u_readout = rng.random((size, n_bits))
        outcomes = np.empty(size, dtype=np.int64)
        for k, row in enumerate(patterns):
            key = row.tobytes()
            cdf = cdfs.get(key)
            if cdf is None:
                probs = np.abs(evolve(circuit, plan.errors(row))) ** 2
                if unmeasured:
                    probs = probs.sum(axis=unmeasured)
                cdf = np.cumsum(probs.reshape(-1))
                if cache_bytes + cdf.nbytes > _CACHE_BYTES:
                    cdfs.clear()
                    cache_bytes = 0
                cdfs[key] = cdf
                cache_bytes += cdf.nbytes
            chosen = inverse == k
            idx = np.searchsorted(cdf, u_born[chosen] * cdf[-1], side="right")
            outcomes[chosen] = np.minimum(idx, len(cdf) - 1)
        bits = (outcomes[:, None] >> shifts) & 1
        bits ^= (u_readout < noise.p_ro).astype(np.int64)
        values, counts = np.unique(bits @ (1 << shifts), return_counts=True)
        totals.update(dict(zip(values.tolist(), counts.tolist())))

    counts = {format(v, f"0{n_bits}b"): c for v, c in sorted(totals.items())}
    data = [q for q in measured if q < circuit.n_data]
    flags = [q for q in measured if q >= circuit.n_data]
    return CountsTable(n_bits, counts, data, flags)


def trajectory_coherence(circuit: Circuit, noise: NoiseModel, trajectories: int,
                         seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate of ``2 |<0...0| rho_data |1...1>|`` and its standard error.

    Measurements in ``circuit`` are ignored; flag qubits are traced out.
    """
    _check_size(circuit)
    if trajectories < 2:
        raise ValueError("need at least two trajectories")
    plan = _NoisePlan(circuit, noise)
    d_data, d_flags = 2 ** circuit.n_data, 2 ** circuit.n_flags
    pattern_value: dict[bytes, complex] = {}
    values = np.empty(trajectories, dtype=complex)
    for block, start in enumerate(range(0, trajectories, SHOT_BLOCK)):
        size = min(SHOT_BLOCK, trajectories - start)
        patterns, inverse = _grouped_patterns(plan, generator(seed, block), size)
        block_values = np.empty(len(patterns), dtype=complex)
        for k, row in enumerate(patterns):
            key = row.tobytes()
            if key not in pattern_value:
                psi = evolve(circuit, plan.errors(row)).reshape(d_data, d_flags)
                pattern_value[key] = 2.0 * np.vdot(psi[-1], psi[0])
            block_values[k] = pattern_value[key]
        values[start:start + size] = block_values[inverse]
    mean = values.mean()
    direction = mean / abs(mean) if abs(mean) > 0 else 1.0
    projected = (values * np.conj(direction)).real
    return float(abs(mean)), float(projected.std(ddof=1) / math.sqrt(trajectories))


# fast emulator --------------------------------------------------------------

def coherence_decay(counts: GateCounts, noise: NoiseModel) -> float:
    """Expected GHZ coherence ``(1 - p_2q)**N_cx * (1 - p_1q)**N_1q``."""
    return (1.0 - noise.p_2q) ** counts.n_cx * (1.0 - noise.p_1q) ** counts.n_1q


def emulate_fast_parity(n: int, gate_counts: GateCounts, noise: NoiseModel, phis,
                        shots: int, seed: int) -> list[ParitySample]:
    """Binomial parity shots for a GHZ state with the analytic coherence decay.

    Even-parity probability is ``(1 + V cos(n phi + theta)) / 2`` with
    ``V = C_exp * (1 - 2 p_ro)**n``; the readout factor is 1 when p_ro = 0.
    """
    if n < 2:
        raise ValueError("GHZ size must be >= 2")
    if shots < 1:
        raise ValueError("shots must be positive")
    phis = np.asarray(phis, dtype=float)
    visibility = coherence_decay(gate_counts, noise) * (1.0 - 2.0 * noise.p_ro) ** n
    p_even = 0.5 * (1.0 + visibility * np.cos(n * phis + noise.phase_offset))
    assert np.all((p_even >= 0.0) & (p_even <= 1.0))
    n_even = np.random.default_rng(seed).binomial(shots, p_even)
    return [ParitySample(float(phi), (2.0 * e - shots) / shots, shots)
            for phi, e in zip(phis, n_even)]


def emulate_population(n: int, gate_counts: GateCounts, noise: NoiseModel, shots: int,
                       seed: int) -> CountsTable:
    """Z-basis counts for the emulator's state.

    The emulated state is a globally depolarized GHZ state: with probability
    C_exp a shot comes from the ideal GHZ state, otherwise it is uniformly
    random. Readout flips are then applied per bit.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(seed)
    c_exp = coherence_decay(gate_counts, noise)
    ideal = rng.random(shots) < c_exp
    branch = rng.integers(0, 2, size=shots)
    bits = rng.integers(0, 2, size=(shots, n), dtype=np.int8)
    bits[ideal] = branch[ideal, None]
    bits ^= (rng.random((shots, n)) < noise.p_ro).astype(np.int8)
    rows, counts = np.unique(bits, axis=0, return_counts=True)
    table = {"".join("1" if b else "0" for b in row): int(c) for row, c in zip(rows, counts)}
    return CountsTable(n, table, list(range(n)), [])


# count post-processing ------------------------------------------------------

def postselect_flags(counts: CountsTable) -> tuple[CountsTable, float]:
    """Keep shots whose flag bits are all 0, with flags stripped from the keys."""
    nd = len(counts.data)
    total = counts.shots
    if not counts.flags:
        return CountsTable(counts.n_bits, dict(counts.counts), list(counts.data), []), 1.0
    kept = Counter()
    for key, value in counts.counts.items():
        if value and "1" not in key[nd:]:
            kept[key[:nd]] += value
    retained = sum(kept.values())
    fraction = retained / total if total else 0.0
    if retained == 0:
        raise EmptyPostSelectionError("every shot raised a flag", fraction)
    return CountsTable(nd, dict(sorted(kept.items())), list(counts.data), []), fraction


def _require_data_only(counts: CountsTable):
    if counts.flags:
        raise ValueError("post-select flags before computing data statistics")
    if counts.shots == 0:
        raise ValueError("empty counts")


def parity_expectation_from_counts(counts: CountsTable) -> tuple[float, int]:
    _require_data_only(counts)
    total = counts.shots
    signed = sum(-v if key.count("1") % 2 else v for key, v in counts.counts.items())
    return signed / total, total


def population_from_counts(counts: CountsTable) -> float:
    _require_data_only(counts)
    n = counts.n_bits
    hits = counts.counts.get("0" * n, 0) + counts.counts.get("1" * n, 0)
    return hits / counts.shots
