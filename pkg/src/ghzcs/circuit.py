"""Circuit IR, log-depth GHZ preparation and circuit transforms.

Circuits are immutable: every transform returns a new :class:`Circuit`.
Qubits ``0 .. n_data-1`` are GHZ data qubits, flag ancillas follow.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import CircuitStateError, InvalidPairError, InvalidSizeError


class GateKind(str, Enum):
    H = "h"
    X = "x"
    CNOT = "cnot"
    RZ = "rz"
    RY = "ry"
    MEASURE_Z = "measure_z"


_ROTATIONS = (GateKind.RZ, GateKind.RY)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        arity = 2 if self.kind is GateKind.CNOT else 1
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind.value} acts on {arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.kind.value}{self.qubits}")
        if (self.angle is not None) != (self.kind in _ROTATIONS):
            raise ValueError(f"angle must be given exactly for rz/ry, got {self.kind.value}")

    @property
    def is_measurement(self) -> bool:
        return self.kind is GateKind.MEASURE_Z


@dataclass(frozen=True)
class GateCounts:
    n_1q: int
    n_cx: int


@dataclass(frozen=True)
class Circuit:
    n_data: int
    n_flags: int = 0
    gates: tuple[Gate, ...] = ()
    layers: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "layers", tuple(tuple(layer) for layer in self.layers))
        self.validate()

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_flags

    def validate(self):
        for gate in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in gate.qubits):
                raise ValueError(f"gate {gate} outside {self.n_qubits} qubits")
        flat = [i for layer in self.layers for i in layer]
        if flat != list(range(len(self.gates))):
            raise ValueError("layers must partition the gate list in order")
        for layer in self.layers:
            used = [q for i in layer for q in self.gates[i].qubits]
            if len(used) != len(set(used)):
                raise ValueError(f"qubit used twice in layer {layer}")

    def measured_qubits(self) -> list[int]:
        return sorted(q for g in self.gates if g.is_measurement for q in g.qubits)

    def data_measured(self) -> bool:
        return any(g.is_measurement and g.qubits[0] < self.n_data for g in self.gates)

    def layer_gates(self):
        for layer in self.layers:
            yield [self.gates[i] for i in layer]

    def append_layers(self, new_layers, n_flags=None) -> "Circuit":
        """Return a copy with ``new_layers`` (lists of gates) appended."""
        gates = list(self.gates)
        layers = [list(layer) for layer in self.layers]
        for layer in new_layers:
            if not layer:
                continue
            layers.append(list(range(len(gates), len(gates) + len(layer))))
            gates.extend(layer)
        return Circuit(self.n_data, self.n_flags if n_flags is None else n_flags, gates, layers)

    @classmethod
    def from_layers(cls, n_data, n_flags, layer_list) -> "Circuit":
        return cls(n_data, n_flags).append_layers(layer_list)

    # serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        gates = []
        for g in self.gates:
            entry = {"kind": g.kind.value, "qubits": list(g.qubits)}
            if g.angle is not None:
                entry["angle"] = g.angle
            gates.append(entry)
        return {
            "n_data": self.n_data,
            "n_flags": self.n_flags,
            "gates": gates,
            "layers": [list(layer) for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        gates = [Gate(g["kind"], g["qubits"], g.get("angle")) for g in data["gates"]]
        return cls(int(data["n_data"]), int(data["n_flags"]), gates, data["layers"])

    def to_json(self) -> str:
        # json emits repr() floats, which round-trip doubles exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class PrepTree:
    """Which CNOT entangled each qubit: ``parent[q]`` was its control."""

    n: int
    parent: dict[int, int]
    root: int = 0
    entangling_layer: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.parent) != set(range(self.n)) - {self.root}:
            raise ValueError("every non-root qubit needs exactly one parent")
        for q in self.parent:
            seen = {q}
            node = q
            while node != self.root:
                node = self.parent[node]
                if node in seen:
                    raise ValueError(f"cycle through qubit {q}")
                seen.add(node)
        if not self.entangling_layer:
            object.__setattr__(self, "entangling_layer",
                               {q: self.depth(q) for q in range(self.n)})

    def _key(self):
        return self.n, self.root, tuple(sorted(self.parent.items()))

    def __eq__(self, other):
        return isinstance(other, PrepTree) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def depth(self, q: int) -> int:
        d = 0
        while q != self.root:
            q = self.parent[q]
            d += 1
        return d

    def children(self, q: int) -> list[int]:
        return sorted(c for c, p in self.parent.items() if p == q)

    @classmethod
    def from_parent_list(cls, parents) -> "PrepTree":
        """``parents[i]`` is the parent of qubit ``i``; exactly one entry is None."""
        root = parents.index(None)
        parent = {i: p for i, p in enumerate(parents) if p is not None}
        return cls(len(parents), parent, root)


def perfect_binary_tree(levels: int) -> PrepTree:
    """Heap-ordered perfect binary tree with ``2**levels - 1`` nodes."""
    n = 2 ** levels - 1
    return PrepTree.from_parent_list([None] + [(i - 1) // 2 for i in range(1, n)])


def build_ghz_tree(n: int) -> tuple[Circuit, PrepTree]:
    """Log-depth GHZ preparation: H on qubit 0, then doubling CNOT fan-out layers.

    In each layer every entangled qubit (lowest index first) targets the next
    fresh qubit, so the last layer of a non-power-of-two ``n`` is partial.
    """
    if n < 2:
        raise InvalidSizeError(f"GHZ size must be >= 2, got {n}")
    layers = [[Gate(GateKind.H, (0,))]]
    parent = {}
    entangling_layer = {0: 0}
    entangled = [0]
    fresh = 1
    while fresh < n:
        layer = []
        for control in list(entangled):
            if fresh >= n:
                break
            layer.append(Gate(GateKind.CNOT, (control, fresh)))
            parent[fresh] = control
            entangling_layer[fresh] = len(layers)
            entangled.append(fresh)
            fresh += 1
        layers.append(layer)
    return Circuit.from_layers(n, 0, layers), PrepTree(n, parent, 0, entangling_layer)


def attach_flag_checks(circuit: Circuit, tree: PrepTree, pairs) -> Circuit:
    """Append one ZZ flag check per data-qubit pair after the preparation."""
    pairs = [tuple(p) for p in pairs]
    if len(set(frozenset(p) for p in pairs)) != len(pairs):
        raise InvalidPairError(f"duplicate pairs in {pairs}")
    for i, j in pairs:
        if i == j or not (0 <= i < tree.n and 0 <= j < tree.n) or max(i, j) >= circuit.n_data:
            raise InvalidPairError(f"invalid flag pair ({i}, {j}) for {circuit.n_data} data qubits")
    if circuit.data_measured():
        raise CircuitStateError("flag checks must precede the data measurement")
    layers = []
    flag = circuit.n_qubits
    for i, j in pairs:
        layers += [[Gate(GateKind.CNOT, (i, flag))],
                   [Gate(GateKind.CNOT, (j, flag))],
                   [Gate(GateKind.MEASURE_Z, (flag,))]]
        flag += 1
    return circuit.append_layers(layers, n_flags=circuit.n_flags + len(pairs))


def attach_parity_measurement(circuit: Circuit, phi: float) -> Circuit:
    """Rotate every data qubit by RZ(-phi), RY(-pi/2) and measure it in Z."""
    if circuit.data_measured():
        raise CircuitStateError("data qubits are already measured")
    data = range(circuit.n_data)
    return circuit.append_layers([
        [Gate(GateKind.RZ, (q,), -phi) for q in data],
        [Gate(GateKind.RY, (q,), -math.pi / 2) for q in data],
        [Gate(GateKind.MEASURE_Z, (q,)) for q in data],
    ])


def attach_z_measurement(circuit: Circuit) -> Circuit:
    if circuit.data_measured():
        raise CircuitStateError("data qubits are already measured")
    return circuit.append_layers([[Gate(GateKind.MEASURE_Z, (q,)) for q in range(circuit.n_data)]])


def count_gates(circuit: Circuit) -> GateCounts:
    n_cx = sum(g.kind is GateKind.CNOT for g in circuit.gates)
    n_1q = sum(not g.is_measurement and g.kind is not GateKind.CNOT for g in circuit.gates)
    return GateCounts(n_1q=n_1q, n_cx=n_cx)


def insert_dd(circuit: Circuit) -> Circuit:
    """Fill idle data-qubit slots of two-qubit-gate layers with an X-X pair.

    The first X joins the layer itself, the second goes into a layer of its
    own directly after it, so no qubit appears twice in one layer.
    """
    out = []
    for gates in circuit.layer_gates():
        if not any(g.kind is GateKind.CNOT for g in gates):
            out.append(gates)
            continue
        busy = {q for g in gates for q in g.qubits}
        idle = [q for q in range(circuit.n_data) if q not in busy]
        out.append(gates + [Gate(GateKind.X, (q,)) for q in idle])
        out.append([Gate(GateKind.X, (q,)) for q in idle])
    return Circuit.from_layers(circuit.n_data, circuit.n_flags, out)


def circuit_from_tree(tree: PrepTree) -> Circuit:
    """Preparation circuit for an arbitrary tree.

    H on the root, then each qubit fans out to its children (lowest index
    first) in consecutive layers starting right after its own entangling
    layer. Reproduces :func:`build_ghz_tree` on doubling trees.
    """
    if tree.root != 0:
        raise InvalidSizeError("the root must be qubit 0")
    layer_of = {tree.root: 0}
    by_layer: dict[int, list[Gate]] = {}
    frontier = [tree.root]
    while frontier:
        nxt = []
        for q in frontier:
            for offset, child in enumerate(tree.children(q), start=1):
                layer_of[child] = layer_of[q] + offset
                by_layer.setdefault(layer_of[child], []).append(Gate(GateKind.CNOT, (q, child)))
                nxt.append(child)
        frontier = nxt
    layers = [[Gate(GateKind.H, (tree.root,))]]
    layers += [sorted(by_layer[d], key=lambda g: g.qubits) for d in sorted(by_layer)]
    return Circuit.from_layers(tree.n, 0, layers)
