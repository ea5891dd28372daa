"""Parity-check coverage on a preparation tree and flag-pair selection.

The coverage of a check on qubits (i, j) is the set of qubits on the tree
paths from i and from j up to their lowest common ancestor (counted once).
Selecting k checks to maximize the covered union is a max-coverage problem;
:func:`greedy_flag_placement` is the standard (1 - 1/e) greedy and
:func:`brute_force_optimal` the exhaustive optimum for small instances.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .circuit import PrepTree
from .errors import InvalidPairError, ResourceLimitError

BRUTE_FORCE_MAX_QUBITS = 16
BRUTE_FORCE_MAX_K = 3


@dataclass(frozen=True)
class CoverageSet:
    pair: tuple[int, int]
    covered: frozenset[int]
    ratio: float


@dataclass(frozen=True)
class FlagPlan:
    pairs: tuple[tuple[int, int], ...]
    union_covered: frozenset[int]
    total_ratio: float
    marginal_gains: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "pairs": [list(p) for p in self.pairs],
            "covered": sorted(self.union_covered),
            "total_ratio": self.total_ratio,
            "marginal_gains": list(self.marginal_gains),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FlagPlan":
        return cls(tuple(tuple(p) for p in data["pairs"]), frozenset(data["covered"]),
                   float(data["total_ratio"]), tuple(data["marginal_gains"]))


def _check_qubit(tree: PrepTree, q: int):
    if not 0 <= q < tree.n:
        raise InvalidPairError(f"qubit {q} not in tree of size {tree.n}")


def _path_to_root(tree: PrepTree, q: int) -> list[int]:
    path = [q]
    while q != tree.root:
        q = tree.parent[q]
        path.append(q)
    return path


def lca(tree: PrepTree, i: int, j: int) -> int:
    """Deepest common ancestor of ``i`` and ``j`` (``lca(i, i) == i``)."""
    _check_qubit(tree, i)
    _check_qubit(tree, j)
    ancestors = set(_path_to_root(tree, i))
    for q in _path_to_root(tree, j):
        if q in ancestors:
            return q
    raise AssertionError("tree has no common root")


def _path_nodes(tree: PrepTree, i: int, j: int) -> frozenset[int]:
    top = lca(tree, i, j)
    nodes = set()
    for q in (i, j):
        while q != top:
            nodes.add(q)
            q = tree.parent[q]
    nodes.add(top)
    return frozenset(nodes)


def coverage_set(tree: PrepTree, i: int, j: int) -> CoverageSet:
    if i == j:
        raise InvalidPairError(f"check needs two distinct qubits, got ({i}, {j})")
    covered = _path_nodes(tree, i, j)
    return CoverageSet((min(i, j), max(i, j)), covered, len(covered) / tree.n)


@lru_cache(maxsize=64)
def _candidate_masks(tree: PrepTree) -> tuple[tuple[tuple[int, int], int], ...]:
    # lexicographic pair order; bitmask of covered qubits per pair
    out = []
    for i, j in itertools.combinations(range(tree.n), 2):
        mask = 0
        for q in _path_nodes(tree, i, j):
            mask |= 1 << q
        out.append(((i, j), mask))
    return tuple(out)


def _plan(tree: PrepTree, pairs, masks) -> FlagPlan:
    union = 0
    gains = []
    for mask in masks:
        gains.append((mask & ~union).bit_count())
        union |= mask
    covered = frozenset(q for q in range(tree.n) if union >> q & 1)
    return FlagPlan(tuple(pairs), covered, len(covered) / tree.n, tuple(gains))


def greedy_flag_placement(tree: PrepTree, k: int) -> FlagPlan:
    """Pick up to ``k`` pairs, each maximizing the newly covered qubit count.

    Ties go to the lexicographically smallest pair; selection stops once no
    pair adds coverage.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if tree.n < 2:
        return _plan(tree, [], [])
    candidates = _candidate_masks(tree)
    union = 0
    pairs, masks = [], []
    for _ in range(k):
        best_gain, best = 0, None
        for pair, mask in candidates:
            gain = (mask & ~union).bit_count()
            if gain > best_gain:
                best_gain, best = gain, (pair, mask)
        if best is None:
            break
        pairs.append(best[0])
        masks.append(best[1])
        union |= best[1]
    return _plan(tree, pairs, masks)


def brute_force_optimal(tree: PrepTree, k: int) -> FlagPlan:
    """Exhaustive max-coverage over all k-subsets of pairs (small trees only).

    The winning subset is the first maximum in lexicographic order; its pairs
    are reported in greedy order so the gains read non-increasing.
    """
    if tree.n > BRUTE_FORCE_MAX_QUBITS or k > BRUTE_FORCE_MAX_K:
        raise ResourceLimitError(
            f"brute force limited to n <= {BRUTE_FORCE_MAX_QUBITS}, k <= {BRUTE_FORCE_MAX_K}")
    candidates = _candidate_masks(tree)
    k = min(k, len(candidates))
    best_size, best = -1, ()
    for combo in itertools.combinations(candidates, k):
        union = 0
        for _, mask in combo:
            union |= mask
        size = union.bit_count()
        if size > best_size:
            best_size, best = size, combo
    # reorder the chosen subset greedily
    remaining = list(best)
    ordered = []
    union = 0
    while remaining:
        pick = max(remaining, key=lambda c: ((c[1] & ~union).bit_count(), [-q for q in c[0]]))
        remaining.remove(pick)
        ordered.append(pick)
        union |= pick[1]
    return _plan(tree, [c[0] for c in ordered], [c[1] for c in ordered])


def marginal_gain(tree: PrepTree, pair, selected) -> int:
    """Qubits ``pair`` covers that none of ``selected`` already does."""
    covered = set()
    for p in selected:
        covered |= coverage_set(tree, *p).covered
    return len(coverage_set(tree, *pair).covered - covered)
