"""Admittance matrices, their graphs, and Kron reduction.

Sign convention used throughout the package: for a line between buses i and j
with series admittance y_ij, the off-diagonal entry is Y[i,j] = -y_ij and the
diagonal accumulates Y[i,i] = sum_j y_ij plus any shunt. Rows of a shuntless
matrix therefore sum to zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import KronError, ValidationError

if TYPE_CHECKING:
    from .ingest import NetworkCase

# Edge detection: entries below this fraction of the largest magnitude are dust.
ZERO_THRESHOLD_SCALE = 1e-6
# Reductions are refused when Y22 looks numerically singular.
RCOND_LIMIT = 1e-12


@dataclass(frozen=True)
class AdmittanceMatrix:
    """N x N complex symmetric matrix stored once per unordered index pair.

    ``entries`` maps (i, j) with i <= j to the complex per-unit value; omitted
    pairs are zero. Values are never mutated after construction.
    """

    labels: tuple[str, ...]
    entries: dict[tuple[int, int], complex]

    def __post_init__(self):
        n = len(self.labels)
        if n == 0:
            raise ValidationError("admittance matrix needs at least one node")
        if len(set(self.labels)) != n:
            raise ValidationError("bus labels must be unique")
        for i, j in self.entries:
            if not (0 <= i <= j < n):
                raise ValidationError(f"entry index ({i},{j}) out of range for n={n}")

    @property
    def n(self) -> int:
        return len(self.labels)

    @classmethod
    def from_dense(cls, dense: np.ndarray, labels: tuple[str, ...] | None = None,
                   symmetry_tol: float = 1e-8) -> "AdmittanceMatrix":
        dense = np.asarray(dense, dtype=complex)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {dense.shape}")
        n = dense.shape[0]
        scale = max(np.abs(dense).max(), 1.0)
        asym = np.abs(dense - dense.T).max()
        if asym > symmetry_tol * scale:
            raise ValidationError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
        if labels is None:
            labels = tuple(str(k + 1) for k in range(n))
        entries: dict[tuple[int, int], complex] = {}
        for i in range(n):
            for j in range(i, n):
                v = 0.5 * (dense[i, j] + dense[j, i]) if i != j else dense[i, i]
                if v != 0:
                    entries[(i, j)] = complex(v)
        return cls(tuple(labels), entries)

    @classmethod
    def from_lines(cls, labels: tuple[str, ...],
                   lines: list[tuple[int, int, complex]],
                   shunts: dict[int, complex] | None = None) -> "AdmittanceMatrix":
        """Assemble from line admittances (i, j, y); diagonal = incident sum + shunt."""
        n = len(labels)
        dense = np.zeros((n, n), dtype=complex)
        for i, j, y in lines:
            if i == j:
                raise ValidationError(f"line endpoints must differ, got ({i},{i})")
            dense[i, j] -= y
            dense[j, i] -= y
            dense[i, i] += y
            dense[j, j] += y
        for i, y in (shunts or {}).items():
            dense[i, i] += y
        return cls.from_dense(dense, labels)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n), dtype=complex)
        for (i, j), v in self.entries.items():
            dense[i, j] = v
            dense[j, i] = v
        return dense

    def __getitem__(self, pair: tuple[int, int]) -> complex:
        i, j = pair
        return self.entries.get((i, j) if i <= j else (j, i), 0j)

    def max_abs(self) -> float:
        if not self.entries:
            return 0.0
        return max(abs(v) for v in self.entries.values())

    def row_sums(self) -> np.ndarray:
        return self.to_dense().sum(axis=1)

    def is_shuntless(self, tol: float = 1e-9) -> bool:
        """True when every row sums to zero within tol * max|entry|."""
        scale = max(self.max_abs(), 1.0)
        return bool(np.abs(self.row_sums()).max() <= tol * scale)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown bus label {label!r}") from None


@dataclass(frozen=True)
class NodePartition:
    """Split of indices 0..n-1 into observed (M1) and hidden (M2), order kept."""

    observed: tuple[int, ...]
    hidden: tuple[int, ...]

    def __post_init__(self):
        seen = set(self.observed) | set(self.hidden)
        if len(self.observed) + len(self.hidden) != len(seen):
            raise ValidationError("observed and hidden sets must be disjoint")
        n = len(seen)
        if seen != set(range(n)):
            raise ValidationError("partition must cover 0..n-1 exactly")

    @property
    def n(self) -> int:
        return len(self.observed) + len(self.hidden)

    @classmethod
    def hiding(cls, n: int, hidden: tuple[int, ...] | list[int] | set[int]) -> "NodePartition":
        hidden_set = set(hidden)
        if not hidden_set <= set(range(n)):
            raise ValidationError("hidden indices out of range")
        observed = tuple(i for i in range(n) if i not in hidden_set)
        return cls(observed, tuple(sorted(hidden_set)))


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected simple graph on nodes 0..n-1."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ValidationError(f"bad edge ({i},{j}) for n={self.n}")

    def neighbors(self, i: int) -> frozenset[int]:
        return frozenset(b if a == i else a for a, b in self.edges if i in (a, b))

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {i: set() for i in range(self.n)}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def component_count(self) -> int:
        adj = self.adjacency()
        seen: set[int] = set()
        count = 0
        for start in range(self.n):
            if start in seen:
                continue
            count += 1
            stack = [start]
            seen.add(start)
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
        return count

    def is_connected(self) -> bool:
        return self.component_count() == 1

    def is_forest(self) -> bool:
        return len(self.edges) == self.n - self.component_count()


def build_admittance(case: "NetworkCase", mode: str = "physical") -> AdmittanceMatrix:
    """Assemble the nodal admittance matrix of a case.

    mode "physical": line charging, off-nominal taps and bus shunts included
    (branch f-t with series y, total charging b_c, tap tau contributes
    (y + j b_c/2)/tau^2 at [f,f], y + j b_c/2 at [t,t], -y/tau at [f,t]).
    mode "shuntless": series admittances only; rows sum to zero.
    """
    if mode not in ("physical", "shuntless"):
        raise ValidationError(f"unknown mode {mode!r}")
    labels = case.bus_ids
    index = {b: k for k, b in enumerate(labels)}
    dense = np.zeros((len(labels), len(labels)), dtype=complex)
    for br in case.branches:
        if br.r == 0 and br.x == 0:
            raise ValidationError(f"branch {br.from_bus}-{br.to_bus} has zero impedance")
        if br.from_bus not in index or br.to_bus not in index:
            missing = br.from_bus if br.from_bus not in index else br.to_bus
            raise ValidationError(f"branch references unknown bus {missing!r}")
        y = 1.0 / complex(br.r, br.x)
        f, t = index[br.from_bus], index[br.to_bus]
        if mode == "physical":
            half_charge = 0.5j * br.b_charging
            dense[f, f] += (y + half_charge) / br.tap**2
            dense[t, t] += y + half_charge
            dense[f, t] -= y / br.tap
            dense[t, f] -= y / br.tap
        else:
            dense[f, f] += y
            dense[t, t] += y
            dense[f, t] -= y
            dense[t, f] -= y
    if mode == "physical":
        for k, bus in enumerate(case.buses):
            dense[k, k] += complex(bus.shunt_g, bus.shunt_b)
    return AdmittanceMatrix.from_dense(dense, labels)


def graph_of(y: AdmittanceMatrix, zero_threshold: float | None = None) -> NetworkGraph:
    """Edges are the off-diagonal entries with magnitude above the threshold."""
    if zero_threshold is None:
        zero_threshold = ZERO_THRESHOLD_SCALE * y.max_abs()
    if zero_threshold < 0:
        raise ValidationError("zero threshold must be nonnegative")
    edges = frozenset((i, j) for (i, j), v in y.entries.items()
                      if i != j and abs(v) > zero_threshold)
    return NetworkGraph(y.n, edges)


def is_radial(g: NetworkGraph) -> bool:
    """True for trees: connected with exactly n-1 edges."""
    return g.is_connected() and len(g.edges) == g.n - 1


def kron_reduce(y: AdmittanceMatrix, part: NodePartition) -> AdmittanceMatrix:
    """Schur complement onto the observed set: Ybar = Y11 - Y12 Y22^-1 Y21."""
    if part.n != y.n:
        raise KronError(f"partition covers {part.n} nodes, matrix has {y.n}")
    if not part.observed:
        raise KronError("cannot reduce away every node")
    if not part.hidden:
        return AdmittanceMatrix.from_dense(
            y.to_dense()[np.ix_(part.observed, part.observed)],
            tuple(y.labels[i] for i in part.observed))
    dense = y.to_dense()
    obs = list(part.observed)
    hid = list(part.hidden)
    y11 = dense[np.ix_(obs, obs)]
    y12 = dense[np.ix_(obs, hid)]
    y22 = dense[np.ix_(hid, hid)]
    svals = np.linalg.svd(y22, compute_uv=False)
    if svals[0] == 0 or svals[-1] / svals[0] < RCOND_LIMIT:
        raise KronError("hidden block Y22 is numerically singular "
                        f"(rcond {0 if svals[0] == 0 else svals[-1] / svals[0]:.2e})")
    reduced = y11 - y12 @ np.linalg.solve(y22, y12.T)
    reduced = 0.5 * (reduced + reduced.T)
    return AdmittanceMatrix.from_dense(reduced, tuple(y.labels[i] for i in obs))


def eliminate_node(y: AdmittanceMatrix, i: int) -> AdmittanceMatrix:
    """Single-node Schur complement Y/Y[i,i]; neighbors of i become a clique."""
    if not 0 <= i < y.n:
        raise KronError(f"node index {i} out of range")
    if y.n == 1:
        raise KronError("cannot eliminate the only node")
    dense = y.to_dense()
    pivot = dense[i, i]
    if abs(pivot) <= RCOND_LIMIT * max(y.max_abs(), 1.0):
        raise KronError(f"pivot Y[{i},{i}] = {pivot:.3e} too small to eliminate")
    keep = [k for k in range(y.n) if k != i]
    col = dense[keep, i]
    reduced = dense[np.ix_(keep, keep)] - np.outer(col, col) / pivot
    reduced = 0.5 * (reduced + reduced.T)
    return AdmittanceMatrix.from_dense(reduced, tuple(y.labels[k] for k in keep))


def sequential_reduce(y: AdmittanceMatrix, hidden: tuple[int, ...] | list[int],
                      order: list[int] | None = None) -> AdmittanceMatrix:
    """Fold eliminate_node over the hidden set.

    ``order``, when given, is a permutation of ``hidden``; the default is
    ascending index. Equivalent to kron_reduce in every order.
    """
    remaining = list(y.labels)
    todo = [y.labels[i] for i in (order if order is not None else sorted(hidden))]
    if sorted(todo) != sorted(y.labels[i] for i in hidden):
        raise KronError("elimination order must be a permutation of the hidden set")
    out = y
    for label in todo:
        out = eliminate_node(out, remaining.index(label))
        remaining.remove(label)
    return out


@dataclass(frozen=True)
class IdentifiabilityReport:
    """Hidden nodes of degree < 3 cannot be recovered; degree >= 3 is required."""

    hidden_degrees: dict[int, int]
    unidentifiable: tuple[int, ...]
    assumption_holds: bool


def identifiability_report(g: NetworkGraph, part: NodePartition) -> IdentifiabilityReport:
    if part.n != g.n:
        raise ValidationError(f"partition covers {part.n} nodes, graph has {g.n}")
    degrees = {h: g.degree(h) for h in part.hidden}
    bad = tuple(h for h in part.hidden if degrees[h] < 3)
    return IdentifiabilityReport(degrees, bad, not bad)
