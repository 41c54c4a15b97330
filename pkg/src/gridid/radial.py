"""Exact recovery of a radial network from its Kron reduction.

Eliminating a hidden node of a tree turns its neighborhood into a clique,
and for radial ground truth the fill cliques are node-disjoint from the
surviving tree edges.  Recovery therefore runs in stages: split the graph
of the reduced matrix into fill cliques and a leftover forest, group each
clique's nodes by their hidden neighbor with a row-ratio test, recover
the line admittances into each hidden node in closed form, and solve a
small least-squares system for the hidden-block inverse.  When the
recovered hidden block itself contains cycles it is the reduction of a
deeper hidden layer, and the same procedure recurses on it.

Internally the network is carried as a set of line admittances plus a
per-node row-sum excess; diagonals are materialized only in the final
assembly (observed nodes keep the excess of the input matrix, hidden
nodes are assumed shuntless).  Nothing ever consumes the diagonal of a
working matrix, which is what makes the recursion sound: intermediate
hidden blocks carry the admittances of already-recovered edges on their
diagonals, and those must not be interpreted as shunts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KronError, RecoveryError, ValidationError
from .netmodel import (RCOND_LIMIT, AdmittanceMatrix, NetworkGraph, graph_of,
                       kron_reduce, NodePartition)

TOL_RATIO = 1e-6
# documented default for measured (noisy) reductions
TOL_RATIO_NOISY = 1e-3
TOL_ROUNDTRIP = 1e-6


@dataclass(frozen=True)
class Clique:
    """One fill clique: global member positions and its off-diagonal block.

    ``block`` is m x m with zero diagonal; diagonal allocation is deferred
    to the recovery stage, which rebuilds it from the zero-row-sum rule.
    """

    members: tuple[int, ...]
    block: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Separation:
    """Edge-disjoint split of a reduced matrix into forest plus cliques."""

    labels: tuple[str, ...]
    tree_part: AdmittanceMatrix
    cliques: tuple[Clique, ...]
    diagonal: np.ndarray


@dataclass(frozen=True)
class HiddenGrouping:
    """Partition of a clique's nodes by shared hidden neighbor.

    ``groups`` holds local indices into the clique block; ``alpha[j, k]``
    is the fitted admittance ratio y_j / y_k and ``beta[j, k]`` marks
    pairs whose rows are proportional on the shared columns.
    """

    clique: Clique
    groups: tuple[tuple[int, ...], ...]
    alpha: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class CliqueRecovery:
    """Recovered structure of one clique: lines to hidden nodes and their block."""

    clique: Clique
    groups: tuple[tuple[int, ...], ...]
    line_admittance: np.ndarray
    y22: np.ndarray
    residual: float


@dataclass(frozen=True)
class RecoveryResult:
    """Full recovered admittance matrix with canonical hidden labels."""

    y: AdmittanceMatrix
    hidden: tuple[str, ...]
    groups: tuple[tuple[str, str], ...]
    roundtrip_error: float


def _maximal_cliques(graph: NetworkGraph) -> list[tuple[int, ...]]:
    """Bron-Kerbosch with pivoting; results sorted for determinism."""
    adj = {i: frozenset(s) for i, s in graph.adjacency().items()}
    out: list[tuple[int, ...]] = []

    def expand(r: set[int], p: set[int], x: set[int]):
        if not p and not x:
            out.append(tuple(sorted(r)))
            return
        # pivot: most candidate neighbors, smallest index on ties
        pivot = max(sorted(p | x), key=lambda u: len(adj[u] & p))
        for v in sorted(p - adj[pivot]):
            expand(r | {v}, p & adj[v], x & adj[v])
            p.remove(v)
            x.add(v)

    expand(set(), set(range(graph.n)), set())
    out.sort(key=lambda c: (-len(c), c))
    return out


def decouple(ybar: AdmittanceMatrix, zero_threshold: float | None = None) -> Separation:
    """Split the graph of a reduced matrix into fill cliques and a forest.

    Every maximal clique on at least 3 nodes is taken to be Kron fill and
    peeled; for radial ground truth those cliques share no edge, so two
    cliques overlapping in 2 or more nodes, or a cycle in the remainder,
    signal a non-radial network (or noise above the zero threshold) and
    raise RecoveryError.
    """
    g = graph_of(ybar, zero_threshold)
    dense = ybar.to_dense()
    cliques: list[Clique] = []
    claimed: set[tuple[int, int]] = set()
    found = [c for c in _maximal_cliques(g) if len(c) >= 3]
    for a in range(len(found)):
        for b in range(a + 1, len(found)):
            shared = set(found[a]) & set(found[b])
            if len(shared) >= 2:
                raise RecoveryError("two cliques share an edge; ground truth "
                                    "is not radial or noise exceeds the zero "
                                    "threshold", stage="decouple",
                                    clique=tuple(sorted(shared)))
    for members in found:
        block = dense[np.ix_(members, members)].copy()
        np.fill_diagonal(block, 0.0)
        cliques.append(Clique(members=members, block=block))
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                claimed.add((members[i], members[j]))
    tree_edges = g.edges - claimed
    remainder = NetworkGraph(g.n, frozenset(tree_edges))
    if not remainder.is_forest():
        raise RecoveryError("leftover edges contain a cycle; ground truth is "
                            "not radial", stage="decouple")
    tree_dense = np.zeros_like(dense)
    for i, j in tree_edges:
        tree_dense[i, j] = tree_dense[j, i] = dense[i, j]
    return Separation(labels=ybar.labels,
                      tree_part=AdmittanceMatrix.from_dense(tree_dense, ybar.labels),
                      cliques=tuple(cliques),
                      diagonal=dense.diagonal().copy())


def group_by_hidden(clique: Clique, tol_ratio: float = TOL_RATIO) -> HiddenGrouping:
    """Partition a clique's nodes into one group per hidden neighbor.

    Two rows of the fill block are proportional on their shared columns
    exactly when the two nodes attach to the same hidden node; the ratio
    is the ratio of their line admittances.  The fit is least squares over
    all shared columns, which reduces to the exact ratio on clean data.
    """
    m = clique.size
    if m < 3:
        raise ValidationError("a fill clique has at least 3 nodes")
    block = clique.block
    alpha = np.zeros((m, m), dtype=complex)
    beta = np.eye(m, dtype=bool)
    for j in range(m):
        for k in range(m):
            if j == k:
                continue
            cols = [i for i in range(m) if i != j and i != k]
            rj = block[j, cols]
            rk = block[k, cols]
            denom = np.vdot(rk, rk)
            if abs(denom) == 0.0:
                continue
            a = np.vdot(rk, rj) / denom
            res = np.linalg.norm(rj - a * rk) / max(np.linalg.norm(rj), 1e-300)
            alpha[j, k] = a
            if j < k:
                ok = res <= tol_ratio
                beta[j, k] = beta[k, j] = ok

    # connected components of beta, then transitivity audit
    unassigned = set(range(m))
    groups: list[tuple[int, ...]] = []
    while unassigned:
        seed = min(unassigned)
        comp = {seed}
        stack = [seed]
        while stack:
            u = stack.pop()
            for v in list(unassigned - comp):
                if beta[u, v]:
                    comp.add(v)
                    stack.append(v)
        unassigned -= comp
        groups.append(tuple(sorted(comp)))
    groups.sort()
    for grp in groups:
        for a_i in grp:
            for b_i in grp:
                if not beta[a_i, b_i]:
                    raise RecoveryError("ratio test is not transitive at this "
                                        "tolerance", stage="grouping",
                                        clique=clique.members)
        if len(grp) == 1:
            raise RecoveryError("a hidden node has a single observed neighbor "
                                "in this clique; its line admittance is not "
                                "recoverable", stage="grouping",
                                clique=clique.members)
    return HiddenGrouping(clique=clique, groups=tuple(groups), alpha=alpha, beta=beta)


def recover_clique(clique: Clique, grouping: HiddenGrouping,
                   tol: float = TOL_ROUNDTRIP) -> CliqueRecovery:
    """Recover line admittances and the hidden-block inverse of one clique.

    The zero-row-sum completion B of the fill block satisfies
    B = diag(y) - F with F the Schur correction, so the line admittance of
    node j follows from any in-group partner k as B[j,j] - B[j,k]*alpha[j,k]
    (averaged over partners).  F = diag(y) - B is then fully known and
    F[j,k] = y_j y_k X[g(j), g(k)] is solved for the symmetric X = Y22^-1
    in least squares over all node pairs including j = k.
    """
    m = clique.size
    b = clique.block.copy()
    np.fill_diagonal(b, 0.0)
    np.fill_diagonal(b, -b.sum(axis=1))
    group_of = np.empty(m, dtype=int)
    for gi, grp in enumerate(grouping.groups):
        for j in grp:
            group_of[j] = gi
    y = np.zeros(m, dtype=complex)
    for gi, grp in enumerate(grouping.groups):
        for j in grp:
            vals = [b[j, j] - b[j, k] * grouping.alpha[j, k] for k in grp if k != j]
            y[j] = np.mean(vals)
    if np.abs(y).min() == 0.0:
        raise RecoveryError("a recovered line admittance is zero",
                            stage="clique-solve", clique=clique.members)

    f = np.diag(y) - b
    h = len(grouping.groups)
    # svec slots for the symmetric unknown X, upper triangle by (row, col)
    slots = [(r, c) for r in range(h) for c in range(r, h)]
    slot_of = {rc: s for s, rc in enumerate(slots)}
    rows = []
    rhs = []
    for j in range(m):
        for k in range(j, m):
            coeff = np.zeros(len(slots), dtype=complex)
            gj, gk = sorted((group_of[j], group_of[k]))
            coeff[slot_of[(gj, gk)]] = y[j] * y[k]
            rows.append(coeff)
            rhs.append(f[j, k])
    design = np.array(rows)
    sol, _, rank, _ = np.linalg.lstsq(design, np.array(rhs), rcond=None)
    if rank < len(slots):
        raise RecoveryError("hidden-block system is rank deficient",
                            stage="clique-solve", clique=clique.members)
    x = np.zeros((h, h), dtype=complex)
    for s, (r, c) in enumerate(slots):
        x[r, c] = x[c, r] = sol[s]

    f_hat = (np.outer(y, y)) * x[np.ix_(group_of, group_of)]
    scale = max(float(np.abs(f).max()), 1.0)
    residual = float(np.abs(f_hat - f).max()) / scale
    if residual > tol:
        raise RecoveryError(f"clique does not reproduce its fill block "
                            f"(relative residual {residual:.3e})",
                            stage="clique-solve", clique=clique.members)
    sv = np.linalg.svd(x, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < RCOND_LIMIT:
        raise RecoveryError("recovered hidden block is singular",
                            stage="clique-solve", clique=clique.members)
    y22 = np.linalg.inv(x)
    y22 = 0.5 * (y22 + y22.T)
    return CliqueRecovery(clique=clique, groups=grouping.groups,
                          line_admittance=y, y22=y22, residual=residual)


def _canonical_names(observed: tuple[str, ...],
                     hidden_ids: list[str],
                     edges: dict[tuple[str, str], complex]) -> dict[str, str]:
    """Deterministic hidden names derived from observed neighbors only.

    Each hidden node gets the smallest resolved neighbor key, propagated
    from the observed labels; ordering is by (key, sorted neighbor keys)
    so relabeling observed nodes permutes the result consistently.
    """
    neigh: dict[str, set[str]] = {}
    for (a, b) in edges:
        neigh.setdefault(a, set()).add(b)
        neigh.setdefault(b, set()).add(a)
    key: dict[str, str] = {o: o for o in observed}
    pending = set(hidden_ids)
    while pending:
        progressed = False
        for hid in sorted(pending):
            resolved = [key[nb] for nb in neigh.get(hid, ()) if nb in key]
            if resolved:
                key[hid] = min(resolved)
                pending.discard(hid)
                progressed = True
        if not progressed:
            # disconnected hidden node cannot happen for tree input
            raise RecoveryError("hidden node disconnected from observed set",
                                stage="assembly")
    prefix = "h"
    taken = set(observed)
    if any(lbl.startswith("h") and lbl[1:].isdigit() for lbl in observed):
        prefix = "hidden"
    order = sorted(hidden_ids,
                   key=lambda hid: (key[hid],
                                    tuple(sorted(key.get(nb, nb) for nb in neigh.get(hid, ())))))
    return {hid: f"{prefix}{i + 1}" for i, hid in enumerate(order)}


def recover_radial(ybar: AdmittanceMatrix, zero_threshold: float | None = None,
                   tol_ratio: float = TOL_RATIO,
                   tol: float = TOL_ROUNDTRIP) -> RecoveryResult:
    """Rebuild the full radial admittance matrix from its Kron reduction.

    Stages: decouple, per-clique grouping and recovery, recursion on
    hidden blocks whose graphs are not forests, then a single assembly
    that places every recovered line admittance and rebuilds diagonals
    (input row-sum excess on observed nodes, shuntless hidden nodes).
    The assembled matrix is checked by reducing it back onto the observed
    set and comparing against the input.
    """
    observed = ybar.labels
    edges: dict[tuple[str, str], complex] = {}
    group_rows: list[tuple[str, str]] = []
    hidden_ids: list[str] = []
    counter = [0]
    max_depth = max(1, len(observed))

    def fresh_hidden() -> str:
        counter[0] += 1
        return f"@{counter[0]}"

    def edge_key(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a <= b else (b, a)

    def add_edge(a: str, b: str, value: complex):
        k = edge_key(a, b)
        if k in edges:
            raise RecoveryError(f"edge {k} recovered twice", stage="assembly")
        edges[k] = value

    def walk(level: AdmittanceMatrix, depth: int):
        if depth > max_depth:
            raise RecoveryError("recursion depth exceeded; hidden structure "
                                "does not terminate", stage="recursion")
        sep = decouple(level, zero_threshold)
        for (i, j), v in sorted(sep.tree_part.entries.items()):
            if i != j:
                add_edge(level.labels[i], level.labels[j], -v)
        for clique in sep.cliques:
            grouping = group_by_hidden(clique, tol_ratio)
            rec = recover_clique(clique, grouping, tol)
            locals_ = [fresh_hidden() for _ in grouping.groups]
            hidden_ids.extend(locals_)
            for gi, grp in enumerate(grouping.groups):
                for j in grp:
                    member = level.labels[clique.members[j]]
                    add_edge(member, locals_[gi], rec.line_admittance[j])
                    group_rows.append((locals_[gi], member))
            if len(locals_) > 1:
                walk(AdmittanceMatrix.from_dense(rec.y22, tuple(locals_)),
                     depth + 1)

    walk(ybar, 1)

    names = _canonical_names(observed, hidden_ids, edges)
    all_labels = tuple(observed) + tuple(sorted(names.values()))
    index = {lbl: i for i, lbl in enumerate(all_labels)}

    def resolve(lbl: str) -> str:
        return names.get(lbl, lbl)

    n = len(all_labels)
    dense = np.zeros((n, n), dtype=complex)
    for (a, b), val in edges.items():
        i, j = index[resolve(a)], index[resolve(b)]
        dense[i, j] -= val
        dense[j, i] -= val
    excess = ybar.row_sums()
    for i in range(n):
        dense[i, i] = -dense[i].sum()
    for pos, lbl in enumerate(observed):
        dense[index[lbl], index[lbl]] += excess[pos]

    recovered = AdmittanceMatrix.from_dense(dense, all_labels)
    hidden = tuple(sorted(names.values()))
    if hidden:
        part = NodePartition(tuple(range(len(observed))),
                             tuple(index[hl] for hl in hidden))
        try:
            back = kron_reduce(recovered, part).to_dense()
        except KronError as exc:
            raise RecoveryError(f"recovered hidden block cannot be reduced: {exc}",
                                stage="assembly") from exc
    else:
        back = recovered.to_dense()
    scale = max(ybar.max_abs(), 1.0)
    roundtrip = float(np.abs(back - ybar.to_dense()).max()) / scale
    if roundtrip > tol:
        raise RecoveryError(f"reduction of the recovered network does not "
                            f"reproduce the input (relative error "
                            f"{roundtrip:.3e})", stage="assembly")
    groups = tuple(sorted((resolve(hid), resolve(member)) for hid, member in group_rows))
    return RecoveryResult(y=recovered, hidden=hidden, groups=groups,
                          roundtrip_error=roundtrip)


def group_table(result: RecoveryResult) -> str:
    """Serialize group assignments as `hidden_id,observed_member` lines."""
    lines = ["hidden_id,observed_member"]
    lines += [f"{hid},{member}" for hid, member in result.groups]
    return "\n".join(lines) + "\n"
