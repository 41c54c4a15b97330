"""Radial recovery smoke tests across the planned structural cases."""
import numpy as np

from gridid.netmodel import AdmittanceMatrix, NodePartition, kron_reduce
from gridid.radial import (decouple, group_by_hidden, recover_clique,
                           recover_radial, group_table)


def tree_matrix(n, edges, labels=None):
    labels = labels or tuple(str(k + 1) for k in range(n))
    return AdmittanceMatrix.from_lines(labels, [(i, j, y) for i, j, y in edges])


print("== 1. 3-leaf star, hidden center ==")
# center node index 3 ('c'), leaves 1,2,3 with y = 1,2,3
y = AdmittanceMatrix.from_lines(("1", "2", "3", "c"),
                                [(0, 3, 1.0 + 0j), (1, 3, 2.0 + 0j), (2, 3, 3.0 + 0j)])
ybar = kron_reduce(y, NodePartition.hiding(4, {3}))
sep = decouple(ybar)
print("   cliques:", [c.members for c in sep.cliques], "tree entries:", sep.tree_part.entries)
grouping = group_by_hidden(sep.cliques[0])
print("   groups:", grouping.groups, "alpha[0,1]:", grouping.alpha[0, 1])
rec = recover_clique(sep.cliques[0], grouping)
print("   y:", np.round(rec.line_admittance, 12), "Y22:", rec.y22, "resid:", rec.residual)
res = recover_radial(ybar)
print("   hidden:", res.hidden, "roundtrip:", res.roundtrip_error)
full = res.y.to_dense()
print("   recovered vs truth:", np.abs(full - y.to_dense()).max())
print(group_table(res))

print("== 2. pure tree, no hidden ==")
t = tree_matrix(5, [(0, 1, 1 - 2j), (1, 2, 2 - 1j), (1, 3, 0.5 - 3j), (3, 4, 1.5 - 2.5j)])
res2 = recover_radial(t)
print("   hidden:", res2.hidden, "exact:", np.abs(res2.y.to_dense() - t.to_dense()).max())

print("== 3. two adjacent hidden nodes (7-node tree) ==")
# h1 (idx 5) nbrs: 0,1 and h2; h2 (idx 6) nbrs: 2,3,4
edges7 = [(0, 5, 1.0 - 2.0j), (1, 5, 2.0 - 4.0j), (5, 6, 0.8 - 1.5j),
          (2, 6, 1.5 - 3.0j), (3, 6, 0.7 - 2.2j), (4, 6, 1.1 - 1.9j)]
y7 = tree_matrix(7, edges7, labels=("1", "2", "3", "4", "5", "p", "q"))
ybar7 = kron_reduce(y7, NodePartition.hiding(7, {5, 6}))
sep7 = decouple(ybar7)
print("   cliques:", [c.members for c in sep7.cliques])
g7 = group_by_hidden(sep7.cliques[0])
print("   groups:", g7.groups)
r7 = recover_clique(sep7.cliques[0], g7)
print("   y:", np.round(r7.line_admittance, 10))
print("   Y22:\n", np.round(r7.y22, 10))
res7 = recover_radial(ybar7)
print("   hidden:", res7.hidden, "roundtrip:", res7.roundtrip_error)
# compare against truth up to hidden label order: observed labels match
truth = y7.to_dense()
perm = [res7.y.labels.index(l) for l in ("1", "2", "3", "4", "5")]
print("   recovered labels:", res7.y.labels)
rd = res7.y.to_dense()
for hperm in ([5, 6], [6, 5]):
    p = perm + [res7.y.labels.index(res7.hidden[k]) for k in (0, 1)] if hperm == [5, 6] else \
        perm + [res7.y.labels.index(res7.hidden[k]) for k in (1, 0)]
    err = np.abs(rd[np.ix_(p, p)] - truth).max()
    print(f"   err perm {hperm}:", err)

print("== 4. star of stars (recursion) ==")
# deep center C (idx 9); mids m1 m2 m3 (idx 6,7,8); leaves 0..5
edges_ss = [(9, 6, 1.0 - 1.0j), (9, 7, 2.0 - 3.0j), (9, 8, 1.5 - 2.0j),
            (0, 6, 1.2 - 2.5j), (1, 6, 0.9 - 1.8j),
            (2, 7, 2.2 - 4.0j), (3, 7, 1.7 - 2.9j),
            (4, 8, 0.8 - 1.4j), (5, 8, 1.3 - 2.2j)]
yss = tree_matrix(10, edges_ss,
                  labels=("1", "2", "3", "4", "5", "6", "m1", "m2", "m3", "C"))
ybss = kron_reduce(yss, NodePartition.hiding(10, {6, 7, 8, 9}))
resss = recover_radial(ybss)
print("   hidden:", resss.hidden, "roundtrip:", resss.roundtrip_error)
print("   labels:", resss.y.labels)
print(group_table(resss))
# truth comparison up to hidden permutation: try mapping by groups
# m1 leaves {1,2}, m2 {3,4}, m3 {5,6}; C has no observed member
import itertools
best = np.inf
obs = ("1", "2", "3", "4", "5", "6")
for pm in itertools.permutations(resss.hidden):
    p = [resss.y.labels.index(l) for l in obs] + [resss.y.labels.index(h) for h in pm]
    err = np.abs(resss.y.to_dense()[np.ix_(p, p)] - yss.to_dense()).max()
    best = min(best, err)
print("   best perm err:", best)

print("== 5. 12-node minimal equivalent (paper Example 3 shape) ==")
rng = np.random.default_rng(11)
edges12_idx = [(0, 2), (2, 3), (3, 4), (4, 5), (3, 6), (1, 9), (9, 8),
               (8, 10), (10, 11), (8, 7), (6, 7)]
vals = [complex(rng.uniform(0.5, 3), -rng.uniform(1, 5)) for _ in edges12_idx]
y12 = tree_matrix(12, [(i, j, v) for (i, j), v in zip(edges12_idx, vals)])
hidden12 = {2, 3, 4, 9, 10}
yb12 = kron_reduce(y12, NodePartition.hiding(12, hidden12))
res12 = recover_radial(yb12)
print("   hidden found:", res12.hidden, "roundtrip:", res12.roundtrip_error)
# oracle: partial reduction eliminating only the degree<3 hiddens {2,4,9,10}
minimal = kron_reduce(y12, NodePartition.hiding(12, {2, 4, 9, 10}))
print("   minimal labels:", minimal.labels)
p = [res12.y.labels.index(res12.hidden[0]) if l == "4" else res12.y.labels.index(l)
     for l in minimal.labels]
print("   vs minimal equivalent:", np.abs(res12.y.to_dense()[np.ix_(p, p)] - minimal.to_dense()).max())
EOF_MARKER = None
