"""Smoke tests for hiddenid and slrd before freezing test oracles."""
import numpy as np

from gridid.netmodel import AdmittanceMatrix, NodePartition, kron_reduce
from gridid.hiddenid import estimate_reduced, hidden_voltages
from gridid.ingest import MeasurementSet
from gridid.slrd import decompose, check_optimality, soft_threshold, svt
from gridid.simgen import generate_scenarios, solve_scenarios, measure
from gridid.netmodel import build_admittance
from gridid.ingest import parse_case_script
import importlib.resources

rng = np.random.default_rng(7)

print("== 1. star hidden-center closed form ==")
t1, t2 = 2.0 - 4.0j, 1.0 - 1.5j
dense = np.array([
    [t1 + t2, -t1, -t2],
    [-t1, t1, 0],
    [-t2, 0, t2],
], dtype=complex)
y = AdmittanceMatrix.from_dense(dense, ("c", "2", "3"))
part = NodePartition.hiding(3, {0})
V = rng.normal(size=(5, 2)) + 1j * rng.normal(size=(5, 2))
vc = hidden_voltages(y, part, V)
expect = (t1 * V[:, 0] + t2 * V[:, 1]) / (t1 + t2)
print("   max err:", np.abs(vc[:, 0] - expect).max())
v1d = hidden_voltages(y, part, V[0])
print("   1-D round trip:", v1d.shape, np.abs(v1d[0] - expect[0]))

print("== 2. 14-bus: recover V7 from true Y ==")
case = parse_case_script((importlib.resources.files("gridid") / "data" / "case14.m").read_text())
yfull = build_admittance(case)
i7 = case.bus_ids.index("7")
part14 = NodePartition.hiding(14, {i7})
states = solve_scenarios(generate_scenarios(case, 6, 0.8, 1.2, seed=3))
m = measure(states, case.bus_ids)
vload = np.asarray(m.v)
v1 = vload[:, [k for k in range(14) if k != i7]]
v2 = hidden_voltages(yfull, part14, v1)
print("   max |V7 - simulator V7|:", np.abs(v2[:, 0] - vload[:, i7]).max())

print("== 3. estimate_reduced vs kron_reduce (random tree, synthetic data) ==")
n = 9
# random tree admittance, shuntless
dense = np.zeros((n, n), dtype=complex)
for v in range(1, n):
    u = int(rng.integers(0, v))
    yuv = rng.uniform(0.5, 3.0) - 1j * rng.uniform(1.0, 6.0)
    dense[u, v] = dense[v, u] = -yuv
for k in range(n):
    dense[k, k] = -dense[k].sum()
labels = tuple(str(k + 1) for k in range(n))
ytree = AdmittanceMatrix.from_dense(dense, labels)
hide = {2, 5}
ptree = NodePartition.hiding(n, hide)
ybar = kron_reduce(ytree, ptree)
K = 20
nobs = len(ptree.observed)
Vo = rng.normal(size=(K, nobs)) + 1j * rng.normal(size=(K, nobs))
Io = Vo @ ybar.to_dense().T
mm = MeasurementSet(observed=ybar.labels, v=Vo, i=Io)
est = estimate_reduced(mm, diagonal="constrained")
print("   max err:", np.abs(est.ybar.to_dense() - ybar.to_dense()).max(),
      "exact flag:", est.diagnostics.exact)

print("== 4. slrd on the same Kron-reduced tree ==")
r = decompose(ybar)
print("   iters:", r.iterations, "converged:", r.converged,
      "primal:", r.primal_residual)
c = r.certificate
print("   cert ok:", c.ok, "| linf", c.linf_margin, "sign", c.sign_margin,
      "| spec", c.spectral_margin, "align", c.alignment_margin,
      "| primal", c.primal_margin)
print("   rank(B):", np.linalg.matrix_rank(r.b, tol=1e-6),
      "nnz(A) re:", int((np.abs(r.a.real) > 1e-6).sum()))
# A should be close to Y11 (observed subnetwork block)
y11 = ytree.to_dense()[np.ix_(ptree.observed, ptree.observed)]
print("   ||A - Y11||max:", np.abs(r.a - y11).max(),
      "  ||Ybar - Y11||max:", np.abs(ybar.to_dense() - y11).max())

print("== 5. certificate falsification: perturb A ==")
import dataclasses
i, j = np.unravel_index(np.abs(r.a).argmax(), r.a.shape)
a_bad = r.a.copy()
a_bad[i, j] += 1e-2
r_bad = dataclasses.replace(r, a=a_bad)
c_bad = check_optimality(r_bad)
print("   perturbed cert ok:", c_bad.ok, "primal margin:", c_bad.primal_margin)

print("== 6. 4-leaf star decomposition ==")
ys = np.array([1.0 - 2.0j, 0.8 - 1.6j, 1.2 - 3.0j, 0.6 - 1.1j])
S = ys.sum()
ybar_star = np.diag(ys) - np.outer(ys, ys) / S
rs = decompose(ybar_star)
print("   iters:", rs.iterations, "converged:", rs.converged, "cert ok:", rs.certificate.ok)
print("   ||A - diag||offdiag max:", np.abs(rs.a - np.diag(np.diag(rs.a))).max())
print("   rank(B):", np.linalg.matrix_rank(rs.b, tol=1e-6))
print("   ||B - yy^T/S||max:", np.abs(rs.b - (-np.outer(ys, ys) / S)).max())

print("== 7. prox operators ==")
x = np.array([[3 + 0.5j, -0.2 - 2j]])
st = soft_threshold(x, 1.0)
print("   soft:", st)
M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
sv_before = np.linalg.svd(M, compute_uv=False)
sv_after = np.linalg.svd(svt(M, sv_before[1]), compute_uv=False)
print("   svt singulars:", np.round(sv_before, 3), "->", np.round(sv_after, 3))
