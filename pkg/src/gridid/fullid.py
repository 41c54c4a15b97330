"""Least-squares admittance identification from fully observed buses.

The current balance I = YV at K time slots is linear in the entries of Y,
so identification is a linear least-squares problem once the symmetric
matrix is flattened into its free parameters: one complex unknown per
unordered pair of buses, plus one per diagonal entry when row sums are not
constrained to zero.  ``StructureMap`` fixes that parameter order,
``build_gamma`` exposes the corresponding lifting map from parameters to
the full vectorized matrix, and the two estimators solve the stacked
system in the realified domain so that standard real-valued solvers apply.

The design matrix is assembled one equation block per bus directly from
the voltage array.  The Kronecker-product form of the stacked system is
never materialized; it is quadratic in the network size and entirely
redundant since each block only touches a handful of parameter columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, ValidationError
from .ingest import MeasurementSet, ensure_currents
from .netmodel import AdmittanceMatrix

# Relative cutoff under which singular values count as zero.
RANK_RCOND = 1e-10


@dataclass(frozen=True)
class StructureMap:
    """Parameter layout for a symmetric n x n admittance matrix.

    Column order of the parameter vector: all unordered pairs (i, j) with
    i < j, sorted by (i, j) (the lower triangle read column by column),
    followed by one column per free diagonal entry in index order.

    ``diagonal`` selects the diagonal rule:

    * ``"constrained"``: each diagonal entry is the negated sum of the
      off-diagonal entries in its row, so rows sum to zero and the
      diagonal needs no parameters of its own.
    * ``"free"``: each diagonal entry is an independent parameter; this
      is required when shunts or off-nominal transformer taps are present.

    ``known_diagonal`` maps bus indices to fixed diagonal values.  A known
    entry is removed from the unknowns (free mode) or overrides the row
    rule (constrained mode) and is moved to the right-hand side at solve
    time.
    """

    n: int
    diagonal: str = "constrained"
    known_diagonal: dict[int, complex] | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("structure map needs at least two buses")
        if self.diagonal not in ("constrained", "free"):
            raise ValidationError(f"unknown diagonal mode {self.diagonal!r}")
        if self.known_diagonal:
            for idx in self.known_diagonal:
                if not 0 <= idx < self.n:
                    raise ValidationError(f"known diagonal index {idx} out of range")

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        n = self.n
        return tuple((i, j) for i in range(n) for j in range(i + 1, n))

    @property
    def free_diagonals(self) -> tuple[int, ...]:
        if self.diagonal != "free":
            return ()
        known = self.known_diagonal or {}
        return tuple(i for i in range(self.n) if i not in known)

    @property
    def size(self) -> int:
        """Number of complex parameters."""
        return len(self.pairs) + len(self.free_diagonals)


@dataclass(frozen=True)
class EstimateDiagnostics:
    """Solve-quality report attached to every estimate.

    ``exact`` is True only when the data provably pins down a unique
    minimizer: at least as many slots as buses, voltage matrix of full
    column rank, and a full-rank design matrix.
    """

    slots: int
    rank_v: int
    rank_design: int
    columns: int
    sigma_min: float
    residual: float
    exact: bool


def build_gamma(smap: StructureMap) -> np.ndarray:
    """Lifting matrix from the parameter vector to the vectorized matrix.

    Returns the real n^2 x p matrix G with vec(Y) = G @ theta for every
    symmetric Y following the map's diagonal rule, vec taken column-major.
    Known diagonal entries are constants, not parameters; their rows are
    zero here and their values enter the estimators' right-hand side.
    """
    n = smap.n
    known = smap.known_diagonal or {}
    gamma = np.zeros((n * n, smap.size))
    for col, (i, j) in enumerate(smap.pairs):
        gamma[i + n * j, col] = 1.0
        gamma[j + n * i, col] = 1.0
        if smap.diagonal == "constrained":
            # diag = -(row sum of off-diagonals), unless pinned
            if i not in known:
                gamma[i + n * i, col] = -1.0
            if j not in known:
                gamma[j + n * j, col] = -1.0
    base = len(smap.pairs)
    for k, d in enumerate(smap.free_diagonals):
        gamma[d + n * d, base + k] = 1.0
    return gamma


def realify(m: np.ndarray) -> np.ndarray:
    """Real 2x2 block embedding [[Re, -Im], [Im, Re]] of a complex matrix."""
    m = np.asarray(m, dtype=complex)
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def svec_of(y: AdmittanceMatrix, smap: StructureMap) -> np.ndarray:
    """Parameter vector of a matrix under the map's layout."""
    if y.n != smap.n:
        raise ValidationError(f"matrix order {y.n} does not match map order {smap.n}")
    theta = np.zeros(smap.size, dtype=complex)
    for col, (i, j) in enumerate(smap.pairs):
        theta[col] = y[i, j]
    base = len(smap.pairs)
    for k, d in enumerate(smap.free_diagonals):
        theta[base + k] = y[d, d]
    return theta


def matrix_from_svec(smap: StructureMap, theta: np.ndarray,
                     labels: tuple[str, ...]) -> AdmittanceMatrix:
    """Rebuild the symmetric matrix a parameter vector describes."""
    theta = np.asarray(theta, dtype=complex)
    if theta.shape != (smap.size,):
        raise ValidationError(f"expected {smap.size} parameters, got {theta.shape}")
    n = smap.n
    dense = np.zeros((n, n), dtype=complex)
    for col, (i, j) in enumerate(smap.pairs):
        dense[i, j] = dense[j, i] = theta[col]
    if smap.diagonal == "constrained":
        np.fill_diagonal(dense, -(dense.sum(axis=1)))
    else:
        base = len(smap.pairs)
        for k, d in enumerate(smap.free_diagonals):
            dense[d, d] = theta[base + k]
    for d, value in (smap.known_diagonal or {}).items():
        dense[d, d] = value
    return AdmittanceMatrix.from_dense(dense, labels)


def _design(smap: StructureMap, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stacked design matrix and right-hand-side offset.

    Block c (rows c*K .. c*K+K-1) is bus c's current balance over the K
    slots.  The offset collects the known-diagonal contributions that the
    caller must subtract from vec(I) before solving.
    """
    k, n = v.shape
    known = smap.known_diagonal or {}
    m = np.zeros((k * n, smap.size), dtype=complex)
    offset = np.zeros(k * n, dtype=complex)
    for col, (i, j) in enumerate(smap.pairs):
        for c, other in ((i, j), (j, i)):
            block = slice(c * k, (c + 1) * k)
            if smap.diagonal == "constrained" and c not in known:
                m[block, col] = v[:, other] - v[:, c]
            else:
                m[block, col] = v[:, other]
    base = len(smap.pairs)
    for idx, d in enumerate(smap.free_diagonals):
        m[d * k:(d + 1) * k, base + idx] = v[:, d]
    for d, value in known.items():
        offset[d * k:(d + 1) * k] = value * v[:, d]
    return m, offset


def _prepared(m: MeasurementSet, smap: StructureMap) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = ensure_currents(m)
    if len(m.observed) != smap.n:
        raise EstimationError(f"{len(m.observed)} observed buses but the structure "
                              f"map describes {smap.n}")
    if m.slots < 1:
        raise EstimationError("no time slots to estimate from")
    design, offset = _design(smap, m.v)
    rhs = np.asarray(m.i, dtype=complex).T.reshape(-1) - offset
    return m.v, design, rhs


def _rank_of(a: np.ndarray) -> int:
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0:
        return 0
    return int(np.count_nonzero(sv > RANK_RCOND * sv[0]))


def _diagnose(smap: StructureMap, v: np.ndarray, sv: np.ndarray,
              rank_design: int, residual: float, slots: int) -> EstimateDiagnostics:
    rank_v = _rank_of(v)
    columns = smap.size
    exact = slots >= smap.n and rank_v == smap.n and rank_design == 2 * columns
    sigma_min = float(sv.min()) if sv.size else 0.0
    return EstimateDiagnostics(slots=slots, rank_v=rank_v, rank_design=rank_design,
                               columns=columns, sigma_min=sigma_min,
                               residual=residual, exact=exact)


def estimate_full(m: MeasurementSet,
                  smap: StructureMap) -> tuple[AdmittanceMatrix, EstimateDiagnostics]:
    """Unconstrained least-squares identification of the admittance matrix.

    All buses must be observed and the measurement set must carry currents
    or powers (powers are converted).  The minimizer of the stacked
    residual is computed through an orthogonal factorization of the
    realified design matrix; a rank-deficient design is not an error and
    yields the minimum-norm solution with the exactness flag cleared.
    """
    v, design, rhs = _prepared(m, smap)
    tall = realify(design)
    flat = np.concatenate([rhs.real, rhs.imag])
    x, _, rank, sv = np.linalg.lstsq(tall, flat, rcond=RANK_RCOND)
    residual = float(np.linalg.norm(tall @ x - flat))
    p = smap.size
    theta = x[:p] + 1j * x[p:]
    diag = _diagnose(smap, v, sv, int(rank), residual, int(v.shape[0]))
    return matrix_from_svec(smap, theta, tuple(m.observed)), diag


def estimate_full_signed(m: MeasurementSet, smap: StructureMap,
                         constrain: str = "conductance"
                         ) -> tuple[AdmittanceMatrix, EstimateDiagnostics]:
    """Sign-constrained identification via bounded least squares.

    The pair parameters are re-expressed as line admittances y = g + jb
    (the negated off-diagonal entries).  ``constrain="conductance"``
    imposes g >= 0; ``constrain="both"`` additionally imposes b <= 0,
    the passive-inductive branch signature.  Free diagonal parameters stay
    unconstrained.  The bounded problem is solved with an active-set
    method and satisfies the KKT conditions to solver precision.
    """
    from scipy.optimize import lsq_linear

    if constrain not in ("conductance", "both"):
        raise ValidationError(f"unknown constraint kind {constrain!r}")
    v, design, rhs = _prepared(m, smap)
    npairs = len(smap.pairs)
    # switch pair columns to line-admittance sign so bounds read g >= 0
    signed = design.copy()
    signed[:, :npairs] *= -1.0
    tall = realify(signed)
    flat = np.concatenate([rhs.real, rhs.imag])
    p = smap.size
    lower = np.full(2 * p, -np.inf)
    upper = np.full(2 * p, np.inf)
    lower[:npairs] = 0.0
    if constrain == "both":
        upper[p:p + npairs] = 0.0
    result = lsq_linear(tall, flat, bounds=(lower, upper), method="bvls",
                        tol=1e-14, max_iter=max(100, 6 * p))
    if result.status < 0:
        raise EstimationError(f"bounded least squares failed: {result.message}")
    x = result.x
    residual = float(np.linalg.norm(tall @ x - flat))
    sv = np.linalg.svd(tall, compute_uv=False)
    rank = int(np.count_nonzero(sv > RANK_RCOND * sv[0])) if sv.size else 0
    y = x[:p] + 1j * x[p:]
    theta = y.copy()
    theta[:npairs] *= -1.0
    diag = _diagnose(smap, v, sv, rank, residual, int(v.shape[0]))
    return matrix_from_svec(smap, theta, tuple(m.observed)), diag
