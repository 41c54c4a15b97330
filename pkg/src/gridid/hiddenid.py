"""Linear pieces of the hidden-node workflow.

When unmonitored buses inject no current, the observed buses obey
I1 = Ybar V1 with Ybar the Kron reduction of the full admittance matrix,
so the reduced matrix is identifiable from observed data with the same
least-squares machinery as the fully observed case.  Conversely, once a
full admittance matrix is known, the zero-injection rows pin the hidden
voltages exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KronError
from .fullid import EstimateDiagnostics, StructureMap, estimate_full
from .ingest import MeasurementSet
from .netmodel import RCOND_LIMIT, AdmittanceMatrix, NodePartition


@dataclass(frozen=True)
class ReducedEstimate:
    """Estimated Kron-reduced matrix over the observed buses."""

    ybar: AdmittanceMatrix
    diagnostics: EstimateDiagnostics


def estimate_reduced(m: MeasurementSet, diagonal: str = "constrained",
                     known_diagonal: dict[int, complex] | None = None) -> ReducedEstimate:
    """Estimate the reduced admittance matrix from observed buses only.

    Valid when every unobserved bus has zero net injection: the observed
    currents then satisfy I1 = Ybar V1 exactly, so the full-observability
    estimator applied to the observed set returns Ybar.  Constrained mode
    assumes the ground truth is shuntless (reduction preserves zero row
    sums); use free mode when shunts or taps are present.
    """
    smap = StructureMap(len(m.observed), diagonal=diagonal,
                        known_diagonal=known_diagonal)
    ybar, diag = estimate_full(m, smap)
    return ReducedEstimate(ybar=ybar, diagnostics=diag)


def hidden_voltages(y: AdmittanceMatrix, part: NodePartition,
                    v1: np.ndarray) -> np.ndarray:
    """Hidden-bus voltages implied by zero injections, one row per slot.

    Solves Y22 V2 = -Y21 V1 for each slot; the factorization of Y22 is
    shared across slots.  ``v1`` is K x |observed| (a single slot may be
    passed as a 1-D vector and comes back 1-D).
    """
    if part.n != y.n:
        raise KronError(f"partition covers {part.n} nodes, matrix has {y.n}")
    obs = list(part.observed)
    hid = list(part.hidden)
    v1 = np.asarray(v1, dtype=complex)
    single = v1.ndim == 1
    v1 = np.atleast_2d(v1)
    if v1.shape[1] != len(obs):
        raise KronError(f"voltage array has {v1.shape[1]} columns for "
                        f"{len(obs)} observed buses")
    if not hid:
        out = np.zeros((v1.shape[0], 0), dtype=complex)
        return out[0] if single else out
    dense = y.to_dense()
    y22 = dense[np.ix_(hid, hid)]
    y21 = dense[np.ix_(hid, obs)]
    sv = np.linalg.svd(y22, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < RCOND_LIMIT:
        raise KronError(f"hidden block is singular (rcond {0 if sv[0] == 0 else sv[-1]/sv[0]:.3e})")
    v2 = -np.linalg.solve(y22, y21 @ v1.T).T
    return v2[0] if single else v2
