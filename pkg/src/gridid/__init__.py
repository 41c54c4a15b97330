"""Admittance matrix identification from synchrophasor data.

The package covers the full workflow: parsing network cases, simulating
steady states and phasor measurements, identifying the admittance matrix
from fully or partially observed buses, decomposing reduced matrices into
sparse plus low-rank parts, and recovering radial networks exactly.
"""

from .errors import (
    EstimationError,
    GridIdError,
    KronError,
    MeasurementError,
    ParseError,
    PowerFlowError,
    RecoveryError,
    ValidationError,
)
from .fullid import (
    EstimateDiagnostics,
    StructureMap,
    estimate_full,
    estimate_full_signed,
    build_gamma,
    matrix_from_svec,
    realify,
    svec_of,
)
from .hiddenid import (
    ReducedEstimate,
    estimate_reduced,
    hidden_voltages,
)
from .ingest import (
    Branch,
    Bus,
    Generator,
    MeasurementSet,
    NetworkCase,
    current_to_power,
    ensure_currents,
    parse_case_script,
    parse_phasor_table,
    power_to_current,
    read_matrix,
    write_matrix,
    write_phasor_table,
)
from .netmodel import (
    AdmittanceMatrix,
    IdentifiabilityReport,
    NetworkGraph,
    NodePartition,
    build_admittance,
    eliminate_node,
    graph_of,
    identifiability_report,
    is_radial,
    kron_reduce,
    sequential_reduce,
)
from .radial import (
    Clique,
    RecoveryResult,
    Separation,
    decouple,
    group_by_hidden,
    group_table,
    recover_clique,
    recover_radial,
)
from .simgen import (
    ScenarioSet,
    SteadyState,
    generate_scenarios,
    injected_power,
    measure,
    power_flow_jacobian,
    solve_power_flow,
    solve_scenarios,
)
from .slrd import (
    DecompositionResult,
    OptimalityCertificate,
    check_optimality,
    decompose,
    default_lambda,
    soft_threshold,
    svt,
)

__version__ = "0.1.0"

__all__ = [
    "AdmittanceMatrix",
    "Branch",
    "Bus",
    "Clique",
    "DecompositionResult",
    "EstimateDiagnostics",
    "EstimationError",
    "Generator",
    "GridIdError",
    "IdentifiabilityReport",
    "KronError",
    "MeasurementError",
    "MeasurementSet",
    "NetworkCase",
    "NetworkGraph",
    "NodePartition",
    "OptimalityCertificate",
    "ParseError",
    "PowerFlowError",
    "RecoveryError",
    "RecoveryResult",
    "ReducedEstimate",
    "ScenarioSet",
    "Separation",
    "SteadyState",
    "StructureMap",
    "ValidationError",
    "build_admittance",
    "check_optimality",
    "current_to_power",
    "decompose",
    "decouple",
    "default_lambda",
    "eliminate_node",
    "ensure_currents",
    "estimate_full",
    "estimate_full_signed",
    "estimate_reduced",
    "generate_scenarios",
    "graph_of",
    "group_by_hidden",
    "group_table",
    "hidden_voltages",
    "identifiability_report",
    "injected_power",
    "is_radial",
    "kron_reduce",
    "build_gamma",
    "matrix_from_svec",
    "measure",
    "parse_case_script",
    "parse_phasor_table",
    "power_to_current",
    "read_matrix",
    "realify",
    "recover_clique",
    "recover_radial",
    "sequential_reduce",
    "soft_threshold",
    "solve_power_flow",
    "solve_scenarios",
    "svec_of",
    "svt",
    "write_matrix",
    "write_phasor_table",
]
