"""Command-line frontend for the identification pipeline.

Subcommands mirror the library layers: ``gen`` simulates measurement
campaigns, ``identify`` fits an admittance matrix, ``kron`` reduces one,
``decompose`` splits a reduced matrix into sparse plus low-rank parts,
``recover-radial`` rebuilds hidden nodes of a radial network, and ``eval``
compares an estimate against ground truth, writing the elementwise error
table with a rendered heatmap.

Every subcommand is deterministic: the same inputs and flags produce
byte-identical output files.  Exit codes: 0 success, 2 bad input, 3 power
flow divergence, 4 exactness requested but not certified, 5 algorithm did
not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .errors import GridIdError, PowerFlowError, RecoveryError, ValidationError
from .fullid import StructureMap, estimate_full, estimate_full_signed
from .hiddenid import estimate_reduced
from .ingest import (parse_case_script, parse_phasor_table, read_matrix,
                     write_matrix, write_phasor_table)
from .netmodel import AdmittanceMatrix, NodePartition, build_admittance, graph_of, kron_reduce
from .plots import render_error_heatmap
from .radial import TOL_RATIO, group_table, recover_radial
from .simgen import generate_scenarios, measure, solve_scenarios
from .slrd import DEFAULT_RHO, DEFAULT_TOL_ABS, DEFAULT_TOL_REL, decompose


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(path: Path, text: str):
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def _scale_pair(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    try:
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale bounds {text!r}") from None


def _known_diagonal(path: str | None,
                    observed: tuple[str, ...]) -> dict[int, complex] | None:
    """Read `bus,re,im` rows and map bus labels to observed indices."""
    if path is None:
        return None
    index = {bus: k for k, bus in enumerate(observed)}
    known: dict[int, complex] = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(_read_text(path))), start=1):
        if not row:
            continue
        if len(row) != 3:
            raise ValidationError(f"known-diag line {lineno}: expected bus,re,im")
        bus = row[0].strip()
        if bus not in index:
            raise ValidationError(f"known-diag line {lineno}: bus {bus!r} is not observed")
        try:
            known[index[bus]] = complex(float(row[1]), float(row[2]))
        except ValueError:
            raise ValidationError(f"known-diag line {lineno}: bad number") from None
    if not known:
        raise ValidationError("known-diag file has no entries")
    return known


def _report(pairs) -> str:
    return "".join(f"{key} = {value!r}\n" for key, value in pairs)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.slots < 1:
        raise ValidationError("need at least one time slot")
    case = parse_case_script(_read_text(args.case))
    lo, hi = args.scale
    scenarios = generate_scenarios(case, args.slots, lo, hi, seed=args.seed)
    states = solve_scenarios(scenarios)
    meas = measure(states, case.bus_ids, snr=args.snr, seed=args.seed)
    truth = build_admittance(case)

    out = _out_dir(args)
    _emit(out / "meas.csv", write_phasor_table(meas))
    _emit(out / "truth.json", write_matrix(truth))
    scales = ["k,bus,scale"]
    scales += [f"{k},{bus},{float(scenarios.scalings[k, j])!r}"
               for k in range(args.slots) for j, bus in enumerate(case.bus_ids)]
    _emit(out / "scales.csv", "\n".join(scales) + "\n")
    return 0


def cmd_identify(args) -> int:
    meas = parse_phasor_table(_read_text(args.meas))
    known = _known_diagonal(args.known_diag, meas.observed)
    if args.mode == "reduced":
        est = estimate_reduced(meas, diagonal=args.diagonal, known_diagonal=known)
        y, diag = est.ybar, est.diagnostics
    else:
        smap = StructureMap(len(meas.observed), diagonal=args.diagonal,
                            known_diagonal=known)
        fit = estimate_full_signed if args.mode == "nnls" else estimate_full
        y, diag = fit(meas, smap)

    out = _out_dir(args)
    _emit(out / "yhat.json", write_matrix(y))
    _emit(out / "diagnostics.txt", _report([
        ("mode", args.mode), ("diagonal", args.diagonal), ("slots", diag.slots),
        ("rank_v", diag.rank_v), ("rank_design", diag.rank_design),
        ("columns", diag.columns), ("sigma_min", diag.sigma_min),
        ("residual", diag.residual), ("exact", diag.exact)]))
    if args.require_exact and not diag.exact:
        print("estimate is not certified exact", file=sys.stderr)
        return 4
    return 0


def cmd_kron(args) -> int:
    y = read_matrix(_read_text(args.matrix))
    hidden = {y.index_of(bus) for bus in args.hidden}
    reduced = kron_reduce(y, NodePartition.hiding(y.n, hidden))
    _emit(_out_dir(args) / "reduced.json", write_matrix(reduced))
    return 0


def cmd_decompose(args) -> int:
    ybar = read_matrix(_read_text(args.matrix))
    result = decompose(ybar, lam=args.lam, rho=args.rho,
                       tol_abs=args.tol_abs, tol_rel=args.tol_rel)
    cert = result.certificate

    out = _out_dir(args)
    _emit(out / "sparse.json",
          write_matrix(AdmittanceMatrix.from_dense(result.a, ybar.labels)))
    _emit(out / "lowrank.json",
          write_matrix(AdmittanceMatrix.from_dense(result.b, ybar.labels)))
    pairs = [("lambda", result.lam), ("rho", result.rho),
             ("iterations", result.iterations), ("converged", result.converged),
             ("primal_residual", result.primal_residual),
             ("dual_residual", result.dual_residual)]
    if cert is not None:
        pairs += [("certificate_ok", cert.ok), ("linf_margin", cert.linf_margin),
                  ("sign_margin", cert.sign_margin),
                  ("spectral_margin", cert.spectral_margin),
                  ("alignment_margin", cert.alignment_margin),
                  ("primal_margin", cert.primal_margin)]
    _emit(out / "summary.txt", _report(pairs))
    if not result.converged:
        print(f"did not converge in {result.iterations} iterations; "
              f"primal residual {result.primal_residual:.3e}", file=sys.stderr)
        return 5
    return 0


def cmd_recover_radial(args) -> int:
    ybar = read_matrix(_read_text(args.matrix))
    result = recover_radial(ybar, zero_threshold=args.zero_threshold,
                            tol_ratio=args.ratio_tol)
    out = _out_dir(args)
    _emit(out / "recovered.json", write_matrix(result.y))
    _emit(out / "groups.csv", group_table(result))
    _emit(out / "summary.txt", _report([
        ("observed", ybar.n), ("hidden", ",".join(result.hidden)),
        ("roundtrip_error", result.roundtrip_error)]))
    return 0


def cmd_eval(args) -> int:
    truth = read_matrix(_read_text(args.truth))
    est = read_matrix(_read_text(args.estimate))
    if est.n != truth.n:
        raise ValidationError(f"estimate has {est.n} buses, truth has {truth.n}")
    if est.labels == truth.labels:
        est_dense = est.to_dense()
    elif sorted(est.labels) == sorted(truth.labels):
        perm = [est.index_of(bus) for bus in truth.labels]
        est_dense = est.to_dense()[np.ix_(perm, perm)]
    else:
        raise ValidationError("estimate and truth label different buses")

    err = np.abs(truth.to_dense() - est_dense)
    rows = ["i,j,abs_err"]
    rows += [f"{i},{j},{float(err[i, j])!r}"
             for i in range(truth.n) for j in range(truth.n)]

    true_edges = graph_of(truth, args.zero_threshold).edges
    est_graph = graph_of(AdmittanceMatrix.from_dense(est_dense, truth.labels),
                         args.zero_threshold)
    est_edges = est_graph.edges
    hits = len(true_edges & est_edges)
    precision = hits / len(est_edges) if est_edges else 1.0
    recall = hits / len(true_edges) if true_edges else 1.0

    out = _out_dir(args)
    _emit(out / "errors.csv", "\n".join(rows) + "\n")
    _emit(out / "summary.txt", _report([
        ("max_abs_error", float(err.max())),
        ("frobenius_error", float(np.linalg.norm(err))),
        ("support_precision", precision), ("support_recall", recall)]))
    heatmap = out / "heatmap.png"
    render_error_heatmap(err, truth.labels, str(heatmap))
    print(f"wrote {heatmap}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridid",
        description="Admittance matrix identification from synchrophasor data.")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=func)
        p.add_argument("--out", default=".", help="output directory")
        return p

    p = command("gen", cmd_gen, "simulate a measurement campaign")
    p.add_argument("--case", required=True, help="case script with bus/branch/gen tables")
    p.add_argument("--slots", type=int, default=15, help="number of time slots K")
    p.add_argument("--scale", type=_scale_pair, default=(0.8, 1.2), metavar="LO:HI",
                   help="uniform load scaling interval")
    p.add_argument("--snr", type=float, default=float("inf"),
                   help="signal-to-noise ratio as a linear power ratio (inf = noiseless)")
    p.add_argument("--seed", type=int, default=0, help="random seed")

    p = command("identify", cmd_identify, "fit an admittance matrix to phasor data")
    p.add_argument("--meas", required=True, help="phasor table from gen")
    p.add_argument("--mode", choices=("ls", "nnls", "reduced"), default="ls",
                   help="plain least squares, sign-constrained, or reduced-network fit")
    p.add_argument("--diagonal", choices=("constrained", "free"), default="constrained",
                   help="zero-row-sum diagonal or free diagonal parameters")
    p.add_argument("--known-diag", default=None, metavar="FILE",
                   help="CSV of bus,re,im rows fixing diagonal entries")
    p.add_argument("--require-exact", action="store_true",
                   help="exit 4 unless the estimate is certified exact")

    p = command("kron", cmd_kron, "reduce a matrix over a hidden bus set")
    p.add_argument("matrix", help="admittance matrix document")
    p.add_argument("--hidden", nargs="+", required=True, metavar="BUS",
                   help="bus labels to eliminate")

    p = command("decompose", cmd_decompose, "split into sparse plus low-rank parts")
    p.add_argument("matrix", help="reduced admittance matrix document")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="nuclear norm weight (default sqrt(n))")
    p.add_argument("--rho", type=float, default=DEFAULT_RHO, help="ADMM penalty")
    p.add_argument("--tol-abs", type=float, default=DEFAULT_TOL_ABS,
                   help="absolute stopping tolerance")
    p.add_argument("--tol-rel", type=float, default=DEFAULT_TOL_REL,
                   help="relative stopping tolerance")

    p = command("recover-radial", cmd_recover_radial,
                "rebuild hidden nodes of a reduced radial network")
    p.add_argument("matrix", help="reduced admittance matrix document")
    p.add_argument("--zero-threshold", type=float, default=None,
                   help="absolute entry threshold (default relative to the largest entry)")
    p.add_argument("--ratio-tol", type=float, default=TOL_RATIO,
                   help="tolerance for grouping hidden-neighbor column ratios")

    p = command("eval", cmd_eval, "compare an estimate against ground truth")
    p.add_argument("estimate", help="estimated matrix document")
    p.add_argument("--truth", required=True, help="ground-truth matrix document")
    p.add_argument("--zero-threshold", type=float, default=None,
                   help="support threshold (default relative to the largest entry)")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PowerFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RecoveryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except (GridIdError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
