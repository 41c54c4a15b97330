"""Parsing and serialization: case scripts, phasor tables, matrix documents.

Everything here works on in-memory text and stays in per-unit quantities.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import MeasurementError, ParseError, ValidationError
from .netmodel import AdmittanceMatrix

logger = logging.getLogger(__name__)

_BUS_KINDS = {1: "pq", 2: "pv", 3: "slack"}

# Minimum column counts of the case-table formats we read.
_MIN_COLUMNS = {"bus": 13, "branch": 11, "gen": 10}

PHASOR_HEADER = ["k", "bus", "v_re", "v_im", "i_re", "i_im", "s_re", "s_im"]

_ZERO_VOLTAGE = 1e-9


@dataclass(frozen=True)
class Bus:
    id: str
    kind: str  # slack | pv | pq
    p_load: float
    q_load: float
    shunt_g: float
    shunt_b: float
    v_setpoint: float | None = None
    v_angle_setpoint: float | None = None  # radians, slack only
    vm_solution: float | None = None       # solved magnitude column, if present
    va_solution: float | None = None       # solved angle column, radians


@dataclass(frozen=True)
class Branch:
    from_bus: str
    to_bus: str
    r: float
    x: float
    b_charging: float
    tap: float


@dataclass(frozen=True)
class Generator:
    bus: str
    p_set: float


@dataclass(frozen=True)
class NetworkCase:
    base_power: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def bus_ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.buses)

    def bus_index(self, bus_id: str) -> int:
        for k, b in enumerate(self.buses):
            if b.id == bus_id:
                return k
        raise ValidationError(f"unknown bus id {bus_id!r}")

    @property
    def slack_index(self) -> int:
        for k, b in enumerate(self.buses):
            if b.kind == "slack":
                return k
        raise ValidationError("case has no slack bus")


@dataclass(frozen=True)
class MeasurementSet:
    """K slots of per-unit phasors over an ordered observed-bus list.

    ``v`` is K x m complex and always present; ``i`` (injection currents) and
    ``s`` (injection powers) are each K x m complex or None, at least one given.
    """

    observed: tuple[str, ...]
    v: np.ndarray
    i: np.ndarray | None = None
    s: np.ndarray | None = None

    def __post_init__(self):
        m = len(self.observed)
        if len(set(self.observed)) != m:
            raise MeasurementError("observed bus ids must be unique")
        v = np.asarray(self.v, dtype=complex)
        object.__setattr__(self, "v", v)
        if v.ndim != 2 or v.shape[1] != m:
            raise MeasurementError(f"voltage array shape {v.shape} does not match "
                                   f"{m} observed buses")
        if v.shape[0] < 1:
            raise MeasurementError("need at least one time slot")
        for name in ("i", "s"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=complex)
                object.__setattr__(self, name, arr)
                if arr.shape != v.shape:
                    raise MeasurementError(f"{name} shape {arr.shape} does not match v {v.shape}")
        if self.i is None and self.s is None:
            raise MeasurementError("need currents or powers alongside voltages")
        for name in ("v", "i", "s"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                raise MeasurementError(f"{name} contains non-finite cells")

    @property
    def slots(self) -> int:
        return int(self.v.shape[0])


# ---------------------------------------------------------------------------
# Case scripts
# ---------------------------------------------------------------------------

_ASSIGN_RE = re.compile(r"(?P<name>[A-Za-z_]\w*)\.(?P<field>[A-Za-z_]\w*)\s*=")
_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _strip_comments(text: str) -> str:
    """Blank out % comments, preserving offsets so error positions stay true."""
    out = []
    for line in text.split("\n"):
        cut = line.find("%")
        if cut >= 0:
            line = line[:cut] + " " * (len(line) - cut)
        out.append(line)
    return "\n".join(out)


def _parse_matrix(text: str, start: int, field: str) -> tuple[list[list[float]], int]:
    open_pos = text.find("[", start)
    if open_pos < 0:
        line, col = _line_col(text, start)
        raise ParseError(f"expected '[' after {field} assignment", line, col)
    close_pos = text.find("]", open_pos)
    if close_pos < 0:
        line, col = _line_col(text, open_pos)
        raise ParseError(f"unterminated matrix for {field}", line, col)
    body = text[open_pos + 1:close_pos]
    rows: list[list[float]] = []
    offset = open_pos + 1
    for chunk in body.split(";"):
        if not chunk.strip():
            offset += len(chunk) + 1
            continue
        values = []
        for tok in chunk.split():
            m = _NUMBER_RE.fullmatch(tok)
            if not m:
                line, col = _line_col(text, text.find(tok, offset))
                raise ParseError(f"bad number {tok!r} in {field} row {len(rows) + 1}", line, col)
            values.append(float(tok))
        rows.append(values)
        offset += len(chunk) + 1
    return rows, close_pos + 1


def _check_columns(field: str, rows: list[list[float]]):
    want = _MIN_COLUMNS[field]
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise ParseError(f"{field} rows have inconsistent column counts {sorted(widths)}")
    if rows and len(rows[0]) < want:
        raise ParseError(f"{field} row 1 has {len(rows[0])} columns, expected at least {want}")


def parse_case_script(text: str) -> NetworkCase:
    """Parse the common steady-state case-script format (baseMVA/bus/gen/branch)."""
    clean = _strip_comments(text)
    base_power: float | None = None
    tables: dict[str, list[list[float]]] = {}
    pos = 0
    while True:
        m = _ASSIGN_RE.search(clean, pos)
        if not m:
            break
        field = m.group("field")
        if field == "baseMVA":
            num = _NUMBER_RE.search(clean, m.end())
            if not num:
                line, col = _line_col(clean, m.end())
                raise ParseError("expected a number after baseMVA", line, col)
            base_power = float(num.group())
            pos = num.end()
        elif field in ("bus", "gen", "branch"):
            rows, pos = _parse_matrix(clean, m.end(), field)
            _check_columns(field, rows)
            tables[field] = rows
        else:
            line, _ = _line_col(clean, m.start())
            logger.warning("ignoring assignment to .%s (line %d)", field, line)
            pos = m.end()

    if base_power is None:
        raise ParseError("no baseMVA assignment found")
    if base_power <= 0:
        raise ValidationError(f"base power must be positive, got {base_power}")
    if "bus" not in tables or not tables["bus"]:
        raise ParseError("no bus table found")
    if "branch" not in tables or not tables["branch"]:
        raise ParseError("no branch table found")

    gen_rows = tables.get("gen", [])
    setpoints: dict[str, float] = {}
    generators = []
    for row in gen_rows:
        status = row[7]
        if status == 0:
            continue
        bus_id = _bus_id(row[0])
        generators.append(Generator(bus=bus_id, p_set=row[1] / base_power))
        if row[5] > 0:
            setpoints[bus_id] = row[5]

    buses = []
    seen_ids = set()
    for row in tables["bus"]:
        bus_id = _bus_id(row[0])
        if bus_id in seen_ids:
            raise ValidationError(f"duplicate bus id {bus_id}")
        seen_ids.add(bus_id)
        kind_code = int(row[1])
        if kind_code not in _BUS_KINDS:
            raise ValidationError(f"bus {bus_id} has unsupported type {kind_code}")
        kind = _BUS_KINDS[kind_code]
        vm, va = row[7], math.radians(row[8])
        setpoint = setpoints.get(bus_id, vm if vm > 0 else 1.0)
        buses.append(Bus(
            id=bus_id, kind=kind,
            p_load=row[2] / base_power, q_load=row[3] / base_power,
            shunt_g=row[4] / base_power, shunt_b=row[5] / base_power,
            v_setpoint=setpoint if kind in ("pv", "slack") else None,
            v_angle_setpoint=va if kind == "slack" else None,
            vm_solution=vm if vm > 0 else None,
            va_solution=va if vm > 0 else None,
        ))

    slack_count = sum(1 for b in buses if b.kind == "slack")
    if slack_count != 1:
        raise ValidationError(f"expected exactly one slack bus, found {slack_count}")

    branches = []
    for idx, row in enumerate(tables["branch"]):
        if row[10] == 0:
            continue
        if row[9] != 0:
            raise ValidationError(f"branch row {idx + 1}: nonzero phase shift unsupported")
        if row[2] == 0 and row[3] == 0:
            raise ValidationError(f"branch row {idx + 1}: zero series impedance")
        f, t = _bus_id(row[0]), _bus_id(row[1])
        if f not in seen_ids or t not in seen_ids:
            raise ValidationError(f"branch row {idx + 1}: unknown bus {f if f not in seen_ids else t}")
        tap = row[8] if row[8] != 0 else 1.0
        if tap <= 0:
            raise ValidationError(f"branch row {idx + 1}: tap must be positive")
        branches.append(Branch(from_bus=f, to_bus=t, r=row[2], x=row[3],
                               b_charging=row[4], tap=tap))

    for g in generators:
        if g.bus not in seen_ids:
            raise ValidationError(f"generator at unknown bus {g.bus}")

    return NetworkCase(base_power=base_power, buses=tuple(buses),
                       branches=tuple(branches), generators=tuple(generators))


def _bus_id(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(value)


# ---------------------------------------------------------------------------
# Phasor tables
# ---------------------------------------------------------------------------

def write_phasor_table(m: MeasurementSet) -> str:
    """CSV with header k,bus,...; slot-major, observed order within each slot."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(PHASOR_HEADER)
    for k in range(m.slots):
        for j, bus in enumerate(m.observed):
            row = [str(k), bus, repr(float(m.v[k, j].real)), repr(float(m.v[k, j].imag))]
            for arr in (m.i, m.s):
                if arr is None:
                    row += ["", ""]
                else:
                    row += [repr(float(arr[k, j].real)), repr(float(arr[k, j].imag))]
            w.writerow(row)
    return out.getvalue()


def parse_phasor_table(text: str) -> MeasurementSet:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty phasor table") from None
    if header != PHASOR_HEADER:
        raise ParseError(f"bad header {header!r}, expected {','.join(PHASOR_HEADER)}", line=1)

    cells: dict[tuple[int, str], list[float | None]] = {}
    observed: list[str] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(PHASOR_HEADER):
            raise ParseError(f"expected {len(PHASOR_HEADER)} fields, got {len(row)}", line=lineno)
        try:
            k = int(row[0])
        except ValueError:
            raise ParseError(f"bad slot index {row[0]!r}", line=lineno) from None
        bus = row[1]
        key = (k, bus)
        if key in cells:
            raise ParseError(f"duplicate cell for slot {k}, bus {bus}", line=lineno)
        try:
            values = [float(f) if f != "" else None for f in row[2:]]
        except ValueError:
            raise ParseError("bad number in row", line=lineno) from None
        cells[key] = values
        if bus not in observed:
            observed.append(bus)

    if not cells:
        raise ParseError("phasor table has no data rows")
    slot_ids = sorted({k for k, _ in cells})
    for k in slot_ids:
        buses_at_k = {b for kk, b in cells if kk == k}
        if buses_at_k != set(observed):
            raise ParseError(f"slot {k} covers buses {sorted(buses_at_k)}, "
                             f"expected {sorted(observed)} (ragged slots)")

    def channel(first: int) -> np.ndarray | None:
        present = [cells[(k, b)][first] is not None for k in slot_ids for b in observed]
        if not any(present):
            return None
        if not all(present):
            raise ParseError("channel must be fully present or fully absent")
        arr = np.empty((len(slot_ids), len(observed)), dtype=complex)
        for ki, k in enumerate(slot_ids):
            for j, b in enumerate(observed):
                re_part, im_part = cells[(k, b)][first], cells[(k, b)][first + 1]
                if im_part is None:
                    raise ParseError(f"half-empty complex cell at slot {k}, bus {b}")
                arr[ki, j] = complex(re_part, im_part)
        return arr

    v = channel(0)
    if v is None:
        raise ParseError("voltage columns are required")
    try:
        return MeasurementSet(observed=tuple(observed), v=v, i=channel(2), s=channel(4))
    except MeasurementError as exc:
        raise ParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------

def power_to_current(m: MeasurementSet) -> MeasurementSet:
    """i = conj(s / v) per cell; powers retained."""
    if m.s is None:
        raise MeasurementError("no power channel to convert")
    if np.abs(m.v).min() < _ZERO_VOLTAGE:
        raise MeasurementError("voltage magnitude below 1e-9 pu; cannot divide")
    return MeasurementSet(observed=m.observed, v=m.v, i=np.conj(m.s / m.v), s=m.s)


def current_to_power(m: MeasurementSet) -> MeasurementSet:
    """s = v * conj(i) per cell; currents retained."""
    if m.i is None:
        raise MeasurementError("no current channel to convert")
    return MeasurementSet(observed=m.observed, v=m.v, i=m.i, s=m.v * np.conj(m.i))


def ensure_currents(m: MeasurementSet) -> MeasurementSet:
    return m if m.i is not None else power_to_current(m)


# ---------------------------------------------------------------------------
# Matrix documents
# ---------------------------------------------------------------------------

def write_matrix(y: AdmittanceMatrix) -> str:
    doc = {
        "n": y.n,
        "labels": list(y.labels),
        "entries": [{"i": i, "j": j, "re": v.real, "im": v.imag}
                    for (i, j), v in sorted(y.entries.items())],
    }
    return json.dumps(doc, indent=1) + "\n"


def read_matrix(text: str) -> AdmittanceMatrix:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad matrix document: {exc.msg}", line=exc.lineno,
                         column=exc.colno) from exc
    try:
        n = int(doc["n"])
        labels = tuple(str(s) for s in doc["labels"])
        raw = doc["entries"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"matrix document missing field: {exc}") from exc
    if len(labels) != n:
        raise ParseError(f"n={n} but {len(labels)} labels")
    entries: dict[tuple[int, int], complex] = {}
    for rec in raw:
        try:
            i, j, re_part, im_part = int(rec["i"]), int(rec["j"]), float(rec["re"]), float(rec["im"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad entry record {rec!r}") from exc
        if not 0 <= i <= j < n:
            raise ParseError(f"entry ({i},{j}) out of range for n={n}")
        if (i, j) in entries:
            raise ParseError(f"duplicate entry ({i},{j})")
        entries[(i, j)] = complex(re_part, im_part)
    try:
        return AdmittanceMatrix(labels=labels, entries=entries)
    except ValidationError as exc:
        raise ParseError(str(exc)) from exc
