"""Reader and writer for the QPS format (MPS plus a quadratic objective).

Supported sections: NAME, ROWS, COLUMNS, RHS, RANGES, BOUNDS, QUADOBJ (or
QMATRIX) and ENDATA, in fixed or whitespace-delimited free format.  Comment
lines (leading ``*``) and blank lines are skipped anywhere.  Every parse
error carries the offending line number.

Conventions follow the convex QP test-set usage: QUADOBJ entries are the
lower triangle of Q with the objective reading ``1/2 x'Qx + c'x`` (an
off-diagonal entry contributes to both symmetric positions), QMATRIX lists
the full matrix; a ``quad_half=False`` switch drops the 1/2 factor for
collections using the other convention.  An RHS entry on the objective row
is the objective constant with its sign flipped.  Default variable bounds
are ``0 <= x < +inf``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import AffineConstraint, Bounds, Problem, QuadraticFunction

__all__ = [
    "ParseDiagnostic",
    "QpsParseError",
    "QpsDocument",
    "parse_qps_document",
    "parse_qps",
    "load_qps",
    "write_qps",
]

_SECTIONS = ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "QUADOBJ", "QMATRIX", "ENDATA")


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    section: str
    message: str
    severity: str = "error"  # "error" | "warning"

    def __str__(self):
        return f"line {self.line} [{self.section}]: {self.message}"


class QpsParseError(ValueError):
    """Parse failure; ``diagnostic`` pinpoints the offending line."""

    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


@dataclass
class QpsDocument:
    """Sections of one QPS file, still in name/sparse form."""

    name: str = ""
    objective_row: str | None = None
    row_order: list[str] = field(default_factory=list)
    row_sense: dict = field(default_factory=dict)  # row -> 'L' | 'G' | 'E'
    col_order: list[str] = field(default_factory=list)
    entries: dict = field(default_factory=dict)  # (row, col) -> coefficient
    obj_coeffs: dict = field(default_factory=dict)  # col -> coefficient
    rhs: dict = field(default_factory=dict)  # row -> value
    rhs_objective: float = 0.0
    ranges: dict = field(default_factory=dict)  # row -> range value
    bound_lo: dict = field(default_factory=dict)  # col -> lower (explicit)
    bound_hi: dict = field(default_factory=dict)  # col -> upper (explicit)
    quad_entries: list = field(default_factory=list)  # (col, col, value)
    quad_section: str | None = None
    warnings: list = field(default_factory=list)

    def interval(self, row: str) -> tuple[float, float]:
        """Resolve sense + RHS + optional RANGES into (lo, hi) for a row."""
        sense = self.row_sense[row]
        b = self.rhs.get(row, 0.0)
        if row not in self.ranges:
            if sense == "L":
                return -np.inf, b
            if sense == "G":
                return b, np.inf
            return b, b
        r = self.ranges[row]
        if sense == "L":
            return b - abs(r), b
        if sense == "G":
            return b, b + abs(r)
        # E row: the range sign picks the side
        return (b, b + r) if r >= 0.0 else (b + r, b)

    def to_problem(self, quad_half: bool = True, name: str | None = None) -> Problem:
        n = len(self.col_order)
        col_index = {c: j for j, c in enumerate(self.col_order)}
        c = np.zeros(n)
        for col, v in self.obj_coeffs.items():
            c[col_index[col]] = v
        Q = np.zeros((n, n))
        for c1, c2, v in self.quad_entries:
            i, j = col_index[c1], col_index[c2]
            Q[i, j] += v
            if self.quad_section == "QUADOBJ" and i != j:
                Q[j, i] += v
        if not quad_half:
            Q = 2.0 * Q
        if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12):
            raise QpsParseError(ParseDiagnostic(0, self.quad_section or "QUADOBJ",
                                                "assembled quadratic matrix is not symmetric"))
        objective = QuadraticFunction(Q, c, constant=-self.rhs_objective)

        constraints = []
        for row in self.row_order:
            a = np.zeros(n)
            for col in self.col_order:
                v = self.entries.get((row, col))
                if v is not None:
                    a[col_index[col]] = v
            lo, hi = self.interval(row)
            constraints.append(AffineConstraint(a, lo, hi))

        lo = np.zeros(n)
        hi = np.full(n, np.inf)
        for col, v in self.bound_lo.items():
            lo[col_index[col]] = v
        for col, v in self.bound_hi.items():
            hi[col_index[col]] = v
        bounds = Bounds(lo, hi)

        return Problem(
            objective,
            constraints,
            bounds=bounds,
            n=n,
            name=name if name is not None else self.name,
            var_names=list(self.col_order),
            row_names=list(self.row_order),
        )


def _fail(line_no: int, section: str, message: str):
    raise QpsParseError(ParseDiagnostic(line_no, section, message))


def _num(tok: str, line_no: int, section: str) -> float:
    try:
        return float(tok.replace("D", "E").replace("d", "e"))
    except ValueError:
        _fail(line_no, section, f"malformed numeric field {tok!r}")


def parse_qps_document(text: str) -> QpsDocument:
    """Parse QPS text into its raw sections (see :class:`QpsDocument`)."""
    doc = QpsDocument()
    section = None
    seen_endata = False
    declared_rows: set[str] = set()
    declared_cols: set[str] = set()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        if seen_endata:
            _fail(line_no, "ENDATA", "data after ENDATA")

        toks = line.split()
        head = toks[0].upper()
        if not line[0].isspace() and head in _SECTIONS:
            section = head
            if section == "NAME":
                doc.name = toks[1] if len(toks) > 1 else ""
            elif section == "ENDATA":
                seen_endata = True
            elif section in ("QUADOBJ", "QMATRIX"):
                doc.quad_section = section
            continue
        if not line[0].isspace() and section is None:
            _fail(line_no, "-", f"unknown section {toks[0]!r}")
        if section is None:
            _fail(line_no, "-", "data before any section header")
        if not line[0].isspace():
            _fail(line_no, section, f"unknown section {toks[0]!r}")

        if section == "ROWS":
            if len(toks) != 2:
                _fail(line_no, section, f"expected 'SENSE NAME', got {line.strip()!r}")
            sense, row = toks[0].upper(), toks[1]
            if row in declared_rows or row == doc.objective_row:
                _fail(line_no, section, f"duplicate row {row!r}")
            if sense == "N":
                if doc.objective_row is not None:
                    _fail(line_no, section, "duplicate N (objective) row")
                doc.objective_row = row
            elif sense in ("L", "G", "E"):
                doc.row_order.append(row)
                doc.row_sense[row] = sense
                declared_rows.add(row)
            else:
                _fail(line_no, section, f"unknown row sense {toks[0]!r}")

        elif section == "COLUMNS":
            if len(toks) >= 3 and toks[1].upper() in ("'MARKER'", "MARKER"):
                doc.warnings.append(ParseDiagnostic(line_no, section, "MARKER line ignored", "warning"))
                continue
            if len(toks) not in (3, 5):
                _fail(line_no, section, "expected 'COL ROW VAL [ROW VAL]'")
            col = toks[0]
            if col not in declared_cols:
                declared_cols.add(col)
                doc.col_order.append(col)
            for i in range(1, len(toks), 2):
                row, v = toks[i], _num(toks[i + 1], line_no, section)
                if row == doc.objective_row:
                    doc.obj_coeffs[col] = doc.obj_coeffs.get(col, 0.0) + v
                elif row in declared_rows:
                    key = (row, col)
                    doc.entries[key] = doc.entries.get(key, 0.0) + v
                else:
                    _fail(line_no, section, f"undeclared row {row!r}")

        elif section == "RHS":
            if len(toks) not in (3, 5):
                _fail(line_no, section, "expected 'RHSNAME ROW VAL [ROW VAL]'")
            for i in range(1, len(toks), 2):
                row, v = toks[i], _num(toks[i + 1], line_no, section)
                if row == doc.objective_row:
                    doc.rhs_objective = v
                elif row in declared_rows:
                    doc.rhs[row] = v
                else:
                    _fail(line_no, section, f"undeclared row {row!r}")

        elif section == "RANGES":
            if len(toks) not in (3, 5):
                _fail(line_no, section, "expected 'RNGNAME ROW VAL [ROW VAL]'")
            for i in range(1, len(toks), 2):
                row, v = toks[i], _num(toks[i + 1], line_no, section)
                if row not in declared_rows:
                    _fail(line_no, section, f"undeclared or non-constraint row {row!r}")
                doc.ranges[row] = v

        elif section == "BOUNDS":
            kind = toks[0].upper()
            if kind in ("LO", "UP", "FX"):
                if len(toks) != 4:
                    _fail(line_no, section, f"{kind} bound expects 'TYPE SET COL VAL'")
                col, v = toks[2], _num(toks[3], line_no, section)
            elif kind in ("FR", "MI", "PL", "BV"):
                if len(toks) < 3:
                    _fail(line_no, section, f"{kind} bound expects 'TYPE SET COL'")
                col, v = toks[2], None
            else:
                _fail(line_no, section, f"unknown bound type {toks[0]!r}")
            if col not in declared_cols:
                _fail(line_no, section, f"undeclared column {col!r}")
            if kind == "LO":
                doc.bound_lo[col] = v
            elif kind == "UP":
                doc.bound_hi[col] = v
            elif kind == "FX":
                doc.bound_lo[col] = v
                doc.bound_hi[col] = v
            elif kind == "FR":
                doc.bound_lo[col] = -np.inf
                doc.bound_hi[col] = np.inf
            elif kind == "MI":
                doc.bound_lo[col] = -np.inf
            elif kind == "PL":
                doc.bound_hi[col] = np.inf
            elif kind == "BV":
                doc.bound_lo[col] = 0.0
                doc.bound_hi[col] = 1.0
                doc.warnings.append(ParseDiagnostic(
                    line_no, section, f"binary bound on {col!r} relaxed to [0, 1]", "warning"))
            lo = doc.bound_lo.get(col, 0.0)
            hi = doc.bound_hi.get(col, np.inf)
            if lo > hi:
                _fail(line_no, section, f"inconsistent bounds on {col!r}: [{lo}, {hi}]")

        elif section in ("QUADOBJ", "QMATRIX"):
            if len(toks) != 3:
                _fail(line_no, section, "expected 'COL COL VAL'")
            c1, c2 = toks[0], toks[1]
            for col in (c1, c2):
                if col not in declared_cols:
                    _fail(line_no, section, f"undeclared column {col!r}")
            doc.quad_entries.append((c1, c2, _num(toks[2], line_no, section)))

        elif section == "NAME":
            _fail(line_no, section, "unexpected data in NAME section")

    if doc.objective_row is None:
        _fail(0, "ROWS", "no N (objective) row declared")
    if not seen_endata:
        doc.warnings.append(ParseDiagnostic(0, "ENDATA", "missing ENDATA", "warning"))
    return doc


def parse_qps(text: str, quad_half: bool = True, name: str | None = None) -> Problem:
    """Parse QPS text into a :class:`~cfpopt.model.Problem`."""
    return parse_qps_document(text).to_problem(quad_half=quad_half, name=name)


def load_qps(path, quad_half: bool = True) -> Problem:
    """Parse a QPS file; the problem name falls back to the file stem."""
    path = Path(path)
    doc = parse_qps_document(path.read_text())
    return doc.to_problem(quad_half=quad_half, name=doc.name or path.stem)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_qps(problem: Problem, name: str | None = None) -> str:
    """Serialize a quadratic-objective, affine-constraint problem as QPS text.

    ``parse_qps(write_qps(p))`` reproduces the matrices, vectors and bounds
    of ``p``.  Raises ValueError for objectives or constraints the format
    cannot carry.
    """
    obj = problem.objective
    if not isinstance(obj, QuadraticFunction):
        raise ValueError("QPS can only carry a quadratic objective")
    for con in problem.constraints:
        if not isinstance(con, AffineConstraint):
            raise ValueError(f"QPS can only carry affine constraints, got {con!r}")

    n = problem.n
    cols = problem.var_names if problem.var_names else [f"X{j + 1}" for j in range(n)]
    rows = problem.row_names if problem.row_names else [f"R{i + 1}" for i in range(len(problem.constraints))]
    if len(cols) != n or len(rows) != len(problem.constraints):
        raise ValueError("name lists do not match problem dimensions")

    out = [f"NAME          {name if name is not None else (problem.name or 'CFPOPT')}"]
    out.append("ROWS")
    out.append(" N  OBJ")
    senses = []
    rhs_vals = []
    range_vals = []
    for con in problem.constraints:
        if con.sense == "<=":
            senses.append("L")
            rhs_vals.append(con.hi)
            range_vals.append(None)
        elif con.sense == ">=":
            senses.append("G")
            rhs_vals.append(con.lo)
            range_vals.append(None)
        elif con.sense == "==":
            senses.append("E")
            rhs_vals.append(con.hi)
            range_vals.append(None)
        else:  # finite slab: L row plus a range
            senses.append("L")
            rhs_vals.append(con.hi)
            range_vals.append(con.hi - con.lo)
    for s, r in zip(senses, rows):
        out.append(f" {s}  {r}")

    out.append("COLUMNS")
    for j, col in enumerate(cols):
        # always emit the objective coefficient so every variable is declared
        out.append(f"    {col:<10}{'OBJ':<10}{_fmt(obj.c[j])}")
        for i, con in enumerate(problem.constraints):
            if con.a[j] != 0.0:
                out.append(f"    {col:<10}{rows[i]:<10}{_fmt(con.a[j])}")

    out.append("RHS")
    if obj.constant != 0.0:
        out.append(f"    RHS       {'OBJ':<10}{_fmt(-obj.constant)}")
    for r, v in zip(rows, rhs_vals):
        if v != 0.0:
            out.append(f"    RHS       {r:<10}{_fmt(v)}")

    if any(rv is not None for rv in range_vals):
        out.append("RANGES")
        for r, rv in zip(rows, range_vals):
            if rv is not None:
                out.append(f"    RNG       {r:<10}{_fmt(rv)}")

    if problem.bounds is not None:
        blines = []
        lo, hi = problem.bounds.lo, problem.bounds.hi
        for j, col in enumerate(cols):
            if lo[j] == 0.0 and hi[j] == np.inf:
                continue  # MPS default
            if lo[j] == -np.inf and hi[j] == np.inf:
                blines.append(f" FR BND       {col}")
                continue
            if lo[j] == hi[j]:
                blines.append(f" FX BND       {col:<10}{_fmt(lo[j])}")
                continue
            if lo[j] == -np.inf:
                blines.append(f" MI BND       {col}")
            elif lo[j] != 0.0:
                blines.append(f" LO BND       {col:<10}{_fmt(lo[j])}")
            if hi[j] != np.inf:
                blines.append(f" UP BND       {col:<10}{_fmt(hi[j])}")
        if blines:
            out.append("BOUNDS")
            out.extend(blines)

    tri = [(i, j) for i in range(n) for j in range(i + 1) if obj.Q[i, j] != 0.0]
    if tri:
        out.append("QUADOBJ")
        for i, j in tri:
            out.append(f"    {cols[i]:<10}{cols[j]:<10}{_fmt(obj.Q[i, j])}")

    out.append("ENDATA")
    return "\n".join(out) + "\n"
