"""Bit-exact MPS and CPLEX-LP writers plus the matching MPS/LP readers.

Free-format MPS, deterministic row/column order (insertion order), numbers
at full round-trip precision. Export followed by parse followed by export is
a byte-level fixpoint.
"""

from __future__ import annotations

import json
import math

from .model import BINARY, CONTINUOUS, INTEGER, MipModel

INF = math.inf


class MpsFormatError(ValueError):
    """Malformed MPS or LP text."""


def fmt_num(x: float) -> str:
    """Shortest exact decimal form; integral values print without a fraction."""
    x = float(x)
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def write_doc(doc, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_doc(path):
    with open(path) as fh:
        return json.load(fh)


# -- MPS ----------------------------------------------------------------------


def _column_entries(model: MipModel):
    """Per-variable (row name, coefficient) lists in row order, objective first."""
    obj = {vid: coef for vid, coef in model.objective.terms}
    per_var = {v.id: [] for v in model.variables}
    for vid, coef in model.objective.terms:
        per_var[vid].append(("OBJ", coef))
    for con in model.constraints:
        for vid, coef in con.terms:
            per_var[vid].append((con.name, coef))
    # A column absent from every row would vanish in the file; pin it with an
    # explicit zero objective entry so parse reconstructs the full model.
    for v in model.variables:
        if not per_var[v.id]:
            per_var[v.id].append(("OBJ", 0.0))
    return per_var, obj


def export_mps(model: MipModel) -> str:
    lines = ["NAME %s" % model.name]
    if model.objective.sense == "max":
        lines.append("OBJSENSE")
        lines.append(" MAX")
    lines.append("ROWS")
    lines.append(" N OBJ")
    sense_letter = {"<=": "L", ">=": "G", "=": "E"}
    for con in model.constraints:
        lines.append(" %s %s" % (sense_letter[con.sense], con.name))
    per_var, _ = _column_entries(model)
    lines.append("COLUMNS")
    marker = 0
    in_integer = False
    for var in model.variables:
        wants_integer = var.kind in (BINARY, INTEGER)
        if wants_integer and not in_integer:
            lines.append(" M%d 'MARKER' 'INTORG'" % marker)
            marker += 1
            in_integer = True
        elif not wants_integer and in_integer:
            lines.append(" M%d 'MARKER' 'INTEND'" % marker)
            marker += 1
            in_integer = False
        for row_name, coef in per_var[var.id]:
            lines.append(" %s %s %s" % (var.name, row_name, fmt_num(coef)))
    if in_integer:
        lines.append(" M%d 'MARKER' 'INTEND'" % marker)
    lines.append("RHS")
    if model.objective.constant != 0.0:
        lines.append(" RHS OBJ %s" % fmt_num(-model.objective.constant))
    for con in model.constraints:
        if con.rhs != 0.0:
            lines.append(" RHS %s %s" % (con.name, fmt_num(con.rhs)))
    lines.append("BOUNDS")
    for var in model.variables:
        lines.extend(_bound_lines(var))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def _bound_lines(var):
    name = var.name
    lb, ub = var.lb, var.ub
    if var.kind == BINARY:
        out = [" BV BND %s" % name]
        if lb != 0.0:
            out.append(" LO BND %s %s" % (name, fmt_num(lb)))
        if ub != 1.0:
            out.append(" UP BND %s %s" % (name, fmt_num(ub)))
        return out
    if var.kind == INTEGER:
        return [
            " LI BND %s %s" % (name, fmt_num(lb)),
            " UI BND %s %s" % (name, fmt_num(ub)),
        ]
    if lb == ub:
        return [" FX BND %s %s" % (name, fmt_num(lb))]
    out = []
    if lb == -INF and ub == INF:
        return [" FR BND %s" % name]
    if lb == -INF:
        out.append(" MI BND %s" % name)
    elif lb != 0.0:
        out.append(" LO BND %s %s" % (name, fmt_num(lb)))
    if ub != INF:
        out.append(" UP BND %s %s" % (name, fmt_num(ub)))
    return out


def parse_mps(text: str) -> MipModel:
    """Inverse of export_mps on its own output; accepts general free MPS."""
    model = MipModel()
    section = None
    sense_map = {"L": "<=", "G": ">=", "E": "="}
    row_sense = {}
    row_order = []
    obj_name = None
    obj_sense = "min"
    obj_constant = 0.0
    coeffs = {}  # row name -> list of (vid, coef)
    obj_terms = []
    rhs = {}
    in_integer = False
    marked = set()
    bounds_seen = []  # (type, vid, value)

    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("*"):
            continue
        tokens = line.split()
        head = tokens[0].upper()
        if head == "NAME" and section is None:
            model.name = tokens[1] if len(tokens) > 1 else "MODEL"
            continue
        if head in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES", "OBJSENSE", "ENDATA") and len(tokens) == 1:
            section = head
            if head == "ENDATA":
                break
            continue
        if section == "OBJSENSE":
            obj_sense = "max" if tokens[0].upper() in ("MAX", "MAXIMIZE") else "min"
            continue
        if section == "ROWS":
            kind, name = tokens[0].upper(), tokens[1]
            if kind == "N":
                if obj_name is None:
                    obj_name = name
                continue
            if kind not in sense_map:
                raise MpsFormatError("unknown row type %r" % kind)
            row_sense[name] = sense_map[kind]
            row_order.append(name)
            coeffs[name] = []
            continue
        if section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                if tokens[2] == "'INTORG'":
                    in_integer = True
                elif tokens[2] == "'INTEND'":
                    in_integer = False
                else:
                    raise MpsFormatError("unknown marker %r" % tokens[2])
                continue
            col = tokens[0]
            if col not in model._names:
                vid = model.add_variable(name=col, kind=CONTINUOUS, lb=0.0, ub=INF)
                if in_integer:
                    marked.add(vid)
            vid = model._names[col]
            pairs = tokens[1:]
            if len(pairs) % 2:
                raise MpsFormatError("odd COLUMNS entry: %r" % raw)
            for k in range(0, len(pairs), 2):
                row, val = pairs[k], float(pairs[k + 1])
                if row == obj_name:
                    obj_terms.append((vid, val))
                elif row in coeffs:
                    coeffs[row].append((vid, val))
                else:
                    raise MpsFormatError("unknown row %r in COLUMNS" % row)
            continue
        if section == "RHS":
            pairs = tokens[1:]  # first token is the rhs vector name
            if len(pairs) % 2:
                raise MpsFormatError("odd RHS entry: %r" % raw)
            for k in range(0, len(pairs), 2):
                row, val = pairs[k], float(pairs[k + 1])
                if row == obj_name:
                    obj_constant = -val
                elif row in row_sense:
                    rhs[row] = val
                else:
                    raise MpsFormatError("unknown row %r in RHS" % row)
            continue
        if section == "RANGES":
            raise MpsFormatError("RANGES section is not supported")
        if section == "BOUNDS":
            btype = tokens[0].upper()
            if btype in ("FR", "MI", "PL", "BV"):
                col = tokens[2]
                val = None
            else:
                col = tokens[2]
                val = float(tokens[3])
            if col not in model._names:
                raise MpsFormatError("bound on unknown column %r" % col)
            bounds_seen.append((btype, model._names[col], val))
            continue
        raise MpsFormatError("line outside any section: %r" % raw)

    for name in row_order:
        model.add_constraint(coeffs[name], row_sense[name], rhs.get(name, 0.0), name=name)
    model.set_objective(obj_sense, obj_terms, obj_constant)

    explicit = set()
    for btype, vid, val in bounds_seen:
        var = model.variables[vid]
        explicit.add(vid)
        if btype == "BV":
            var.kind = BINARY
            var.lb, var.ub = 0.0, 1.0
        elif btype == "LI":
            var.kind = INTEGER
            var.lb = val
        elif btype == "UI":
            var.kind = INTEGER
            var.ub = val
        elif btype == "LO":
            var.lb = val
        elif btype == "UP":
            var.ub = val
        elif btype == "FX":
            var.lb = var.ub = val
        elif btype == "FR":
            var.lb, var.ub = -INF, INF
        elif btype == "MI":
            var.lb = -INF
        elif btype == "PL":
            var.ub = INF
        else:
            raise MpsFormatError("unknown bound type %r" % btype)
    # Marked columns that never saw a BV/LI/UI line default to classic MPS
    # integer bounds [0, 1].
    for vid in marked:
        var = model.variables[vid]
        if var.kind == CONTINUOUS:
            var.kind = INTEGER
            if vid not in explicit:
                var.lb, var.ub = 0.0, 1.0
    for var in model.variables:
        if var.lb > var.ub:
            raise MpsFormatError("variable %s has inverted bounds" % var.name)
    return model


# -- CPLEX-LP -----------------------------------------------------------------


def _lp_expression(model, terms, constant=0.0):
    parts = []
    for vid, coef in terms:
        name = model.variables[vid].name
        if not parts:
            parts.append("%s %s" % (fmt_num(coef), name))
        elif coef < 0:
            parts.append("- %s %s" % (fmt_num(-coef), name))
        else:
            parts.append("+ %s %s" % (fmt_num(coef), name))
    if constant != 0.0:
        if not parts:
            parts.append(fmt_num(constant))
        elif constant < 0:
            parts.append("- %s" % fmt_num(-constant))
        else:
            parts.append("+ %s" % fmt_num(constant))
    if not parts:
        parts.append("0 %s" % model.variables[0].name if model.variables else "0")
    return " ".join(parts)


def export_lp(model: MipModel) -> str:
    lines = ["\\ Problem: %s" % model.name]
    lines.append("Maximize" if model.objective.sense == "max" else "Minimize")
    lines.append(" OBJ: %s" % _lp_expression(model, model.objective.terms, model.objective.constant))
    lines.append("Subject To")
    for con in model.constraints:
        lines.append(
            " %s: %s %s %s"
            % (con.name, _lp_expression(model, con.terms), con.sense, fmt_num(con.rhs))
        )
    lines.append("Bounds")
    for var in model.variables:
        if var.kind == BINARY:
            continue
        lb, ub = var.lb, var.ub
        if lb == 0.0 and ub == INF:
            continue
        if lb == ub:
            lines.append(" %s = %s" % (var.name, fmt_num(lb)))
        elif lb == -INF and ub == INF:
            lines.append(" %s free" % var.name)
        elif lb == -INF:
            lines.append(" -infinity <= %s <= %s" % (var.name, fmt_num(ub)))
        elif ub == INF:
            lines.append(" %s >= %s" % (var.name, fmt_num(lb)))
        else:
            lines.append(" %s <= %s <= %s" % (fmt_num(lb), var.name, fmt_num(ub)))
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    generals = [v.name for v in model.variables if v.kind == INTEGER]
    if generals:
        lines.append("Generals")
        lines.append(" " + " ".join(generals))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _parse_lp_terms(tokens, names):
    """Parse '3 x + 2 y - 7' into (terms keyed by name, constant)."""
    terms = []
    constant = 0.0
    sign = 1.0
    pending = None  # numeric literal waiting for a variable name
    for tok in tokens:
        if tok == "+":
            if pending is not None:
                constant += sign * pending
                pending = None
            sign = 1.0
        elif tok == "-":
            if pending is not None:
                constant += sign * pending
                pending = None
            sign = -1.0
        else:
            try:
                value = float(tok)
            except ValueError:
                coef = sign if pending is None else sign * pending
                terms.append((tok, coef))
                pending = None
                sign = 1.0
                continue
            if pending is not None:
                constant += sign * pending
            pending = value
    if pending is not None:
        constant += sign * pending
    return terms, constant


def parse_lp(text: str) -> MipModel:
    """Reader for export_lp output, used for self-consistency round-trips."""
    model = MipModel()
    lines = [ln.rstrip() for ln in text.splitlines()]
    section = None
    pending = []  # (name, tokens, sense, rhs) for constraints
    obj_tokens = None
    obj_sense = "min"
    bound_lines = []
    binaries = []
    generals = []
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if line.startswith("\\ Problem:"):
                model.name = line.split(":", 1)[1].strip()
            continue
        word = line.split()[0].lower()
        if word in ("minimize", "maximize"):
            section = "objective"
            obj_sense = "max" if word == "maximize" else "min"
            continue
        if line.lower().startswith("subject to"):
            section = "constraints"
            continue
        if word == "bounds":
            section = "bounds"
            continue
        if word == "binaries":
            section = "binaries"
            continue
        if word == "generals":
            section = "generals"
            continue
        if word == "end":
            break
        if section == "objective":
            body = line.split(":", 1)[1] if ":" in line else line
            obj_tokens = body.split()
        elif section == "constraints":
            if ":" not in line:
                raise MpsFormatError("constraint without a name: %r" % raw)
            name, body = line.split(":", 1)
            tokens = body.split()
            sense = None
            for s in ("<=", ">=", "="):
                if s in tokens:
                    sense = s
                    break
            if sense is None:
                raise MpsFormatError("constraint without a sense: %r" % raw)
            at = tokens.index(sense)
            pending.append((name.strip(), tokens[:at], sense, float(tokens[at + 1])))
        elif section == "bounds":
            bound_lines.append(line)
        elif section == "binaries":
            binaries.extend(line.split())
        elif section == "generals":
            generals.extend(line.split())

    # Declare variables in first-appearance order: objective, constraints,
    # bounds, then the integrality sections.
    def ensure(name):
        if name not in model._names:
            model.add_variable(name=name, kind=CONTINUOUS, lb=0.0, ub=INF)
        return model._names[name]

    obj_terms, obj_constant = _parse_lp_terms(obj_tokens or [], model._names)
    obj_ids = [(ensure(n), c) for n, c in obj_terms]
    rows = []
    for name, tokens, sense, rhs in pending:
        terms, const = _parse_lp_terms(tokens, model._names)
        rows.append((name, [(ensure(n), c) for n, c in terms], sense, rhs - const))
    for line in bound_lines:
        tokens = line.split()
        if tokens[-1] == "free":
            vid = ensure(tokens[0])
            model.variables[vid].lb, model.variables[vid].ub = -INF, INF
        elif "<=" in tokens and tokens.count("<=") == 2:
            lo_tok, name, hi = tokens[0], tokens[2], float(tokens[4])
            vid = ensure(name)
            lo = -INF if lo_tok == "-infinity" else float(lo_tok)
            model.variables[vid].lb, model.variables[vid].ub = lo, hi
        elif tokens[1] == ">=":
            vid = ensure(tokens[0])
            model.variables[vid].lb = float(tokens[2])
        elif tokens[1] == "<=":
            vid = ensure(tokens[0])
            model.variables[vid].ub = float(tokens[2])
        elif tokens[1] == "=":
            vid = ensure(tokens[0])
            model.variables[vid].lb = model.variables[vid].ub = float(tokens[2])
        else:
            raise MpsFormatError("cannot parse bound line %r" % line)
    for name in binaries:
        var = model.variables[ensure(name)]
        var.kind = BINARY
        if var.ub == INF:
            var.lb, var.ub = 0.0, 1.0
    for name in generals:
        model.variables[ensure(name)].kind = INTEGER
    for name, terms, sense, rhs in rows:
        model.add_constraint(terms, sense, rhs, name=name)
    model.set_objective(obj_sense, obj_ids, obj_constant)
    return model
