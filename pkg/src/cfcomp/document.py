"""Text format for protocols.

A document is JSON::

    {"format": "cfcomp.protocol/1",
     "metadata": {"name": "...", "seed": 0},
     "layout": [2, 2],
     "computer": "standard",
     "steps": [{"kind": "unitary", "targets": [0], "matrix": {"rotation": "pi/4"}},
               {"kind": "insert", "switch": 0, "output": 1},
               {"kind": "measure", "targets": [1], "basis": "computational", "halt_on": ["1"]}]}

Matrix entries are ``[re, im]`` pairs (plain numbers are accepted as real).
Any number may be written as an arithmetic expression string such as
``"pi/4"`` or ``"sqrt(2)-1"``.  ``serialize`` always writes the canonical
form: explicit complex-pair matrices, explicit computer, ``repr`` floats.
"""
from __future__ import annotations

import ast
import hashlib
import json
import math
import operator
from pathlib import Path

import numpy as np

from . import gallery
from .errors import DocumentError, ValidationError
from .protocol import (ComputerModel, InsertionStep, MeasurementStep, Outcome, Protocol, UnitaryStep, Variant,
                       karm_computer, simplex_computer, standard_computer)
from .tensor import CNOT, NOT, SpaceLayout, rotation

FORMAT = "cfcomp.protocol/1"
GALLERY_PREFIX = "gallery:"

# --- numeric expressions ------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt, "cos": math.cos, "sin": math.sin, "tan": math.tan,
          "acos": math.acos, "asin": math.asin, "atan": math.atan, "exp": math.exp, "log": math.log}


def evaluate(expr) -> float:
    """Evaluate a number or a small arithmetic expression (``pi/4``, ``sqrt(2)``)."""
    if isinstance(expr, bool):
        raise ValueError("booleans are not numbers here")
    if isinstance(expr, (int, float)):
        return float(expr)
    if not isinstance(expr, str):
        raise ValueError(f"expected a number or expression, got {type(expr).__name__}")
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported element in expression {expr!r}")

    try:
        return float(ev(tree))
    except (ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"cannot evaluate {expr!r}: {exc}") from exc


# --- parsing ------------------------------------------------------------------

def _fail(msg: str, where: str):
    raise DocumentError(msg, where)


def _num(x, where: str) -> float:
    try:
        return evaluate(x)
    except ValueError as exc:
        _fail(str(exc), where)


def _int(x, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        _fail(f"expected an integer, got {x!r}", where)
    return x


def _ints(x, where: str) -> tuple[int, ...]:
    if not isinstance(x, list):
        _fail("expected a list of integers", where)
    return tuple(_int(v, f"{where}[{i}]") for i, v in enumerate(x))


def _get(obj: dict, key: str, where: str, default=...):
    if key not in obj:
        if default is ...:
            _fail(f"missing field {key!r}", where)
        return default
    return obj[key]


def _complex(x, where: str) -> complex:
    if isinstance(x, list):
        if len(x) != 2:
            _fail("complex entries are [re, im] pairs", where)
        return complex(_num(x[0], f"{where}[0]"), _num(x[1], f"{where}[1]"))
    return complex(_num(x, where), 0.0)


def _vector(x, where: str) -> np.ndarray:
    if not isinstance(x, list) or not x:
        _fail("expected a non-empty list of entries", where)
    return np.array([_complex(v, f"{where}[{i}]") for i, v in enumerate(x)], dtype=np.complex128)


def _matrix(x, dim: int, where: str) -> np.ndarray:
    if isinstance(x, str):
        named = {"cnot": CNOT, "not": NOT, "identity": np.eye(dim, dtype=np.complex128)}
        if x.lower() not in named:
            _fail(f"unknown matrix shorthand {x!r}; known: {sorted(named)}", where)
        return named[x.lower()].copy()
    if isinstance(x, dict):
        if set(x) == {"rotation"}:
            return rotation(_num(x["rotation"], f"{where}.rotation"))
        if set(x) == {"identity"}:
            return np.eye(_int(x["identity"], f"{where}.identity"), dtype=np.complex128)
        _fail(f"unknown matrix shorthand with keys {sorted(x)}", where)
    if not isinstance(x, list) or not x:
        _fail("expected a matrix: list of rows, or a shorthand", where)
    rows = [_vector(row, f"{where}[{i}]") for i, row in enumerate(x)]
    n = len(rows)
    for i, row in enumerate(rows):
        if len(row) != n:
            _fail(f"row has {len(row)} entries, matrix has {n} rows", f"{where}[{i}]")
    return np.array(rows)


def _computer(x, where: str) -> ComputerModel:
    if isinstance(x, str):
        if x == "standard":
            return standard_computer()
        _fail(f"unknown computer shorthand {x!r}", where)
    if not isinstance(x, dict):
        _fail("expected an object or 'standard'", where)
    if set(x) == {"karm"}:
        return karm_computer(_int(x["karm"], f"{where}.karm"))
    if set(x) == {"simplex"}:
        return simplex_computer(_int(x["simplex"], f"{where}.simplex"))
    variants = _get(x, "variants", where)
    if not isinstance(variants, list):
        _fail("expected a list of variants", f"{where}.variants")
    vs = []
    for i, v in enumerate(variants):
        w = f"{where}.variants[{i}]"
        if not isinstance(v, dict):
            _fail("expected an object", w)
        vs.append(Variant(frozenset(_ints(_get(v, "off", w), f"{w}.off")),
                          _int(_get(v, "shift", w, 1), f"{w}.shift"),
                          str(_get(v, "name", w, str(i)))))
    return ComputerModel(_int(_get(x, "switch_dim", where), f"{where}.switch_dim"),
                         _int(_get(x, "output_dim", where, 2), f"{where}.output_dim"), tuple(vs))


def _labels(x, where: str) -> list[str]:
    if not isinstance(x, list) or not all(isinstance(v, str) for v in x):
        _fail("expected a list of strings", where)
    return list(x)


def _step(s, layout: SpaceLayout, where: str):
    if not isinstance(s, dict):
        _fail("expected an object", where)
    kind = _get(s, "kind", where)
    if kind == "insert":
        return InsertionStep(_int(_get(s, "switch", where), f"{where}.switch"),
                             _int(_get(s, "output", where), f"{where}.output"))
    targets = _ints(_get(s, "targets", where), f"{where}.targets")
    if any(t < 0 or t >= len(layout) for t in targets):
        _fail(f"target out of range for a layout of {len(layout)} subsystems", f"{where}.targets")
    dim = layout.target_dim(targets)
    if kind == "unitary":
        return UnitaryStep(targets, _matrix(_get(s, "matrix", where), dim, f"{where}.matrix"))
    if kind == "measure":
        halt = _labels(_get(s, "halt_on", where, []), f"{where}.halt_on")
        has_basis, has_outcomes = "basis" in s, "outcomes" in s
        if has_basis == has_outcomes:
            _fail("give exactly one of 'basis' or 'outcomes'", where)
        if has_basis:
            if s["basis"] != "computational":
                _fail(f"unknown basis {s['basis']!r}", f"{where}.basis")
            return MeasurementStep.computational(targets, [layout.dims[t] for t in targets], halt)
        outs = s["outcomes"]
        if not isinstance(outs, list):
            _fail("expected a list of outcomes", f"{where}.outcomes")
        parsed = []
        for i, o in enumerate(outs):
            w = f"{where}.outcomes[{i}]"
            if not isinstance(o, dict):
                _fail("expected an object", w)
            label = _get(o, "label", w)
            if not isinstance(label, str):
                _fail("label must be a string", f"{w}.label")
            vecs = _get(o, "vectors", w)
            if not isinstance(vecs, list) or not vecs:
                _fail("expected a non-empty list of vectors", f"{w}.vectors")
            cols = [_vector(v, f"{w}.vectors[{j}]") for j, v in enumerate(vecs)]
            if any(len(c) != dim for c in cols):
                _fail(f"outcome vectors must have dimension {dim}", f"{w}.vectors")
            parsed.append(Outcome(label, np.stack(cols, axis=1)))
        return MeasurementStep(targets, tuple(parsed), frozenset(halt))
    _fail(f"unknown step kind {kind!r}; expected unitary, measure or insert", f"{where}.kind")


def from_document(doc) -> Protocol:
    """Build a Protocol from a parsed JSON object."""
    if not isinstance(doc, dict):
        _fail("document must be a JSON object", "$")
    fmt = _get(doc, "format", "$", FORMAT)
    if fmt != FORMAT:
        _fail(f"unsupported format {fmt!r}", "$.format")
    meta = _get(doc, "metadata", "$", {})
    if not isinstance(meta, dict):
        _fail("expected an object", "$.metadata")
    dims = _ints(_get(doc, "layout", "$"), "$.layout")
    try:
        layout = SpaceLayout(dims)
        computer = _computer(_get(doc, "computer", "$"), "$.computer")
    except ValidationError as exc:
        raise DocumentError(str(exc), "$.layout/$.computer") from exc
    raw_steps = _get(doc, "steps", "$")
    if not isinstance(raw_steps, list):
        _fail("expected a list of steps", "$.steps")
    steps = [_step(s, layout, f"$.steps[{i}]") for i, s in enumerate(raw_steps)]
    seed = meta.get("seed")
    if seed is not None:
        seed = _int(seed, "$.metadata.seed")
    return Protocol(layout, computer, tuple(steps), name=str(meta.get("name", "")), meta={"seed": seed})


def parse(text: str) -> Protocol:
    """Parse document text; DocumentError carries a line/column or field path."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return from_document(doc)


def parse_gallery_ref(ref: str) -> tuple[str, dict]:
    """``gallery:NAME:key=val,key=val`` -> (NAME, {key: value})."""
    body = ref[len(GALLERY_PREFIX):]
    name, _, args = body.partition(":")
    params = {}
    for item in filter(None, (a.strip() for a in args.split(","))):
        key, eq, val = item.partition("=")
        if not eq or not key.strip():
            raise DocumentError(f"expected key=value, got {item!r}", ref)
        params[key.strip()] = val.strip()
    return name, params


def from_gallery(ref: str) -> Protocol:
    name, raw = parse_gallery_ref(ref)
    if name not in gallery.ENTRIES:
        raise DocumentError(f"unknown gallery entry {name!r}; known: {', '.join(sorted(gallery.ENTRIES))}", ref)
    entry = gallery.ENTRIES[name]
    kwargs = {}
    for key, val in raw.items():
        if key not in entry.params:
            raise DocumentError(f"{name} has no parameter {key!r}; known: {', '.join(entry.params)}", ref)
        try:
            num = evaluate(val)
        except ValueError as exc:
            raise DocumentError(str(exc), f"{ref} ({key})") from exc
        if entry.params[key].kind is int:
            if num != int(num):
                raise DocumentError(f"{key} must be an integer, got {val!r}", ref)
            num = int(num)
        kwargs[key] = num
    p = entry.make(**kwargs)
    meta = dict(p.meta)
    meta.setdefault("seed", None)
    return Protocol(p.layout, p.computer, p.steps, name=p.name or name, meta=meta)


def load(source: str) -> Protocol:
    """Load a document from a path, ``-`` for stdin, or a ``gallery:`` reference."""
    if source.startswith(GALLERY_PREFIX):
        return from_gallery(source)
    if source == "-":
        import sys
        return parse(sys.stdin.read())
    try:
        text = Path(source).read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"cannot read document: {exc.strerror}", source) from exc
    return parse(text)


# --- serialization ------------------------------------------------------------

def _pairs(v: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in v]


def _is_computational(step: MeasurementStep, dims) -> bool:
    ref = MeasurementStep.computational(step.targets, dims, step.halt_on)
    if ref.labels != step.labels:
        return False
    return all(np.array_equal(a.basis, b.basis) for a, b in zip(ref.outcomes, step.outcomes))


def step_document(step, layout: SpaceLayout) -> dict:
    if isinstance(step, InsertionStep):
        return {"kind": "insert", "switch": step.switch, "output": step.output}
    if isinstance(step, UnitaryStep):
        return {"kind": "unitary", "targets": list(step.targets), "matrix": [_pairs(row) for row in step.matrix]}
    d = {"kind": "measure", "targets": list(step.targets)}
    if _is_computational(step, [layout.dims[t] for t in step.targets]):
        d["basis"] = "computational"
    else:
        d["outcomes"] = [{"label": o.label, "vectors": [_pairs(col) for col in o.basis.T]} for o in step.outcomes]
    d["halt_on"] = sorted(step.halt_on)
    return d


def to_document(p: Protocol) -> dict:
    comp = p.computer
    return {
        "format": FORMAT,
        "metadata": {"name": p.name, "seed": p.meta.get("seed")},
        "layout": list(p.layout.dims),
        "computer": {"switch_dim": comp.switch_dim, "output_dim": comp.output_dim,
                     "variants": [{"name": v.name, "off": sorted(v.off), "shift": v.shift} for v in comp.variants]},
        "steps": [step_document(s, p.layout) for s in p.steps],
    }


def _dump(x) -> str:
    return json.dumps(x, ensure_ascii=False, allow_nan=False)


def serialize(p: Protocol) -> str:
    """Canonical text: one top-level field per line, one step per line."""
    doc = to_document(p)
    lines = ["{"]
    for key in ("format", "metadata", "layout", "computer"):
        lines.append(f"  {_dump(key)}: {_dump(doc[key])},")
    lines.append('  "steps": [')
    steps = [f"    {_dump(s)}" for s in doc["steps"]]
    lines.append(",\n".join(steps))
    lines.append("  ]")
    lines.append("}")
    if not steps:
        lines.pop(-3)
    return "\n".join(lines) + "\n"


def document_hash(p: Protocol) -> str:
    return hashlib.sha256(serialize(p).encode("utf-8")).hexdigest()
