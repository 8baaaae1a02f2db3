"""Scenario files: field-expression grammar, JSON envelope, pretty-printer.

A scenario is a JSON object::

    {"id": "abelian-cs", "group": "u1", "dim": 3, "grid": 16,
     "fields": {"A": "i*sin(x)*dy + 0.5*i*cos(x)*dz"}, "checks": ["cs"]}

Field expressions are either group fields (``qexp([...])``, ``u * v``,
``conj(w, u)``, ``pow(u, 3)``, ``const([1, 0, 0, 0])``, ``bumpmap(0.2, 3)``)
or forms: sums of terms ``scalar * algebra * dx^dy`` where the algebra
factor is a literal ``[a, b, c]`` (one bracket per group factor) or a unit
``i``/``j``/``k``. Scalars use ``+ - * / ^int``, ``sin cos exp``,
``bump(s, r0, r1)``, ``pi``, the coordinates ``x y z w`` and ``r`` (distance
to the centre of the fundamental domain). ``#`` starts a comment.

Parsing is total: :func:`parse_scenario` returns a :class:`Scenario` or a
:class:`Diagnostic` carrying the position and the set of tokens that would
have been accepted there.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
import numpy as np

from .expr import (
    VAR_NAMES,
    BinOp,
    Bump,
    Call,
    Neg,
    Num,
    Pi,
    Pow,
    Radial,
    ScalarField,
    Var,
    _wrap,
    uses_radial_outside_bump,
)
from .forms import VForm
from .groupfields import BumpMap, Conj, Constant, GroupField, GroupFieldError, Power, Product, QExp
from .lie import SU2, U1, LieAlgebraSpec

GROUP_WORDS = ("qexp", "conj", "pow", "const", "bumpmap")
FUNCTIONS = ("sin", "cos", "exp")
UNITS = ("i", "j", "k")
ENVELOPE_KEYS = ("id", "group", "dim", "grid", "holonomy", "fields", "checks", "expected")
REQUIRED_KEYS = ("group", "dim", "fields")


# -- diagnostics ------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    """A parse or validation failure. ``line``/``column`` are 1-based within ``source``."""

    message: str
    line: int = 1
    column: int = 1
    expected: tuple = ()
    source: str = "scenario"

    def __str__(self):
        text = f"{self.source}:{self.line}:{self.column}: {self.message}"
        if self.expected:
            text += " (expected one of: " + ", ".join(self.expected) + ")"
        return text


class ScenarioError(ValueError):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


# -- lexer ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # "num", "name", "diff", "sym", "eof"
    text: str
    line: int
    column: int

    @property
    def label(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\n]+)|(?P<comment>#[^\n]*)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<sym>[-+*/^(),\[\]])"
)


def tokenize(text: str, source: str = "expression") -> list[Token]:
    tokens, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ScenarioError(Diagnostic(f"unexpected character {text[pos]!r}", line, col, (), source))
        kind, value = m.lastgroup, m.group()
        if kind == "name" and re.fullmatch(r"d[xyzw]", value):
            kind = "diff"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
        for k, ch in enumerate(value):
            if ch == "\n":
                line, line_start = line + 1, pos + k + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- form syntax tree ----------------------------------------------------------------------

@dataclass(frozen=True)
class AlgebraLiteral:
    """One bracket of scalar fields per group factor."""

    blocks: tuple

    def entries(self) -> tuple:
        return tuple(c for b in self.blocks for c in b)

    def to_text(self) -> str:
        return "".join("[" + ", ".join(c.to_text() for c in b) + "]" for b in self.blocks)


@dataclass(frozen=True)
class Unit:
    name: str

    def to_text(self) -> str:
        return self.name


@dataclass(frozen=True)
class FormTerm:
    sign: int
    scalar: ScalarField | None
    algebra: AlgebraLiteral | Unit | None
    dchain: tuple

    @property
    def degree(self) -> int:
        return len(self.dchain)

    def to_text(self) -> str:
        parts = []
        if self.scalar is not None:
            text = _wrap(self.scalar, 1)
            # a leading minus would read back as the sign of the term
            parts.append(f"({text})" if text.startswith("-") else text)
        if self.algebra is not None:
            parts.append(self.algebra.to_text())
        if self.dchain:
            parts.append("^".join("d" + VAR_NAMES[i] for i in self.dchain))
        return " * ".join(parts) if parts else "1.0"


@dataclass(frozen=True)
class FormExpr:
    terms: tuple

    @property
    def degree(self) -> int:
        return self.terms[0].degree

    @property
    def algebra_valued(self) -> bool:
        return self.terms[0].algebra is not None

    def to_text(self) -> str:
        out = []
        for k, t in enumerate(self.terms):
            body = t.to_text()
            if k == 0:
                out.append(("-" if t.sign < 0 else "") + body)
            else:
                out.append((" - " if t.sign < 0 else " + ") + body)
        return "".join(out)

    def build(self, n: int, spec: LieAlgebraSpec) -> VForm:
        """The form on ``T^n`` (algebra-valued terms use ``spec``)."""
        total = None
        for t in self.terms:
            coef = Num(float(t.sign)) if t.scalar is None else (t.scalar if t.sign > 0 else Neg(t.scalar))
            if t.algebra is None:
                comps = {t.dchain: coef}
                form = VForm.from_components(n, t.degree, comps)
            else:
                entries = _unit_entries(t.algebra.name, spec) if isinstance(t.algebra, Unit) else t.algebra.entries()
                comps = {t.dchain: [_times(coef, e) for e in entries]}
                form = VForm.from_components(n, t.degree, comps, spec)
            total = form if total is None else total + form
        return total


def _times(a: ScalarField, b: ScalarField) -> ScalarField:
    if isinstance(b, Num) and b.value == 0.0:
        return b
    if isinstance(b, Num) and b.value == 1.0:
        return a
    if isinstance(a, Num) and a.value == 1.0:
        return b
    return BinOp("*", a, b)


def _unit_entries(name: str, spec: LieAlgebraSpec) -> tuple:
    if len(spec.factors) != 1:
        raise ValueError("units are ambiguous for a product group")
    if spec.factors[0] == U1:
        return (Num(1.0),)
    return tuple(Num(1.0 if u == name else 0.0) for u in UNITS)


# -- parser ---------------------------------------------------------------------------------

class Parser:
    """Recursive descent with precedence climbing over one field expression."""

    def __init__(self, text: str, spec: LieAlgebraSpec, dim: int, source: str = "expression"):
        self.tokens = tokenize(text, source)
        self.pos = 0
        self.spec = spec
        self.dim = dim
        self.source = source
        # furthest position reached and everything that would have been accepted there
        self._far = -1
        self._expected: set[str] = set()
        self.warnings: list[Diagnostic] = []

    # -- token helpers ---------------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def _note(self, what: str):
        if self.pos > self._far:
            self._far, self._expected = self.pos, set()
        if self.pos == self._far:
            self._expected.add(what)

    def at(self, text: str, kind: str | None = None) -> bool:
        t = self.tok
        ok = t.text == text and (kind is None or t.kind == kind) and t.kind != "eof"
        if not ok:
            self._note(repr(text))
        return ok

    def at_kind(self, kind: str, label: str) -> bool:
        ok = self.tok.kind == kind
        if not ok:
            self._note(label)
        return ok

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail()
        t = self.tok
        self.pos += 1
        return t

    def fail(self, message: str | None = None, token: Token | None = None):
        t = token or self.tok
        expected = tuple(sorted(self._expected)) if token is None and self._far == self.pos else ()
        if message is None:
            message = f"unexpected {t.label}"
        raise ScenarioError(Diagnostic(message, t.line, t.column, expected, self.source))

    # -- entry point -----------------------------------------------------------------

    def parse_field(self):
        if self._starts_group():
            out = self.group()
        else:
            out = self.form()
        if not self.at_kind("eof", "end of input"):
            self.fail()
        return out

    def _starts_group(self) -> bool:
        k = self.pos
        while self.tokens[k].text == "(":
            k += 1
        return self.tokens[k].kind == "name" and self.tokens[k].text in GROUP_WORDS

    # -- scalars ---------------------------------------------------------------------

    def scalar(self) -> ScalarField:
        node = self.product()
        while True:
            if self.accept("+"):
                node = BinOp("+", node, self.product())
            elif self.accept("-"):
                node = BinOp("-", node, self.product())
            else:
                return node

    def product(self) -> ScalarField:
        node = self.unary()
        while True:
            if self.accept("*"):
                node = BinOp("*", node, self.unary())
            elif self.accept("/"):
                node = BinOp("/", node, self.unary())
            else:
                return node

    def unary(self) -> ScalarField:
        if self.accept("-"):
            if self.tok.kind == "num":
                # a minus directly on a literal gives a negative literal, as the printer writes them
                arg = self.power()
                return Num(-arg.value) if isinstance(arg, Num) else Neg(arg)
            return Neg(self.unary())
        return self.power()

    def power(self) -> ScalarField:
        base = self.atom()
        if self.accept("^"):
            return Pow(base, self.integer())
        return base

    def integer(self) -> int:
        if self.accept("("):
            value = self.integer()
            self.expect(")")
            return value
        sign = -1 if self.accept("-") else 1
        t = self.tok
        if not self.at_kind("num", "integer") or not re.fullmatch(r"\d+", t.text):
            self.fail("expected an integer" if t.kind == "num" else None)
        self.pos += 1
        return sign * int(t.text)

    def atom(self) -> ScalarField:
        t = self.tok
        if self.at_kind("num", "number"):
            self.pos += 1
            return Num(float(t.text))
        if self.accept("("):
            node = self.scalar()
            self.expect(")")
            return node
        for word in ("pi", "r") + VAR_NAMES + FUNCTIONS + ("bump",):
            self.at(word, "name")
        if t.kind != "name":
            self.fail()
        name = t.text
        if name == "pi":
            self.pos += 1
            return Pi()
        if name in VAR_NAMES:
            index = VAR_NAMES.index(name)
            if index >= self.dim:
                self.fail(f"coordinate {name} does not exist on T^{self.dim}", t)
            self.pos += 1
            return Var(index)
        if name == "r":
            self.pos += 1
            return Radial()
        if name in FUNCTIONS:
            self.pos += 1
            self.expect("(")
            arg = self.scalar()
            self.expect(")")
            return Call(name, arg)
        if name == "bump":
            self.pos += 1
            self.expect("(")
            arg = self.scalar()
            self.expect(",")
            r0 = self.constant()
            self.expect(",")
            r1_tok = self.tok
            r1 = self.constant()
            self.expect(")")
            if not 0 < r0 < r1:
                self.fail("bump needs 0 < r0 < r1", r1_tok)
            return Bump(arg, r0, r1)
        self.fail()

    def constant(self) -> float:
        """A scalar expression without coordinates, evaluated to a float."""
        t = self.tok
        node = self.scalar()
        if _mentions_coordinates(node):
            self.fail("expected a constant", t)
        return float(node.values(np.zeros((1, max(self.dim, 1))))[0])

    # -- algebra literals --------------------------------------------------------------

    def algebra_literal(self, numeric: bool = False, kind: str = "algebra") -> AlgebraLiteral:
        blocks = []
        sizes = [(4 if f == SU2 else 2) if kind == "group" else (3 if f == SU2 else 1) for f in self.spec.factors]
        for size in sizes:
            open_tok = self.expect("[")
            entries = [self.constant_node() if numeric else self.scalar()]
            while self.accept(","):
                entries.append(self.constant_node() if numeric else self.scalar())
            self.expect("]")
            if len(entries) != size:
                self.fail(f"this group factor takes {size} coordinates, got {len(entries)}", open_tok)
            blocks.append(tuple(entries))
        return AlgebraLiteral(tuple(blocks))

    def constant_node(self) -> ScalarField:
        t = self.tok
        node = self.scalar()
        if _mentions_coordinates(node):
            self.fail("expected a constant", t)
        return node

    # -- group fields --------------------------------------------------------------------

    def group(self) -> GroupField:
        node = self.group_factor()
        while self.accept("*"):
            node = Product(node, self.group_factor())
        return node

    def group_factor(self) -> GroupField:
        if self.accept("("):
            node = self.group()
            self.expect(")")
            return node
        t = self.tok
        for word in GROUP_WORDS:
            self.at(word, "name")
        if t.kind != "name" or t.text not in GROUP_WORDS:
            self.fail()
        self.pos += 1
        self.expect("(")
        try:
            if t.text == "qexp":
                lit = self.algebra_literal()
                node = QExp(self.spec, lit.entries())
            elif t.text == "const":
                lit = self.algebra_literal(numeric=True, kind="group")
                value = np.array([float(c.values(np.zeros((1, 1)))[0]) for c in lit.entries()])
                if np.max(np.abs(self.spec.renormalize(value) - value)) > 1e-12:
                    self.fail("a constant group element must have unit norm in each factor", t)
                node = Constant(self.spec, tuple(value.tolist()))
            elif t.text == "conj":
                w = self.group()
                self.expect(",")
                node = Conj(w, self.group())
            elif t.text == "pow":
                base = self.group()
                self.expect(",")
                node = Power(base, self.integer())
            else:  # bumpmap
                r0 = self.constant()
                self.expect(",")
                r1 = self.constant()
                factor, smooth = 0, None
                if self.accept(","):
                    factor = self.integer()
                    if self.accept(","):
                        smooth = self.integer()
                if not 0 <= factor < len(self.spec.factors):
                    self.fail(f"group factor {factor} does not exist", t)
                node = BumpMap(self.spec, r0, r1, factor) if smooth is None else BumpMap(self.spec, r0, r1, factor, smooth)
        except GroupFieldError as exc:
            self.fail(str(exc), t)
        self.expect(")")
        return node

    # -- forms ------------------------------------------------------------------------------

    def form(self) -> FormExpr:
        first = self.tok
        terms = [self.form_term(-1 if self.accept("-") else 1)]
        while True:
            if self.accept("+"):
                terms.append(self.form_term(1))
            elif self.accept("-"):
                terms.append(self.form_term(-1))
            else:
                break
        degrees = {t.degree for t in terms}
        kinds = {t.algebra is not None for t in terms}
        if len(degrees) > 1:
            self.fail("terms of a form must all have the same degree", first)
        if len(kinds) > 1:
            self.fail("cannot add real-valued and algebra-valued terms", first)
        expr = FormExpr(tuple(terms))
        for t in terms:
            if t.scalar is not None and uses_radial_outside_bump(t.scalar):
                self.warnings.append(Diagnostic(
                    "r is only smooth inside bump(r, ...); this field may not be smooth at the centre",
                    first.line, first.column, (), self.source))
        return expr

    def form_term(self, sign: int) -> FormTerm:
        start = self.tok
        scalar, algebra, dchain = None, None, ()
        while True:
            t = self.tok
            if self.at_kind("diff", "differential (dx, dy, ...)"):
                if dchain:
                    self.fail("a term takes one chain of differentials", t)
                dchain = self.dchain()
            elif self.at("[") or (t.kind == "name" and t.text in UNITS):
                if algebra is not None:
                    self.fail("a term takes at most one algebra factor", t)
                if t.text == "[":
                    algebra = self.algebra_literal()
                else:
                    if len(self.spec.factors) != 1:
                        self.fail("units i, j, k are ambiguous for a product group; use [..][..]", t)
                    if self.spec.factors[0] == U1 and t.text != "i":
                        self.fail("the u1 algebra is spanned by i", t)
                    self.pos += 1
                    algebra = Unit(t.text)
            else:
                for u in UNITS:
                    self.at(u, "name")
                factor = self.unary()
                scalar = factor if scalar is None else BinOp("*", scalar, factor)
            if self.accept("*"):
                continue
            if self.at("/"):
                if scalar is None or algebra is not None or dchain:
                    self.fail("only scalar factors can be divided", self.tok)
                self.pos += 1
                scalar = BinOp("/", scalar, self.unary())
                if self.accept("*"):
                    continue
            break
        if scalar is None and algebra is None and not dchain:
            self.fail(token=start)
        if dchain and len(set(dchain)) != len(dchain):
            self.fail("a repeated differential makes the term vanish", start)
        if any(i >= self.dim for i in dchain):
            self.fail(f"differential outside T^{self.dim}", start)
        return FormTerm(sign, scalar, algebra, dchain)

    def dchain(self) -> tuple:
        out = [VAR_NAMES.index(self.tok.text[1])]
        self.pos += 1
        while self.accept("^"):
            t = self.tok
            if not self.at_kind("diff", "differential (dx, dy, ...)"):
                self.fail()
            out.append(VAR_NAMES.index(t.text[1]))
            self.pos += 1
        return tuple(out)


def _mentions_coordinates(node: ScalarField) -> bool:
    from .expr import children

    if isinstance(node, (Var, Radial)):
        return True
    return any(_mentions_coordinates(c) for c in children(node))


def parse_field(text: str, spec: LieAlgebraSpec, dim: int, source: str = "expression"):
    """Parse one field expression into a group node or a :class:`FormExpr` (raises ScenarioError)."""
    p = Parser(text, spec, dim, source)
    return p.parse_field()


def parse_scalar(text: str, dim: int = 3, source: str = "expression") -> ScalarField:
    p = Parser(text, LieAlgebraSpec.su2(), dim, source)
    node = p.scalar()
    if not p.at_kind("eof", "end of input"):
        p.fail()
    return node


# -- scenarios ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    name: str
    syntax: object  # FormExpr or a GroupField node
    value: object = field(compare=False, repr=False)

    @property
    def kind(self) -> str:
        if isinstance(self.syntax, GroupField):
            return "group"
        return "algebra" if self.syntax.algebra_valued else "real"

    @property
    def degree(self) -> int | None:
        return None if self.kind == "group" else self.syntax.degree

    def to_text(self) -> str:
        return self.syntax.to_text()


@dataclass(frozen=True)
class Scenario:
    id: str
    group: object  # the envelope value, kept for printing
    spec: LieAlgebraSpec
    dim: int
    grid: int
    holonomy: object  # HolonomyData or None
    holonomy_json: object
    fields: tuple
    checks: tuple
    expected: tuple  # (name, value) pairs
    warnings: tuple = field(default=(), compare=False)

    def field(self, name: str) -> Field:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    def values(self) -> dict:
        return {f.name: f.value for f in self.fields}

    def has(self, name: str) -> bool:
        return any(f.name == name for f in self.fields)


DEFAULT_GRID = 16


def group_spec(value) -> LieAlgebraSpec:
    """``"su2"``, ``"su2 x u1"``, ``["su2", "u1"]`` or ``{"factors": [...], "scales": [...] | "normalized"}``."""
    if isinstance(value, str):
        factors = [f.strip() for f in re.split(r"[x*×,]", value) if f.strip()]
        scales = None
    elif isinstance(value, list):
        factors, scales = value, None
    elif isinstance(value, dict):
        unknown = set(value) - {"factors", "scales"}
        if unknown:
            raise ValueError(f"unknown group keys: {', '.join(sorted(unknown))}")
        factors, scales = value.get("factors"), value.get("scales")
    else:
        raise ValueError("group must be a string, a list of factors or an object")
    if not factors or any(f not in (SU2, U1) for f in factors):
        raise ValueError(f"group factors must be '{SU2}' or '{U1}'")
    if scales == "normalized":
        return LieAlgebraSpec.normalized(factors)
    spec = LieAlgebraSpec(tuple(factors))
    if scales is not None:
        if not isinstance(scales, list) or len(scales) != len(factors):
            raise ValueError("scales must list one positive number per factor, or be \"normalized\"")
        spec = spec.with_scales([_number(s) for s in scales])
    return spec


def _number(v) -> float:
    if isinstance(v, bool):
        raise ValueError("expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        node = parse_scalar(v, 1, "constant")
        if _mentions_coordinates(node):
            raise ValueError(f"{v!r} is not a constant")
        return float(node.values(np.zeros((1, 1)))[0])
    raise ValueError("expected a number or a constant expression")


def holonomy_from_json(value, spec: LieAlgebraSpec):
    """``{"angles": [[...per factor] x 3], "frame": [...]}`` or ``{"elements": [[...] x 3]}``."""
    from .flat import HolonomyData

    if not isinstance(value, dict):
        raise ValueError("holonomy must be an object")
    unknown = set(value) - {"angles", "frame", "elements"}
    if unknown:
        raise ValueError(f"unknown holonomy keys: {', '.join(sorted(unknown))}")
    if "elements" in value:
        if "angles" in value or "frame" in value:
            raise ValueError("give either elements or angles (with an optional frame)")
        rows = [np.array([_number(v) for v in _flatten(h)]) for h in value["elements"]]
        return HolonomyData(spec, tuple(tuple(r) for r in rows))
    if "angles" not in value:
        raise ValueError("holonomy needs angles or elements")
    angles = np.array([[_number(v) for v in _flatten(row)] for row in value["angles"]])
    frame = value.get("frame")
    if frame is not None:
        frame = spec.renormalize(np.array([_number(v) for v in _flatten(frame)]))
    return HolonomyData.toral(spec, angles, frame)


def _flatten(v) -> list:
    if isinstance(v, list):
        return [x for item in v for x in _flatten(item)]
    return [v]


def _json_position(text: str, needle: str) -> tuple[int, int]:
    k = text.find(needle)
    if k < 0:
        return 1, 1
    line = text.count("\n", 0, k) + 1
    return line, k - (text.rfind("\n", 0, k) + 1) + 1


def parse_scenario(text: str, source: str = "scenario") -> Scenario | Diagnostic:
    """Parse a scenario envelope and all its field expressions; never partial."""
    try:
        return _parse_scenario(text, source)
    except ScenarioError as exc:
        return exc.diagnostic


def load_scenario(text: str, source: str = "scenario") -> Scenario:
    """Like :func:`parse_scenario` but raising :class:`ScenarioError`."""
    return _parse_scenario(text, source)


def _parse_scenario(text: str, source: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(Diagnostic(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno, (), source))

    def bad(message: str, key: str | None = None):
        line, col = _json_position(text, f'"{key}"') if key else (1, 1)
        raise ScenarioError(Diagnostic(message, line, col, (), source))

    if not isinstance(data, dict):
        bad("a scenario is a JSON object")
    for key in data:
        if key not in ENVELOPE_KEYS:
            bad(f"unknown scenario key {key!r}", key)
    for key in REQUIRED_KEYS:
        if key not in data:
            bad(f"missing scenario key {key!r}")
    try:
        spec = group_spec(data["group"])
    except ValueError as exc:
        bad(str(exc), "group")
    dim = data["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or not 1 <= dim <= 4:
        bad("dim must be an integer between 1 and 4", "dim")
    grid = data.get("grid", DEFAULT_GRID)
    if not isinstance(grid, int) or isinstance(grid, bool) or grid < 2:
        bad("grid must be an integer >= 2", "grid")
    holonomy = None
    if data.get("holonomy") is not None:
        if dim != 3:
            bad("holonomy is supported on T^3 only", "holonomy")
        try:
            holonomy = holonomy_from_json(data["holonomy"], spec)
        except (ValueError, ScenarioError) as exc:
            bad(f"invalid holonomy: {exc}", "holonomy")
    raw_fields = data["fields"]
    if not isinstance(raw_fields, dict) or not raw_fields:
        bad("fields must be a non-empty object of name -> expression", "fields")
    fields, warnings = [], []
    for name in sorted(raw_fields):
        expr = raw_fields[name]
        if not isinstance(expr, str):
            bad(f"field {name!r} must be an expression string", name)
        p = Parser(expr, spec, dim, f"fields.{name}")
        syntax = p.parse_field()
        warnings.extend(p.warnings)
        value = syntax if isinstance(syntax, GroupField) else syntax.build(dim, spec)
        fields.append(Field(name, syntax, value))
    if holonomy is not None and not holonomy.is_trivial:
        _check_twisting(fields, holonomy)
    checks = data.get("checks", [])
    if not isinstance(checks, list) or not all(isinstance(c, str) for c in checks):
        bad("checks must be a list of names", "checks")
    expected = data.get("expected", {})
    if not isinstance(expected, dict):
        bad("expected must be an object of name -> value", "expected")
    try:
        expected_pairs = tuple(sorted((k, _number(v)) for k, v in expected.items()))
    except (ValueError, ScenarioError) as exc:
        bad(f"invalid expected value: {exc}", "expected")
    scenario_id = data.get("id", source)
    if not isinstance(scenario_id, str):
        bad("id must be a string", "id")
    return Scenario(scenario_id, data["group"], spec, dim, grid, holonomy, data.get("holonomy"),
                    tuple(fields), tuple(checks), expected_pairs, tuple(warnings))


def _check_twisting(fields, holonomy):
    from .flat import TWIST_TOL, TwistedField, validate_twisting

    for f in fields:
        if f.kind == "real":
            continue
        if f.kind == "group":
            kind = "group"
        elif f.degree == 0:
            kind = "algebra"
        elif f.degree == 1:
            kind = "gauge"
        else:
            continue
        residual = validate_twisting(TwistedField(f.value, holonomy, kind))
        if residual > TWIST_TOL:
            raise ScenarioError(Diagnostic(
                f"field does not satisfy the twisting law of the declared holonomy (residual {residual:.3g})",
                1, 1, (), f"fields.{f.name}"))


# -- printing ---------------------------------------------------------------------------------------

def scenario_to_dict(sc: Scenario) -> dict:
    out = {"id": sc.id, "group": sc.group, "dim": sc.dim, "grid": sc.grid,
           "fields": {f.name: f.to_text() for f in sc.fields}}
    if sc.holonomy_json is not None:
        out["holonomy"] = sc.holonomy_json
    if sc.checks:
        out["checks"] = list(sc.checks)
    if sc.expected:
        out["expected"] = {k: v for k, v in sc.expected}
    return out


def format_scenario(sc: Scenario) -> str:
    """Canonical text of a scenario; reparses to a structurally identical one."""
    return json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True) + "\n"


def format_field(syntax) -> str:
    return syntax.to_text()
