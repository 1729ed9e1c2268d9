"""Schema DSL: declarations of node types, edge types, properties and scale.

Grammar (whitespace-insensitive, ``#`` starts a line comment)::

    schema      := (node_decl | edge_decl | scale_decl)*
    node_decl   := "node" IDENT "{" prop_decl* "}"
    prop_decl   := IDENT ":" type "=" gen_call [ "correlated" "(" REF ("," REF)* ")" ]
    type        := "string" | "integer" | "date"
    edge_decl   := "edge" IDENT ":" IDENT arrow IDENT "{" "structure" "=" gen_call
                   [ "join" "=" IDENT ["," IDENT] "~" STRING ] prop_decl* "}"
    arrow       := "->" | "--"
    scale_decl  := "scale" IDENT "=" INTEGER
    gen_call    := IDENT "(" [ arg ("," arg)* ] ")"
    arg         := [ IDENT "=" ] (NUMBER | STRING | IDENT ("." IDENT)*)
    REF         := IDENT | ("tail" | "head") "." IDENT

``REF`` with a ``tail.``/``head.`` prefix is only meaningful inside an edge and
names a property of the endpoint node type. ``join`` with two properties
correlates a bipartite edge: first the tail property, then the head property.
Positional generator arguments (no ``key=``) bind to the generator's parameters
in declaration order and must precede keyword arguments.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

from .store import VALUE_TYPES

ONE_TO_MANY = "one-to-many"
MANY_TO_MANY = "many-to-many"
ARROWS = {"->": ONE_TO_MANY, "--": MANY_TO_MANY}
ARROW_OF = {v: k for k, v in ARROWS.items()}

KEYWORDS = {"node", "edge", "scale"}


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    start: int
    end: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOSPAN = Span(0, 0, 0, 0)


class Ident(str):
    """A bare identifier used as a generator argument (printed unquoted)."""

    def __repr__(self) -> str:
        return f"Ident({str.__repr__(self)})"


@dataclass
class GeneratorBinding:
    generator_name: str
    parameters: list[tuple[str, Any]] = field(default_factory=list)
    span: Span = field(default=NOSPAN, compare=False, repr=False)

    def params(self) -> dict[str, Any]:
        return dict(self.parameters)


@dataclass
class PropertyDecl:
    name: str
    value_type: str
    generator: GeneratorBinding
    depends_on: list[str] = field(default_factory=list)
    span: Span = field(default=NOSPAN, compare=False, repr=False)


@dataclass
class NodeTypeDecl:
    name: str
    properties: list[PropertyDecl] = field(default_factory=list)
    span: Span = field(default=NOSPAN, compare=False, repr=False)

    def property(self, name: str) -> PropertyDecl | None:
        return next((p for p in self.properties if p.name == name), None)


@dataclass
class CorrelationDecl:
    properties: list[str]
    distribution_path: str
    span: Span = field(default=NOSPAN, compare=False, repr=False)

    @property
    def tail_property(self) -> str:
        return self.properties[0]

    @property
    def head_property(self) -> str:
        return self.properties[-1]


@dataclass
class EdgeTypeDecl:
    name: str
    tail_type: str
    head_type: str
    cardinality: str
    structure: GeneratorBinding
    properties: list[PropertyDecl] = field(default_factory=list)
    correlation: CorrelationDecl | None = None
    span: Span = field(default=NOSPAN, compare=False, repr=False)

    def property(self, name: str) -> PropertyDecl | None:
        return next((p for p in self.properties if p.name == name), None)


@dataclass
class ScaleDirective:
    target: str
    count: int
    span: Span = field(default=NOSPAN, compare=False, repr=False)


@dataclass
class Schema:
    node_types: list[NodeTypeDecl] = field(default_factory=list)
    edge_types: list[EdgeTypeDecl] = field(default_factory=list)
    scales: list[ScaleDirective] = field(default_factory=list)
    base_dir: str | None = field(default=None, compare=False, repr=False)

    @property
    def scale(self) -> ScaleDirective | None:
        return self.scales[0] if len(self.scales) == 1 else None

    def node_type(self, name: str) -> NodeTypeDecl | None:
        return next((t for t in self.node_types if t.name == name), None)

    def edge_type(self, name: str) -> EdgeTypeDecl | None:
        return next((t for t in self.edge_types if t.name == name), None)


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    span: Span

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.message}"


class ParseError(Exception):
    def __init__(self, message: str, span: Span):
        super().__init__(f"{span.line}:{span.col}: {message}")
        self.message = message
        self.span = span

    @property
    def line(self) -> int:
        return self.span.line

    @property
    def col(self) -> int:
        return self.span.col


# --------------------------------------------------------------------------- lexer


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INTEGER, NUMBER, STRING, PUNCT, EOF
    text: str
    span: Span


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<NUMBER>-?\d+\.\d*(?:[eE][-+]?\d+)?|-?\d+[eE][-+]?\d+|-?\.\d+(?:[eE][-+]?\d+)?)
  | (?P<INTEGER>-?\d+)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<STRING>"(?:[^"\\\n]|\\.)*")
  | (?P<PUNCT>->|--|[{}():=,~.])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = Span(line, pos - line_start + 1, pos, pos + 1)
            if text[pos] == '"':
                raise ParseError("unterminated string literal", span)
            raise ParseError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        span = Span(line, pos - line_start + 1, pos, m.end())
        if kind != "ws":
            tokens.append(Token(kind, m.group(), span))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "", Span(line, pos - line_start + 1, pos, pos)))
    return tokens


def _unquote(s: str) -> str:
    return json.loads(s)


# -------------------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        return ParseError(message, (tok or self.tok).span)

    def describe(self, tok: Token) -> str:
        return "end of input" if tok.kind == "EOF" else repr(tok.text)

    def expect(self, text: str) -> Token:
        if self.tok.kind == "PUNCT" and self.tok.text == text:
            return self.advance()
        raise self.error(f"expected {text!r}, found {self.describe(self.tok)}")

    def expect_kw(self, word: str) -> Token:
        if self.tok.kind == "IDENT" and self.tok.text == word:
            return self.advance()
        raise self.error(f"expected {word!r}, found {self.describe(self.tok)}")

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind == "IDENT":
            return self.advance()
        raise self.error(f"expected {what}, found {self.describe(self.tok)}")

    def at(self, text: str) -> bool:
        return self.tok.kind == "PUNCT" and self.tok.text == text

    def span_from(self, start: Token) -> Span:
        end = self.tokens[self.i - 1].span.end if self.i > 0 else start.span.end
        return Span(start.span.line, start.span.col, start.span.start, end)

    # schema := (node_decl | edge_decl | scale_decl)*
    def schema(self) -> Schema:
        s = Schema()
        names: dict[str, Span] = {}
        while self.tok.kind != "EOF":
            t = self.tok
            if t.kind != "IDENT":
                raise self.error(f"expected 'node', 'edge' or 'scale', found {self.describe(t)}")
            if t.text == "node":
                decl = self.node_decl()
                self._claim(names, decl.name, decl.span)
                s.node_types.append(decl)
            elif t.text == "edge":
                decl = self.edge_decl()
                self._claim(names, decl.name, decl.span)
                s.edge_types.append(decl)
            elif t.text == "scale":
                s.scales.append(self.scale_decl())
            else:
                raise self.error(f"unknown keyword {t.text!r}")
        return s

    def _claim(self, names: dict[str, Span], name: str, span: Span) -> None:
        if name in names:
            raise ParseError(
                f"duplicate declaration of {name!r} (first declared at {names[name]})", span
            )
        names[name] = span

    def node_decl(self) -> NodeTypeDecl:
        start = self.expect_kw("node")
        name = self.ident("node type name").text
        self.expect("{")
        props = self.prop_block(allow_endpoints=False)
        self.expect("}")
        return NodeTypeDecl(name, props, self.span_from(start))

    def prop_block(self, allow_endpoints: bool) -> list[PropertyDecl]:
        props: list[PropertyDecl] = []
        seen: dict[str, Span] = {}
        while not self.at("}"):
            p = self.prop_decl(allow_endpoints)
            if p.name in seen:
                raise ParseError(
                    f"duplicate declaration of property {p.name!r} "
                    f"(first declared at {seen[p.name]})",
                    p.span,
                )
            seen[p.name] = p.span
            props.append(p)
        return props

    def prop_decl(self, allow_endpoints: bool) -> PropertyDecl:
        start = self.ident("property name")
        self.expect(":")
        ty = self.ident("value type")
        if ty.text not in VALUE_TYPES:
            raise self.error(
                f"unknown value type {ty.text!r} (expected one of {', '.join(VALUE_TYPES)})", ty
            )
        self.expect("=")
        gen = self.gen_call()
        deps: list[str] = []
        if self.tok.kind == "IDENT" and self.tok.text == "correlated":
            self.advance()
            self.expect("(")
            deps.append(self.ref(allow_endpoints))
            while self.at(","):
                self.advance()
                deps.append(self.ref(allow_endpoints))
            self.expect(")")
        return PropertyDecl(start.text, ty.text, gen, deps, self.span_from(start))

    def ref(self, allow_endpoints: bool) -> str:
        first = self.ident("property name")
        if self.at("."):
            if not allow_endpoints or first.text not in ("tail", "head"):
                raise self.error("qualified references must start with 'tail.' or 'head.'", first)
            self.advance()
            return f"{first.text}.{self.ident('property name').text}"
        return first.text

    def edge_decl(self) -> EdgeTypeDecl:
        start = self.expect_kw("edge")
        name = self.ident("edge type name").text
        self.expect(":")
        tail = self.ident("tail node type").text
        if self.tok.kind == "PUNCT" and self.tok.text in ARROWS:
            cardinality = ARROWS[self.advance().text]
        else:
            raise self.error(f"expected '->' or '--', found {self.describe(self.tok)}")
        head = self.ident("head node type").text
        self.expect("{")
        self.expect_kw("structure")
        self.expect("=")
        structure = self.gen_call()
        correlation = None
        if self.tok.kind == "IDENT" and self.tok.text == "join" and self.peek().text == "=":
            jstart = self.advance()
            self.expect("=")
            props = [self.ident("property name").text]
            if self.at(","):
                self.advance()
                props.append(self.ident("property name").text)
            self.expect("~")
            if self.tok.kind != "STRING":
                raise self.error(f"expected distribution file path, found {self.describe(self.tok)}")
            path = _unquote(self.advance().text)
            correlation = CorrelationDecl(props, path, self.span_from(jstart))
        props = self.prop_block(allow_endpoints=True)
        self.expect("}")
        return EdgeTypeDecl(
            name, tail, head, cardinality, structure, props, correlation, self.span_from(start)
        )

    def scale_decl(self) -> ScaleDirective:
        start = self.expect_kw("scale")
        target = self.ident("scale target").text
        self.expect("=")
        if self.tok.kind != "INTEGER":
            raise self.error(f"expected integer count, found {self.describe(self.tok)}")
        count = int(self.advance().text)
        if count < 0:
            raise self.error("scale count must be non-negative", start)
        return ScaleDirective(target, count, self.span_from(start))

    def gen_call(self) -> GeneratorBinding:
        start = self.ident("generator name")
        self.expect("(")
        params: list[tuple[str, Any]] = []
        if not self.at(")"):
            params.append(self.arg())
            while self.at(","):
                self.advance()
                arg_tok = self.tok
                params.append(self.arg())
                if not params[-1][0] and params[-2][0]:
                    raise self.error("positional argument follows keyword argument", arg_tok)
        self.expect(")")
        keys = [k for k, _ in params if k]
        for k in keys:
            if keys.count(k) > 1:
                raise self.error(f"duplicate argument {k!r}", start)
        return GeneratorBinding(start.text, params, self.span_from(start))

    def arg(self) -> tuple[str, Any]:
        key = ""
        if self.tok.kind == "IDENT" and self.peek().kind == "PUNCT" and self.peek().text == "=":
            key = self.advance().text
            self.advance()
        t = self.advance()
        if t.kind == "INTEGER":
            return key, int(t.text)
        if t.kind == "NUMBER":
            return key, float(t.text)
        if t.kind == "STRING":
            return key, _unquote(t.text)
        if t.kind == "IDENT":
            parts = [t.text]
            while self.at(".") and self.peek().kind == "IDENT":
                self.advance()
                parts.append(self.advance().text)
            return key, Ident(".".join(parts))
        raise self.error(f"expected argument value, found {self.describe(t)}", t)


def parse_schema(text: str, base_dir: str | None = None) -> Schema:
    """Parse DSL source. Raises :class:`ParseError` with line/column on failure."""
    s = _Parser(text).schema()
    s.base_dir = base_dir
    return s


# ------------------------------------------------------------------------- printer


def _format_arg(v: Any) -> str:
    if isinstance(v, Ident):
        return str(v)
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        r = repr(v)
        return r if ("." in r or "e" in r or "n" in r) else r + ".0"
    return json.dumps(str(v))


def _format_call(g: GeneratorBinding) -> str:
    args = ", ".join(f"{k}={_format_arg(v)}" if k else _format_arg(v) for k, v in g.parameters)
    return f"{g.generator_name}({args})"


def _format_prop(p: PropertyDecl) -> str:
    line = f"  {p.name}: {p.value_type} = {_format_call(p.generator)}"
    if p.depends_on:
        line += f" correlated({', '.join(p.depends_on)})"
    return line


def format_schema(s: Schema) -> str:
    out: list[str] = []
    for nt in s.node_types:
        out.append(f"node {nt.name} {{")
        out.extend(_format_prop(p) for p in nt.properties)
        out.append("}")
    for et in s.edge_types:
        out.append(f"edge {et.name}: {et.tail_type} {ARROW_OF[et.cardinality]} {et.head_type} {{")
        out.append(f"  structure = {_format_call(et.structure)}")
        if et.correlation is not None:
            c = et.correlation
            out.append(f"  join = {', '.join(c.properties)} ~ {json.dumps(c.distribution_path)}")
        out.extend(_format_prop(p) for p in et.properties)
        out.append("}")
    for sc in s.scales:
        out.append(f"scale {sc.target} = {sc.count}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------- validation


def _find_cycle(graph: dict[str, list[str]]) -> list[str] | None:
    """First cycle found by DFS in declaration order, as a list of members."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {v: WHITE for v in graph}
    stack: list[str] = []

    def visit(v: str) -> list[str] | None:
        color[v] = GREY
        stack.append(v)
        for w in graph.get(v, []):
            if w not in color:
                continue
            if color[w] == GREY:
                return stack[stack.index(w):]
            if color[w] == WHITE:
                found = visit(w)
                if found:
                    return found
        stack.pop()
        color[v] = BLACK
        return None

    for v in graph:
        if color[v] == WHITE:
            found = visit(v)
            if found:
                return found
    return None


def validate_schema(s: Schema, registry=None) -> list[Diagnostic]:
    """Check a parsed schema; an empty result means it is executable."""
    if registry is None:
        from .registry import default_registry

        registry = default_registry()
    diags: list[Diagnostic] = []

    def err(msg: str, span: Span) -> None:
        diags.append(Diagnostic("error", msg, span))

    seen: dict[str, Span] = {}
    for decl in [*s.node_types, *s.edge_types]:
        if decl.name in seen:
            err(f"duplicate type name {decl.name!r}", decl.span)
        else:
            seen[decl.name] = decl.span

    def check_props(owner: str, props: list[PropertyDecl], endpoint_types=None) -> None:
        names: set[str] = set()
        for p in props:
            if p.name in names:
                err(f"duplicate property {owner}.{p.name}", p.span)
            names.add(p.name)
        for p in props:
            gspan = p.generator.span if p.generator.span != NOSPAN else p.span
            for msg in registry.check_property(p.generator, p.value_type, len(p.depends_on)):
                err(f"{owner}.{p.name}: {msg}", gspan)
            for dep in p.depends_on:
                if "." in dep:
                    side, _, pname = dep.partition(".")
                    nt = s.node_type(endpoint_types[side]) if endpoint_types else None
                    if nt is not None and nt.property(pname) is None:
                        err(f"{owner}.{p.name}: unknown endpoint property {dep!r}", p.span)
                elif dep not in names:
                    err(f"{owner}.{p.name}: depends on undeclared property {dep!r}", p.span)
        graph = {p.name: [d for d in p.depends_on if "." not in d] for p in props}
        cycle = _find_cycle(graph)
        if cycle:
            first = next(p for p in props if p.name == cycle[0])
            members = ", ".join(f"{owner}.{c}" for c in cycle)
            err(f"dependency cycle among {{{members}}}", first.span)

    for nt in s.node_types:
        check_props(nt.name, nt.properties)

    for et in s.edge_types:
        ok = True
        for side, tname in (("tail", et.tail_type), ("head", et.head_type)):
            if s.node_type(tname) is None:
                err(f"edge {et.name}: unresolved {side} node type {tname!r}", et.span)
                ok = False
        sspan = et.structure.span if et.structure.span != NOSPAN else et.span
        for msg in registry.check_structure(et.structure, et.cardinality):
            err(f"edge {et.name}: {msg}", sspan)
        if et.cardinality == MANY_TO_MANY and et.tail_type != et.head_type:
            err(
                f"edge {et.name}: many-to-many edges must connect a node type to itself",
                et.span,
            )
        c = et.correlation
        if c is not None and ok:
            if len(c.properties) == 1:
                pairs = [(et.tail_type, c.properties[0]), (et.head_type, c.properties[0])]
            else:
                pairs = [(et.tail_type, c.properties[0]), (et.head_type, c.properties[1])]
            if et.tail_type == et.head_type and len(set(c.properties)) != 1:
                err(f"edge {et.name}: same-type join takes exactly one property", c.span)
            for tname, pname in pairs:
                if s.node_type(tname).property(pname) is None:
                    err(f"edge {et.name}: join property {tname}.{pname} is not declared", c.span)
        if ok:
            check_props(et.name, et.properties, {"tail": et.tail_type, "head": et.head_type})
        else:
            check_props(et.name, [p for p in et.properties], None)

    if not s.scales:
        err("missing scale directive", Span(1, 1, 0, 0))
    elif len(s.scales) > 1:
        for sc in s.scales[1:]:
            err("only one scale directive is allowed", sc.span)
    for sc in s.scales:
        if s.node_type(sc.target) is None and s.edge_type(sc.target) is None:
            err(f"scale target {sc.target!r} is not a declared type", sc.span)
    return diags
