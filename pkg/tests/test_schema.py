import pytest
from hypothesis import given, strategies as st

from graphsynth.schema import (
    MANY_TO_MANY,
    ONE_TO_MANY,
    CorrelationDecl,
    EdgeTypeDecl,
    GeneratorBinding,
    Ident,
    NodeTypeDecl,
    ParseError,
    PropertyDecl,
    ScaleDirective,
    Schema,
    format_schema,
    parse_schema,
    validate_schema,
)


def errors(text):
    return [d.message for d in validate_schema(parse_schema(text))]


def test_running_example_shape(social_schema_text):
    s = parse_schema(social_schema_text)
    assert [n.name for n in s.node_types] == ["Person", "Message"]
    assert [e.name for e in s.edge_types] == ["knows", "creates"]
    person = s.node_type("Person")
    assert len(person.properties) == 5
    assert person.property("name").depends_on == ["country", "sex"]
    assert s.edge_type("knows").cardinality == MANY_TO_MANY
    assert s.edge_type("creates").cardinality == ONE_TO_MANY
    assert s.edge_type("creates").correlation.properties == ["interest", "topic"]
    assert s.scale.target == "Person"
    assert validate_schema(s) == []


def test_empty_input_parses_and_fails_validation():
    s = parse_schema("")
    assert s.node_types == [] and s.edge_types == []
    assert errors("") == ["missing scale directive"]


def test_missing_scale_is_a_validation_error(tiny_dir):
    text = "node Person { name: string = dictionary(file=\"colors.csv\") }"
    assert parse_schema(text).node_type("Person") is not None
    assert "missing scale directive" in errors(text)


def test_dependency_cycle_diagnostic():
    text = """
    node T {
      a: string = conditional(file="x.csv") correlated(b)
      b: string = conditional(file="x.csv") correlated(a)
    }
    scale T = 1
    """
    msgs = errors(text)
    assert any("dependency cycle" in m and "T.a" in m and "T.b" in m for m in msgs)


def test_unresolved_node_type():
    text = """
    node Person { }
    edge haunts: Person -> Ghost { structure = degree(constant=1) }
    scale Person = 3
    """
    assert any("unresolved head node type 'Ghost'" in m for m in errors(text))


@pytest.mark.parametrize("text, line, col, msg", [
    ("node Person {\n  name string = uuid()\n}", 2, 8, "expected ':'"),
    ("nodes Person {}", 1, 1, "unknown keyword"),
    ("node A {}\nnode A {}", 2, 1, "duplicate declaration"),
    ("node A { x: float = uuid() }", 1, 13, "unknown value type"),
    ("node A { x: string = uuid( }", 1, 28, "expected argument value"),
    ("scale A = \"ten\"", 1, 11, "expected integer"),
    ("node A { x: string = f(\"open) }", 1, 24, "unterminated string"),
    ("edge e: A => A {}", 1, 12, "unexpected character"),
])
def test_syntax_errors_carry_positions(text, line, col, msg):
    with pytest.raises(ParseError, match=msg) as ei:
        parse_schema(text)
    assert (ei.value.line, ei.value.col) == (line, col)


def test_endpoint_refs_only_inside_edges():
    with pytest.raises(ParseError, match="tail."):
        parse_schema("node A { x: date = after() correlated(tail.d) }")


def test_positional_after_keyword_rejected():
    with pytest.raises(ParseError, match="positional argument follows"):
        parse_schema("node A { x: integer = uniformInt(lo=1, 5) }")


def test_validation_reports_generator_misuse():
    text = """
    node A {
      x: date = dictionary(file="c.csv")
      y: string = nosuch()
      z: integer = uniformInt(lo=1)
    }
    edge e: A -> A { structure = planted(avg_degree=4) }
    scale A = 10
    """
    msgs = errors(text)
    assert any("cannot produce date" in m for m in msgs)
    assert any("unknown property generator 'nosuch'" in m for m in msgs)
    assert any("uniformInt" in m and "hi" in m for m in msgs)
    assert any("builds many-to-many" in m for m in msgs)


def test_many_to_many_between_types_rejected():
    text = """
    node A { }
    node B { }
    edge e: A -- B { structure = planted() }
    scale A = 10
    """
    assert any("must connect a node type to itself" in m for m in errors(text))


def test_diagnostics_are_deterministic_and_inside_text(social_schema_text):
    bad = social_schema_text.replace("correlated(country)", "correlated(nation)").replace(
        "scale Person = 10000", "scale Robot = 1")
    s = parse_schema(bad)
    first = validate_schema(s)
    assert first == validate_schema(s)
    assert len(first) == 2
    for d in first:
        assert 0 <= d.span.start <= d.span.end <= len(bad)
        assert d.span.line >= 1


# ---------------------------------------------------------------- round trip

names = st.from_regex(r"[a-z][a-zA-Z0-9_]{0,6}", fullmatch=True).filter(
    lambda s: s not in {"tail", "head", "structure", "join", "correlated"})
type_names = st.from_regex(r"[A-Z][a-zA-Z0-9]{0,6}", fullmatch=True)
values = st.one_of(
    st.integers(-10**9, 10**9),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.text(st.characters(blacklist_categories=("Cs", "Cc")), max_size=8),
    names.map(Ident),
)


@st.composite
def bindings(draw):
    args = draw(st.lists(st.tuples(names, values), max_size=3, unique_by=lambda a: a[0]))
    positional = draw(st.lists(values, max_size=2))
    return GeneratorBinding(draw(names), [("", v) for v in positional] + args)


@st.composite
def prop_lists(draw, endpoint=False):
    props = []
    for name in draw(st.lists(names, max_size=4, unique=True)):
        pool = [p.name for p in props]
        if endpoint:
            pool += ["tail.d", "head.e"]
        deps = draw(st.lists(st.sampled_from(pool), max_size=2)) if pool else []
        props.append(PropertyDecl(name, draw(st.sampled_from(["string", "integer", "date"])),
                                  draw(bindings()), deps))
    return props


@st.composite
def schemas(draw):
    tnames = draw(st.lists(type_names, min_size=1, max_size=3, unique=True))
    nodes = [NodeTypeDecl(t, draw(prop_lists())) for t in tnames]
    edges = []
    for ename in draw(st.lists(names, max_size=2, unique=True)):
        card = draw(st.sampled_from([ONE_TO_MANY, MANY_TO_MANY]))
        corr = None
        if draw(st.booleans()):
            corr = CorrelationDecl(draw(st.lists(names, min_size=1, max_size=2)),
                                   draw(st.text(max_size=10)))
        edges.append(EdgeTypeDecl(ename, draw(st.sampled_from(tnames)), draw(st.sampled_from(tnames)),
                                  card, draw(bindings()), draw(prop_lists(endpoint=True)), corr))
    scales = [ScaleDirective(draw(st.sampled_from(tnames)), draw(st.integers(0, 10**12)))]
    return Schema(nodes, [e for e in edges if e.name not in tnames], scales)


@given(schemas())
def test_print_parse_round_trip(s):
    text = format_schema(s)
    again = parse_schema(text)
    assert again == s
    assert format_schema(again) == text
