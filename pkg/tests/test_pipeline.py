import json

import numpy as np
import pytest

from graphsynth.matcher import empirical_joint, load_joint_csv, table_labels, value_universe, \
    distribution_distance
from graphsynth.pipeline import (
    GEN_PROPERTY,
    MATCH,
    DagCycleError,
    PipelineError,
    build_task_dag,
    execute_plan,
    generate,
    infer_sizes,
    write_dataset,
)
from graphsynth.schema import ScaleDirective, parse_schema

from conftest import SOCIAL

BASE = str(SOCIAL.parent)


def social(scale="scale Person = 2000"):
    text = SOCIAL.read_text().replace("scale Person = 10000", scale)
    return parse_schema(text, base_dir=BASE)


@pytest.fixture(scope="module")
def small_run():
    return generate(social(), seed=42)


def positions(dag):
    return {t.name: i for i, t in enumerate(dag.order())}


def test_running_example_order():
    dag = build_task_dag(social())
    pos = positions(dag)
    assert pos["GenProperty:Person.country"] < pos["GenProperty:Person.sex"] \
        < pos["GenProperty:Person.name"]
    assert pos["GenStructure:knows"] < pos["Match:knows"]
    assert pos["GenProperty:Person.interest"] < pos["Match:creates"]
    assert pos["GenProperty:Message.topic"] < pos["Match:creates"]
    assert pos["Match:creates"] < pos["GenProperty:creates.creationDate"]
    assert pos["GenProperty:Person.creationDate"] < pos["GenProperty:creates.creationDate"]
    kinds = [t.kind for t in dag.tasks]
    assert kinds.count(GEN_PROPERTY) == 8 and kinds.count(MATCH) == 2


def test_message_properties_wait_for_creates_structure():
    dag = infer_sizes(build_task_dag(social()))
    pos = positions(dag)
    assert pos["GenStructure:creates"] < pos["GenProperty:Message.topic"]
    assert dag.size_rules["Message"].kind == "edge"


def test_no_edges_no_match(tiny_dir):
    s = parse_schema('node A { c: string = dictionary(file="colors.csv") }\nscale A = 5',
                     base_dir=str(tiny_dir))
    dag = build_task_dag(s)
    assert [t.name for t in dag.tasks] == ["GenProperty:A.c"]


def test_property_cycle_lists_members():
    s = parse_schema("""
    node T {
      a: string = conditional(file="x.csv") correlated(b)
      b: string = conditional(file="x.csv") correlated(a)
    }
    scale T = 1
    """)
    with pytest.raises(DagCycleError) as ei:
        build_task_dag(s)
    assert set(ei.value.members) == {"GenProperty:T.a", "GenProperty:T.b"}


SIZED = """
node Person { c: string = dictionary(file="colors.csv") }
node Message { s: string = dictionary(file="shapes.csv") }
edge creates: Person -> Message { structure = degree(%s) }
%s
"""


def test_message_size_from_point_mass(tiny_dir):
    s = parse_schema(SIZED % ("constant=3", "scale Person = 1000"), base_dir=str(tiny_dir))
    ds = generate(s)
    assert len(ds.property_tables["Person.c"]) == 1000
    assert len(ds.property_tables["Message.s"]) == 3000
    assert ds.report["size_sources"] == {"Message": "edge:creates", "Person": "scale"}


def test_edge_denominated_scale(tiny_dir):
    s = parse_schema(SIZED % ("mean=5", "scale creates = 5000"), base_dir=str(tiny_dir))
    dag = infer_sizes(build_task_dag(s))
    assert dag.sizes == {"Person": 1000}
    ds = execute_plan(dag)
    assert len(ds.property_tables["Message.s"]) == len(ds.edge_tables["creates"])


def test_undetermined_size(tiny_dir):
    s = parse_schema(SIZED % ("constant=2", "scale Person = 10")
                     + 'node Orphan { c: string = dictionary(file="colors.csv") }',
                     base_dir=str(tiny_dir))
    with pytest.raises(PipelineError, match="undetermined size: Orphan"):
        infer_sizes(build_task_dag(s))


def test_conflicting_sizes(tiny_dir):
    s = parse_schema(SIZED % ("constant=2", "scale Message = 10"), base_dir=str(tiny_dir))
    with pytest.raises(PipelineError, match="undetermined size: Person"):
        infer_sizes(build_task_dag(s))
    s = parse_schema(SIZED % ("constant=2", "scale Person = 10")
                     + "edge also: Person -> Message { structure = degree(constant=1) }",
                     base_dir=str(tiny_dir))
    with pytest.raises(PipelineError, match="conflicting sizes for Message"):
        infer_sizes(build_task_dag(s))


def test_explicit_scale_overrides_directive():
    dag = infer_sizes(build_task_dag(social()), ScaleDirective("Person", 77))
    assert dag.sizes["Person"] == 77


def test_zero_scale_gives_empty_tables(tmp_path):
    ds = generate(social("scale Person = 0"))
    assert all(len(t) == 0 for t in ds.property_tables.values())
    assert all(len(t) == 0 for t in ds.edge_tables.values())
    write_dataset(ds, tmp_path)
    assert (tmp_path / "knows.csv").read_text() == "id,tail,head\n"


def test_sizes_are_conserved(small_run):
    ds = small_run
    n_person = len(ds.property_tables["Person.country"])
    n_msg = len(ds.property_tables["Message.topic"])
    assert n_person == 2000
    creates, knows = ds.edge_tables["creates"], ds.edge_tables["knows"]
    assert n_msg == len(creates)
    assert sorted(creates.heads.tolist()) == list(range(n_msg))
    creates.check_bounds(n_person, n_msg)
    knows.check_bounds(n_person, n_person)
    assert len(ds.property_tables["creates.creationDate"]) == len(creates)


def test_edge_property_follows_its_endpoint(small_run):
    ds = small_run
    creates = ds.edge_tables["creates"]
    person_date = ds.property_tables["Person.creationDate"].values
    edge_date = ds.property_tables["creates.creationDate"].values
    assert np.all(edge_date > person_date[creates.tails])


def test_correlated_knows_edges_follow_the_joint(small_run):
    ds = small_run
    jd = load_joint_csv(SOCIAL.parent / "country_pairs.csv")
    pt = ds.property_tables["Person.country"]
    values = value_universe(pt, jd.values)
    observed = empirical_joint(ds.edge_tables["knows"], table_labels(pt, values), values)
    assert distribution_distance(jd, observed) <= 0.05
    assert ds.report["matching"]["knows"]["l1_distance"] == pytest.approx(
        distribution_distance(jd, observed))


def test_mapping_is_applied_to_edge_ids(small_run):
    ds = small_run
    f = ds.mappings["knows"]["tail"]
    assert sorted(f.tolist()) == list(range(2000))


def test_parallel_runs_match(tmp_path):
    a = write_dataset(generate(social("scale Person = 3000"), 7, 1), tmp_path / "a")
    b = write_dataset(generate(social("scale Person = 3000"), 7, 8), tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes(), x.name


def test_dataset_layout(small_run, tmp_path):
    paths = write_dataset(small_run, tmp_path)
    names = sorted(p.name for p in paths)
    assert names == sorted([
        "Person.name.csv", "Person.country.csv", "Person.interest.csv", "Person.sex.csv",
        "Person.creationDate.csv", "Message.topic.csv", "Message.text.csv",
        "creates.creationDate.csv", "creates.csv", "knows.csv", "report.json",
    ])
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["node_counts"]["Person"] == 2000
    assert "Person.sex" in report["streams"]
    assert set(report["matching"]) == {"knows", "creates"}


def test_fallback_usage_is_reported(small_run):
    # the sex dictionary covers only some countries; the rest use the fallback rows
    assert small_run.report["fallback_usage"].get("Person.sex", 0) > 0


def test_task_failure_names_the_task(tmp_path):
    s = parse_schema('node A { x: string = dictionary(file="gone.csv") }\nscale A = 3',
                     base_dir=str(tmp_path))
    with pytest.raises(PipelineError, match=r"task GenProperty:A.x failed: cannot read"):
        generate(s)
