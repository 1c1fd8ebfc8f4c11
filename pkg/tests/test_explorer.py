import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import POLICIES, random_term
from glocal.explorer import (
    complies_with, explore, replay, resource_traces, run_random, system_successors,
)
from glocal.parser import parse_process
from glocal.scenarios import load_scenario
from glocal.semantics import ClosedAccess, ClosedRelease, FaultyAccess, ReconfigEvent, is_system_label
from glocal.terms import Name, label_boundaries


def term(text):
    return label_boundaries(parse_process(text, POLICIES))


ALT = term("res #r1, ab_alt, eps { 0 } | req #r1 { a(#r1).rel(#r1).0 } | req #r1 { b(#r1).rel(#r1).0 }")


@pytest.fixture(scope="module")
def workshop():
    return load_scenario("workshop").main


def test_small_graph_is_complete():
    g = explore(ALT)
    assert not g.truncated
    assert all(is_system_label(mu) for mu in g.labels())
    assert any(isinstance(mu, FaultyAccess) for mu in g.labels())


def test_depth_bound_marks_truncation():
    g = explore(ALT, depth=1)
    assert g.truncated and g.depth == 1
    assert not explore(ALT, depth=50).truncated


def test_cap_marks_truncation():
    assert explore(ALT, cap=2).truncated


def test_graph_serialization():
    g = explore(ALT)
    d = json.loads(g.to_json())
    assert len(d["nodes"]) == len(g.nodes) and len(d["edges"]) == len(g.edges)
    assert g.to_edge_list().count("\n") == len(g.edges)


def test_compliance_verdicts():
    bad = complies_with(ALT, "r1")
    assert bad.status == "violates"
    assert replay(ALT, bad.witness)
    good = complies_with(term("res #r1, any, eps { 0 } | req #r1 { b(#r1).rel(#r1).0 }"), "r1")
    assert good.status == "complies" and good.witness is None
    assert complies_with(ALT, "r1", depth=1).status == "inconclusive"


def test_undeclared_resource():
    with pytest.raises(ValueError):
        complies_with(ALT, "r9")


def test_replay_rejects_disabled_labels():
    with pytest.raises(ValueError):
        replay(ALT, ["rel(#r1)"])


def test_workshop_witness(workshop):
    v = complies_with(workshop, "mallet", depth=40, budget=4)
    assert v.witness_text()[-1] == "fault hard_hit(#mallet)"
    assert complies_with(workshop, "hammer", depth=40, budget=4).status == "complies"


def test_robot_delivery_path_replays():
    p = load_scenario("robot").main
    path = ("tau,E(#IT),E(#sns11),S(#IT),S(#sns11),rel(#IT),tau,N(#IT),N(#sns21),E(#IT),"
            "E(#sns21),rel(#IT),tau,N(#IT),N(#sns32),rel(#IT)").split(",")
    assert replay(p, path)


def test_resource_traces():
    r = Name("r1", True)
    labels = [ClosedAccess("a", r), ClosedAccess("b", Name("r2", True)), FaultyAccess("b", r),
              ClosedRelease(r)]
    assert resource_traces(labels, "r1") == ("a", "rel")


def test_random_runs_are_reproducible(workshop):
    a = run_random(workshop, seed=3, max_steps=30, budget=4)
    b = run_random(workshop, seed=3, max_steps=30, budget=4)
    assert a == b
    assert all(is_system_label(mu) for mu in a.labels)


def test_appearing_resource_serves_request():
    p = term("req #r1 { a(#r1).rel(#r1).0 }")
    script = (ReconfigEvent("appear", Name("r1", True), 0, POLICIES["any"]),)
    g = explore(p, script)
    assert [str(mu) for mu in g.labels()] == ["tau", "tau", "a(#r1)", "rel(#r1)"]
    assert explore(p).edges == []


def test_parallel_frontier_matches_serial(workshop):
    one = explore(workshop, budget=2)
    two = explore(workshop, budget=2, jobs=2)
    assert [str(mu) for mu in one.labels()] == [str(mu) for mu in two.labels()]
    assert one.nodes == two.nodes


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_edges_agree_with_step(seed):
    p = random_term(seed)
    g = explore(p, budget=2, depth=4)
    for s, mu, d in g.edges:
        assert (mu, g.nodes[d]) in system_successors(g.nodes[s])
