import pytest
from hypothesis import given
from hypothesis import strategies as st

from glocal.parser import parse_policy, pretty_policy
from glocal.policy import VIOLATION, PolicyAutomaton, admits, dynamic_projection, run, strip_special
from glocal.terms import REL, Special

ALT = PolicyAutomaton.build("alt", "q0", {("q0", "a"): "q1", ("q1", "b"): "q0"})
LAX = PolicyAutomaton.build("lax", "q", {("q", "a"): "bad"}, violating=["bad"], missing="stay")

traces = st.lists(st.sampled_from(["a", "b", REL, Special("in", "chi1")]), max_size=8).map(tuple)


def test_missing_edge_violates():
    assert admits(ALT, ("a", "b", "a"))
    assert not admits(ALT, ("b",))
    assert run(ALT, ("a", "a")) is VIOLATION


def test_missing_stay_and_violating_state():
    assert admits(LAX, ("b", "b"))
    assert not admits(LAX, ("b", "a"))


def test_release_and_specials_do_not_move():
    assert run(ALT, ("a", REL, Special("out", "chi"), "b")) == "q0"


def test_nondeterminism_rejected():
    with pytest.raises(ValueError):
        PolicyAutomaton("p", "q", frozenset(), ((("q", "a"), "r"), (("q", "a"), "s")))


def test_unknown_missing_rule():
    with pytest.raises(ValueError):
        PolicyAutomaton.build("p", "q", {}, missing="ignore")


@given(traces, traces)
def test_violation_is_prefix_closed(eta, more):
    if not admits(ALT, eta):
        assert not admits(ALT, eta + more)


@given(traces)
def test_verdict_only_sees_actions(eta):
    assert admits(ALT, eta) == admits(ALT, strip_special(eta))
    assert all(not isinstance(e, Special) for e in dynamic_projection(eta))


def test_policy_text_round_trip():
    for phi in (ALT, LAX):
        assert parse_policy(pretty_policy(phi)) == phi
