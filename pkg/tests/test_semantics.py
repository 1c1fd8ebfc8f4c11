import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import POLICIES, random_term
from glocal.parser import parse_process, pretty
from glocal.semantics import (
    BoundOutput, ClosedAccess, ClosedRelease, FaultyAccess, ReconfigEvent, Silent,
    congruence_normalize, replication_unfold, step,
)
from glocal.terms import Name, alpha_equivalent, label_boundaries

R = Name("r", True)


def term(text):
    return label_boundaries(parse_process(text, POLICIES))


def moves(text, **kw):
    return [(str(mu), pretty(q)) for mu, q in step(congruence_normalize(term(text)), **kw)]


def silent(p):
    return [q for mu, q in step(p) if isinstance(mu, Silent)]


def test_communication_substitutes():
    q, = silent(term("x<y>.0 | x(z).z<w>.0"))
    assert pretty(q) == "y<w>.0"


def test_scope_extrusion_keeps_name_private():
    p = term("new n. x<n>.n<a>.0 | x(z).z(u).0")
    q, = silent(congruence_normalize(p))
    assert pretty(q) == "new n'1. (n'1(u).0 | n'1<a>.0)"
    # the restricted name alone is visible as a bound output
    assert any(isinstance(m, BoundOutput) for m, _ in step(term("new n. x<n>.0")))


def test_request_acquires_available_resource():
    out = moves("res #r1, any, eps { 0 } @chi1 | req #r1 { a(#r1).rel(#r1).0 } @c")
    assert out == [("tau", "res #r1, any, in(c) { a(#r1).rel(#r1).0 } @chi1[c]")]


def test_closed_access_then_release():
    p = term("res #r1, ab_alt, eps { a(#r1).rel(#r1).tau.0 } @chi1")
    (mu, q), = step(p)
    assert mu == ClosedAccess("a", Name("r1", True))
    (mu, q), = step(q)
    assert mu == ClosedRelease(Name("r1", True))
    assert pretty(q) == "tau.0 | res #r1, ab_alt, a.rel.out(chi1) { 0 } @chi1[chi1]"


def test_faulty_access_forces_release():
    p = term("res #r1, only_a, eps { b(#r1).tau.0 } @chi1")
    (mu, q), = step(p)
    assert mu == FaultyAccess("b", Name("r1", True))
    assert pretty(q) == "tau.0 | res #r1, only_a, err_out(chi1) { 0 } @chi1[chi1]"


def test_access_outside_scope_is_not_a_system_move():
    (mu, _), = step(term("a(#r1).0"))
    assert str(mu) == "a?#r1"


def test_request_body_cannot_touch_its_resource_early():
    assert step(term("req #r1 { a(#r1).0 }")) == []


def test_replication_budget():
    p = replication_unfold(term("!tau.0"), 2)
    counts = []
    for _ in range(3):
        succ = step(p)
        counts.append(len(succ))
        if not succ:
            break
        p = succ[0][1]
    assert counts == [1, 1, 0]


def test_unlabelled_terms_rejected():
    with pytest.raises(ValueError):
        step(parse_process("req #r1 { 0 }"))


def test_reconfiguration_script():
    p = term("req #r1 { a(#r1).rel(#r1).0 } @c")
    appear = ReconfigEvent("appear", Name("r1", True), 0, POLICIES["any"])
    (mu, q), = step(p, (appear,), 0)
    assert isinstance(mu, Silent) and "res #r1, any, eps { 0 } @chi_app0_0" in pretty(q)
    gone = ReconfigEvent("disappear", Name("r1", True), 1)
    (mu, q2), = step(q, (appear, gone), 1)
    assert pretty(q2) == pretty(p)


def test_events_must_be_ordered():
    from glocal.semantics import check_script
    with pytest.raises(ValueError):
        check_script([ReconfigEvent("disappear", R, 2), ReconfigEvent("disappear", R, 2)])


def test_normalization_floats_available_resources():
    p = term("res #r1, any, eps { res #r2, any, eps { 0 } @a | tau.0 } @b")
    assert pretty(congruence_normalize(p)) == "res #r1, any, eps { tau.0 } @b | res #r2, any, eps { 0 } @a"


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_normalization_is_idempotent_and_sound(seed):
    p = random_term(seed, stray=0.1)
    n = congruence_normalize(p)
    assert congruence_normalize(n) == n
    # a reparsed copy has fresh binder sites but the same normal form
    assert alpha_equivalent(congruence_normalize(parse_process(pretty(p), POLICIES)), n)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_successors_are_normal_and_sorted(seed):
    p = congruence_normalize(replication_unfold(random_term(seed), 2))
    succ = step(p)
    for _, q in succ:
        assert congruence_normalize(q) == q
    assert succ == step(p)
