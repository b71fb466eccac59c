from __future__ import annotations

import math

import pytest

from freshcache.model import ItemState, ValidationError
from freshcache.policies import (
    AlwaysFetch,
    GenieThreshold,
    NeverFetch,
    PullThreshold,
    PushCycle,
    genie_threshold,
    on_request,
    on_update,
    parse_policy,
    policy_from_dict,
    policy_to_dict,
    pull_threshold,
    push_cycle,
)


def test_push_fetches_at_the_update_that_reaches_m():
    spec = PushCycle(3)
    s = ItemState()
    fired = []
    for _ in range(7):
        s.age += 1
        if on_update(spec, s):
            fired.append(s.age)
            s.refresh()
    assert fired == [3, 3]
    assert s.age == 1


def test_push_serves_requests_at_current_age():
    d = on_request(PushCycle(5), ItemState(age=4, elapsed=99.0))
    assert (d.fetch, d.serve_age) == (False, 4)


def test_pull_fetches_strictly_after_threshold():
    spec = PullThreshold(2.0)
    assert not on_request(spec, ItemState(age=7, elapsed=2.0)).fetch
    d = on_request(spec, ItemState(age=7, elapsed=2.0000001))
    assert (d.fetch, d.serve_age) == (True, 0)
    assert on_request(PullThreshold(0.0), ItemState(age=0, elapsed=1e-9)).fetch


def test_genie_uses_strict_age_threshold():
    spec = GenieThreshold(4)
    assert not on_request(spec, ItemState(age=4)).fetch
    assert on_request(spec, ItemState(age=5)).fetch
    assert not on_update(spec, ItemState(age=100))


def test_always_and_never():
    assert on_request(AlwaysFetch(), ItemState()).fetch
    d = on_request(NeverFetch(), ItemState(age=9))
    assert (d.fetch, d.serve_age) == (False, 9)
    assert not on_update(AlwaysFetch(), ItemState(age=9))


def test_factories_map_infinity_to_never():
    assert push_cycle(math.inf) == NeverFetch()
    assert pull_threshold(math.inf) == NeverFetch()
    assert genie_threshold(math.inf) == NeverFetch()
    assert push_cycle(4) == PushCycle(4)


@pytest.mark.parametrize("bad", [lambda: PushCycle(0), lambda: PullThreshold(-1.0), lambda: GenieThreshold(-2)])
def test_invalid_parameters(bad):
    with pytest.raises(ValidationError):
        bad()


@pytest.mark.parametrize(
    "text, spec",
    [
        ("push:6", PushCycle(6)),
        ("pull:2.3", PullThreshold(2.3)),
        ("genie:5", GenieThreshold(5)),
        ("always", AlwaysFetch()),
        ("never", NeverFetch()),
    ],
)
def test_parse_and_round_trip(text, spec):
    assert parse_policy(text) == spec
    assert policy_from_dict(policy_to_dict(spec)) == spec


@pytest.mark.parametrize("text", ["push", "push:x", "pull:", "teleport:3", "always:1"])
def test_parse_rejects_malformed(text):
    with pytest.raises(ValidationError):
        parse_policy(text)
