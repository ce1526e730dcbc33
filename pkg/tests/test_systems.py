import random

import pytest
from pydantic import ValidationError

from kamsynth.api_models import SystemDescription, TransitionEntry
from kamsynth.core.errors import (
    InitialSetViolatesOutputRespect,
    NonStrictTransition,
    ResourceBudgetExceeded,
    UndeclaredIdentifier,
)
from kamsynth.dependencies import ResourceGuard
from kamsynth.services.models_service import fig3_chain_finite
from kamsynth.services.systems_service import (
    DUMMY_OUTPUT,
    DUMMY_STATE,
    Specification,
    build_system,
    external_prefixes,
    input_complete,
    last_states,
    to_description,
    to_dot,
    truncate,
    validate,
)

from .conftest import random_system, random_systems


def _description(**overrides):
    data = dict(
        states=["p", "q"],
        initial=["p"],
        inputs=["u"],
        outputs=["Y", "Z"],
        output_map={"p": "Y", "q": "Z"},
        transitions=[
            TransitionEntry(source="p", input="u", to=["q"]),
            TransitionEntry(source="q", input="u", to=["p", "q"]),
        ],
    )
    data.update(overrides)
    return SystemDescription(**data)


def test_validate_accepts_fig3_truncation():
    system = fig3_chain_finite(5)
    again = validate(to_description(system))
    assert again == system
    assert again.is_strict
    assert sorted(again.initial) == ["a1", "a2"]


def test_validate_one_state_self_loop():
    description = SystemDescription(
        states=["s"],
        initial=["s"],
        inputs=["u", "v"],
        outputs=["Y"],
        output_map={"s": "Y"},
        transitions=[
            TransitionEntry(source="s", input="u", to=["s"]),
            TransitionEntry(source="s", input="v", to=["s"]),
        ],
    )
    system = validate(description)
    assert system.post("s", "v") == frozenset({"s"})


def test_validate_rejects_empty_transition():
    description = _description(transitions=[TransitionEntry(source="p", input="u", to=["q"])])
    with pytest.raises(NonStrictTransition) as info:
        validate(description)
    assert info.value.details == {"state": "q", "input": "u"}


def test_validate_rejects_output_map_not_respecting_initial_set():
    description = _description(output_map={"p": "Y", "q": "Y"})
    with pytest.raises(InitialSetViolatesOutputRespect) as info:
        validate(description)
    assert info.value.details["state"] == "q"


def test_validate_rejects_undeclared_identifiers():
    with pytest.raises(UndeclaredIdentifier):
        validate(_description(initial=["r"]))
    with pytest.raises(UndeclaredIdentifier):
        validate(_description(transitions=[TransitionEntry(source="p", input="w", to=["q"])]))


def test_description_rejects_duplicates():
    with pytest.raises(ValidationError):
        _description(states=["p", "p"])


def test_transition_rows_accept_from_alias():
    row = TransitionEntry.model_validate({"from": "p", "input": "u", "to": ["q"]})
    assert row.source == "p"
    assert row.model_dump(by_alias=True)["from"] == "p"


def test_input_complete_redirects_missing_transition():
    system = build_system(
        ["p", "q"],
        ["p"],
        ["u0", "u1"],
        ["Y", "Z"],
        {"p": "Y", "q": "Z"},
        {("p", "u0"): ["q"], ("q", "u0"): ["q"], ("q", "u1"): ["p"]},
        allow_partial=True,
    )
    completed = input_complete(system)
    assert completed.is_strict
    assert completed.post("p", "u1") == frozenset({DUMMY_STATE})
    assert completed.output(DUMMY_STATE) == DUMMY_OUTPUT
    assert all(completed.post(DUMMY_STATE, u) == frozenset({DUMMY_STATE}) for u in completed.inputs)


def test_input_complete_leaves_strict_system_alone():
    system = fig3_chain_finite(3)
    assert input_complete(system) is system


def test_input_complete_counts_incoming_dummy_edges():
    system = build_system(
        ["p", "q"],
        ["p"],
        ["u0", "u1"],
        ["Y", "Z"],
        {"p": "Y", "q": "Z"},
        {("p", "u0"): ["q"]},
        allow_partial=True,
    )
    completed = input_complete(system)
    incoming = [(x, u) for x in system.states for u in system.inputs if DUMMY_STATE in completed.post(x, u)]
    assert len(incoming) == 3


def test_input_complete_avoids_taken_dummy_names():
    system = build_system(
        ["dummy", "dummy_1"],
        ["dummy"],
        ["u"],
        ["DUMMY", "Z"],
        {"dummy": "DUMMY", "dummy_1": "Z"},
        {("dummy", "u"): ["dummy_1"]},
        allow_partial=True,
    )
    completed = input_complete(system)
    assert completed.states == ("dummy", "dummy_1", "dummy_2")
    assert completed.outputs == ("DUMMY", "Z", "DUMMY_1")
    assert completed.post("dummy", "u") == frozenset({"dummy_1"})
    assert completed.post("dummy_1", "u") == frozenset({"dummy_2"})
    assert completed.output("dummy_2") == "DUMMY_1"
    assert completed.output("dummy") == "DUMMY"


def test_input_complete_dummy_reachability():
    for system in random_systems(60, seed=11, partial=True):
        reachable = system.reachable_states()
        missing = any(not system.post(x, u) for x in reachable for u in system.inputs)
        completed = input_complete(system)
        assert completed.is_strict
        assert (DUMMY_STATE in completed.reachable_states()) == missing


def test_external_prefixes_depth_zero_are_initial_outputs():
    system = fig3_chain_finite(4)
    assert external_prefixes(system, 0) == {("A",)}


def test_external_prefixes_fig3_depth_two():
    prefixes = external_prefixes(fig3_chain_finite(4), 2)
    assert prefixes == {
        ("A",),
        ("A", "u", "A"),
        ("A", "u", "B"),
        ("A", "u", "A", "u", "A"),
        ("A", "u", "B", "u", "A"),
        ("A", "u", "B", "u", "B"),
    }


def test_external_prefixes_truncation_is_monotone():
    for system in random_systems(100, seed=3):
        deepest = external_prefixes(system, 6)
        for depth in range(6):
            assert external_prefixes(system, depth) == truncate(deepest, depth)


def test_external_prefixes_budget():
    system = random_system(random.Random(5), size=6, density=0.6)
    with pytest.raises(ResourceBudgetExceeded):
        external_prefixes(system, 6, guard=ResourceGuard("prefix_nodes", 5))


def test_last_states_fig3():
    system = fig3_chain_finite(4)
    assert last_states(system, ("A",)) == frozenset({"a1", "a2"})
    assert last_states(system, ("A", "u", "B")) == frozenset({"b1"})
    assert last_states(system, ("A", "u", "B", "u", "B")) == frozenset({"b2"})
    assert last_states(system, ("B",)) == frozenset()


def test_last_states_nonempty_iff_external_prefix():
    rng = random.Random(17)
    for system in random_systems(30, seed=17):
        prefixes = external_prefixes(system, 3)
        for prefix in prefixes:
            assert last_states(system, prefix)
        for _ in range(50):
            steps = rng.randint(0, 3)
            candidate = [rng.choice(system.outputs)]
            for _ in range(steps):
                candidate += [rng.choice(system.inputs), rng.choice(system.outputs)]
            assert bool(last_states(system, tuple(candidate))) == (tuple(candidate) in prefixes)


def test_last_states_matches_path_enumeration():
    rng = random.Random(23)
    for system in random_systems(40, seed=23):
        y0, u, y1 = rng.choice(system.outputs), rng.choice(system.inputs), rng.choice(system.outputs)
        expected = {
            x1
            for x0 in system.initial
            if system.output(x0) == y0
            for x1 in system.post(x0, u)
            if system.output(x1) == y1
        }
        assert last_states(system, (y0, u, y1)) == expected


def test_specification_rejects_unknown_outputs():
    spec = Specification(kind="safety", forbidden=frozenset({"Q"}))
    with pytest.raises(UndeclaredIdentifier):
        spec.check(["A", "B"])


def test_dot_labels_states_with_outputs():
    dot = to_dot(fig3_chain_finite(2))
    assert '[label="a1 | A", style=bold]' in dot
    assert '[label="b2 | B"]' in dot
    assert dot.count("->") == 6
