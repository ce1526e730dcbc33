import pytest

from kamsynth.core.errors import BadParams, ResourceBudgetExceeded
from kamsynth.dependencies import ResourceGuard
from kamsynth.services.ka_service import knowledge_abstraction
from kamsynth.services.models_service import fig3_chain_finite, fig3_chain_symbolic
from kamsynth.services.systems_service import external_prefixes, last_states

from .conftest import random_systems


def _b_cells(result):
    return sorted(name for name in result.abstraction.states if result.abstraction.output(name) == "B")


@pytest.mark.parametrize("budget", [1, 2, 3, 4, 5, 6])
def test_symbolic_chain_grows_one_cell_per_iteration(budget):
    result = knowledge_abstraction(fig3_chain_symbolic(), budget)
    assert not result.terminated
    assert result.iterations == budget
    assert len(_b_cells(result)) == budget
    assert len(result.abstraction.states) == budget + 2


def test_symbolic_chain_cells_at_budget_six():
    result = knowledge_abstraction(fig3_chain_symbolic(), 6)
    assert set(_b_cells(result)) == {
        "b[1]",
        "b[2]",
        "b[1] | b[3]",
        "b[2] | b[4]",
        "b[1] | b[3] | b[5]",
        "b[2] | b[4] | b[6]",
    }
    assert result.abstraction.initial == frozenset({"a[1] | a[2]"})
    assert result.abstraction.post("b[1] | b[3]", "u") == frozenset({"a[2]", "b[2] | b[4]"})


def test_budgeted_abstraction_keeps_edges_between_known_cells():
    result = knowledge_abstraction(fig3_chain_symbolic(), 3)
    abstraction = result.abstraction
    # b[2] | b[4] was never constructed
    assert "b[2] | b[4]" not in abstraction.states
    assert abstraction.post("b[1] | b[3]", "u") == frozenset({"a[2]"})


def test_finite_chain_terminates():
    result = knowledge_abstraction(fig3_chain_finite(4), 20)
    assert result.terminated
    assert result.abstraction.is_strict
    assert "{a1,a2}" in result.abstraction.states
    assert result.cells["{b1,b3}"].states == frozenset({"b1", "b3"})


def test_knowledge_is_deterministic_per_output():
    for system in random_systems(40, seed=31):
        abstraction = knowledge_abstraction(system, 1000).abstraction
        for x in abstraction.states:
            for u in abstraction.inputs:
                seen = [abstraction.output(x2) for x2 in abstraction.post(x, u)]
                assert len(seen) == len(set(seen))


def test_knowledge_abstraction_preserves_external_prefixes():
    for system in random_systems(40, seed=37):
        result = knowledge_abstraction(system, 1000)
        assert result.terminated
        for depth in range(5):
            assert external_prefixes(result.abstraction, depth) == external_prefixes(system, depth)


def test_cells_are_knowledge_sets_of_prefixes():
    for system in random_systems(30, seed=41):
        result = knowledge_abstraction(system, 1000)
        for prefix in external_prefixes(system, 3):
            cell = last_states(system, prefix)
            name = "{" + ",".join(x for x in system.states if x in cell) + "}"
            assert name in result.cells
            assert last_states(result.abstraction, prefix) == frozenset({name})


def test_budget_must_be_positive():
    with pytest.raises(BadParams):
        knowledge_abstraction(fig3_chain_finite(2), 0)


def test_cell_cap():
    with pytest.raises(ResourceBudgetExceeded):
        knowledge_abstraction(fig3_chain_symbolic(), 6, guard=ResourceGuard("ka_cells", 3))
