from itertools import product

import pytest

from kamsynth.core.errors import NotSupported, ResourceBudgetExceeded
from kamsynth.dependencies import ResourceGuard
from kamsynth.domains import lift
from kamsynth.services.bisim_service import bisimulation_quotient, is_stable
from kamsynth.services.ka_service import knowledge_abstraction
from kamsynth.services.models_service import (
    fig3_chain_finite,
    fig3_chain_symbolic,
    fig4_modules_finite,
    fig4_modules_symbolic,
    thue_morse,
)
from kamsynth.services.systems_service import external_prefixes

from .conftest import random_systems


def _naive_bisimilarity(system):
    """Greatest fixpoint over state pairs; returns the classes as frozensets."""
    related = {(x, z) for x, z in product(system.states, repeat=2) if system.output(x) == system.output(z)}
    changed = True
    while changed:
        changed = False
        for x, z in sorted(related):
            matched = all(
                all(any((a, b) in related for b in system.post(z, u)) for a in system.post(x, u))
                and all(any((a, b) in related for a in system.post(x, u)) for b in system.post(z, u))
                for u in system.inputs
            )
            if not matched:
                related.discard((x, z))
                changed = True
    return {frozenset(z for z in system.states if (x, z) in related) for x in system.states}


def test_symbolic_chain_has_three_blocks():
    result = bisimulation_quotient(fig3_chain_symbolic(), 10)
    assert result.terminated
    assert list(result.quotient.states) == ["a[1]", "a[2]", "b[1+1*i]"]
    assert result.quotient.initial == frozenset({"a[1]", "a[2]"})
    assert result.quotient.post("b[1+1*i]", "u") == frozenset({"a[2]", "b[1+1*i]"})
    assert result.quotient.post("a[1]", "u") == frozenset({"b[1+1*i]"})


def test_knowledge_abstraction_of_quotient_terminates():
    quotient = bisimulation_quotient(fig3_chain_symbolic(), 10).quotient
    result = knowledge_abstraction(quotient, 10)
    assert result.terminated
    assert len(result.abstraction.states) == 3


def test_module_chain_needs_class_oracle():
    with pytest.raises(NotSupported):
        bisimulation_quotient(fig4_modules_symbolic(), 10)


def test_partition_is_stable_and_matches_bisimilarity():
    for system in random_systems(60, seed=43):
        result = bisimulation_quotient(system, 100)
        assert result.terminated
        assert is_stable(lift(system), list(result.blocks.values()))
        blocks = {region.states for region in result.blocks.values()}
        assert blocks == _naive_bisimilarity(system)


def test_quotient_preserves_external_prefixes():
    for system in random_systems(40, seed=47):
        quotient = bisimulation_quotient(system, 100).quotient
        for depth in range(5):
            assert external_prefixes(quotient, depth) == external_prefixes(system, depth)


def test_blocks_are_output_uniform():
    system = fig4_modules_finite(6, thue_morse)
    result = bisimulation_quotient(system, 100)
    for name, block in result.blocks.items():
        assert {system.output(x) for x in block.states} == {result.quotient.output(name)}


def test_module_chain_truncations_grow():
    sizes = [len(bisimulation_quotient(fig4_modules_finite(n, thue_morse), 200).quotient.states) for n in (2, 4, 8)]
    assert sizes[0] < sizes[1] < sizes[2]


def test_round_budget_stops_early():
    result = bisimulation_quotient(fig3_chain_finite(8), 1)
    assert not result.terminated
    assert result.iterations == 1


def test_block_cap():
    with pytest.raises(ResourceBudgetExceeded):
        bisimulation_quotient(fig3_chain_finite(8), 50, guard=ResourceGuard("bisim_blocks", 2))
