import pytest

from kamsynth.core.errors import BadParams, MapDomainMismatch
from kamsynth.domains import lift
from kamsynth.services.bisim_service import bisimulation_quotient, output_partition, quotient_system
from kamsynth.services.ka_service import knowledge_abstraction
from kamsynth.services.models_service import fig3_chain_finite, fig3_chain_symbolic
from kamsynth.services.relations_service import (
    AbstractionMap,
    check_frr_variant,
    check_prefix_containment,
    check_sound_abstraction,
    check_sound_realization,
    compose,
    is_isomorphic,
    relabel_outputs,
    restrict,
)
from kamsynth.services.systems_service import build_system

from .conftest import random_systems


def _edit(system, add=(), remove=(), name="edited"):
    transitions = {key: set(targets) for key, targets in system.transitions.items()}
    for x, u, x2 in add:
        transitions[(x, u)].add(x2)
    for x, u, x2 in remove:
        transitions[(x, u)].discard(x2)
    return build_system(
        system.states,
        system.initial,
        system.inputs,
        system.outputs,
        system.output_map,
        transitions,
        name=name,
        allow_partial=True,
        abstraction=True,
    )


def _cell_members(result):
    """Knowledge cell -> the states it holds."""
    return AbstractionMap({name: frozenset(cell.states) for name, cell in result.cells.items()})


def _output_quotient(system):
    sym = lift(system)
    quotient, blocks = quotient_system(sym, output_partition(sym), name="outputs")
    return quotient, blocks


def test_identity_is_sound_and_a_realization():
    system = fig3_chain_finite(4)
    identity = AbstractionMap.identity(system)
    assert check_sound_abstraction(system, system, identity).passed
    assert check_sound_realization(system, system, identity).passed


def test_knowledge_abstraction_of_quotient_is_below_quotient():
    quotient = bisimulation_quotient(fig3_chain_symbolic(), 10).quotient
    result = knowledge_abstraction(quotient, 10)
    report = check_sound_abstraction(result.abstraction, quotient, _cell_members(result))
    assert report.passed
    assert report.to_dict()["bounded_evidence"] is False


def test_deleted_transition_fails_a2():
    system = fig3_chain_finite(3)
    pruned = _edit(system, remove=[("b1", "u", "b2")])
    report = check_sound_abstraction(system, pruned, AbstractionMap.identity(system))
    assert not report.passed
    assert report.condition("A1").passed and report.condition("A3").passed
    assert report.condition("A2").witness == ("b1", "u", "b2")


def test_spurious_transition_fails_reverse_direction():
    system = fig3_chain_finite(3)
    spurious = _edit(system, add=[("a2", "u", "b1")])
    report = check_sound_realization(system, spurious, AbstractionMap.identity(system))
    assert report.condition("A2").passed
    assert not report.condition("reverse_A2").passed
    assert report.condition("reverse_A2").witness == ("a2", "u", "b1")


def test_mislabelled_state_fails_a3():
    system = fig3_chain_finite(2)
    amap = AbstractionMap({x: frozenset({"a2"}) if x == "b2" else frozenset({x}) for x in system.states})
    report = check_sound_abstraction(system, system, amap)
    assert report.condition("A3").witness == ("a2", "b2")


def test_map_must_use_declared_states():
    system = fig3_chain_finite(2)
    with pytest.raises(MapDomainMismatch):
        check_sound_abstraction(system, system, AbstractionMap({"a1": frozenset({"zz"})}))
    with pytest.raises(MapDomainMismatch):
        check_sound_abstraction(system, system, AbstractionMap({"zz": frozenset({"a1"})}))


def test_frr_variant_on_strict_system_matches_sound_check():
    system = fig3_chain_finite(3)
    pruned = _edit(system, remove=[("b1", "u", "b2")])
    identity = AbstractionMap.identity(system)
    frr = check_frr_variant(system, pruned, identity)
    sound = check_sound_abstraction(system, pruned, identity)
    assert frr.condition("A2.1").passed
    assert frr.condition("A2.2").passed == sound.condition("A2").passed
    assert frr.condition("A2.2").witness == sound.condition("A2").witness


def test_frr_variant_detects_enabled_abstract_input():
    partial = build_system(
        ["p", "q"],
        ["p"],
        ["u0", "u1"],
        ["Y", "Z"],
        {"p": "Y", "q": "Z"},
        {("p", "u0"): ["q"], ("q", "u0"): ["q"], ("q", "u1"): ["p"]},
        allow_partial=True,
    )
    enabled = _edit(partial, add=[("p", "u1", "p")])
    report = check_frr_variant(partial, enabled, AbstractionMap.identity(partial))
    assert not report.passed
    assert report.condition("A2.1").witness == ("p", "u1")
    assert check_frr_variant(partial, partial, AbstractionMap.identity(partial)).passed


def test_compose_with_identity():
    system = fig3_chain_finite(3)
    bisim = bisimulation_quotient(system, 10)
    amap = AbstractionMap.from_regions(system, bisim.blocks)
    assert compose(AbstractionMap.identity(system), amap) == amap


def test_compose_rejects_unmapped_intermediate_state():
    first = AbstractionMap({"x": frozenset({"m"})})
    with pytest.raises(MapDomainMismatch):
        compose(first, AbstractionMap({"n": frozenset({"z"})}))


def test_composition_preserves_soundness():
    for system in random_systems(100, seed=53):
        bisim = bisimulation_quotient(system, 100)
        coarse, coarse_blocks = _output_quotient(system)
        to_bisim = AbstractionMap.from_regions(system, bisim.blocks)
        to_coarse = AbstractionMap(
            {
                name: frozenset(c for c, region in coarse_blocks.items() if block.subset(region))
                for name, block in bisim.blocks.items()
            }
        )
        assert check_sound_abstraction(system, bisim.quotient, to_bisim).passed
        assert check_sound_abstraction(bisim.quotient, coarse, to_coarse).passed
        assert check_sound_abstraction(system, coarse, compose(to_bisim, to_coarse)).passed


def test_knowledge_chain_composes_with_quotient_map():
    system = fig3_chain_finite(6)
    knowledge = knowledge_abstraction(system, 50)
    bisim = bisimulation_quotient(system, 50)
    amap = compose(_cell_members(knowledge), AbstractionMap.from_regions(system, bisim.blocks))
    assert check_sound_abstraction(knowledge.abstraction, bisim.quotient, amap).passed


def test_prefix_containment_against_itself_and_budgeted_abstraction():
    system = fig3_chain_finite(6)
    assert check_prefix_containment(system, system, 6).passed
    budgeted = knowledge_abstraction(fig3_chain_symbolic(), 4).abstraction
    assert check_prefix_containment(system, budgeted, 4).passed
    assert not check_prefix_containment(system, budgeted, 6).passed


def test_prefix_containment_relabelled_output():
    system = fig3_chain_finite(3)
    result = check_prefix_containment(system, relabel_outputs(system, {"A": "Z"}), 3)
    assert not result.passed
    assert result.witness == ("A",)


def test_prefix_containment_witness_is_shortest():
    system = fig3_chain_finite(3)
    pruned = _edit(system, remove=[("a1", "u", "b1")])
    result = check_prefix_containment(system, pruned, 5)
    assert result.witness == ("A", "u", "B")


def test_realization_implies_prefix_equality():
    checked = 0
    for system in random_systems(60, seed=59):
        bisim = bisimulation_quotient(system, 100)
        candidates = [
            (system, AbstractionMap.identity(system)),
            (bisim.quotient, AbstractionMap.from_regions(system, bisim.blocks)),
        ]
        for abstract, amap in candidates:
            if check_sound_realization(system, abstract, amap).passed:
                checked += 1
                assert check_prefix_containment(system, abstract, 8).passed
                assert check_prefix_containment(abstract, system, 8).passed
    assert checked >= 60


def test_isomorphism_and_restriction():
    system = fig3_chain_finite(3)
    renamed = build_system(
        ["s" + x for x in system.states],
        ["s" + x for x in system.initial],
        system.inputs,
        system.outputs,
        {"s" + x: y for x, y in system.output_map.items()},
        {("s" + x, u): {"s" + t for t in targets} for (x, u), targets in system.transitions.items()},
    )
    assert is_isomorphic(system, renamed)
    assert not is_isomorphic(system, _edit(system, add=[("a2", "u", "b1")]))
    closed = restrict(system, ["a2"])
    assert list(closed.states) == ["a2"]
    with pytest.raises(BadParams):
        restrict(system, ["b1"])
