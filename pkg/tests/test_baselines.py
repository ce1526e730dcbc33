from fractions import Fraction

import pytest

from kamsynth.core.errors import BadParams, DomainMismatch, GridViolatesOutputMap
from kamsynth.services.baselines_service import GridSpec, grid_abstraction, l_complete_abstraction
from kamsynth.services.models_service import fig3_chain_finite, sigma1, sigma2
from kamsynth.services.relations_service import check_prefix_containment
from kamsynth.services.synth_service import AbstractStrategy, Unrealizable, solve
from kamsynth.services.systems_service import Specification

from .conftest import random_systems

PSI1 = Specification(
    kind="gbuchi",
    families=(frozenset({"y00"}), frozenset({"y22"})),
    initial_outputs=frozenset({"y00"}),
)


def _grid(system, eta):
    return grid_abstraction(system, GridSpec.parse(eta, system.width))


def test_grid_spec_parsing():
    assert GridSpec.parse("0.2", 3).cells_per_axis == 15
    assert GridSpec.parse("1/4", 3).eta == Fraction(1, 4)
    for bad in ("0.7", "0", "-1", "abc"):
        with pytest.raises(BadParams):
            GridSpec.parse(bad, 3)


def test_unit_grid_is_nondeterministic():
    abstraction = _grid(sigma1(), "1")
    assert len(abstraction.states) == 9
    assert all(len(abstraction.post(x, "u1")) >= 2 for x in abstraction.states)


def test_fine_grid_is_deterministic():
    abstraction = _grid(sigma1(), "0.2")
    assert len(abstraction.states) == 225
    assert abstraction.initial == frozenset(abstraction.states)
    assert all(len(abstraction.post(x, u)) == 1 for x in abstraction.states for u in abstraction.inputs)


def test_misaligned_grid_violates_output_map():
    with pytest.raises(GridViolatesOutputMap):
        _grid(sigma1(), "0.3")


@pytest.mark.parametrize("eta", ["1", "0.5", "0.25"])
def test_coarse_grids_admit_no_controller(eta):
    try:
        abstraction = _grid(sigma1(), eta)
    except GridViolatesOutputMap:
        return
    assert isinstance(solve(abstraction, PSI1), Unrealizable)


@pytest.mark.parametrize("eta", ["0.2", "0.1", "0.05"])
def test_lattice_multiples_admit_a_controller(eta):
    assert isinstance(solve(_grid(sigma1(), eta), PSI1), AbstractStrategy)


@pytest.mark.parametrize("eta", ["1", "0.5", "0.25", "0.2", "0.1"])
def test_split_diagonal_breaks_every_grid(eta):
    with pytest.raises(GridViolatesOutputMap):
        _grid(sigma2(), eta)


def test_grid_needs_a_translation_system():
    with pytest.raises(DomainMismatch):
        grid_abstraction(fig3_chain_finite(3), GridSpec(Fraction(1), Fraction(3)))
    with pytest.raises(BadParams):
        grid_abstraction(sigma1(), GridSpec(Fraction(1, 2), Fraction(2)))


def test_l_complete_chain_matches_history_automaton():
    abstraction = l_complete_abstraction(fig3_chain_finite(4), 2)
    names = {x: x.replace(" ", "") for x in abstraction.states}
    assert set(names.values()) == {"A", "AA", "AB", "BA", "BB"}
    edges = {
        names[x]: {names[x2] for x2 in abstraction.post(x, "u")} for x in abstraction.states
    }
    assert edges == {
        "A": {"AA", "AB"},
        "AA": {"AA"},
        "AB": {"BA", "BB"},
        "BA": {"AA"},
        "BB": {"BA", "BB"},
    }
    assert {names[x] for x in abstraction.initial} == {"A"}


def test_l_complete_needs_positive_length():
    with pytest.raises(BadParams):
        l_complete_abstraction(fig3_chain_finite(2), 0)


def test_l_complete_over_approximates_and_refines():
    for system in random_systems(25, seed=109, size=4):
        previous = None
        for length in (1, 2, 3):
            abstraction = l_complete_abstraction(system, length)
            assert check_prefix_containment(system, abstraction, 6).passed
            if previous is not None:
                assert check_prefix_containment(abstraction, previous, 6).passed
            previous = abstraction
