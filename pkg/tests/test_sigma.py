"""
KAM on the wrapped translation systems. The runs are shared per module; each takes a few seconds.
"""

from fractions import Fraction

import pytest

from kamsynth.services.baselines_service import lattice_core
from kamsynth.services.bisim_service import bisimulation_quotient
from kamsynth.services.kam_service import kam, refinement_chain
from kamsynth.services.models_service import sigma1, sigma2
from kamsynth.services.relations_service import is_isomorphic, relabel_outputs, restrict
from kamsynth.services.synth_service import AbstractStrategy, simulate_closed_loop, solve
from kamsynth.services.systems_service import Specification

LATTICE = Fraction(1, 5)
PSI1 = Specification(
    kind="gbuchi",
    families=(frozenset({"y00"}), frozenset({"y22"})),
    initial_outputs=frozenset({"y00"}),
)


def _core(run):
    extraction = run.extracted[-1]
    states = lattice_core(extraction.system, extraction.alpha, LATTICE)
    return restrict(extraction.system, states, name="core")


@pytest.fixture(scope="module")
def sigma1_run():
    return kam(sigma1(), 12, termcond="cover-stable:2")


@pytest.fixture(scope="module")
def sigma2_run():
    return kam(sigma2(), 12, termcond="cover-stable:2")


@pytest.fixture(scope="module")
def sigma1_chain():
    return refinement_chain(sigma1(), 12, PSI1)


def test_sigma1_cover_stabilizes_on_the_lattice(sigma1_run):
    assert sigma1_run.terminated
    core = _core(sigma1_run)
    assert len(core.states) == 225
    assert not core.initial


def test_sigma1_realization_admits_psi1(sigma1_run):
    assert isinstance(solve(sigma1_run.abstraction, PSI1), AbstractStrategy)


def test_sigma2_core_matches_sigma1_core(sigma1_run, sigma2_run):
    assert sigma2_run.terminated
    merged = relabel_outputs(_core(sigma2_run), {"y22u": "y22", "y22l": "y22"})
    first = bisimulation_quotient(_core(sigma1_run), 100)
    second = bisimulation_quotient(merged, 100)
    assert first.terminated and second.terminated
    assert is_isomorphic(first.quotient, second.quotient)


def test_chain_finds_psi1_controller(sigma1_chain):
    assert sigma1_chain.found
    assert sigma1_chain.iteration <= 12
    assert len(sigma1_chain.chain) == sigma1_chain.iteration


@pytest.mark.parametrize("seed", range(10))
def test_psi1_closed_loop_keeps_visiting_both_corners(sigma1_chain, seed):
    start = (Fraction(1, 10), Fraction(1, 10))
    run = simulate_closed_loop(sigma1(), sigma1_chain.controller, 10_000, seed=seed, initial_state=start)
    assert run.verdict == "ok"
    assert run.desync is None
    assert set(run.gaps) == {0, 1}
    assert max(run.gaps.values()) <= 60
