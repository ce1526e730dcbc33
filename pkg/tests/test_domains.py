from fractions import Fraction

import portion as P
import pytest

from kamsynth.core.errors import BadParams, DomainMismatch, NotSupported, UnknownOutput
from kamsynth.domains import FiniteSymbolicSystem, region_algebra
from kamsynth.domains.geo import GeoRegion, GeoSystem
from kamsynth.domains.indexed import ALL, EVEN, ODD, IndexSet
from kamsynth.domains.interval import TankSystem
from kamsynth.services.models_service import (
    fig3_chain_finite,
    fig3_chain_symbolic,
    fig4_modules_symbolic,
    sigma1,
    sigma2,
)


@pytest.fixture(scope="module")
def fig3():
    return fig3_chain_symbolic()


@pytest.fixture(scope="module")
def fig4():
    return fig4_modules_symbolic()


# Finite regions


def test_finite_region_key_follows_declared_order():
    system = FiniteSymbolicSystem(fig3_chain_finite(4))
    assert system.region(["b3", "b1"]).key() == "{b1,b3}"
    assert system.empty().key() == "{}"


def test_region_algebra_on_finite_regions():
    system = FiniteSymbolicSystem(fig3_chain_finite(3))
    a, b = system.region(["a1"]), system.region(["a1", "a2"])
    answer = region_algebra(a, b)
    assert answer.subset and not answer.equals and not answer.empty_a
    assert answer.intersect == a
    assert answer.union_rep == b
    assert region_algebra(b, b).equals


def test_finite_pre_and_post():
    system = FiniteSymbolicSystem(fig3_chain_finite(3))
    assert system.post(system.region(["b1"]), "u") == system.region(["a2", "b2"])
    assert system.pre(system.region(["a2"]), "u") == system.region(["a2", "b1", "b2", "b3"])


def test_restrict_output_rejects_unknown_output():
    system = FiniteSymbolicSystem(fig3_chain_finite(3))
    with pytest.raises(UnknownOutput):
        system.restrict_output(system.universe(), "Z")
    assert system.restrict_output(system.universe(), "A") == system.region(["a1", "a2"])


def test_mixing_domains_is_rejected(fig3):
    finite = FiniteSymbolicSystem(fig3_chain_finite(3))
    with pytest.raises(DomainMismatch):
        region_algebra(finite.region(["a1"]), fig3.region("a[1]"))
    with pytest.raises(DomainMismatch):
        fig3.post(finite.region(["a1"]), "u")
    with pytest.raises(DomainMismatch):
        finite.region(["zz"])


# Index sets and indexed regions


def test_index_set_normal_form():
    assert IndexSet.progression(1, 2) == ODD
    assert ODD.union(EVEN) == ALL
    assert ODD.complement() == EVEN
    assert IndexSet.finite([1]).union(IndexSet.progression(3, 2)) == ODD
    assert IndexSet.finite([1, 3]).shift(-1) == IndexSet.finite([2])
    assert ALL.shift(1) == IndexSet.everything(2)
    assert ALL.shift(-1) == ALL
    assert ODD.shift(1) == EVEN


def test_index_set_rejects_long_periods():
    with pytest.raises(NotSupported):
        IndexSet.progression(1, 3)


@pytest.mark.parametrize(
    "text,key",
    [
        ("b[1] | b[3+2*i]", "b[1+2*i]"),
        ("b[1] | b[2]", "b[1] | b[2]"),
        ("b[2+2*i] | b[1+2*i]", "b[1+1*i]"),
        ("a[1+1*i]", "a[1] | a[2]"),
        ("b[2] | a[1]", "a[1] | b[2]"),
        ("empty", "empty"),
    ],
)
def test_indexed_region_keys_are_canonical(fig3, text, key):
    assert fig3.region(text).key() == key


def test_indexed_region_parse_errors(fig3):
    with pytest.raises(BadParams):
        fig3.region("b(1)")
    with pytest.raises(DomainMismatch):
        fig3.region("z[1]")


def test_indexed_post(fig3):
    assert fig3.post(fig3.region("a[1]"), "u").key() == "b[1]"
    assert fig3.post(fig3.region("b[1]"), "u").key() == "a[2] | b[2]"
    assert fig3.post(fig3.region("b[1+1*i]"), "u").key() == "a[2] | b[1+1*i]"


def test_indexed_pre(fig3):
    assert fig3.pre(fig3.region("a[2]"), "u").key() == "a[2] | b[1+1*i]"
    assert fig3.pre(fig3.region("b[1]"), "u").key() == "a[1] | b[2]"


def test_indexed_stable_subset(fig3):
    q = fig3.region("b[1+1*i]")
    stable = fig3.stable_subset(q, {"u": fig3.region("a[2] | b[2+1*i]")})
    assert stable.key() == "b[1] | b[3+1*i]"


def test_module_layer_stable_subset(fig4):
    q = fig4.region("c[1+1*i]")
    d_layer = fig4.region("d[1+2*i] | dl[1+2*i] | dr[1+2*i]")
    assert fig4.stable_subset(q, {"u": d_layer}).key() == "c[1+2*i]"
    both = d_layer.union(fig4.region("e[2+2*i] | el[2+2*i] | er[2+2*i]"))
    assert fig4.stable_subset(q, {"u": both}) == q


def test_module_layer_needs_oracle_for_split_groups(fig4):
    q = fig4.region("c[1+1*i]")
    with pytest.raises(NotSupported):
        fig4.stable_subset(q, {"u": fig4.region("d[1+2*i]")})


def test_validity_normalizes_regions(fig4):
    assert fig4.region("d[1+1*i]") == fig4.region("d[1+2*i]")
    assert fig4.output_region("D").key() == "d[1+2*i] | dl[1+2*i] | dr[1+2*i]"


# Diagonal boxes


def test_geo_keys():
    assert GeoRegion.full(3).key() == "[0,3)x[0,3)"
    assert sigma1().output_region("y00").key() == "[0,1)x[0,1)"
    assert GeoRegion(3, []).key() == "empty"


def test_geo_union_merges_adjacent_boxes():
    left = GeoRegion.box(3, (0, 1), (0, 3))
    right = GeoRegion.box(3, (1, 3), (0, 3))
    assert left.union(right) == GeoRegion.full(3)


def test_geo_key_ignores_inessential_constraints():
    a = GeoRegion.box(3, (2, 3), (2, 3), (-1, 0))
    b = GeoRegion.box(3, (2, 3), (2, 3), (-3, 0))
    assert a.key() == b.key()


def test_geo_diagonal_halves_make_the_box():
    split = sigma2()
    halves = split.output_region("y22u").union(split.output_region("y22l"))
    assert halves == sigma1().output_region("y22")


def test_geo_translate_and_wrap():
    system = sigma1()
    assert system.post(system.output_region("y00"), "u1").key() == "[2/5,7/5)x[2/5,7/5)"
    edge = GeoRegion.box(3, (Fraction(5, 2), 3), (0, 1))
    assert edge.translate(1, 0).key() == "[1/2,1)x[0,1)"


def test_geo_pre_inverts_post():
    system = sigma1()
    cell = system.output_region("y11")
    for u in system.inputs:
        assert system.pre(system.post(cell, u), u) == cell


def test_geo_subset_and_difference():
    full = GeoRegion.full(3)
    y00 = sigma1().output_region("y00")
    assert y00.subset(full)
    assert not full.subset(y00)
    rest = full._difference(y00)
    assert rest.intersect(y00).is_empty()
    assert rest.union(y00) == full


def test_geo_stable_subset():
    system = sigma1()
    q = system.output_region("y00")
    postq = {"u1": system.output_region("y00"), "u2": system.universe()}
    stable = system.stable_subset(q, postq)
    assert stable == GeoRegion.box(3, (0, Fraction(3, 5)), (0, Fraction(3, 5)))


def test_geo_family_must_partition_the_square():
    full = GeoRegion.full(3)
    y00 = GeoRegion.box(3, (0, 1), (0, 1))
    modes = {"u": (1, 0)}
    with pytest.raises(BadParams):
        GeoSystem("overlap", 3, modes, [("a", full), ("b", y00)])
    with pytest.raises(BadParams):
        GeoSystem("gap", 3, modes, [("a", y00)])


def test_geo_width_mismatch():
    with pytest.raises(DomainMismatch):
        GeoRegion.full(3).intersect(GeoRegion.full(2))


def test_geo_simulator_is_exact():
    system = sigma1()
    start = (Fraction(1, 10), Fraction(1, 10))
    assert system.simulator.successors(start, "u1") == [(Fraction(1, 2), Fraction(1, 2))]
    assert system.simulator.successors(start, "u2") == [(Fraction(27, 10), Fraction(27, 10))]
    assert system.simulator.output(start) == "y00"


# Tank intervals


def test_tank_output_family():
    tank = TankSystem()
    assert tank.output_region("l0|o0").key() == "o0:[0,1);o1:()"
    assert tank.output_region("l5|o1").key() == "o0:();o1:[5,6]"
    assert len(tank.outputs) == 12


def test_tank_post_saturates_at_capacity():
    tank = TankSystem()
    top = tank.output_region("l5|o0")
    image = tank.post(top, "+")
    assert image.parts[0] == P.closed(Fraction(11, 2), Fraction(6))
    assert image.parts[0] == image.parts[1]
    bottom = tank.post(tank.output_region("l0|o1"), "0")
    assert Fraction(0) in bottom.parts[0]


def test_tank_pre_contains_clamped_levels():
    tank = TankSystem()
    full = tank.region(P.singleton(Fraction(6)), P.singleton(Fraction(6)))
    pre = tank.pre(full, "+")
    assert tank.params.capacity - tank.params.inflow in pre.parts[0]


def test_tank_simulator_branches_on_outlet():
    tank = TankSystem()
    successors = tank.simulator.successors((Fraction(1, 2), True), "+")
    assert successors == [(Fraction(7, 10), False), (Fraction(7, 10), True)]
    assert tank.simulator.output((Fraction(7, 10), True)) == "l0|o1"
