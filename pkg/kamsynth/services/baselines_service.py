"""
Comparison abstractions: the eta-grid forward abstraction of translation systems and the
l-complete abstraction over bounded external histories.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, List, Mapping, Set, Tuple

from ..core.errors import BadParams, DomainMismatch, GridViolatesOutputMap
from ..core.logging import get_logger
from ..domains import Region
from ..domains.geo import GeoRegion, GeoSystem
from .systems_service import FiniteSystem, build_system, external_prefixes, last_states

logger = get_logger(__name__)

History = Tuple[str, ...]


@dataclass(frozen=True)
class GridSpec:
    """Grid of eta-squares tiling [0, width)^2 exactly."""

    eta: Fraction
    width: Fraction

    def __post_init__(self):
        if self.eta <= 0:
            raise BadParams("eta must be positive", {"eta": str(self.eta)})
        ratio = self.width / self.eta
        if ratio.denominator != 1:
            raise BadParams(
                "eta must divide the domain width", {"eta": str(self.eta), "width": str(self.width)}
            )

    @classmethod
    def parse(cls, eta: str, width) -> "GridSpec":
        """eta as "p/q", a decimal or an integer string."""
        try:
            value = Fraction(str(eta).strip())
        except (ValueError, ZeroDivisionError):
            raise BadParams(f"invalid eta: {eta}", {"eta": eta})
        return cls(value, Fraction(width))

    @property
    def cells_per_axis(self) -> int:
        return int(self.width / self.eta)


def _cell_name(i: int, j: int) -> str:
    return f"g{i}_{j}"


def _axis_targets(i: int, shift: Fraction, spec: GridSpec) -> List[int]:
    """Cells along one axis met by the translated cell [i*eta, (i+1)*eta) + shift, wrapped."""
    n = spec.cells_per_axis
    lo = (i * spec.eta + shift) % spec.width
    first = math.floor(lo / spec.eta)
    last = math.ceil((lo + spec.eta) / spec.eta) - 1
    return sorted({k % n for k in range(first, last + 1)})


def _cell_output(system: GeoSystem, cell: GeoRegion) -> str:
    lo1, hi1, lo2, hi2 = cell.bounds()
    candidates = []
    for y in system.outputs:
        region = system.output_region(y)
        r_lo1, r_hi1, r_lo2, r_hi2 = region.bounds()
        if hi1 <= r_lo1 or r_hi1 <= lo1 or hi2 <= r_lo2 or r_hi2 <= lo2:
            continue
        candidates.append(y)
    for y in candidates:
        if cell.subset(system.output_region(y)):
            return y
    meeting = [y for y in candidates if not cell.intersect(system.output_region(y)).is_empty()]
    raise GridViolatesOutputMap(cell.key(), meeting)


def grid_abstraction(system: GeoSystem, spec: GridSpec) -> FiniteSystem:
    """
    Forward abstraction on the eta-grid.

    x^' is an u-successor of x^ iff post(x^, u) meets x^'. For translation dynamics the
    image of a cell is a translated square, so the met cells follow from exact rational
    index arithmetic per axis.

    Raises:
        DomainMismatch: If the system is not a translation system on the wrapped square
        GridViolatesOutputMap: If a cell meets several output regions
    """
    if not isinstance(system, GeoSystem):
        raise DomainMismatch("grid abstraction needs a translation system over geo regions")
    if spec.width != system.width:
        raise BadParams(
            "grid width differs from the system width",
            {"grid": str(spec.width), "system": str(system.width)},
        )
    n = spec.cells_per_axis
    eta = spec.eta
    states: List[str] = []
    outputs: Dict[str, str] = {}
    initial: List[str] = []
    x0 = system.initial_region()
    everything = x0 == system.universe()
    for i in range(n):
        for j in range(n):
            cell = GeoRegion.box(system.width, (i * eta, (i + 1) * eta), (j * eta, (j + 1) * eta))
            name = _cell_name(i, j)
            states.append(name)
            outputs[name] = _cell_output(system, cell)
            if everything or not cell.intersect(x0).is_empty():
                initial.append(name)

    transitions: Dict[Tuple[str, str], Set[str]] = {}
    for u, (t1, t2) in system.modes.items():
        for i in range(n):
            rows = _axis_targets(i, t1, spec)
            for j in range(n):
                cols = _axis_targets(j, t2, spec)
                transitions[(_cell_name(i, j), u)] = {_cell_name(a, b) for a in rows for b in cols}

    abstraction = build_system(
        states,
        initial,
        system.inputs,
        system.outputs,
        outputs,
        transitions,
        name=f"grid({system.name}, eta={eta})",
        abstraction=True,
    )
    logger.info("grid_built", system=system.name, eta=str(eta), states=len(states))
    return abstraction


def lattice_core(abstraction: FiniteSystem, regions: Mapping[str, Region], eta) -> List[str]:
    """
    Abstract states whose geo region lies inside a single eta-cell, in declared order.
    """
    eta = Fraction(eta)
    core = []
    for x in abstraction.states:
        region = regions.get(x)
        if not isinstance(region, GeoRegion) or region.is_empty():
            continue
        lo1, hi1, lo2, hi2 = region.bounds()
        i, j = math.floor(lo1 / eta), math.floor(lo2 / eta)
        if hi1 <= (i + 1) * eta and hi2 <= (j + 1) * eta:
            core.append(x)
    return core


def _rank(system: FiniteSystem, history: History) -> Tuple[int, ...]:
    return tuple(
        system.outputs.index(token) if k % 2 == 0 else system.inputs.index(token)
        for k, token in enumerate(history)
    )


def l_complete_abstraction(system: FiniteSystem, history_length: int) -> FiniteSystem:
    """
    Automaton over external histories with at most `history_length` outputs.

    Histories shorter than the bound are the transient states right after initialization.
    A full history stands for every reachable state that can end it. Moving on (u, y) appends
    the pair and drops the oldest pair beyond the bound. With a single input the input tokens
    are left out of the state names.

    Raises:
        BadParams: If history_length < 1
    """
    if history_length < 1:
        raise BadParams("l must be at least 1", {"l": history_length})
    reachable = system.reachable_states()

    knowledge: Dict[History, FrozenSet[str]] = {}
    if history_length >= 2:
        transient = external_prefixes(system, history_length - 2)
        for prefix in sorted(transient, key=lambda p: (len(p), _rank(system, p))):
            knowledge[prefix] = last_states(system, prefix)

    windows: Dict[History, FrozenSet[str]] = {}
    for y in system.outputs:
        cell = reachable & system.preimage(y)
        if cell:
            windows[(y,)] = cell
    for _ in range(history_length - 1):
        longer: Dict[History, FrozenSet[str]] = {}
        for h, states in windows.items():
            for u in system.inputs:
                image = system.post_set(states, u)
                for y in system.outputs:
                    cell = image & system.preimage(y)
                    if cell:
                        longer[h + (u, y)] = cell
        windows = longer
    knowledge.update(windows)
    histories = list(knowledge)

    def cut(history: History) -> History:
        return history[-(2 * history_length - 1):]

    transitions: Dict[Tuple[History, str], Set[History]] = {}
    for h in histories:
        for u in system.inputs:
            image = system.post_set(knowledge[h], u)
            transitions[(h, u)] = {
                cut(h + (u, y)) for y in system.outputs if image & system.preimage(y)
            }

    single_input = len(system.inputs) == 1
    names = {h: " ".join(h[::2] if single_input else h) for h in histories}
    initial = [h for h in histories if len(h) == 1 and system.initial & system.preimage(h[0])]
    abstraction = build_system(
        [names[h] for h in histories],
        [names[h] for h in initial],
        system.inputs,
        system.outputs,
        {names[h]: h[-1] for h in histories},
        {(names[h], u): {names[t] for t in targets} for (h, u), targets in transitions.items()},
        name=f"lcomplete({system.name}, l={history_length})",
        allow_partial=True,
        abstraction=True,
    )
    logger.info("lcomplete_built", system=system.name, l=history_length, states=len(histories))
    return abstraction
