"""
Decision procedures for sound abstractions between finite systems.

All checks are exhaustive over the given finite systems. Statements about infinite-state
systems are only ever checked through these finite surrogates (bounded evidence).
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx
from networkx.algorithms.isomorphism import categorical_multiedge_match, categorical_node_match

from ..api_models import AbstractionMapModel
from ..core.errors import BadParams, MapDomainMismatch
from ..core.logging import get_logger
from ..dependencies import ResourceGuard, get_guard
from ..domains import FiniteRegion, Region
from .systems_service import ExternalPrefix, FiniteSystem, build_system

logger = get_logger(__name__)


@dataclass(frozen=True)
class AbstractionMap:
    """
    Relation alpha from concrete to abstract states, with its inverse gamma.

    x in gamma(xh) iff xh in alpha(x).
    """

    alpha: Mapping[str, FrozenSet[str]]

    @property
    def gamma(self) -> Dict[str, FrozenSet[str]]:
        inverse: Dict[str, Set[str]] = {}
        for x, images in self.alpha.items():
            for xh in images:
                inverse.setdefault(xh, set()).add(x)
        return {xh: frozenset(xs) for xh, xs in inverse.items()}

    def image(self, states: Iterable[str]) -> FrozenSet[str]:
        result: Set[str] = set()
        for x in states:
            result |= self.alpha.get(x, frozenset())
        return frozenset(result)

    def inverse(self) -> "AbstractionMap":
        return AbstractionMap(self.gamma)

    @classmethod
    def identity(cls, system: FiniteSystem) -> "AbstractionMap":
        return cls({x: frozenset({x}) for x in system.states})

    @classmethod
    def from_model(cls, model: AbstractionMapModel) -> "AbstractionMap":
        return cls({x: frozenset(images) for x, images in model.alpha.items()})

    @classmethod
    def from_regions(cls, system: FiniteSystem, regions: Mapping[str, Region]) -> "AbstractionMap":
        """Membership map: x is related to every abstract state whose finite region holds x."""
        alpha: Dict[str, Set[str]] = {x: set() for x in system.states}
        for name, region in regions.items():
            if not isinstance(region, FiniteRegion):
                raise MapDomainMismatch("membership maps need finite regions", {"state": name})
            for x in region:
                if x not in alpha:
                    raise MapDomainMismatch(f"region of {name} holds unknown state {x}")
                alpha[x].add(name)
        return cls({x: frozenset(v) for x, v in alpha.items()})

    def to_model(self, order: Sequence[str] = ()) -> AbstractionMapModel:
        rank = {x: i for i, x in enumerate(order)}
        return AbstractionMapModel(
            alpha={
                x: sorted(images, key=lambda s: (rank.get(s, len(rank)), s))
                for x, images in sorted(self.alpha.items())
            }
        )


@dataclass
class ConditionResult:
    name: str
    passed: bool
    witness: Optional[Tuple[str, ...]] = None


@dataclass
class RelationReport:
    """Per-condition verdicts; the first (least) counterexample is kept for each failure."""

    mode: str
    conditions: List[ConditionResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def condition(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict:
        return {
            "mode": self.mode,
            "passed": self.passed,
            "bounded_evidence": False,
            "conditions": {
                c.name: {"passed": c.passed, "witness": list(c.witness) if c.witness else None}
                for c in self.conditions
            },
        }


def _check_domains(concrete: FiniteSystem, abstract: FiniteSystem, amap: AbstractionMap) -> None:
    known_abstract = set(abstract.states)
    known_concrete = set(concrete.states)
    for x in sorted(amap.alpha):
        if x not in known_concrete:
            raise MapDomainMismatch(f"map relates unknown concrete state {x}", {"state": x})
        for xh in sorted(amap.alpha[x]):
            if xh not in known_abstract:
                raise MapDomainMismatch(f"map relates {x} to unknown abstract state {xh}", {"state": xh})
    if concrete.inputs != abstract.inputs:
        raise MapDomainMismatch(
            "systems declare different inputs",
            {"concrete": list(concrete.inputs), "abstract": list(abstract.inputs)},
        )


def _least(states: Iterable[str], system: FiniteSystem) -> str:
    return min(states, key=system.states.index)


def _a1(concrete: FiniteSystem, abstract: FiniteSystem, amap: AbstractionMap) -> ConditionResult:
    for x in concrete.states:
        if x not in concrete.initial:
            continue
        missing = amap.alpha.get(x, frozenset()) - abstract.initial
        if missing:
            return ConditionResult("A1", False, (x, _least(missing, abstract)))
    return ConditionResult("A1", True)


def _a2(
    concrete: FiniteSystem,
    abstract: FiniteSystem,
    amap: AbstractionMap,
    name: str = "A2",
    enabled_only: bool = False,
) -> ConditionResult:
    for x in concrete.states:
        related = amap.alpha.get(x, frozenset())
        for u in concrete.inputs:
            allowed = abstract.post_set(related, u)
            if enabled_only and not allowed:
                continue
            missing = amap.image(concrete.post(x, u)) - allowed
            if missing:
                return ConditionResult(name, False, (x, u, _least(missing, abstract)))
    return ConditionResult(name, True)


def _a3(concrete: FiniteSystem, abstract: FiniteSystem, amap: AbstractionMap) -> ConditionResult:
    gamma = amap.gamma
    for xh in abstract.states:
        wrong = [x for x in gamma.get(xh, ()) if concrete.output(x) != abstract.output(xh)]
        if wrong:
            return ConditionResult("A3", False, (xh, _least(wrong, concrete)))
    return ConditionResult("A3", True)


def check_sound_abstraction(
    concrete: FiniteSystem, abstract: FiniteSystem, amap: AbstractionMap
) -> RelationReport:
    """
    Check (A1) alpha(X0) in X0^, (A2) alpha(F(x,u)) in F^(alpha(x),u), (A3) H(gamma(x^)) in {H^(x^)}.

    Witnesses are the least counterexamples in declared order: (x, x^) for A1,
    (x, u, x^') for A2 and (x^, x) for A3.

    Raises:
        MapDomainMismatch: If the map mentions undeclared states or the inputs differ
    """
    _check_domains(concrete, abstract, amap)
    report = RelationReport(
        mode="sound",
        conditions=[
            _a1(concrete, abstract, amap),
            _a2(concrete, abstract, amap),
            _a3(concrete, abstract, amap),
        ],
    )
    logger.debug("sound_abstraction_checked", passed=report.passed, abstract=abstract.name)
    return report


def check_sound_realization(
    concrete: FiniteSystem, abstract: FiniteSystem, amap: AbstractionMap
) -> RelationReport:
    """Both directions: S below S^ via alpha, and S^ below S via gamma."""
    forward = check_sound_abstraction(concrete, abstract, amap)
    backward = check_sound_abstraction(abstract, concrete, amap.inverse())
    conditions = [ConditionResult(c.name, c.passed, c.witness) for c in forward.conditions]
    conditions += [ConditionResult(f"reverse_{c.name}", c.passed, c.witness) for c in backward.conditions]
    return RelationReport(mode="realization", conditions=conditions)


def check_frr_variant(concrete: FiniteSystem, abstract: FiniteSystem, amap: AbstractionMap) -> RelationReport:
    """
    Sound abstraction with explicit enabledness, for concrete systems with partial F.

    (A2.1) every input enabled at some x^ in alpha(x) is enabled at x;
    (A2.2) (A2) restricted to those inputs.
    """
    _check_domains(concrete, abstract, amap)
    enab = ConditionResult("A2.1", True)
    for x in concrete.states:
        related = amap.alpha.get(x, frozenset())
        for u in concrete.inputs:
            if abstract.post_set(related, u) and not concrete.post(x, u):
                enab = ConditionResult("A2.1", False, (x, u))
                break
        if not enab.passed:
            break
    return RelationReport(
        mode="frr",
        conditions=[
            _a1(concrete, abstract, amap),
            enab,
            _a2(concrete, abstract, amap, name="A2.2", enabled_only=True),
            _a3(concrete, abstract, amap),
        ],
    )


def compose(first: AbstractionMap, second: AbstractionMap) -> AbstractionMap:
    """
    Relational composition: x -> second(first(x)).

    Raises:
        MapDomainMismatch: If first relates to a state second does not map
    """
    alpha: Dict[str, FrozenSet[str]] = {}
    for x, middle in first.alpha.items():
        for m in middle:
            if m not in second.alpha:
                raise MapDomainMismatch(
                    f"intermediate state {m} is not in the domain of the second map", {"state": m}
                )
        alpha[x] = second.image(middle)
    return AbstractionMap(alpha)


@dataclass
class ContainmentResult:
    passed: bool
    depth: int
    witness: Optional[ExternalPrefix] = None


def check_prefix_containment(
    left: FiniteSystem, right: FiniteSystem, depth: int, guard: Optional[ResourceGuard] = None
) -> ContainmentResult:
    """
    EPrefs(left) within EPrefs(right), up to `depth` inputs.

    Explores pairs (Last_left(nu), Last_right(nu)) breadth first, so the witness is a shortest
    violating prefix, least in declared order among those.

    Raises:
        ResourceBudgetExceeded: If the search visits more nodes than the prefix limit
    """
    if depth < 0:
        raise BadParams("depth must be non-negative", {"depth": depth})
    guard = guard or get_guard("prefix_nodes")
    right_outputs = set(right.outputs)
    right_inputs = set(right.inputs)

    def right_cell(states: FrozenSet[str], y: str) -> FrozenSet[str]:
        return states & right.preimage(y) if y in right_outputs else frozenset()

    frontier = deque()
    seen: Set[Tuple[FrozenSet[str], FrozenSet[str]]] = set()
    for y in left.initial_outputs():
        mine = left.initial & left.preimage(y)
        theirs = right_cell(right.initial, y)
        if not theirs:
            return ContainmentResult(False, depth, (y,))
        frontier.append(((y,), mine, theirs))
        seen.add((mine, theirs))
        guard.tick()

    while frontier:
        prefix, mine, theirs = frontier.popleft()
        if len(prefix) // 2 >= depth:
            continue
        for u in left.inputs:
            image = left.post_set(mine, u)
            if not image:
                continue
            their_image = right.post_set(theirs, u) if u in right_inputs else frozenset()
            for y in left.outputs:
                cell = image & left.preimage(y)
                if not cell:
                    continue
                extended = prefix + (u, y)
                their_cell = right_cell(their_image, y)
                if not their_cell:
                    logger.debug("prefix_containment_violated", witness=extended)
                    return ContainmentResult(False, depth, extended)
                if (cell, their_cell) in seen:
                    continue
                seen.add((cell, their_cell))
                guard.tick()
                frontier.append((extended, cell, their_cell))
    return ContainmentResult(True, depth)


def to_graph(system: FiniteSystem) -> nx.MultiDiGraph:
    """Labelled multigraph: nodes carry output and initial flag, edges carry the input."""
    graph = nx.MultiDiGraph(name=system.name)
    for x in system.states:
        graph.add_node(x, output=system.output(x), initial=x in system.initial)
    for x in system.states:
        for u in system.inputs:
            for x2 in system.post(x, u):
                graph.add_edge(x, x2, key=u, input=u)
    return graph


def is_isomorphic(first: FiniteSystem, second: FiniteSystem) -> bool:
    """Isomorphism preserving outputs, initial states and input labels."""
    return nx.is_isomorphic(
        to_graph(first),
        to_graph(second),
        node_match=categorical_node_match(["output", "initial"], [None, False]),
        edge_match=categorical_multiedge_match("input", None),
    )


def restrict(system: FiniteSystem, states: Iterable[str], name: Optional[str] = None) -> FiniteSystem:
    """
    Sub-system on a successor-closed state set.

    Raises:
        BadParams: If some kept state has a successor outside the set
    """
    keep = set(states)
    ordered = [x for x in system.states if x in keep]
    for x in ordered:
        for u in system.inputs:
            outside = system.post(x, u) - keep
            if outside:
                raise BadParams(
                    "state set is not closed under F",
                    {"state": x, "input": u, "successor": _least(outside, system)},
                )
    return build_system(
        ordered,
        [x for x in ordered if x in system.initial],
        system.inputs,
        system.outputs,
        {x: system.output(x) for x in ordered},
        {(x, u): system.post(x, u) for x in ordered for u in system.inputs},
        name=name or system.name,
        allow_partial=True,
        abstraction=True,
    )


def relabel_outputs(system: FiniteSystem, mapping: Mapping[str, str]) -> FiniteSystem:
    """Rename (and possibly merge) outputs; unmapped outputs keep their name."""
    outputs: List[str] = []
    for y in system.outputs:
        renamed = mapping.get(y, y)
        if renamed not in outputs:
            outputs.append(renamed)
    return build_system(
        system.states,
        system.initial,
        system.inputs,
        outputs,
        {x: mapping.get(system.output(x), system.output(x)) for x in system.states},
        dict(system.transitions),
        name=system.name,
        allow_partial=True,
        abstraction=True,
    )
