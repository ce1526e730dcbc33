"""
Finite systems S = (X, X0, U, F, Y, H), their validation and external trace semantics.
"""

from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from ..api_models import SpecificationModel, SystemDescription, TransitionEntry
from ..core.config import get_settings
from ..core.errors import (
    BadParams,
    InitialSetViolatesOutputRespect,
    NonStrictTransition,
    UndeclaredIdentifier,
)
from ..core.logging import get_logger
from ..dependencies import ResourceGuard

logger = get_logger(__name__)

DUMMY_STATE = "dummy"
DUMMY_OUTPUT = "DUMMY"

ExternalPrefix = Tuple[str, ...]


@dataclass(frozen=True, eq=False)
class FiniteSystem:
    """
    Explicit finite system.

    `transitions` is total over states x inputs; a strict system has no empty entry.
    All tuples follow the declared order, which fixes every iteration order downstream.
    """

    states: Tuple[str, ...]
    initial: FrozenSet[str]
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]
    output_map: Mapping[str, str]
    transitions: Mapping[Tuple[str, str], FrozenSet[str]]
    name: str = "system"
    abstraction: bool = False
    _by_output: Mapping[str, FrozenSet[str]] = field(init=False, repr=False)

    def __post_init__(self):
        by_output: Dict[str, Set[str]] = {y: set() for y in self.outputs}
        for x in self.states:
            by_output[self.output_map[x]].add(x)
        object.__setattr__(
            self, "_by_output", MappingProxyType({y: frozenset(v) for y, v in by_output.items()})
        )

    def post(self, x: str, u: str) -> FrozenSet[str]:
        return self.transitions[(x, u)]

    def post_set(self, xs: Iterable[str], u: str) -> FrozenSet[str]:
        result: Set[str] = set()
        for x in xs:
            result |= self.transitions[(x, u)]
        return frozenset(result)

    def output(self, x: str) -> str:
        return self.output_map[x]

    def preimage(self, y: str) -> FrozenSet[str]:
        """H^{-1}(y)."""
        return self._by_output[y]

    @property
    def is_strict(self) -> bool:
        return all(self.transitions[(x, u)] for x in self.states for u in self.inputs)

    def initial_outputs(self) -> List[str]:
        """H(X0) in declared output order."""
        present = {self.output_map[x] for x in self.initial}
        return [y for y in self.outputs if y in present]

    def reachable_states(self) -> FrozenSet[str]:
        seen = set(self.initial)
        queue = deque(sorted(self.initial, key=self.states.index))
        while queue:
            x = queue.popleft()
            for u in self.inputs:
                for x2 in self.transitions[(x, u)]:
                    if x2 not in seen:
                        seen.add(x2)
                        queue.append(x2)
        return frozenset(seen)

    def reachable_outputs(self) -> FrozenSet[str]:
        return frozenset(self.output_map[x] for x in self.reachable_states())

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteSystem):
            return NotImplemented
        return (
            self.states == other.states
            and self.initial == other.initial
            and self.inputs == other.inputs
            and self.outputs == other.outputs
            and dict(self.output_map) == dict(other.output_map)
            and dict(self.transitions) == dict(other.transitions)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Specification:
    """Safety, reachability or generalized Buchi objective over outputs."""

    kind: str
    forbidden: FrozenSet[str] = frozenset()
    target: FrozenSet[str] = frozenset()
    families: Tuple[FrozenSet[str], ...] = ()
    initial_outputs: Optional[FrozenSet[str]] = None

    def check(self, outputs: Sequence[str]) -> None:
        """Referenced outputs must belong to Y."""
        declared = set(outputs)
        referenced = set(self.forbidden) | set(self.target)
        for family in self.families:
            referenced |= family
        if self.initial_outputs:
            referenced |= self.initial_outputs
        for y in sorted(referenced - declared):
            raise UndeclaredIdentifier("output", y)
        if self.kind == "gbuchi" and not self.families:
            raise BadParams("gbuchi specification needs at least one family")

    @classmethod
    def from_model(cls, model: SpecificationModel) -> "Specification":
        return cls(
            kind=model.kind,
            forbidden=frozenset(model.forbidden),
            target=frozenset(model.target),
            families=tuple(frozenset(f) for f in model.families),
            initial_outputs=(
                frozenset(model.initial_outputs) if model.initial_outputs is not None else None
            ),
        )

    def to_model(self) -> SpecificationModel:
        return SpecificationModel(
            kind=self.kind,
            forbidden=sorted(self.forbidden),
            target=sorted(self.target),
            families=[sorted(f) for f in self.families],
            initial_outputs=sorted(self.initial_outputs) if self.initial_outputs is not None else None,
        )


def build_system(
    states: Sequence[str],
    initial: Iterable[str],
    inputs: Sequence[str],
    outputs: Sequence[str],
    output_map: Mapping[str, str],
    transitions: Mapping[Tuple[str, str], Iterable[str]],
    name: str = "system",
    allow_partial: bool = False,
    abstraction: bool = False,
) -> FiniteSystem:
    """
    Assemble and validate a FiniteSystem from Python collections.

    Raises:
        UndeclaredIdentifier: If a referenced state, input or output is not declared
        NonStrictTransition: If F(x, u) is empty and allow_partial is False
        InitialSetViolatesOutputRespect: If H does not respect X0 (concrete systems only)
    """
    state_set = set(states)
    input_set = set(inputs)
    output_set = set(outputs)

    for x in initial:
        if x not in state_set:
            raise UndeclaredIdentifier("state", x)
    for x, y in output_map.items():
        if x not in state_set:
            raise UndeclaredIdentifier("state", x)
        if y not in output_set:
            raise UndeclaredIdentifier("output", y)
    for x in states:
        if x not in output_map:
            raise UndeclaredIdentifier("output for state", x)

    table: Dict[Tuple[str, str], FrozenSet[str]] = {}
    for (x, u), targets in transitions.items():
        if x not in state_set:
            raise UndeclaredIdentifier("state", x)
        if u not in input_set:
            raise UndeclaredIdentifier("input", u)
        targets = frozenset(targets)
        for x2 in targets:
            if x2 not in state_set:
                raise UndeclaredIdentifier("state", x2)
        table[(x, u)] = table.get((x, u), frozenset()) | targets

    for x in states:
        for u in inputs:
            table.setdefault((x, u), frozenset())
            if not table[(x, u)] and not allow_partial:
                raise NonStrictTransition(x, u)

    initial_set = frozenset(initial)
    if not abstraction:
        initial_outputs = {output_map[x] for x in initial_set}
        for x in states:
            if output_map[x] in initial_outputs and x not in initial_set:
                raise InitialSetViolatesOutputRespect(output_map[x], x)

    return FiniteSystem(
        states=tuple(states),
        initial=initial_set,
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        output_map=MappingProxyType(dict(output_map)),
        transitions=MappingProxyType(table),
        name=name,
        abstraction=abstraction,
    )


def validate(description: SystemDescription, allow_partial: bool = False) -> FiniteSystem:
    """
    Validate a parsed system description.

    Args:
        description: Parsed JSON system
        allow_partial: Accept empty F(x, u) (input for input_complete / FRR checks)

    Returns:
        FiniteSystem: The validated system
    """
    transitions: Dict[Tuple[str, str], Set[str]] = {}
    for row in description.transitions:
        transitions.setdefault((row.source, row.input), set()).update(row.to)
    system = build_system(
        description.states,
        description.initial,
        description.inputs,
        description.outputs,
        description.output_map,
        transitions,
        name=description.name,
        allow_partial=allow_partial,
        abstraction=description.abstraction,
    )
    logger.debug("system_validated", name=system.name, states=len(system.states))
    return system


def to_description(system: FiniteSystem) -> SystemDescription:
    """Inverse of validate, rows in declared order."""
    rows = [
        TransitionEntry(source=x, input=u, to=sorted(system.post(x, u), key=system.states.index))
        for x in system.states
        for u in system.inputs
        if system.post(x, u)
    ]
    return SystemDescription(
        name=system.name,
        states=list(system.states),
        initial=[x for x in system.states if x in system.initial],
        inputs=list(system.inputs),
        outputs=list(system.outputs),
        output_map={x: system.output(x) for x in system.states},
        transitions=rows,
        abstraction=system.abstraction,
    )


def to_dot(system: FiniteSystem) -> str:
    """DOT export; nodes are labelled "id | output", initial nodes are drawn bold."""
    ids = {x: f"n{i}" for i, x in enumerate(system.states)}
    lines = [f'digraph "{escape(system.name)}" {{', "  rankdir=LR;"]
    for x in system.states:
        style = ", style=bold" if x in system.initial else ""
        lines.append(f'  {ids[x]} [label="{escape(x)} | {escape(system.output(x))}"{style}];')
    for x in system.states:
        for u in system.inputs:
            for x2 in sorted(system.post(x, u), key=system.states.index):
                lines.append(f'  {ids[x]} -> {ids[x2]} [label="{escape(u)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _fresh_name(base: str, taken: Sequence[str]) -> str:
    used = set(taken)
    name, suffix = base, 0
    while name in used:
        suffix += 1
        name = f"{base}_{suffix}"
    return name


def input_complete(system: FiniteSystem) -> FiniteSystem:
    """
    Redirect every disabled (x, u) to a fresh observable dummy state.

    The dummy state and output are named `dummy` and `DUMMY`, suffixed with `_1`, `_2`, ...
    when the system already uses those names. A strict system is returned unchanged.
    """
    if system.is_strict:
        return system
    dummy = _fresh_name(DUMMY_STATE, system.states)
    dummy_output = _fresh_name(DUMMY_OUTPUT, system.outputs)
    states = system.states + (dummy,)
    outputs = system.outputs + (dummy_output,)
    output_map = dict(system.output_map)
    output_map[dummy] = dummy_output
    transitions: Dict[Tuple[str, str], FrozenSet[str]] = {}
    missing = 0
    for x in system.states:
        for u in system.inputs:
            targets = system.post(x, u)
            if not targets:
                targets = frozenset({dummy})
                missing += 1
            transitions[(x, u)] = targets
    for u in system.inputs:
        transitions[(dummy, u)] = frozenset({dummy})
    logger.info("input_completed", name=system.name, redirected=missing, dummy=dummy)
    return build_system(
        states,
        system.initial,
        system.inputs,
        outputs,
        output_map,
        transitions,
        name=system.name,
        abstraction=system.abstraction,
    )


def last_states(system: FiniteSystem, prefix: Sequence[str]) -> FrozenSet[str]:
    """
    Last_S(prefix): states reachable by a path whose external sequence is `prefix`.

    The result is empty iff the prefix is not an external prefix of the system.
    """
    if len(prefix) % 2 == 0:
        raise BadParams("external prefix must have odd length", {"length": len(prefix)})
    current = system.initial & system.preimage(prefix[0]) if prefix[0] in system.outputs else frozenset()
    for k in range(1, len(prefix), 2):
        if not current:
            break
        u, y = prefix[k], prefix[k + 1]
        if u not in system.inputs or y not in system.outputs:
            return frozenset()
        current = system.post_set(current, u) & system.preimage(y)
    return frozenset(current)


def external_prefixes(
    system: FiniteSystem, depth: int, guard: Optional[ResourceGuard] = None
) -> Set[ExternalPrefix]:
    """
    All external prefixes with at most `depth` inputs, by breadth-first enumeration.

    Raises:
        ResourceBudgetExceeded: If more prefixes than the configured node limit are produced
    """
    if depth < 0:
        raise BadParams("depth must be non-negative", {"depth": depth})
    guard = guard or ResourceGuard("external_prefixes", get_settings().prefix_node_limit)
    result: Set[ExternalPrefix] = set()
    frontier: List[Tuple[ExternalPrefix, FrozenSet[str]]] = []
    for y in system.initial_outputs():
        prefix = (y,)
        frontier.append((prefix, system.initial & system.preimage(y)))
        result.add(prefix)
        guard.tick()
    for _ in range(depth):
        next_frontier: List[Tuple[ExternalPrefix, FrozenSet[str]]] = []
        for prefix, knowledge in frontier:
            for u in system.inputs:
                image = system.post_set(knowledge, u)
                if not image:
                    continue
                for y in system.outputs:
                    cell = image & system.preimage(y)
                    if cell:
                        extended = prefix + (u, y)
                        result.add(extended)
                        next_frontier.append((extended, cell))
                        guard.tick()
        frontier = next_frontier
    return result


def truncate(prefixes: Iterable[ExternalPrefix], depth: int) -> Set[ExternalPrefix]:
    """Cut every prefix to at most `depth` inputs."""
    return {p[: 2 * depth + 1] for p in prefixes}
