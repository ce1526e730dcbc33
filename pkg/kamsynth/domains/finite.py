"""
Finite-set domain: explicit subsets of a FiniteSystem's states.
"""

import random
from typing import Any, FrozenSet, Iterable, List, Mapping, Optional

from ..core.errors import DomainMismatch
from ..services.systems_service import FiniteSystem
from .base import ConcreteSimulator, Region, SymbolicSystem


class FiniteRegion(Region):
    """Subset of declared states, serialized as the id list in declared order."""

    domain = "finite"
    __slots__ = ("states", "_order", "_key")

    def __init__(self, states: Iterable[str], order: Mapping[str, int]):
        self.states: FrozenSet[str] = frozenset(states)
        self._order = order
        self._key: Optional[str] = None

    def key(self) -> str:
        if self._key is None:
            self._key = "{" + ",".join(sorted(self.states, key=self._order.__getitem__)) + "}"
        return self._key

    def is_empty(self) -> bool:
        return not self.states

    def intersect(self, other: "FiniteRegion") -> "FiniteRegion":
        self._check_domain(other)
        return FiniteRegion(self.states & other.states, self._order)

    def union(self, other: "FiniteRegion") -> "FiniteRegion":
        self._check_domain(other)
        return FiniteRegion(self.states | other.states, self._order)

    def subset(self, other: "FiniteRegion") -> bool:
        self._check_domain(other)
        return self.states <= other.states

    def _difference(self, other: "FiniteRegion") -> "FiniteRegion":
        self._check_domain(other)
        return FiniteRegion(self.states - other.states, self._order)

    def __eq__(self, other: Any) -> bool:
        if isinstance(other, FiniteRegion):
            return self.states == other.states
        return super().__eq__(other)

    def __hash__(self) -> int:
        return hash((self.domain, self.key()))

    def __iter__(self):
        return iter(sorted(self.states, key=self._order.__getitem__))

    def __len__(self) -> int:
        return len(self.states)


class FiniteSimulator(ConcreteSimulator):
    """Executes a FiniteSystem; nondeterministic successors are drawn uniformly."""

    def __init__(self, system: FiniteSystem):
        self.system = system

    def initial_states(self) -> List[str]:
        return [x for x in self.system.states if x in self.system.initial]

    def sample_initial(self, rng: random.Random) -> str:
        return rng.choice(self.initial_states())

    def successors(self, state: str, action: str) -> List[str]:
        return [x for x in self.system.states if x in self.system.post(state, action)]

    def step(self, state: str, action: str, rng: random.Random) -> str:
        return rng.choice(self.successors(state, action))

    def output(self, state: str) -> str:
        return self.system.output(state)


class FiniteSymbolicSystem(SymbolicSystem[FiniteRegion]):
    """A FiniteSystem seen through the region interface."""

    domain = "finite"

    def __init__(self, system: FiniteSystem):
        super().__init__(system.name, system.inputs, system.outputs)
        self.system = system
        self.order = {x: i for i, x in enumerate(system.states)}
        self._outputs = {y: self.region(system.preimage(y)) for y in system.outputs}
        self._pre = {
            u: {x2: frozenset(x for x in system.states if x2 in system.post(x, u)) for x2 in system.states}
            for u in system.inputs
        }
        self.simulator = FiniteSimulator(system)

    def region(self, states: Iterable[str]) -> FiniteRegion:
        states = frozenset(states)
        unknown = states - self.order.keys()
        if unknown:
            raise DomainMismatch(f"states not in {self.name}: {sorted(unknown)}")
        return FiniteRegion(states, self.order)

    def output_region(self, y: str) -> FiniteRegion:
        return self._outputs[y]

    def initial_region(self) -> FiniteRegion:
        return FiniteRegion(self.system.initial, self.order)

    def empty(self) -> FiniteRegion:
        return FiniteRegion((), self.order)

    def post(self, region: FiniteRegion, u: str) -> FiniteRegion:
        self.check_region(region)
        return FiniteRegion(self.system.post_set(region.states, u), self.order)

    def pre(self, region: FiniteRegion, u: str) -> FiniteRegion:
        self.check_region(region)
        result = set()
        for x2 in region.states:
            result |= self._pre[u][x2]
        return FiniteRegion(result, self.order)

    def stable_subset(self, q: FiniteRegion, postq: Mapping[str, FiniteRegion]) -> FiniteRegion:
        self.check_region(q)
        kept = [
            x
            for x in q.states
            if all(self.system.post(x, u) <= postq[u].states for u in self.inputs)
        ]
        return FiniteRegion(kept, self.order)


def lift(system) -> SymbolicSystem:
    """Accept FiniteSystem or SymbolicSystem and return the symbolic view."""
    if isinstance(system, SymbolicSystem):
        return system
    if isinstance(system, FiniteSystem):
        return FiniteSymbolicSystem(system)
    raise DomainMismatch(f"not a system: {type(system).__name__}")
