"""
Region contract shared by every exact set domain, and the symbolic system interface built on it.

A SymbolicSystem exposes exactly what the abstraction algorithms need: the output family,
the initial region, post images, predecessor sets (for bisimulation) and the stable-subset
predicate of Refine. Concrete executions go through a ConcreteSimulator.
"""

import random
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, ClassVar, Dict, Generic, List, Mapping, Optional, Sequence, Tuple, TypeVar

from ..core.errors import DomainMismatch, UnknownOutput

R = TypeVar("R", bound="Region")


class Region(ABC):
    """
    Immutable element of an exact set domain.

    Equality and hashing go through the canonical key, so two regions with the same
    denotation compare equal.
    """

    domain: ClassVar[str] = "abstract"

    @abstractmethod
    def key(self) -> str:
        """Canonical text serialization."""

    @abstractmethod
    def is_empty(self) -> bool: ...

    @abstractmethod
    def intersect(self: R, other: R) -> R: ...

    @abstractmethod
    def union(self: R, other: R) -> R: ...

    @abstractmethod
    def subset(self: R, other: R) -> bool: ...

    @abstractmethod
    def _difference(self: R, other: R) -> R:
        """self minus other; only partition refinement uses it."""

    def _split(self: R, other: R) -> Tuple[R, R]:
        """(self & other, self - other)."""
        self._check_domain(other)
        return self.intersect(other), self._difference(other)

    def _check_domain(self, other: "Region") -> None:
        if not isinstance(other, Region) or other.domain != self.domain:
            raise DomainMismatch(
                f"cannot combine {self.domain} region with {getattr(other, 'domain', type(other).__name__)}"
            )

    def strict_subset(self: R, other: R) -> bool:
        return self.subset(other) and self.key() != other.key()

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return self.domain == other.domain and self.key() == other.key()

    def __hash__(self) -> int:
        return hash((self.domain, self.key()))

    def __str__(self) -> str:
        return self.key()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.key()!r})"


@dataclass(frozen=True)
class RegionAlgebra:
    """Answers of region_algebra(a, b)."""

    subset: bool
    equals: bool
    empty_a: bool
    intersect: Region
    union_rep: Region


def region_algebra(a: Region, b: Region) -> RegionAlgebra:
    """
    Decide the basic relations between two regions of the same domain.

    Raises:
        DomainMismatch: If a and b live in different domains
    """
    a._check_domain(b)
    return RegionAlgebra(
        subset=a.subset(b),
        equals=a == b,
        empty_a=a.is_empty(),
        intersect=a.intersect(b),
        union_rep=a.union(b),
    )


def union_all(regions: Sequence[R], empty: R) -> R:
    result = empty
    for region in regions:
        result = result.union(region)
    return result


class ConcreteSimulator(ABC):
    """Executable semantics of a system; environment choices come from the caller's rng."""

    @abstractmethod
    def sample_initial(self, rng: random.Random) -> Any: ...

    @abstractmethod
    def step(self, state: Any, action: str, rng: random.Random) -> Any: ...

    @abstractmethod
    def output(self, state: Any) -> str: ...

    def initial_states(self) -> Optional[List[Any]]:
        """All initial states when they are finitely many, else None."""
        return None

    def successors(self, state: Any, action: str) -> Optional[List[Any]]:
        """All successors when they are finitely many, else None."""
        return None


class SymbolicSystem(ABC, Generic[R]):
    """
    System whose state sets are regions of one domain.

    Subclasses fix the domain and implement post, pre and stable_subset exactly.
    """

    domain: ClassVar[str] = "abstract"

    def __init__(self, name: str, inputs: Sequence[str], outputs: Sequence[str]):
        self.name = name
        self.inputs: Tuple[str, ...] = tuple(inputs)
        self.outputs: Tuple[str, ...] = tuple(outputs)
        self.simulator: Optional[ConcreteSimulator] = None

    @abstractmethod
    def output_region(self, y: str) -> R:
        """H^{-1}(y)."""

    @abstractmethod
    def initial_region(self) -> R: ...

    @abstractmethod
    def empty(self) -> R: ...

    @abstractmethod
    def post(self, region: R, u: str) -> R:
        """Exact image F(region, u)."""

    @abstractmethod
    def pre(self, region: R, u: str) -> R:
        """States with at least one u-successor in region."""

    @abstractmethod
    def stable_subset(self, q: R, postq: Mapping[str, R]) -> R:
        """States of q all of whose u-successors lie in postq[u], for every input u."""

    def universe(self) -> R:
        return union_all([self.output_region(y) for y in self.outputs], self.empty())

    def restrict_output(self, region: R, y: str) -> R:
        """region & H^{-1}(y)."""
        if y not in self.outputs:
            raise UnknownOutput(y)
        self.check_region(region)
        return region.intersect(self.output_region(y))

    def initial_cells(self) -> List[Tuple[str, R]]:
        """Non-empty X0 & H^{-1}(y), in output order."""
        x0 = self.initial_region()
        cells = []
        for y in self.outputs:
            cell = x0.intersect(self.output_region(y))
            if not cell.is_empty():
                cells.append((y, cell))
        return cells

    def output_of(self, region: R) -> Optional[str]:
        """The unique output of a non-empty output-uniform region, else None."""
        for y in self.outputs:
            if region.subset(self.output_region(y)):
                return y
        return None

    def check_region(self, region: Region) -> None:
        if not isinstance(region, Region) or region.domain != self.domain:
            raise DomainMismatch(
                f"{self.name} works on {self.domain} regions, got {getattr(region, 'domain', type(region).__name__)}"
            )

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "domain": self.domain,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
        }
