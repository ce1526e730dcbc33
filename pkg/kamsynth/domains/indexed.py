"""
Semilinear indexed domain.

States are (tag, index) pairs with index >= 1. A region assigns each tag an eventually
periodic index set with period at most 2, which covers singletons and parity classes.
Each tag has a validity set; a region only denotes valid indices. Tags of one validity
group (for instance the D-layer variants d, dl, dr) stand for alternative realizations of
the same layer, so only regions that treat a group uniformly are decidable without the
class oracle that picks the variant.
"""

import re
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from ..core.errors import BadParams, DomainMismatch, NotSupported
from .base import Region, SymbolicSystem


class IndexSet:
    """
    Eventually periodic subset of {1, 2, ...}.

    Canonical form: members below `threshold` are listed in `head`; from `threshold` on,
    membership only depends on parity (`tail` = (even members, odd members)).
    The threshold is minimal.
    """

    __slots__ = ("threshold", "head", "tail")

    def __init__(self, threshold: int, head: Iterable[int], tail: Tuple[bool, bool]):
        head = {i for i in head if 1 <= i < threshold}
        threshold = max(1, threshold)
        while threshold > 1:
            i = threshold - 1
            if (i in head) != tail[i % 2]:
                break
            head.discard(i)
            threshold = i
        self.threshold = threshold
        self.head: FrozenSet[int] = frozenset(head)
        self.tail: Tuple[bool, bool] = (bool(tail[0]), bool(tail[1]))

    @classmethod
    def empty(cls) -> "IndexSet":
        return cls(1, (), (False, False))

    @classmethod
    def everything(cls, start: int = 1) -> "IndexSet":
        return cls(start, (), (True, True))

    @classmethod
    def finite(cls, indices: Iterable[int]) -> "IndexSet":
        indices = [i for i in indices if i >= 1]
        return cls(max(indices, default=0) + 1, indices, (False, False))

    @classmethod
    def progression(cls, offset: int, period: int) -> "IndexSet":
        """{offset + period * i : i >= 0}."""
        if offset < 1:
            raise BadParams("progression offset must be >= 1", {"offset": offset})
        if period == 0:
            return cls.finite([offset])
        if period == 1:
            return cls.everything(offset)
        if period == 2:
            tail = (offset % 2 == 0, offset % 2 == 1)
            return cls(offset, (), tail)
        raise NotSupported(f"period {period} is not supported (allowed: 0, 1, 2)", {"period": period})

    def __contains__(self, i: int) -> bool:
        if i < 1:
            return False
        if i < self.threshold:
            return i in self.head
        return self.tail[i % 2]

    def _combine(self, other: "IndexSet", op) -> "IndexSet":
        bound = max(self.threshold, other.threshold)
        head = {i for i in range(1, bound) if op(i in self, i in other)}
        tail = (op(self.tail[0], other.tail[0]), op(self.tail[1], other.tail[1]))
        return IndexSet(bound, head, tail)

    def union(self, other: "IndexSet") -> "IndexSet":
        return self._combine(other, lambda a, b: a or b)

    def intersect(self, other: "IndexSet") -> "IndexSet":
        return self._combine(other, lambda a, b: a and b)

    def minus(self, other: "IndexSet") -> "IndexSet":
        return self._combine(other, lambda a, b: a and not b)

    def complement(self) -> "IndexSet":
        head = set(range(1, self.threshold)) - self.head
        return IndexSet(self.threshold, head, (not self.tail[0], not self.tail[1]))

    def shift(self, offset: int) -> "IndexSet":
        """{i + offset : i in self, i + offset >= 1}."""
        threshold = self.threshold + offset
        head = {i + offset for i in self.head}
        tail = (self.tail[offset % 2], self.tail[(offset + 1) % 2])
        if threshold < 1:
            return IndexSet(1, (), tail)
        return IndexSet(threshold, head, tail)

    def is_empty(self) -> bool:
        return not self.head and not any(self.tail)

    def is_finite(self) -> bool:
        return not any(self.tail)

    def subset(self, other: "IndexSet") -> bool:
        return self.minus(other).is_empty()

    def first(self) -> Optional[int]:
        for i in range(1, self.threshold + 2):
            if i in self:
                return i
        return None

    def progressions(self) -> List[Tuple[int, int]]:
        """(offset, period) terms in increasing offset order."""
        terms = [(i, 0) for i in sorted(self.head)]
        if all(self.tail):
            terms.append((self.threshold, 1))
        else:
            for parity in (0, 1):
                if self.tail[parity]:
                    start = self.threshold if self.threshold % 2 == parity else self.threshold + 1
                    terms.append((start, 2))
        return sorted(terms)

    def truncate(self, bound: int) -> List[int]:
        return [i for i in range(1, bound + 1) if i in self]

    def _state(self):
        return (self.threshold, self.head, self.tail)

    def __eq__(self, other) -> bool:
        return isinstance(other, IndexSet) and self._state() == other._state()

    def __hash__(self) -> int:
        return hash(self._state())

    def __repr__(self) -> str:
        return f"IndexSet({self.progressions()!r})"


ALL = IndexSet.everything()
ODD = IndexSet.progression(1, 2)
EVEN = IndexSet.progression(2, 2)

_TERM = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\[\s*(\d+)\s*(?:\+\s*(\d+)\s*\*\s*i\s*)?\]\s*$")


@dataclass(frozen=True)
class TagSpace:
    """Declared tags with their validity sets, outputs and validity groups."""

    tags: Tuple[str, ...]
    validity: Mapping[str, IndexSet]
    output: Mapping[str, str]
    groups: Tuple[FrozenSet[str], ...] = ()

    def order(self, tag: str) -> int:
        return self.tags.index(tag)

    def group_of(self, tag: str) -> Optional[FrozenSet[str]]:
        for group in self.groups:
            if tag in group:
                return group
        return None

    def group_validity(self, group: FrozenSet[str]) -> IndexSet:
        result = ALL
        for tag in group:
            result = result.intersect(self.validity[tag])
        return result


class IndexedRegion(Region):
    """Finite map tag -> IndexSet, normalized against the tag validity."""

    domain = "indexed"
    __slots__ = ("space", "members", "_key")

    def __init__(self, space: TagSpace, members: Mapping[str, IndexSet]):
        self.space = space
        normalized: Dict[str, IndexSet] = {}
        for tag, indices in members.items():
            if tag not in space.validity:
                raise DomainMismatch(f"undeclared tag: {tag}")
            valid = indices.intersect(space.validity[tag])
            if not valid.is_empty():
                normalized[tag] = valid
        self.members: Dict[str, IndexSet] = normalized
        self._key: Optional[str] = None

    @classmethod
    def parse(cls, space: TagSpace, text: str) -> "IndexedRegion":
        """Parse `tag[a+p*i] | tag[a]` terms; "empty" is the empty region."""
        members: Dict[str, IndexSet] = {}
        text = text.strip()
        if text and text != "empty":
            for term in text.split("|"):
                match = _TERM.match(term)
                if not match:
                    raise BadParams(f"cannot parse indexed term: {term!r}")
                tag, offset, period = match.group(1), int(match.group(2)), int(match.group(3) or 0)
                indices = IndexSet.progression(offset, period)
                members[tag] = members.get(tag, IndexSet.empty()).union(indices)
        return cls(space, members)

    def get(self, tag: str) -> IndexSet:
        return self.members.get(tag, IndexSet.empty())

    def key(self) -> str:
        if self._key is None:
            terms = []
            for tag in sorted(self.members, key=self.space.order):
                for offset, period in self.members[tag].progressions():
                    terms.append(f"{tag}[{offset}]" if period == 0 else f"{tag}[{offset}+{period}*i]")
            self._key = " | ".join(terms) if terms else "empty"
        return self._key

    def is_empty(self) -> bool:
        return not self.members

    def _zip(self, other: "IndexedRegion", op) -> "IndexedRegion":
        self._check_domain(other)
        tags = set(self.members) | set(other.members)
        return IndexedRegion(self.space, {t: op(self.get(t), other.get(t)) for t in tags})

    def intersect(self, other: "IndexedRegion") -> "IndexedRegion":
        return self._zip(other, IndexSet.intersect)

    def union(self, other: "IndexedRegion") -> "IndexedRegion":
        return self._zip(other, IndexSet.union)

    def _difference(self, other: "IndexedRegion") -> "IndexedRegion":
        return self._zip(other, IndexSet.minus)

    def subset(self, other: "IndexedRegion") -> bool:
        self._check_domain(other)
        return all(indices.subset(other.get(tag)) for tag, indices in self.members.items())

    def states(self, bound: int) -> List[Tuple[str, int]]:
        """Members with index <= bound, in tag order."""
        return [
            (tag, i)
            for tag in sorted(self.members, key=self.space.order)
            for i in self.members[tag].truncate(bound)
        ]

    def contains(self, tag: str, index: int) -> bool:
        return index in self.get(tag)


@dataclass(frozen=True)
class EdgeTemplate:
    """
    source_i --action--> target_j for every valid i in `when`.

    j = i + shift, or j = const when const is set.
    """

    source: str
    action: str
    target: str
    shift: int = 0
    const: Optional[int] = None
    when: IndexSet = ALL

    def image(self, indices: IndexSet) -> IndexSet:
        if indices.is_empty():
            return IndexSet.empty()
        if self.const is not None:
            return IndexSet.finite([self.const])
        return indices.shift(self.shift)


class IndexedSystem(SymbolicSystem[IndexedRegion]):
    """Symbolic system over the indexed domain, wired by edge templates."""

    domain = "indexed"

    def __init__(
        self,
        name: str,
        space: TagSpace,
        inputs: Sequence[str],
        outputs: Sequence[str],
        edges: Sequence[EdgeTemplate],
        initial: Mapping[str, IndexSet],
    ):
        super().__init__(name, inputs, outputs)
        self.space = space
        self.edges = tuple(edges)
        self._by_input: Dict[str, List[EdgeTemplate]] = {u: [] for u in self.inputs}
        for edge in self.edges:
            if edge.action not in self._by_input:
                raise BadParams(f"edge uses undeclared input {edge.action}")
            self._by_input[edge.action].append(edge)
        self._initial = IndexedRegion(space, initial)
        self._outputs = {
            y: IndexedRegion(space, {t: ALL for t in space.tags if space.output[t] == y})
            for y in self.outputs
        }

    def region(self, text: str) -> IndexedRegion:
        return IndexedRegion.parse(self.space, text)

    def output_region(self, y: str) -> IndexedRegion:
        return self._outputs[y]

    def initial_region(self) -> IndexedRegion:
        return self._initial

    def empty(self) -> IndexedRegion:
        return IndexedRegion(self.space, {})

    def _sources(self, region: IndexedRegion, edge: EdgeTemplate) -> IndexSet:
        return region.get(edge.source).intersect(edge.when).intersect(self.space.validity[edge.source])

    def post(self, region: IndexedRegion, u: str) -> IndexedRegion:
        self.check_region(region)
        result: Dict[str, IndexSet] = {}
        for edge in self._by_input[u]:
            image = edge.image(self._sources(region, edge))
            result[edge.target] = result.get(edge.target, IndexSet.empty()).union(image)
        return IndexedRegion(self.space, result)

    def _require_uniform(self, region: IndexedRegion, target: str, indices: IndexSet) -> None:
        """A group must be wholly in or wholly out of the region at the given indices."""
        group = self.space.group_of(target)
        if group is None:
            return
        scope = indices.intersect(self.space.group_validity(group))
        views = {tag: region.get(tag).intersect(scope) for tag in group}
        if len(set(views.values())) > 1:
            raise NotSupported(
                "deciding this predicate needs the class oracle of a validity group",
                {"group": sorted(group), "region": region.key()},
            )

    def pre(self, region: IndexedRegion, u: str) -> IndexedRegion:
        self.check_region(region)
        result: Dict[str, IndexSet] = {}
        for edge in self._by_input[u]:
            sources = edge.when.intersect(self.space.validity[edge.source])
            self._require_uniform(region, edge.target, edge.image(sources))
            hit = region.get(edge.target)
            if edge.const is not None:
                found = sources if edge.const in hit else IndexSet.empty()
            else:
                found = hit.shift(-edge.shift).intersect(sources)
            result[edge.source] = result.get(edge.source, IndexSet.empty()).union(found)
        return IndexedRegion(self.space, result)

    def stable_subset(self, q: IndexedRegion, postq: Mapping[str, IndexedRegion]) -> IndexedRegion:
        self.check_region(q)
        kept: Dict[str, IndexSet] = dict(q.members)
        for u in self.inputs:
            target_region = postq[u]
            self.check_region(target_region)
            for edge in self._by_input[u]:
                if edge.source not in kept:
                    continue
                sources = kept[edge.source].intersect(edge.when)
                if sources.is_empty():
                    continue
                self._require_uniform(target_region, edge.target, edge.image(sources))
                hit = target_region.get(edge.target)
                if edge.const is not None:
                    bad = IndexSet.empty() if edge.const in hit else sources
                else:
                    missing = self.space.validity[edge.target].minus(hit)
                    bad = missing.shift(-edge.shift).intersect(sources)
                kept[edge.source] = kept[edge.source].minus(bad)
        return IndexedRegion(self.space, kept)
