"""
Interval-union domain for one bounded level variable plus an observed boolean.

A region keeps one `portion` interval union per boolean value. Used by the tank model.
"""

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import portion as P

from .base import ConcreteSimulator, Region, SymbolicSystem

Parts = Tuple[P.Interval, P.Interval]


def _fmt(interval: P.Interval) -> str:
    return P.to_string(interval, conv=str)


class IntervalRegion(Region):
    """Pair (levels with flag off, levels with flag on)."""

    domain = "interval"
    __slots__ = ("parts", "_key")

    def __init__(self, off: P.Interval, on: P.Interval):
        self.parts: Parts = (off, on)
        self._key: Optional[str] = None

    def key(self) -> str:
        if self._key is None:
            self._key = f"o0:{_fmt(self.parts[0])};o1:{_fmt(self.parts[1])}"
        return self._key

    def is_empty(self) -> bool:
        return self.parts[0].empty and self.parts[1].empty

    def _zip(self, other: "IntervalRegion", op: Callable) -> "IntervalRegion":
        self._check_domain(other)
        return IntervalRegion(op(self.parts[0], other.parts[0]), op(self.parts[1], other.parts[1]))

    def intersect(self, other: "IntervalRegion") -> "IntervalRegion":
        return self._zip(other, lambda a, b: a & b)

    def union(self, other: "IntervalRegion") -> "IntervalRegion":
        return self._zip(other, lambda a, b: a | b)

    def _difference(self, other: "IntervalRegion") -> "IntervalRegion":
        return self._zip(other, lambda a, b: a - b)

    def subset(self, other: "IntervalRegion") -> bool:
        self._check_domain(other)
        return other.parts[0].contains(self.parts[0]) and other.parts[1].contains(self.parts[1])

    def contains(self, state: Tuple) -> bool:
        level, flag = state
        return level in self.parts[int(bool(flag))]

    def supremum(self, flag: bool):
        """(upper bound, closed) of the flag's part, or None if it is empty."""
        part = self.parts[int(flag)]
        if part.empty:
            return None
        return part.upper, part.right == P.CLOSED


@dataclass(frozen=True)
class TankParams:
    """Quantities of the tank: capacity, number of level sensors, inflow and outflow per step."""

    capacity: Fraction = Fraction(6)
    sensors: int = 6
    inflow: Fraction = Fraction(1, 2)
    outflow: Fraction = Fraction(3, 10)


class TankSimulator(ConcreteSimulator):
    """Level saturates at 0 and capacity; the outlet bit is drawn by the environment."""

    def __init__(self, system: "TankSystem", denominator: int = 10):
        self.system = system
        self.denominator = denominator

    def sample_initial(self, rng: random.Random):
        region = self.system.initial_region()
        n = self.denominator
        for _ in range(10_000):
            flag = rng.random() < 0.5
            part = region.parts[int(flag)]
            if part.empty:
                continue
            lo, hi = part.lower, part.upper
            level = Fraction(rng.randrange(math.floor(lo * n), math.floor(hi * n) + 1), n)
            if level in part:
                return (level, flag)
        raise ValueError("no grid point in the initial region")

    def successors(self, state, action: str) -> List[Tuple[Fraction, bool]]:
        level, flag = state
        nxt = self.system.clamp(level + self.system.delta(action, flag))
        return [(nxt, False), (nxt, True)]

    def step(self, state, action: str, rng: random.Random):
        return rng.choice(self.successors(state, action))

    def output(self, state) -> str:
        return self.system.output_name(self.system.sensor(state[0]), state[1])


class TankSystem(SymbolicSystem[IntervalRegion]):
    """
    Water tank with an inlet valve (inputs "+" and "0") and an observed outlet bit.

    The output reports the highest active level sensor and the outlet bit.
    """

    domain = "interval"

    def __init__(self, params: TankParams = TankParams(), name: str = "tank"):
        self.params = params
        outputs = [self.output_name(k, o) for k in range(params.sensors) for o in (False, True)]
        super().__init__(name, ["+", "0"], outputs)
        self.level_domain = P.closed(Fraction(0), params.capacity)
        self._outputs: Dict[str, IntervalRegion] = {}
        for k in range(params.sensors):
            if k == params.sensors - 1:
                band = P.closed(Fraction(k), params.capacity)
            else:
                band = P.closedopen(Fraction(k), Fraction(k + 1))
            self._outputs[self.output_name(k, False)] = IntervalRegion(band, P.empty())
            self._outputs[self.output_name(k, True)] = IntervalRegion(P.empty(), band)
        start = P.closedopen(Fraction(0), Fraction(1))
        self._initial = IntervalRegion(start, start)
        self.simulator = TankSimulator(self)

    @staticmethod
    def output_name(sensor: int, flag: bool) -> str:
        return f"l{sensor}|o{int(bool(flag))}"

    def sensor(self, level: Fraction) -> int:
        return min(math.floor(level), self.params.sensors - 1)

    def delta(self, u: str, flag: bool) -> Fraction:
        change = self.params.inflow if u == "+" else Fraction(0)
        if flag:
            change -= self.params.outflow
        return change

    def clamp(self, level: Fraction) -> Fraction:
        return min(max(level, Fraction(0)), self.params.capacity)

    def region(self, off: P.Interval, on: P.Interval) -> IntervalRegion:
        return IntervalRegion(off & self.level_domain, on & self.level_domain)

    def output_region(self, y: str) -> IntervalRegion:
        return self._outputs[y]

    def initial_region(self) -> IntervalRegion:
        return self._initial

    def empty(self) -> IntervalRegion:
        return IntervalRegion(P.empty(), P.empty())

    def _image(self, levels: P.Interval, delta: Fraction) -> P.Interval:
        if levels.empty:
            return P.empty()
        shifted = levels.apply(lambda a: a.replace(lower=lambda v: v + delta, upper=lambda v: v + delta))
        image = shifted & self.level_domain
        if not (shifted & P.open(self.params.capacity, P.inf)).empty:
            image = image | P.singleton(self.params.capacity)
        if not (shifted & P.open(-P.inf, Fraction(0))).empty:
            image = image | P.singleton(Fraction(0))
        return image

    def _preimage(self, levels: P.Interval, delta: Fraction) -> P.Interval:
        """Levels whose clamped successor lies in `levels`."""
        levels = levels & self.level_domain
        if levels.empty:
            return P.empty()
        result = levels.apply(lambda a: a.replace(lower=lambda v: v - delta, upper=lambda v: v - delta))
        if self.params.capacity in levels:
            result = result | P.closed(self.params.capacity - delta, self.params.capacity)
        if Fraction(0) in levels:
            result = result | P.closed(Fraction(0), -delta)
        return result & self.level_domain

    def post(self, region: IntervalRegion, u: str) -> IntervalRegion:
        self.check_region(region)
        image = self._image(region.parts[0], self.delta(u, False)) | self._image(
            region.parts[1], self.delta(u, True)
        )
        return IntervalRegion(image, image)

    def pre(self, region: IntervalRegion, u: str) -> IntervalRegion:
        self.check_region(region)
        targets = region.parts[0] | region.parts[1]
        return IntervalRegion(
            self._preimage(targets, self.delta(u, False)), self._preimage(targets, self.delta(u, True))
        )

    def stable_subset(self, q: IntervalRegion, postq: Mapping[str, IntervalRegion]) -> IntervalRegion:
        self.check_region(q)
        off, on = q.parts
        for u in self.inputs:
            both = postq[u].parts[0] & postq[u].parts[1]
            off = off & self._preimage(both, self.delta(u, False))
            on = on & self._preimage(both, self.delta(u, True))
        return IntervalRegion(off, on)
