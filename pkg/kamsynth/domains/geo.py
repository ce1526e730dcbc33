"""
Diagonal-box domain over the wrapped square [0, W)^2.

A diagonal box is the conjunction lo1 <= x1 < hi1, lo2 <= x2 < hi2, lo3 <= x1 - x2 < hi3
with Fraction endpoints. Regions are finite unions of such boxes. The canonical form is
computed on the arrangement of all box boundaries: boundaries across which membership never
changes are dropped, then the remaining atoms are merged into boxes in a fixed order.
Every non-empty atom has positive area and all constraints share one orientation, so the
set of essential boundaries, and with it the key, depends only on the denotation.
"""

import math
import random
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from ..core.errors import BadParams, DomainMismatch
from .base import ConcreteSimulator, Region, SymbolicSystem

Box = Tuple[Fraction, Fraction, Fraction, Fraction, Fraction, Fraction]
Atom = Tuple[int, int, int]


def _q(value) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(value)


def _box_nonempty(b: Box) -> bool:
    lo1, hi1, lo2, hi2, lo3, hi3 = b
    return lo1 < hi1 and lo2 < hi2 and lo3 < hi3 and lo3 < hi1 - lo2 and lo1 - hi2 < hi3


def _tight(b: Box) -> Box:
    """Exact projections of a non-empty box on x1, x2 and x1 - x2."""
    lo1, hi1, lo2, hi2, lo3, hi3 = b
    return (
        max(lo1, lo2 + lo3),
        min(hi1, hi2 + hi3),
        max(lo2, lo1 - hi3),
        min(hi2, hi1 - lo3),
        max(lo3, lo1 - hi2),
        min(hi3, hi1 - lo2),
    )


def _box_within(a: Box, b: Box) -> bool:
    t = _tight(a)
    return (
        t[0] >= b[0] and t[1] <= b[1] and t[2] >= b[2] and t[3] <= b[3] and t[4] >= b[4] and t[5] <= b[5]
    )


def _box_meet(a: Box, b: Box) -> Box:
    return (
        max(a[0], b[0]),
        min(a[1], b[1]),
        max(a[2], b[2]),
        min(a[3], b[3]),
        max(a[4], b[4]),
        min(a[5], b[5]),
    )


class _Arrangement:
    """Slabs along x1, x2 and x1 - x2 induced by a set of boxes."""

    def __init__(self, xs: Sequence[Fraction], ys: Sequence[Fraction], ds: Sequence[Fraction]):
        self.xs = list(xs)
        self.ys = list(ys)
        self.ds = list(ds)
        self._xi = {v: i for i, v in enumerate(self.xs)}
        self._yi = {v: i for i, v in enumerate(self.ys)}
        self._di = {v: i for i, v in enumerate(self.ds)}
        self._nonempty: Dict[Atom, bool] = {}

    @classmethod
    def of(cls, width: Fraction, boxes: Iterable[Box]) -> "_Arrangement":
        xs = {Fraction(0), width}
        ys = {Fraction(0), width}
        ds = {-width, width}
        for b in boxes:
            xs.update((b[0], b[1]))
            ys.update((b[2], b[3]))
            ds.update((b[4], b[5]))
        return cls(sorted(xs), sorted(ys), sorted(ds))

    def atom_box(self, i: int, j: int, k: int) -> Box:
        return (self.xs[i], self.xs[i + 1], self.ys[j], self.ys[j + 1], self.ds[k], self.ds[k + 1])

    def nonempty(self, atom: Atom) -> bool:
        known = self._nonempty.get(atom)
        if known is None:
            known = _box_nonempty(self.atom_box(*atom))
            self._nonempty[atom] = known
        return known

    def members(self, boxes: Iterable[Box]) -> Set[Atom]:
        result: Set[Atom] = set()
        for b in boxes:
            for i in range(self._xi[b[0]], self._xi[b[1]]):
                for j in range(self._yi[b[2]], self._yi[b[3]]):
                    for k in range(self._di[b[4]], self._di[b[5]]):
                        if self.nonempty((i, j, k)):
                            result.add((i, j, k))
        return result

    def _essential(self, members: Set[Atom], axis: int, count: int, others: Tuple[int, int]) -> List[int]:
        """Interior boundaries of one axis across which membership changes somewhere."""
        keep = []
        for p in range(1, count):
            for a in range(others[0]):
                changed = False
                for b in range(others[1]):
                    left = _place(axis, p - 1, a, b)
                    right = _place(axis, p, a, b)
                    if self.nonempty(left) and self.nonempty(right) and (left in members) != (right in members):
                        changed = True
                        break
                if changed:
                    keep.append(p)
                    break
        return keep

    def canonical(self, members: Set[Atom]) -> Tuple[Box, ...]:
        if not members:
            return ()
        n1, n2, n3 = len(self.xs) - 1, len(self.ys) - 1, len(self.ds) - 1
        keep_x = self._essential(members, 0, n1, (n2, n3))
        keep_y = self._essential(members, 1, n2, (n1, n3))
        keep_d = self._essential(members, 2, n3, (n1, n2))
        coarse = _Arrangement(
            [self.xs[0]] + [self.xs[p] for p in keep_x] + [self.xs[-1]],
            [self.ys[0]] + [self.ys[p] for p in keep_y] + [self.ys[-1]],
            [self.ds[0]] + [self.ds[p] for p in keep_d] + [self.ds[-1]],
        )
        map_x = _slab_map(n1, keep_x)
        map_y = _slab_map(n2, keep_y)
        map_d = _slab_map(n3, keep_d)
        coarse_members = {(map_x[i], map_y[j], map_d[k]) for i, j, k in members}
        return coarse._merge(coarse_members)

    def _merge(self, members: Set[Atom]) -> Tuple[Box, ...]:
        n1, n2, n3 = len(self.xs) - 1, len(self.ys) - 1, len(self.ds) - 1
        covered: Set[Atom] = set()

        def usable(atoms: List[Atom]) -> bool:
            gained = False
            for atom in atoms:
                if atom in members and atom not in covered:
                    gained = True
                elif self.nonempty(atom):
                    return False
            return gained

        boxes: List[Box] = []
        for atom in sorted(members):
            if atom in covered:
                continue
            i, j, k = atom
            k2 = k + 1
            while k2 < n3 and usable([(i, j, k2)]):
                k2 += 1
            j2 = j + 1
            while j2 < n2 and usable([(i, j2, c) for c in range(k, k2)]):
                j2 += 1
            i2 = i + 1
            while i2 < n1 and usable([(i2, b, c) for b in range(j, j2) for c in range(k, k2)]):
                i2 += 1
            for a in range(i, i2):
                for b in range(j, j2):
                    for c in range(k, k2):
                        if (a, b, c) in members:
                            covered.add((a, b, c))
            boxes.append((self.xs[i], self.xs[i2], self.ys[j], self.ys[j2], self.ds[k], self.ds[k2]))
        return tuple(boxes)


def _place(axis: int, p: int, a: int, b: int) -> Atom:
    if axis == 0:
        return (p, a, b)
    if axis == 1:
        return (a, p, b)
    return (a, b, p)


def _slab_map(count: int, keep: List[int]) -> List[int]:
    mapping = []
    coarse = 0
    kept = set(keep)
    for slab in range(count):
        if slab in kept:
            coarse += 1
        mapping.append(coarse)
    return mapping


def _fmt(value: Fraction) -> str:
    return str(value)


class GeoRegion(Region):
    """Finite union of diagonal boxes in canonical form."""

    domain = "geo"
    __slots__ = ("width", "boxes", "_key", "_bbox")

    def __init__(self, width, boxes: Iterable[Sequence] = (), _canonical: bool = False):
        self.width = _q(width)
        if _canonical:
            self.boxes: Tuple[Box, ...] = tuple(boxes)
        else:
            self.boxes = _canonicalize(self.width, [tuple(_q(v) for v in b) for b in boxes])
        self._key: Optional[str] = None
        self._bbox: Optional[Tuple[Fraction, Fraction, Fraction, Fraction]] = None

    @classmethod
    def box(cls, width, x1: Tuple, x2: Tuple, d: Optional[Tuple] = None) -> "GeoRegion":
        """Single diagonal box; d defaults to the unconstrained range."""
        w = _q(width)
        lo3, hi3 = (-w, w) if d is None else d
        return cls(w, [(x1[0], x1[1], x2[0], x2[1], lo3, hi3)])

    @classmethod
    def full(cls, width) -> "GeoRegion":
        w = _q(width)
        return cls.box(w, (0, w), (0, w))

    def key(self) -> str:
        if self._key is None:
            if not self.boxes:
                self._key = "empty"
            else:
                self._key = " | ".join(self._box_key(b) for b in self.boxes)
        return self._key

    def _box_key(self, b: Box) -> str:
        text = f"[{_fmt(b[0])},{_fmt(b[1])})x[{_fmt(b[2])},{_fmt(b[3])})"
        if b[4] != -self.width or b[5] != self.width:
            text += f"&{{{_fmt(b[4])}<=x1-x2<{_fmt(b[5])}}}"
        return text

    def is_empty(self) -> bool:
        return not self.boxes

    def bounds(self) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        """Tight bounding box (lo1, hi1, lo2, hi2) of a non-empty region."""
        if self._bbox is None:
            tight = [_tight(b) for b in self.boxes]
            self._bbox = (
                min(t[0] for t in tight),
                max(t[1] for t in tight),
                min(t[2] for t in tight),
                max(t[3] for t in tight),
            )
        return self._bbox

    def _check_domain(self, other: Region) -> None:
        super()._check_domain(other)
        if other.width != self.width:  # type: ignore[attr-defined]
            raise DomainMismatch(f"wrap widths differ: {self.width} vs {other.width}")  # type: ignore[attr-defined]

    def contains(self, point: Tuple) -> bool:
        x1, x2 = _q(point[0]), _q(point[1])
        d = x1 - x2
        return any(b[0] <= x1 < b[1] and b[2] <= x2 < b[3] and b[4] <= d < b[5] for b in self.boxes)

    def _disjoint_bbox(self, other: "GeoRegion") -> bool:
        a, b = self.bounds(), other.bounds()
        return a[1] <= b[0] or b[1] <= a[0] or a[3] <= b[2] or b[3] <= a[2]

    def intersect(self, other: "GeoRegion") -> "GeoRegion":
        self._check_domain(other)
        if self.is_empty() or other.is_empty() or self._disjoint_bbox(other):
            return GeoRegion(self.width, (), _canonical=True)
        if self.key() == other.key():
            return self
        pieces = []
        for a in self.boxes:
            for b in other.boxes:
                m = _box_meet(a, b)
                if _box_nonempty(m):
                    pieces.append(m)
        return GeoRegion(self.width, pieces)

    def union(self, other: "GeoRegion") -> "GeoRegion":
        self._check_domain(other)
        if other.is_empty():
            return self
        if self.is_empty():
            return other
        return GeoRegion(self.width, self.boxes + other.boxes)

    def subset(self, other: "GeoRegion") -> bool:
        self._check_domain(other)
        if self.is_empty():
            return True
        if other.is_empty():
            return False
        a, b = self.bounds(), other.bounds()
        if a[0] < b[0] or a[1] > b[1] or a[2] < b[2] or a[3] > b[3]:
            return False
        if len(other.boxes) == 1:
            return all(_box_within(box, other.boxes[0]) for box in self.boxes)
        return _canonicalize(self.width, list(self.boxes + other.boxes)) == other.boxes

    def _difference(self, other: "GeoRegion") -> "GeoRegion":
        self._check_domain(other)
        if self.is_empty() or other.is_empty() or self._disjoint_bbox(other):
            return self
        grid = _Arrangement.of(self.width, self.boxes + other.boxes)
        members = grid.members(self.boxes) - grid.members(other.boxes)
        return GeoRegion(self.width, grid.canonical(members), _canonical=True)

    def translate(self, t1, t2) -> "GeoRegion":
        """Image under x -> (x + t) mod W."""
        t1, t2 = _q(t1), _q(t2)
        w = self.width
        pieces = []
        for b in self.boxes:
            for k1, lo1, hi1 in _wrap(b[0] + t1, b[1] + t1, w):
                for k2, lo2, hi2 in _wrap(b[2] + t2, b[3] + t2, w):
                    shift = t1 - t2 - (k1 - k2) * w
                    piece = (lo1, hi1, lo2, hi2, max(b[4] + shift, -w), min(b[5] + shift, w))
                    if _box_nonempty(piece):
                        pieces.append(piece)
        return GeoRegion(w, pieces)


def _wrap(lo: Fraction, hi: Fraction, width: Fraction) -> List[Tuple[int, Fraction, Fraction]]:
    """Split [lo, hi) at multiples of width; returns (k, lo - k*W, hi - k*W) pieces."""
    pieces = []
    k = math.floor(lo / width)
    while k * width < hi:
        a = max(lo, k * width) - k * width
        b = min(hi, (k + 1) * width) - k * width
        if a < b:
            pieces.append((k, a, b))
        k += 1
    return pieces


def _canonicalize(width: Fraction, boxes: List[Box]) -> Tuple[Box, ...]:
    clipped = []
    for b in boxes:
        c = (max(b[0], 0), min(b[1], width), max(b[2], 0), min(b[3], width), max(b[4], -width), min(b[5], width))
        if _box_nonempty(c):
            clipped.append(c)
    if not clipped:
        return ()
    grid = _Arrangement.of(width, clipped)
    return grid.canonical(grid.members(clipped))


class GeoSimulator(ConcreteSimulator):
    """Exact rational execution of a translation system on the wrapped square."""

    def __init__(self, system: "GeoSystem", denominator: int = 60):
        self.system = system
        self.denominator = denominator

    def sample_initial(self, rng: random.Random) -> Tuple[Fraction, Fraction]:
        region = self.system.initial_region()
        lo1, hi1, lo2, hi2 = region.bounds()
        n = self.denominator
        for _ in range(10_000):
            point = (
                Fraction(rng.randrange(math.floor(lo1 * n), math.ceil(hi1 * n)), n),
                Fraction(rng.randrange(math.floor(lo2 * n), math.ceil(hi2 * n)), n),
            )
            if region.contains(point):
                return point
        raise BadParams("no grid point found in the initial region", {"denominator": n})

    def step(self, state: Tuple[Fraction, Fraction], action: str, rng: random.Random):
        return self.successors(state, action)[0]

    def successors(self, state, action: str) -> List[Tuple[Fraction, Fraction]]:
        t1, t2 = self.system.modes[action]
        w = self.system.width
        return [((state[0] + t1) % w, (state[1] + t2) % w)]

    def output(self, state) -> str:
        for y in self.system.outputs:
            if self.system.output_region(y).contains(state):
                return y
        raise DomainMismatch(f"state {state} outside the output family")


class GeoSystem(SymbolicSystem[GeoRegion]):
    """
    Switched translation system x+ = (x + t_u) mod W on [0, W)^2.

    Args:
        name: System name
        width: Wrap width W
        modes: Input -> translation vector
        output_family: (output, region) pairs partitioning the square
        initial: Initial region (must be a union of output regions)
    """

    domain = "geo"

    def __init__(
        self,
        name: str,
        width,
        modes: Mapping[str, Tuple],
        output_family: Sequence[Tuple[str, GeoRegion]],
        initial: Optional[GeoRegion] = None,
    ):
        super().__init__(name, list(modes), [y for y, _ in output_family])
        self.width = _q(width)
        self.modes = {u: (_q(t[0]), _q(t[1])) for u, t in modes.items()}
        self._outputs = dict(output_family)
        self._initial = initial if initial is not None else GeoRegion.full(self.width)
        self._check_family()
        self.simulator = GeoSimulator(self)

    def _check_family(self) -> None:
        regions = list(self._outputs.values())
        for i, a in enumerate(regions):
            for b in regions[i + 1 :]:
                if not a.intersect(b).is_empty():
                    raise BadParams("output regions overlap", {"a": a.key(), "b": b.key()})
        covered = GeoRegion(self.width, [box for r in regions for box in r.boxes])
        if covered != GeoRegion.full(self.width):
            raise BadParams("output regions do not cover the square", {"covered": covered.key()})

    def box(self, x1: Tuple, x2: Tuple, d: Optional[Tuple] = None) -> GeoRegion:
        return GeoRegion.box(self.width, x1, x2, d)

    def output_region(self, y: str) -> GeoRegion:
        return self._outputs[y]

    def initial_region(self) -> GeoRegion:
        return self._initial

    def empty(self) -> GeoRegion:
        return GeoRegion(self.width, (), _canonical=True)

    def universe(self) -> GeoRegion:
        return GeoRegion.full(self.width)

    def post(self, region: GeoRegion, u: str) -> GeoRegion:
        self.check_region(region)
        t1, t2 = self.modes[u]
        return region.translate(t1, t2)

    def pre(self, region: GeoRegion, u: str) -> GeoRegion:
        self.check_region(region)
        t1, t2 = self.modes[u]
        return region.translate(-t1, -t2)

    def stable_subset(self, q: GeoRegion, postq: Mapping[str, GeoRegion]) -> GeoRegion:
        self.check_region(q)
        result = q
        for u in self.inputs:
            if result.is_empty():
                break
            result = result.intersect(self.pre(postq[u], u))
        return result
