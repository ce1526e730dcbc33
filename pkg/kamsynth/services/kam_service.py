"""
Knowledge abstraction with minimization (KAM).

Forward exploration builds a tree of knowledge cells; every node also carries a block of the
Cover, its current guess of the observation-equivalence class of the cell. Refine splits
blocks backwards from the explored successors, and Extract projects the tree onto blocks.
"""

import heapq
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple

from ..core.errors import BadParams, NonDeterministicKnowledge
from ..core.logging import get_logger
from ..dependencies import ResourceGuard, get_guard
from ..domains import Region, SymbolicSystem, lift
from .systems_service import FiniteSystem, build_system, escape

logger = get_logger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class TermCond:
    """`exact`, `cover-stable:k` or `budget`."""

    mode: str
    window: int = 0

    @classmethod
    def parse(cls, text: str) -> "TermCond":
        if text in ("exact", "budget"):
            return cls(text)
        if text.startswith("cover-stable:"):
            try:
                window = int(text.split(":", 1)[1])
            except ValueError:
                window = 0
            if window >= 1:
                return cls("cover-stable", window)
        raise BadParams(f"unknown termination condition: {text}")

    def __str__(self) -> str:
        return f"cover-stable:{self.window}" if self.mode == "cover-stable" else self.mode


@dataclass(frozen=True)
class TreeNode:
    id: int
    parent: Optional[int]
    input: Optional[str]
    output: str
    depth: int
    nu: Tuple[str, ...]
    block: str
    cell: str


class ExplorationState:
    """
    Exploration tree, Cover and the caches behind them.

    Cells and blocks share one interning table, so a node's cell equals its block iff the ids match.
    Nodes live in parallel arrays indexed by node id.
    """

    def __init__(
        self,
        system: SymbolicSystem,
        node_guard: Optional[ResourceGuard] = None,
        refine_guard: Optional[ResourceGuard] = None,
    ):
        self.sym = system
        self.node_guard = node_guard or get_guard("kam_nodes")
        self.refine_guard = refine_guard or get_guard("refine_steps")

        self.regions: List[Region] = []
        self.region_output: List[str] = []
        self._region_ids: Dict[str, int] = {}

        self.parent: List[int] = []
        self.action: List[Optional[str]] = []
        self.output: List[str] = []
        self.depth: List[int] = []
        self.block: List[int] = []
        self.cell: List[int] = []
        self.children: List[List[int]] = []
        self.roots: List[int] = []
        self.leaves: List[int] = []

        self.cover: List[int] = []
        self._cover_set: Set[int] = set()
        self._cover_by_output: Dict[str, List[int]] = {y: [] for y in system.outputs}
        self.cover_log: List[Tuple[int, str]] = []
        self.block_nodes: Dict[int, Dict[int, List[int]]] = {}
        # every node of a cell shares the cell's block
        self.bound: Dict[int, int] = {}
        self._bound_by_output: Dict[str, List[int]] = {y: [] for y in system.outputs}
        # EXP_Gamma, kept in step with every rebinding
        self.gamma: Set[Pair] = set()
        self.iteration = 0

        self._expansion: Dict[int, List[Tuple[str, str, int]]] = {}
        self._min_covers: Dict[int, Tuple[int, List[int]]] = {}
        self._subset: Dict[Pair, bool] = {}
        self._unions: Dict[FrozenSet[int], Region] = {}
        self._stable: Dict[Tuple[int, Tuple[FrozenSet[int], ...]], int] = {}

    # -- registries -------------------------------------------------------

    def intern(self, region: Region, y: str) -> int:
        key = region.key()
        rid = self._region_ids.get(key)
        if rid is None:
            rid = len(self.regions)
            self._region_ids[key] = rid
            self.regions.append(region)
            self.region_output.append(y)
        return rid

    def key(self, rid: int) -> str:
        return self.regions[rid].key()

    def subset(self, a: int, b: int) -> bool:
        if a == b:
            return True
        found = self._subset.get((a, b))
        if found is None:
            found = self.regions[a].subset(self.regions[b])
            self._subset[(a, b)] = found
        return found

    def add_cover(self, rid: int) -> bool:
        if rid in self._cover_set:
            return False
        self._cover_set.add(rid)
        self.cover.append(rid)
        self._cover_by_output[self.region_output[rid]].append(rid)
        if self.iteration > 0:
            self.cover_log.append((self.iteration, self.key(rid)))
            logger.debug("cover_added", iteration=self.iteration, block=self.key(rid))
        return True

    def minimal_covers(self, cell: int) -> List[int]:
        """Minimal Cover elements containing the cell, sorted by key."""
        candidates = self._cover_by_output[self.region_output[cell]]
        seen, minimal = self._min_covers.get(cell, (0, []))
        if seen < len(candidates):
            minimal = list(minimal)
            for s in candidates[seen:]:
                if not self.subset(cell, s):
                    continue
                if any(self.subset(m, s) for m in minimal):
                    continue
                minimal = [m for m in minimal if not self.subset(s, m)]
                minimal.append(s)
            minimal.sort(key=self.key)
            self._min_covers[cell] = (len(candidates), minimal)
        return minimal

    def meet(self, region: int) -> int:
        """Intersection of the minimal Cover elements containing a region (not added to the Cover)."""
        covers = self.minimal_covers(region)
        if len(covers) == 1:
            return covers[0]
        found = self.regions[covers[0]]
        for b in covers[1:]:
            found = found.intersect(self.regions[b])
        return self.intern(found, self.region_output[region])

    def _resolve(self, cell: int, pending: List[int]) -> int:
        block = self.meet(cell)
        if self.add_cover(block):
            pending.append(block)
        return block

    def bind(self, cell: int, pending: List[int]) -> int:
        """
        Block of a cell: its unique minimal Cover element.

        Incomparable minimal covers are closed under intersection first; the new element goes
        to `pending` so the cells inside it can be rebound.
        """
        block = self.bound.get(cell)
        if block is None:
            block = self._resolve(cell, pending)
            self.bound[cell] = block
            self._bound_by_output[self.region_output[cell]].append(cell)
        return block

    def _move(self, cell: int, block: int) -> List[int]:
        old = self.bound[cell]
        self.bound[cell] = block
        by_cell = self.block_nodes.get(old, {})
        nodes = by_cell.pop(cell, [])
        if not by_cell:
            self.block_nodes.pop(old, None)
        for nid in nodes:
            self.block[nid] = block
        if nodes:
            self.block_nodes.setdefault(block, {}).setdefault(cell, []).extend(nodes)
        if (old, cell) in self.gamma:
            self.gamma.discard((old, cell))
            self.gamma.add((block, cell))
        return nodes

    def _settle(self, added: List[int]) -> List[int]:
        """Rebind the cells inside new Cover elements to their minimal cover; returns the moved nodes."""
        moved: List[int] = []
        pending = list(added)
        while pending:
            s = pending.pop()
            for cell in self._bound_by_output[self.region_output[s]]:
                if self.bound[cell] == s or not self.subset(cell, s):
                    continue
                block = self._resolve(cell, pending)
                if block != self.bound[cell]:
                    moved.extend(self._move(cell, block))
        return moved

    # -- tree -------------------------------------------------------------

    def add_node(self, parent: int, action: Optional[str], y: str, block: int, cell: int) -> int:
        self.node_guard.tick()
        nid = len(self.parent)
        self.parent.append(parent)
        self.action.append(action)
        self.output.append(y)
        self.depth.append(0 if parent < 0 else self.depth[parent] + 1)
        self.block.append(block)
        self.cell.append(cell)
        self.children.append([])
        if parent >= 0:
            self.children[parent].append(nid)
        self.block_nodes.setdefault(block, {}).setdefault(cell, []).append(nid)
        return nid

    def initialize(self) -> None:
        for y in self.sym.outputs:
            region = self.sym.output_region(y)
            if not region.is_empty():
                self.add_cover(self.intern(region, y))
        added: List[int] = []
        for y, cell in self.sym.initial_cells():
            cid = self.intern(cell, y)
            self.roots.append(self.add_node(-1, None, y, self.bind(cid, added), cid))
        self._settle(added)
        self.leaves = list(self.roots)

    def expansion(self, cell: int) -> List[Tuple[str, str, int]]:
        """(u, y, F(c, u) & H^{-1}(y)) for the non-empty successor cells."""
        found = self._expansion.get(cell)
        if found is None:
            found = []
            for u in self.sym.inputs:
                image = self.sym.post(self.regions[cell], u)
                for y in self.sym.outputs:
                    successor = self.sym.restrict_output(image, y)
                    if not successor.is_empty():
                        found.append((u, y, self.intern(successor, y)))
            self._expansion[cell] = found
        return found

    def pairs(self) -> FrozenSet[Pair]:
        """(block, cell) pairs over all nodes."""
        return frozenset((b, c) for b, cells in self.block_nodes.items() for c in cells)

    def nu(self, node: int) -> Tuple[str, ...]:
        labels: List[str] = []
        while node >= 0:
            labels.append(self.output[node])
            if self.parent[node] >= 0:
                labels.append(self.action[node])  # type: ignore[arg-type]
            node = self.parent[node]
        return tuple(reversed(labels))

    def node(self, nid: int) -> TreeNode:
        parent = self.parent[nid]
        return TreeNode(
            id=nid,
            parent=None if parent < 0 else parent,
            input=self.action[nid],
            output=self.output[nid],
            depth=self.depth[nid],
            nu=self.nu(nid),
            block=self.key(self.block[nid]),
            cell=self.key(self.cell[nid]),
        )

    def __len__(self) -> int:
        return len(self.parent)

    # -- refine -----------------------------------------------------------

    def _union(self, blocks: FrozenSet[int]) -> Region:
        found = self._unions.get(blocks)
        if found is None:
            found = self.sym.empty()
            for b in sorted(blocks):
                found = found.union(self.regions[b])
            self._unions[blocks] = found
        return found

    def _stable_subset(self, node: int) -> int:
        q = self.block[node]
        postq = tuple(
            frozenset(self.block[ch] for ch in self.children[node] if self.action[ch] == u)
            for u in self.sym.inputs
        )
        found = self._stable.get((q, postq))
        if found is None:
            targets = {u: self._union(blocks) for u, blocks in zip(self.sym.inputs, postq)}
            s = self.sym.stable_subset(self.regions[q], targets)
            found = self.intern(s, self.region_output[q])
            self._stable[(q, postq)] = found
        return found

    def refine(self, *nodes: int) -> int:
        """
        Refine nodes and, transitively, the parents of every node that was rebound.

        On return every expanded node reached is stable: each state of its block steps into the
        union of its children's blocks.

        Returns:
            int: Number of Cover additions
        """
        cover_before = len(self.cover)
        heap: List[Tuple[int, int]] = [(-self.depth[n], n) for n in set(nodes)]
        heapq.heapify(heap)
        queued = set(nodes)
        while heap:
            _, nid = heapq.heappop(heap)
            queued.discard(nid)
            self.refine_guard.tick()
            q = self.block[nid]
            if self.cell[nid] == q:
                continue
            s = self._stable_subset(nid)
            if s == q:
                continue
            self.add_cover(s)
            for moved in self._settle([s]):
                p = self.parent[moved]
                if p >= 0 and self.cell[p] != self.block[p] and p not in queued:
                    queued.add(p)
                    heapq.heappush(heap, (-self.depth[p], p))
        return len(self.cover) - cover_before

    def expand_leaves(self) -> int:
        """Expand the maximal-depth leaves, then refine them and whatever their rebinding touches."""
        frontier: List[int] = []
        expanded: List[int] = []
        added: List[int] = []
        for nid in self.leaves:
            for u, y, child in self.expansion(self.cell[nid]):
                frontier.append(self.add_node(nid, u, y, self.bind(child, added), child))
            if self.children[nid]:
                expanded.append(nid)
        worklist = {nid for nid in expanded if self.cell[nid] != self.block[nid]}
        for moved in self._settle(added):
            if self.parent[moved] >= 0:
                worklist.add(self.parent[moved])
        self.refine(*sorted(worklist))
        self.leaves = frontier
        return len(frontier)

    def minimal_cover_violations(self) -> List[str]:
        """Cells in use whose minimal cover is not unique or is not the block they are bound to."""
        cells = sorted(self.bound, key=self.key)
        return [self.key(c) for c in cells if self.minimal_covers(c) != [self.bound[c]]]


@dataclass
class Extraction:
    """One Extract result: abstraction, block regions and the exploration summary it came from."""

    iteration: int
    system: FiniteSystem
    alpha: Dict[str, Region]
    cover_size: int
    pairs: FrozenSet[Tuple[str, str]]


@dataclass
class KAMResult:
    exploration: ExplorationState
    extracted: List[Extraction]
    terminated: bool
    termcond_fired_at: Optional[int]
    termcond: str = "budget"

    @property
    def abstraction(self) -> FiniteSystem:
        return self.extracted[-1].system

    @property
    def cover_log(self) -> List[Tuple[int, str]]:
        return self.exploration.cover_log


def extract(state: ExplorationState, initial_from_cells: bool = False) -> Extraction:
    """
    Project the exploration tree onto blocks.

    Initial states are the blocks bound to root nodes. With `initial_from_cells`, they are the
    blocks equal to some X0 & H^{-1}(y) instead, as in the printed formulation.

    A block bound only to frontier leaves has no explored successors; it steps to the meet of
    the minimal Cover elements around F(q, u) & H^{-1}(y) instead, and so on until closed.
    """
    edges: Dict[Tuple[int, str], Set[int]] = {}
    expanded: Set[int] = set()
    for b, by_cell in state.block_nodes.items():
        for nodes in by_cell.values():
            for nid in nodes:
                for child in state.children[nid]:
                    expanded.add(b)
                    edges.setdefault((b, state.action[child]), set()).add(state.block[child])  # type: ignore[arg-type]

    in_use = set(state.block_nodes)
    pending = sorted(in_use - expanded)
    while pending:
        b = pending.pop()
        for u, _, successor in state.expansion(b):
            target = state.meet(successor)
            edges.setdefault((b, u), set()).add(target)
            if target not in in_use:
                in_use.add(target)
                pending.append(target)

    rank = {y: i for i, y in enumerate(state.sym.outputs)}
    blocks = sorted(in_use, key=lambda b: (rank[state.region_output[b]], state.key(b)))
    names = {b: state.key(b) for b in blocks}
    transitions = {(names[b], u): {names[t] for t in targets} for (b, u), targets in edges.items()}

    if initial_from_cells:
        root_cells = {state.cell[r] for r in state.roots}
        initial = [names[b] for b in blocks if b in root_cells]
    else:
        root_blocks = {state.block[r] for r in state.roots}
        initial = [names[b] for b in blocks if b in root_blocks]

    system = build_system(
        [names[b] for b in blocks],
        initial,
        state.sym.inputs,
        state.sym.outputs,
        {names[b]: state.region_output[b] for b in blocks},
        transitions,
        name=f"kam({state.sym.name})",
        allow_partial=True,
        abstraction=True,
    )
    pairs = frozenset((state.key(b), state.key(c)) for b, c in state.pairs())
    return Extraction(
        iteration=state.iteration,
        system=system,
        alpha={names[b]: state.regions[b] for b in blocks},
        cover_size=len(state.cover),
        pairs=pairs,
    )


def refine(state: ExplorationState, node: int) -> ExplorationState:
    """Refine one expanded node (its cell must be strictly inside its block)."""
    if state.cell[node] == state.block[node]:
        raise BadParams("refine needs a node whose cell is strictly inside its block", {"node": node})
    if not state.children[node]:
        raise BadParams("refine needs an expanded node", {"node": node})
    state.refine(node)
    return state


def kam(
    system,
    budget: int,
    termcond: str = "cover-stable:2",
    initial_from_cells: bool = False,
    node_guard: Optional[ResourceGuard] = None,
) -> KAMResult:
    """
    Run KAM for at most `budget` iterations.

    Args:
        system: FiniteSystem or SymbolicSystem
        budget: Maximum number of iterations
        termcond: `exact` (no new (block, cell) pair), `cover-stable:k` (Cover unchanged for k
            iterations) or `budget` (never fires)
        initial_from_cells: Extract initial states as printed (see extract)
        node_guard: Cap on tree nodes (defaults to the configured kam_nodes limit)

    Returns:
        KAMResult: Exploration, one extraction per iteration and the termination verdict

    Raises:
        BadParams: If budget < 1 or termcond is unknown
        NotSupported: If the domain cannot decide a Refine predicate
        ResourceBudgetExceeded: If the tree or the Refine worklist outgrow their caps
    """
    if budget < 1:
        raise BadParams("budget must be at least 1", {"budget": budget})
    condition = TermCond.parse(termcond)
    state = ExplorationState(lift(system), node_guard=node_guard)
    state.initialize()

    extracted: List[Extraction] = []
    fired: Optional[int] = None
    unchanged = 0
    for iteration in range(1, budget + 1):
        state.iteration = iteration
        state.gamma = set(state.pairs())
        cover_before = len(state.cover)
        state.expand_leaves()
        extracted.append(extract(state, initial_from_cells))

        if len(state.cover) == cover_before:
            unchanged += 1
        else:
            unchanged = 0
        if condition.mode == "exact" and state.pairs() == state.gamma:
            fired = iteration
        elif condition.mode == "cover-stable" and unchanged >= condition.window:
            fired = iteration
        logger.debug(
            "kam_iteration",
            iteration=iteration,
            nodes=len(state),
            cover=len(state.cover),
            extracted=len(extracted[-1].system.states),
        )
        if fired is not None:
            break

    logger.info(
        "kam_finished",
        system=state.sym.name,
        iterations=state.iteration,
        nodes=len(state),
        cover=len(state.cover),
        terminated=fired is not None,
        termcond=str(condition),
    )
    return KAMResult(
        exploration=state,
        extracted=extracted,
        terminated=fired is not None,
        termcond_fired_at=fired,
        termcond=str(condition),
    )


def tree_to_json(state: ExplorationState) -> Dict[str, Any]:
    """Exploration tree as plain JSON data."""
    nodes = []
    nus: List[Tuple[str, ...]] = []
    for nid in range(len(state)):
        parent = state.parent[nid]
        if parent < 0:
            nu: Tuple[str, ...] = (state.output[nid],)
        else:
            nu = nus[parent] + (state.action[nid], state.output[nid])  # type: ignore[operator]
        nus.append(nu)
        nodes.append(
            {
                "id": nid,
                "parent": None if parent < 0 else parent,
                "input": state.action[nid],
                "output": state.output[nid],
                "depth": state.depth[nid],
                "nu": list(nu),
                "block": state.key(state.block[nid]),
                "cell": state.key(state.cell[nid]),
            }
        )
    return {
        "system": state.sym.name,
        "iteration": state.iteration,
        "cover": [state.key(b) for b in state.cover],
        "nodes": nodes,
    }


def tree_to_dot(state: ExplorationState) -> str:
    lines = ["digraph exploration {", "  node [shape=box];"]
    for nid in range(len(state)):
        parts = [f"t{nid} | {state.output[nid]}", f"q={state.key(state.block[nid])}", f"c={state.key(state.cell[nid])}"]
        label = "\\n".join(escape(p) for p in parts)
        lines.append(f'  t{nid} [label="{label}"];')
    for nid in range(len(state)):
        if state.parent[nid] >= 0:
            lines.append(f'  t{state.parent[nid]} -> t{nid} [label="{state.action[nid]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass
class ChainResult:
    """Outcome of the iterative abstraction-refinement loop."""

    found: bool
    iteration: Optional[int]
    abstraction: Optional[FiniteSystem]
    strategy: Any = None
    controller: Any = None
    chain: List[FiniteSystem] = field(default_factory=list)
    result: Optional[KAMResult] = None


def refinement_chain(system, max_iterations: int, spec, node_guard: Optional[ResourceGuard] = None) -> ChainResult:
    """
    Run KAM one iteration at a time and try abstract synthesis after every Extract.

    Returns:
        ChainResult: The first winning iteration with its controller, or found=False with the
        whole chain of abstractions
    """
    from .synth_service import Unrealizable, refine_controller, solve

    if max_iterations < 1:
        raise BadParams("max_iterations must be at least 1", {"max_iterations": max_iterations})
    state = ExplorationState(lift(system), node_guard=node_guard)
    state.initialize()
    chain: List[FiniteSystem] = []
    extracted: List[Extraction] = []
    for iteration in range(1, max_iterations + 1):
        state.iteration = iteration
        state.gamma = set(state.pairs())
        state.expand_leaves()
        extraction = extract(state)
        extracted.append(extraction)
        chain.append(extraction.system)
        verdict = solve(extraction.system, spec)
        logger.info(
            "chain_iteration",
            iteration=iteration,
            states=len(extraction.system.states),
            realizable=not isinstance(verdict, Unrealizable),
        )
        if not isinstance(verdict, Unrealizable):
            try:
                controller = refine_controller(extraction.system, verdict)
            except NonDeterministicKnowledge as e:
                logger.info("chain_observer_rejected", iteration=iteration, **e.details)
                continue
            result = KAMResult(state, extracted, True, iteration, "chain")
            return ChainResult(True, iteration, extraction.system, verdict, controller, chain, result)
    result = KAMResult(state, extracted, False, None, "chain")
    logger.info("chain_exhausted", iterations=max_iterations)
    return ChainResult(False, None, None, chain=chain, result=result)
