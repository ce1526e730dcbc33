"""
Bisimulation minimization by backward partition refinement.

Starts from the output partition and splits blocks on predecessor sets until, for all blocks
B, B' and inputs u, either B lies inside pre_u(B') or B misses it.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from ..core.errors import BadParams
from ..core.logging import get_logger
from ..dependencies import ResourceGuard, get_guard
from ..domains import FiniteRegion, Region, SymbolicSystem, lift
from .systems_service import FiniteSystem, build_system

logger = get_logger(__name__)


@dataclass
class BisimResult:
    quotient: FiniteSystem
    blocks: Dict[str, Region]
    terminated: bool
    iterations: int


def _size(region: Region) -> int:
    if isinstance(region, FiniteRegion):
        return len(region)
    return len(region.key())


def _splitter_order(blocks: Sequence[Region]) -> List[Region]:
    """Smallest block first, ties by key."""
    return sorted(blocks, key=lambda b: (_size(b), b.key()))


def split_round(sym: SymbolicSystem, blocks: List[Region]) -> Tuple[List[Region], bool]:
    """
    Split every block against every splitter of the current partition once.

    Returns:
        Tuple[List[Region], bool]: The refined partition and whether anything was split
    """
    current = list(blocks)
    changed = False
    for splitter in _splitter_order(blocks):
        for u in sym.inputs:
            predecessors = sym.pre(splitter, u)
            if predecessors.is_empty():
                continue
            refined: List[Region] = []
            for block in current:
                inside, outside = block._split(predecessors)
                if inside.is_empty() or outside.is_empty():
                    refined.append(block)
                else:
                    refined.extend((inside, outside))
                    changed = True
            current = refined
    return current, changed


def is_stable(sym: SymbolicSystem, blocks: Sequence[Region]) -> bool:
    """Predecessor-split stability of a partition."""
    for splitter in blocks:
        for u in sym.inputs:
            predecessors = sym.pre(splitter, u)
            for block in blocks:
                if block.subset(predecessors):
                    continue
                if not block.intersect(predecessors).is_empty():
                    return False
    return True


def output_partition(sym: SymbolicSystem) -> List[Region]:
    blocks = []
    for y in sym.outputs:
        region = sym.output_region(y)
        if not region.is_empty():
            blocks.append(region)
    return blocks


def quotient_system(sym: SymbolicSystem, blocks: Sequence[Region], name: str) -> Tuple[FiniteSystem, Dict[str, Region]]:
    """
    Quotient by a partition.

    x' in F(x, u) iff post(x, u) meets x'; initial blocks are those meeting X0.
    """
    rank = {y: i for i, y in enumerate(sym.outputs)}
    labelled = []
    for block in blocks:
        y = sym.output_of(block)
        if y is None:
            raise BadParams("block is not output-uniform", {"block": block.key()})
        labelled.append((rank[y], block.key(), y, block))
    labelled.sort(key=lambda item: (item[0], item[1]))

    x0 = sym.initial_region()
    states = [key for _, key, _, _ in labelled]
    outputs = {key: y for _, key, y, _ in labelled}
    initial = [key for _, key, _, block in labelled if not block.intersect(x0).is_empty()]
    transitions: Dict[Tuple[str, str], Set[str]] = {}
    for _, key, _, block in labelled:
        for u in sym.inputs:
            image = sym.post(block, u)
            transitions[(key, u)] = {
                other_key
                for _, other_key, _, other in labelled
                if not image.intersect(other).is_empty()
            }
    quotient = build_system(
        states,
        initial,
        sym.inputs,
        sym.outputs,
        outputs,
        transitions,
        name=name,
        allow_partial=True,
        abstraction=True,
    )
    return quotient, {key: block for _, key, _, block in labelled}


def bisimulation_quotient(system, budget: int, guard: Optional[ResourceGuard] = None) -> BisimResult:
    """
    Coarsest stable output-respecting partition, computed by at most `budget` split rounds.

    Args:
        system: FiniteSystem or SymbolicSystem
        budget: Maximum number of split rounds
        guard: Cap on the number of blocks (defaults to the configured bisim_blocks limit)

    Returns:
        BisimResult: Quotient system, blocks, termination flag and round count

    Raises:
        BadParams: If budget < 1
        NotSupported: If the domain cannot represent a split exactly
        ResourceBudgetExceeded: If the partition grows beyond the block limit
    """
    if budget < 1:
        raise BadParams("budget must be at least 1", {"budget": budget})
    sym = lift(system)
    guard = guard or get_guard("bisim_blocks")

    blocks = output_partition(sym)
    iterations = 0
    terminated = False
    while iterations < budget:
        iterations += 1
        blocks, changed = split_round(sym, blocks)
        guard.check(len(blocks))
        logger.debug("bisim_round", iteration=iterations, blocks=len(blocks), changed=changed)
        if not changed:
            terminated = True
            break

    quotient, named = quotient_system(sym, blocks, name=f"bisim({sym.name})")
    logger.info(
        "bisim_finished",
        system=sym.name,
        blocks=len(named),
        iterations=iterations,
        terminated=terminated,
    )
    return BisimResult(quotient=quotient, blocks=named, terminated=terminated, iterations=iterations)
