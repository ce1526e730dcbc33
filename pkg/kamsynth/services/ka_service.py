"""
Knowledge-based abstraction: forward subset construction over observed histories.

Abstract states are the knowledge cells F(c, u) & H^{-1}(y), named by their region key.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

from ..core.errors import BadParams
from ..core.logging import get_logger
from ..dependencies import ResourceGuard, get_guard
from ..domains import Region, lift
from .systems_service import FiniteSystem, build_system

logger = get_logger(__name__)


@dataclass
class KAResult:
    """Knowledge abstraction with the region behind every abstract state."""

    abstraction: FiniteSystem
    cells: Dict[str, Region]
    terminated: bool
    iterations: int


def knowledge_abstraction(system, budget: int, guard: Optional[ResourceGuard] = None) -> KAResult:
    """
    Build the knowledge abstraction of a finite or symbolic system.

    Each iteration expands the cells found in the previous one. The loop stops when an
    iteration finds no new cell, or after `budget` iterations. A budgeted result keeps
    only transitions between constructed cells, so its F may be partial.

    Args:
        system: FiniteSystem or SymbolicSystem
        budget: Maximum number of iterations
        guard: Cap on the number of cells (defaults to the configured ka_cells limit)

    Returns:
        KAResult: Abstraction, cells, termination flag and iteration count

    Raises:
        BadParams: If budget < 1
        ResourceBudgetExceeded: If too many cells are constructed
    """
    if budget < 1:
        raise BadParams("budget must be at least 1", {"budget": budget})
    sym = lift(system)
    guard = guard or get_guard("ka_cells")

    cells: Dict[str, Region] = {}
    outputs: Dict[str, str] = {}
    transitions: Dict[Tuple[str, str], Set[str]] = {}

    def add(y: str, cell: Region) -> Tuple[str, bool]:
        name = cell.key()
        if name in cells:
            return name, False
        guard.tick()
        cells[name] = cell
        outputs[name] = y
        return name, True

    initial: List[str] = []
    for y, cell in sym.initial_cells():
        name, _ = add(y, cell)
        initial.append(name)

    def expand(name: str, create: bool) -> List[str]:
        found: List[str] = []
        for u in sym.inputs:
            image = sym.post(cells[name], u)
            targets = transitions.setdefault((name, u), set())
            for y in sym.outputs:
                successor = sym.restrict_output(image, y)
                if successor.is_empty():
                    continue
                key = successor.key()
                if key not in cells:
                    if not create:
                        continue
                    key, _ = add(y, successor)
                    found.append(key)
                targets.add(key)
        return found

    frontier = list(initial)
    iterations = 0
    terminated = False
    while iterations < budget:
        iterations += 1
        discovered: List[str] = []
        for name in frontier:
            discovered.extend(expand(name, create=True))
        logger.debug("ka_iteration", iteration=iterations, cells=len(cells), new=len(discovered))
        if not discovered:
            terminated = True
            break
        frontier = discovered

    if not terminated:
        # Cells found in the last iteration still need their edges into known cells.
        for name in frontier:
            expand(name, create=False)

    states = list(cells)
    abstraction = build_system(
        states,
        initial,
        sym.inputs,
        sym.outputs,
        outputs,
        {key: targets for key, targets in transitions.items()},
        name=f"ka({sym.name})",
        allow_partial=not terminated,
        abstraction=True,
    )
    logger.info(
        "ka_finished",
        system=sym.name,
        cells=len(states),
        iterations=iterations,
        terminated=terminated,
    )
    return KAResult(abstraction=abstraction, cells=dict(cells), terminated=terminated, iterations=iterations)
