"""
Abstract controller synthesis on finite systems and its refinement to output feedback.

Games are played on a FiniteSystem: the controller picks an input, the environment any
successor. An input u is only available at x when F(x, u) is non-empty.
"""

import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from ..api_models import StrategyModel, TraceStep
from ..core.errors import BadParams, NonDeterministicKnowledge, ObserverDesync
from ..core.logging import get_logger
from ..domains import SymbolicSystem
from ..domains.finite import FiniteSimulator
from .systems_service import FiniteSystem, Specification, to_description, validate

logger = get_logger(__name__)


@dataclass(frozen=True)
class Unrealizable:
    """No winning strategy from `witness`, an initial abstract state."""

    witness: Optional[str]
    reason: str = ""


@dataclass
class AbstractStrategy:
    """
    Finite-memory state-feedback strategy.

    Memory starts at 0 and is updated on every observed abstract state, the first one included.
    """

    memory_size: int
    moves: Dict[Tuple[int, str], str]
    update: Dict[Tuple[int, str], int]
    winning: Dict[int, FrozenSet[str]]
    specification: Optional[Specification] = None

    def next_memory(self, memory: int, state: str) -> int:
        return self.update.get((memory, state), memory)

    def move(self, memory: int, state: str) -> Optional[str]:
        return self.moves.get((memory, state))


Verdict = Union[AbstractStrategy, Unrealizable]


def _enabled(system: FiniteSystem, x: str) -> List[str]:
    return [u for u in system.inputs if system.post(x, u)]


def controllable_predecessor(system: FiniteSystem, target: Iterable[str]) -> FrozenSet[str]:
    """States with an enabled input whose successors all lie in target."""
    target = frozenset(target)
    return frozenset(
        x for x in system.states if any(system.post(x, u) <= target for u in _enabled(system, x))
    )


def attractor(
    system: FiniteSystem, goal: Iterable[str], inside: Optional[Iterable[str]] = None
) -> Dict[str, int]:
    """
    Controlled attractor of goal within `inside`, as a rank map (goal states have rank 0).
    """
    goal = frozenset(goal)
    allowed = frozenset(system.states if inside is None else inside)
    rank: Dict[str, int] = {x: 0 for x in system.states if x in goal and x in allowed}
    level = 0
    while True:
        level += 1
        reached = frozenset(rank)
        layer = [
            x
            for x in system.states
            if x in allowed
            and x not in rank
            and any(system.post(x, u) <= reached for u in _enabled(system, x))
        ]
        if not layer:
            return rank
        for x in layer:
            rank[x] = level


def _relevant_initial(system: FiniteSystem, spec: Optional[Specification]) -> List[str]:
    wanted = spec.initial_outputs if spec is not None else None
    return [
        x
        for x in system.states
        if x in system.initial and (wanted is None or system.output(x) in wanted)
    ]


def _verdict(system: FiniteSystem, strategy: AbstractStrategy, spec: Optional[Specification]) -> Verdict:
    start = strategy.winning.get(0, frozenset())
    for x in _relevant_initial(system, spec):
        if x not in strategy.winning.get(strategy.next_memory(0, x), start):
            logger.info("synthesis_result", system=system.name, realizable=False, witness=x)
            return Unrealizable(witness=x, reason=f"initial state {x} is not winning")
    logger.info(
        "synthesis_result",
        system=system.name,
        realizable=True,
        winning=len(strategy.winning.get(0, ())),
    )
    return strategy


def solve_safety(system: FiniteSystem, forbidden: Iterable[str], spec: Optional[Specification] = None) -> Verdict:
    """
    Greatest fixpoint of the controllable predecessor inside the safe states.

    The strategy is memoryless and picks the least input (declared order) that stays winning.
    """
    forbidden = frozenset(forbidden)
    winning = frozenset(x for x in system.states if system.output(x) not in forbidden)
    while True:
        shrunk = winning & controllable_predecessor(system, winning)
        if shrunk == winning:
            break
        winning = shrunk
    moves: Dict[Tuple[int, str], str] = {}
    for x in system.states:
        if x in winning:
            moves[(0, x)] = next(u for u in _enabled(system, x) if system.post(x, u) <= winning)
    strategy = AbstractStrategy(1, moves, {}, {0: winning}, spec)
    return _verdict(system, strategy, spec)


def _rank_moves(system: FiniteSystem, rank: Dict[str, int], stay: FrozenSet[str]) -> Dict[str, str]:
    """Rank-decreasing moves; rank-0 states move anywhere inside `stay`."""
    moves: Dict[str, str] = {}
    for x, r in rank.items():
        for u in _enabled(system, x):
            successors = system.post(x, u)
            if r == 0:
                if successors <= stay:
                    moves[x] = u
                    break
            elif all(x2 in rank and rank[x2] < r for x2 in successors):
                moves[x] = u
                break
    return moves


def solve_reachability(system: FiniteSystem, target: Iterable[str], spec: Optional[Specification] = None) -> Verdict:
    """Attractor of the target-output states; moves strictly decrease the rank."""
    target = frozenset(target)
    goal = [x for x in system.states if system.output(x) in target]
    rank = attractor(system, goal)
    moves = {}
    for x, r in rank.items():
        if r == 0:
            enabled = _enabled(system, x)
            if enabled:
                moves[(0, x)] = enabled[0]
            continue
        for u in _enabled(system, x):
            if all(x2 in rank and rank[x2] < r for x2 in system.post(x, u)):
                moves[(0, x)] = u
                break
    strategy = AbstractStrategy(1, moves, {}, {0: frozenset(rank)}, spec)
    return _verdict(system, strategy, spec)


def solve_gbuchi(
    system: FiniteSystem, families: Sequence[Iterable[str]], spec: Optional[Specification] = None
) -> Verdict:
    """
    Generalized Buchi game: every output family is visited infinitely often.

    Winning region: nu Z. intersection over families i of mu Y. (F_i & CPre(Z)) | CPre(Y), inside Z.
    Memory i means "family i is chased"; entering a state of family i moves on to family i+1.
    """
    if not families:
        raise BadParams("gbuchi needs at least one family")
    family_states = [
        frozenset(x for x in system.states if system.output(x) in frozenset(f)) for f in families
    ]
    k = len(family_states)
    zone = frozenset(system.states)
    ranks: List[Dict[str, int]] = []
    while True:
        cpre_zone = controllable_predecessor(system, zone)
        ranks = [attractor(system, fam & zone & cpre_zone, zone) for fam in family_states]
        shrunk = zone.intersection(*[frozenset(r) for r in ranks])
        if shrunk == zone:
            break
        zone = shrunk

    moves: Dict[Tuple[int, str], str] = {}
    update: Dict[Tuple[int, str], int] = {}
    for m in range(k):
        chosen = _rank_moves(system, ranks[m], zone)
        for x in system.states:
            if x in family_states[m]:
                update[(m, x)] = (m + 1) % k
            if x in zone:
                moves[(m, x)] = chosen[x]
    winning = {m: zone for m in range(k)}
    strategy = AbstractStrategy(k, moves, update, winning, spec)
    return _verdict(system, strategy, spec)


def solve(system: FiniteSystem, spec: Specification) -> Verdict:
    """Dispatch on the specification kind."""
    spec.check(system.outputs)
    if spec.kind == "safety":
        return solve_safety(system, spec.forbidden, spec)
    if spec.kind == "reachability":
        return solve_reachability(system, spec.target, spec)
    if spec.kind == "gbuchi":
        return solve_gbuchi(system, spec.families, spec)
    raise BadParams(f"unknown specification kind: {spec.kind}")


class OutputFeedbackController:
    """
    Strategy driven by an observer that tracks the abstract state from (input, output) pairs.

    Raises:
        NonDeterministicKnowledge: If an abstract state has two u-successors with one output
    """

    def __init__(self, abstraction: FiniteSystem, strategy: AbstractStrategy):
        self.abstraction = abstraction
        self.strategy = strategy
        self._initial: Dict[str, str] = {}
        for x in abstraction.states:
            if x not in abstraction.initial:
                continue
            y = abstraction.output(x)
            if y in self._initial:
                raise NonDeterministicKnowledge("<initial>", "", y, [self._initial[y], x])
            self._initial[y] = x
        self._step: Dict[Tuple[str, str, str], str] = {}
        for x in abstraction.states:
            for u in abstraction.inputs:
                for x2 in abstraction.states:
                    if x2 not in abstraction.post(x, u):
                        continue
                    token = (x, u, abstraction.output(x2))
                    if token in self._step:
                        raise NonDeterministicKnowledge(x, u, token[2], [self._step[token], x2])
                    self._step[token] = x2
        self.state: Optional[str] = None
        self.memory = 0

    def reset(self, output: str) -> str:
        """Start from the first observed output; returns the observer state."""
        if output not in self._initial:
            raise ObserverDesync("<initial>", "", output)
        self.state = self._initial[output]
        self.memory = self.strategy.next_memory(0, self.state)
        return self.state

    def act(self) -> str:
        move = self.strategy.move(self.memory, self.state)  # type: ignore[arg-type]
        if move is None:
            raise ObserverDesync(str(self.state), "", self.abstraction.output(self.state))  # type: ignore[arg-type]
        return move

    def observe(self, action: str, output: str) -> str:
        nxt = self._step.get((self.state, action, output))  # type: ignore[arg-type]
        if nxt is None:
            raise ObserverDesync(str(self.state), action, output)
        self.state = nxt
        self.memory = self.strategy.next_memory(self.memory, nxt)
        return nxt

    def to_model(self) -> StrategyModel:
        spec = self.strategy.specification or Specification(kind="safety")
        return StrategyModel(
            abstraction=to_description(self.abstraction),
            memory_size=self.strategy.memory_size,
            moves={f"{m}|{x}": u for (m, x), u in sorted(self.strategy.moves.items())},
            memory_update={f"{m}|{x}": n for (m, x), n in sorted(self.strategy.update.items())},
            winning=[
                sorted(self.strategy.winning.get(m, frozenset()))
                for m in range(self.strategy.memory_size)
            ],
            specification=spec.to_model(),
        )

    @classmethod
    def from_model(cls, model: StrategyModel) -> "OutputFeedbackController":
        abstraction = validate(model.abstraction, allow_partial=True)

        def split(key: str) -> Tuple[int, str]:
            memory, _, state = key.partition("|")
            return int(memory), state

        strategy = AbstractStrategy(
            memory_size=model.memory_size,
            moves={split(k): u for k, u in model.moves.items()},
            update={split(k): n for k, n in model.memory_update.items()},
            winning={m: frozenset(states) for m, states in enumerate(model.winning)},
            specification=Specification.from_model(model.specification),
        )
        return cls(abstraction, strategy)


def refine_controller(abstraction: FiniteSystem, strategy: AbstractStrategy) -> OutputFeedbackController:
    """Compose the abstract strategy with the observer of the abstraction."""
    return OutputFeedbackController(abstraction, strategy)


@dataclass
class SimulationResult:
    trace: List[TraceStep]
    verdict: str
    violations: int = 0
    gaps: Dict[int, int] = field(default_factory=dict)
    desync: Optional[Dict[str, str]] = None


def _monitor_gaps(outputs: Sequence[str], families: Sequence[FrozenSet[str]]) -> Dict[int, int]:
    """Longest stretch without a visit per family, counting the lead-in and the tail."""
    gaps: Dict[int, int] = {}
    horizon = len(outputs) - 1
    for i, family in enumerate(families):
        visits = [k for k, y in enumerate(outputs) if y in family]
        if not visits:
            gaps[i] = horizon + 1
            continue
        stretches = [visits[0]] + [b - a for a, b in zip(visits, visits[1:])] + [horizon - visits[-1]]
        gaps[i] = max(stretches)
    return gaps


def simulate_closed_loop(
    system,
    controller: OutputFeedbackController,
    steps: int,
    seed: int = 0,
    initial_state=None,
) -> SimulationResult:
    """
    Run the controller against the concrete system for `steps` steps.

    Environment choices come from random.Random(seed). An observer desync ends the run
    and is reported in the verdict.
    """
    if steps < 0:
        raise BadParams("steps must be non-negative", {"steps": steps})
    if isinstance(system, FiniteSystem):
        simulator = FiniteSimulator(system)
    elif isinstance(system, SymbolicSystem) and system.simulator is not None:
        simulator = system.simulator
    else:
        raise BadParams("system has no concrete simulator")
    rng = random.Random(seed)
    x = initial_state if initial_state is not None else simulator.sample_initial(rng)
    y = simulator.output(x)
    trace: List[TraceStep] = []
    outputs = [y]
    desync: Optional[Dict[str, str]] = None
    try:
        abstract = controller.reset(y)
        for k in range(steps):
            u = controller.act()
            trace.append(TraceStep(k=k, y=y, u=u, abstract_state=abstract))
            x = simulator.step(x, u, rng)
            y = simulator.output(x)
            outputs.append(y)
            abstract = controller.observe(u, y)
        trace.append(TraceStep(k=len(outputs) - 1, y=y, abstract_state=abstract))
    except ObserverDesync as e:
        logger.warning("observer_desync", **e.details)
        desync = {key: str(value) for key, value in e.details.items()}
        trace.append(TraceStep(k=len(outputs) - 1, y=y))

    spec = controller.strategy.specification
    violations = 0
    gaps: Dict[int, int] = {}
    if spec is not None and spec.kind == "safety":
        violations = sum(1 for out in outputs if out in spec.forbidden)
    elif spec is not None and spec.kind == "gbuchi":
        gaps = _monitor_gaps(outputs, spec.families)
    elif spec is not None and spec.kind == "reachability":
        violations = 0 if any(out in spec.target for out in outputs) else 1

    if desync is not None:
        verdict = "desync"
    elif violations:
        verdict = "violation"
    else:
        verdict = "ok"
    return SimulationResult(trace=trace, verdict=verdict, violations=violations, gaps=gaps, desync=desync)


def closed_loop_outputs(
    system: FiniteSystem, controller: OutputFeedbackController, depth: int
) -> Set[Tuple[str, ...]]:
    """
    Every output sequence the closed loop can produce within `depth` steps (exhaustive).

    Raises:
        ObserverDesync: If some run leaves the observer
    """
    sequences: Set[Tuple[str, ...]] = set()
    frontier: Set[Tuple[Tuple[str, ...], str, str, int]] = set()
    for x0 in sorted(system.initial, key=system.states.index):
        y0 = system.output(x0)
        state = controller._initial.get(y0)
        if state is None:
            raise ObserverDesync("<initial>", "", y0)
        frontier.add(((y0,), x0, state, controller.strategy.next_memory(0, state)))
    for _ in range(depth):
        next_frontier: Set[Tuple[Tuple[str, ...], str, str, int]] = set()
        for outputs, x, state, memory in frontier:
            sequences.add(outputs)
            u = controller.strategy.move(memory, state)
            if u is None:
                raise ObserverDesync(state, "", system.output(x))
            for x2 in sorted(system.post(x, u), key=system.states.index):
                y2 = system.output(x2)
                nxt = controller._step.get((state, u, y2))
                if nxt is None:
                    raise ObserverDesync(state, u, y2)
                next_frontier.add(
                    (outputs + (y2,), x2, nxt, controller.strategy.next_memory(memory, nxt))
                )
        frontier = next_frontier
    sequences.update(outputs for outputs, _, _, _ in frontier)
    return sequences
