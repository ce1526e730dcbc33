"""
Shared fixtures: seeded random finite systems and temporary settings.
"""

import random
from typing import Callable, List, Optional, Sequence

import pytest

from kamsynth.core.config import reload_settings
from kamsynth.services.systems_service import FiniteSystem, build_system

INPUTS = ("u0", "u1")
OUTPUTS = ("A", "B", "C")


def random_system(
    rng: random.Random,
    size: Optional[int] = None,
    inputs: Sequence[str] = INPUTS,
    outputs: Sequence[str] = OUTPUTS,
    density: float = 0.3,
    partial: bool = False,
    name: str = "random",
) -> FiniteSystem:
    """Random system with H respecting X0; strict unless `partial`."""
    n = size or rng.randint(2, 8)
    states = [f"x{i}" for i in range(n)]
    output_map = {x: rng.choice(list(outputs)) for x in states}
    present = [y for y in outputs if y in output_map.values()]
    chosen = set(rng.sample(present, rng.randint(1, len(present))))
    initial = [x for x in states if output_map[x] in chosen]
    transitions = {}
    for x in states:
        for u in inputs:
            targets = [x2 for x2 in states if rng.random() < density]
            if not targets and not (partial and rng.random() < 0.5):
                targets = [rng.choice(states)]
            transitions[(x, u)] = targets
    return build_system(
        states, initial, list(inputs), list(outputs), output_map, transitions, name=name, allow_partial=partial
    )


def random_systems(count: int, seed: int, **kwargs) -> List[FiniteSystem]:
    rng = random.Random(seed)
    return [random_system(rng, name=f"random{i}", **kwargs) for i in range(count)]


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240601)


@pytest.fixture
def make_system() -> Callable[..., FiniteSystem]:
    return random_system


@pytest.fixture
def make_systems() -> Callable[..., List[FiniteSystem]]:
    return random_systems


@pytest.fixture
def settings_env(monkeypatch):
    """Set KAMSYNTH_* variables for one test and reload the cached settings."""

    def apply(**values):
        for key, value in values.items():
            monkeypatch.setenv(f"KAMSYNTH_{key.upper()}", str(value))
        return reload_settings()

    yield apply
    monkeypatch.undo()
    reload_settings()
