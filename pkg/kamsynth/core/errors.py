"""
Error hierarchy for kamsynth.
Every error carries a stable error code, a CLI exit code and a details dict for ErrorResponse.
"""

from typing import Any, Dict, Optional


class KamSynthError(Exception):
    """Base class for all domain errors."""

    error_code = "KAMSYNTH_ERROR"
    exit_code = 4

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details or {}


class InputError(KamSynthError):
    """Malformed or inconsistent input."""

    error_code = "INPUT_ERROR"


class NonStrictTransition(InputError):
    error_code = "NON_STRICT_TRANSITION"

    def __init__(self, state: str, action: str):
        super().__init__(
            f"transition function is not strict: F({state}, {action}) is empty",
            {"state": state, "input": action},
        )


class InitialSetViolatesOutputRespect(InputError):
    error_code = "INITIAL_SET_VIOLATES_OUTPUT_RESPECT"

    def __init__(self, output: str, offending: str):
        super().__init__(
            f"output map does not respect the initial set: output {output} is initial "
            f"but state {offending} is not",
            {"output": output, "state": offending},
        )


class UndeclaredIdentifier(InputError):
    error_code = "UNDECLARED_IDENTIFIER"

    def __init__(self, kind: str, identifier: str):
        super().__init__(f"undeclared {kind}: {identifier}", {"kind": kind, "identifier": identifier})


class UnknownOutput(InputError):
    error_code = "UNKNOWN_OUTPUT"

    def __init__(self, output: str):
        super().__init__(f"unknown output: {output}", {"output": output})


class DomainMismatch(InputError):
    error_code = "DOMAIN_MISMATCH"


class MapDomainMismatch(InputError):
    error_code = "MAP_DOMAIN_MISMATCH"


class UnknownModel(InputError):
    error_code = "UNKNOWN_MODEL"

    def __init__(self, name: str):
        super().__init__(f"unknown model: {name}", {"name": name})


class BadParams(InputError):
    error_code = "BAD_PARAMS"


class GridViolatesOutputMap(InputError):
    error_code = "GRID_VIOLATES_OUTPUT_MAP"

    def __init__(self, cell: str, outputs: list):
        super().__init__(
            f"grid cell {cell} meets several output regions: {', '.join(outputs)}",
            {"cell": cell, "outputs": outputs},
        )


class NonDeterministicKnowledge(InputError):
    error_code = "NON_DETERMINISTIC_KNOWLEDGE"

    def __init__(self, state: str, action: str, output: str, successors: list):
        super().__init__(
            f"abstract state {state} has several {action}-successors with output {output}",
            {"state": state, "input": action, "output": output, "successors": successors},
        )


class NotSupported(KamSynthError):
    """The region domain cannot decide an operation exactly."""

    error_code = "NOT_SUPPORTED"


class ResourceBudgetExceeded(KamSynthError):
    error_code = "RESOURCE_BUDGET_EXCEEDED"
    exit_code = 3

    def __init__(self, resource: str, limit: int):
        super().__init__(
            f"resource budget exceeded: {resource} > {limit}",
            {"resource": resource, "limit": limit},
        )


class ObserverDesync(KamSynthError):
    """The observed (input, output) pair has no observer transition."""

    error_code = "OBSERVER_DESYNC"

    def __init__(self, state: str, action: str, output: str):
        super().__init__(
            f"observer has no transition from {state} on ({action}, {output})",
            {"state": state, "input": action, "output": output},
        )
