"""
Reusable dependencies shared by the services and the CLI.
Resource guards enforcing the configured caps, and resolvers turning CLI arguments into systems.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError as PydanticValidationError

from .api_models import AbstractionMapModel, SpecificationModel, StrategyModel, SystemDescription
from .core.config import get_settings
from .core.errors import BadParams, ResourceBudgetExceeded
from .core.logging import get_logger

logger = get_logger(__name__)


class ResourceGuard:
    """
    Counter that raises ResourceBudgetExceeded once `limit` ticks are exceeded.

    Args:
        resource: Name reported in the error
        limit: Maximum number of ticks allowed
    """

    def __init__(self, resource: str, limit: int):
        self.resource = resource
        self.limit = limit
        self.count = 0

    def tick(self, amount: int = 1) -> None:
        self.count += amount
        if self.count > self.limit:
            logger.warning("resource_budget_exceeded", resource=self.resource, limit=self.limit)
            raise ResourceBudgetExceeded(self.resource, self.limit)

    def check(self, size: int) -> None:
        """Raise if an absolute size exceeds the limit."""
        if size > self.limit:
            logger.warning("resource_budget_exceeded", resource=self.resource, limit=self.limit)
            raise ResourceBudgetExceeded(self.resource, self.limit)


def get_guard(resource: str) -> ResourceGuard:
    """Guard for one of the configured resources (kam_nodes, refine_steps, bisim_blocks, ...)."""
    settings = get_settings()
    limits = {
        "prefix_nodes": settings.prefix_node_limit,
        "kam_nodes": settings.kam_node_limit,
        "refine_steps": settings.refine_step_limit,
        "bisim_blocks": settings.bisim_block_limit,
        "ka_cells": settings.ka_cell_limit,
    }
    if resource not in limits:
        raise BadParams(f"unknown resource: {resource}")
    return ResourceGuard(resource, limits[resource])


def _load_json(path: Union[str, Path]) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as e:
        raise BadParams(f"cannot read {path}: {e}", {"path": str(path)})
    except json.JSONDecodeError as e:
        raise BadParams(f"invalid JSON in {path}: {e}", {"path": str(path)})


def _parse(model_cls, data: Any, path: Union[str, Path]):
    try:
        return model_cls.model_validate(data)
    except PydanticValidationError as e:
        errors = e.errors(include_url=False, include_context=False, include_input=False)
        raise BadParams(f"invalid {model_cls.__name__} in {path}", {"errors": errors})


def load_system_description(path: Union[str, Path]) -> SystemDescription:
    return _parse(SystemDescription, _load_json(path), path)


def load_specification(path: Union[str, Path]) -> SpecificationModel:
    return _parse(SpecificationModel, _load_json(path), path)


def load_abstraction_map(path: Union[str, Path]) -> AbstractionMapModel:
    return _parse(AbstractionMapModel, _load_json(path), path)


def load_strategy(path: Union[str, Path]) -> StrategyModel:
    return _parse(StrategyModel, _load_json(path), path)


def resolve_system(
    model: Optional[str] = None,
    system_path: Optional[str] = None,
    params: Optional[Dict[str, Any]] = None,
    allow_partial: bool = False,
):
    """
    Resolve a CLI system argument.

    Args:
        model: Built-in model name (see ModelsService.catalog)
        system_path: Path to a JSON system description
        params: Constructor parameters for the built-in model
        allow_partial: Accept partial transition functions from JSON

    Returns:
        FiniteSystem or SymbolicSystem

    Raises:
        BadParams: If neither or both sources are given
    """
    if (model is None) == (system_path is None):
        raise BadParams("give exactly one of --model or --system")
    if model is not None:
        from .services.models_service import get_models_service

        return get_models_service().build(model, params or {})
    description = load_system_description(system_path)
    return description.to_finite_system(allow_partial=allow_partial)
