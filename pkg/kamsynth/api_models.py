"""
Pydantic models for the JSON files and reports kamsynth reads and writes.
Defines the data contracts of the CLI: systems, specifications, abstraction maps,
controllers, simulation traces, run reports and errors.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class TransitionEntry(BaseModel):
    """One row of the transition relation: F(from, input) = to."""

    source: str = Field(..., alias="from", description="Source state")
    input: str = Field(..., description="Input label")
    to: List[str] = Field(default_factory=list, description="Successor states")

    model_config = {"populate_by_name": True}


class SystemDescription(BaseModel):
    """
    JSON system format.
    Identifiers are opaque strings; list order is the declared total order.
    """

    name: str = Field("system", description="Human-readable name")
    states: List[str] = Field(..., min_length=1, description="State identifiers")
    initial: List[str] = Field(..., description="Initial states X0")
    inputs: List[str] = Field(..., min_length=1, description="Input alphabet U")
    outputs: List[str] = Field(..., min_length=1, description="Output alphabet Y")
    output_map: Dict[str, str] = Field(..., description="H: state -> output")
    transitions: List[TransitionEntry] = Field(default_factory=list, description="F as rows")
    abstraction: bool = Field(
        False, description="Computed abstraction; H need not respect the initial states"
    )

    @model_validator(mode="after")
    def check_unique_identifiers(self) -> "SystemDescription":
        """Reject duplicate declarations."""
        for label, values in (("state", self.states), ("input", self.inputs), ("output", self.outputs)):
            if len(set(values)) != len(values):
                raise ValueError(f"duplicate {label} identifiers")
        return self

    def to_finite_system(self, allow_partial: bool = False):
        """Validate into a FiniteSystem (see systems_service.validate)."""
        from .services.systems_service import validate

        return validate(self, allow_partial=allow_partial)


class SpecificationModel(BaseModel):
    """
    Specification JSON.
    safety: never see a forbidden output; reachability: eventually see a target output;
    gbuchi: see every family infinitely often.
    """

    kind: Literal["safety", "reachability", "gbuchi"] = Field(..., description="Objective kind")
    forbidden: List[str] = Field(default_factory=list, description="Forbidden outputs (safety)")
    target: List[str] = Field(default_factory=list, description="Target outputs (reachability)")
    families: List[List[str]] = Field(default_factory=list, description="Output families (gbuchi)")
    initial_outputs: Optional[List[str]] = Field(
        None, description="Only initial states with these outputs must be winning"
    )

    @model_validator(mode="after")
    def check_kind_fields(self) -> "SpecificationModel":
        if self.kind == "gbuchi" and not self.families:
            raise ValueError("gbuchi specification needs at least one family")
        if self.kind == "reachability" and not self.target:
            raise ValueError("reachability specification needs a target")
        return self


class AbstractionMapModel(BaseModel):
    """Map JSON: alpha relates concrete states to abstract states."""

    alpha: Dict[str, List[str]] = Field(..., description="concrete state -> abstract states")


class StrategyModel(BaseModel):
    """Serialized output-feedback controller: abstraction, observer start and strategy tables."""

    abstraction: SystemDescription
    memory_size: int = Field(1, ge=1)
    moves: Dict[str, str] = Field(
        default_factory=dict, description='"memory|state" -> input for winning pairs'
    )
    memory_update: Dict[str, int] = Field(
        default_factory=dict, description='"memory|state" -> next memory'
    )
    winning: List[List[str]] = Field(default_factory=list, description="Winning states per memory")
    specification: SpecificationModel


class TraceStep(BaseModel):
    """One line of a simulation trace file."""

    k: int = Field(..., ge=0)
    y: str
    u: Optional[str] = None
    abstract_state: Optional[str] = None


class RunReport(BaseModel):
    """Machine-readable report written by every CLI run."""

    success: bool = True
    command: str
    algorithm: Optional[str] = None
    parameters: Dict[str, Any] = Field(default_factory=dict)
    iterations: Optional[int] = None
    state_counts: Dict[str, int] = Field(default_factory=dict)
    terminated: Optional[bool] = None
    verdict: Optional[str] = None
    timing_ms: float = 0.0
    artifacts: Dict[str, str] = Field(default_factory=dict)
    extra: Dict[str, Any] = Field(default_factory=dict)


class ErrorResponse(BaseModel):
    """
    Standard error response model.
    """

    success: bool = Field(False, description="Always false for error responses")
    error_message: str = Field(..., description="The error message")
    error_code: Optional[str] = Field(None, description="Optional error code")
    details: Optional[dict] = Field(None, description="Additional error details")


class PipelineConfig(BaseModel):
    """Validated CLI configuration for one run."""

    command: Literal["model", "abstract", "synthesize", "simulate", "check-relation", "chain"]
    algorithm: Optional[Literal["ka", "bisim", "kam", "grid", "lcomplete"]] = None
    model: Optional[str] = None
    system_path: Optional[str] = None
    model_params: Dict[str, Any] = Field(default_factory=dict)
    budget: int = Field(10, ge=1)
    termcond: str = "cover-stable:2"
    eta: Optional[str] = None
    history_length: Optional[int] = Field(None, ge=1)
    spec_path: Optional[str] = None
    seed: int = 0
    steps: int = Field(0, ge=0)
    report_path: Optional[str] = None
    out_path: Optional[str] = None
    dot_path: Optional[str] = None
    tree_path: Optional[str] = None
    strategy_path: Optional[str] = None
    trace_path: Optional[str] = None
    controller_path: Optional[str] = None
    concrete_path: Optional[str] = None
    abstract_path: Optional[str] = None
    map_path: Optional[str] = None
    mode: Literal["sound", "realization", "frr"] = "sound"
    max_iterations: int = Field(10, ge=1)
    no_timing: bool = False

    @field_validator("termcond")
    @classmethod
    def check_termcond(cls, v: str) -> str:
        from .core.config import _TERMCOND_PATTERN

        if not _TERMCOND_PATTERN.match(v):
            raise ValueError(f"invalid termination condition: {v}")
        return v

    @model_validator(mode="after")
    def check_algorithm_params(self) -> "PipelineConfig":
        """Parameters must belong to the chosen algorithm."""
        if self.command == "abstract" and self.algorithm is None:
            raise ValueError("abstract needs --algo")
        if self.eta is not None and self.algorithm != "grid":
            raise ValueError("--eta only applies to --algo grid")
        if self.algorithm == "grid" and self.eta is None:
            raise ValueError("--algo grid needs --eta")
        if self.history_length is not None and self.algorithm != "lcomplete":
            raise ValueError("--l only applies to --algo lcomplete")
        if self.algorithm == "lcomplete" and self.history_length is None:
            raise ValueError("--algo lcomplete needs --l")
        if self.tree_path is not None and self.algorithm != "kam":
            raise ValueError("--emit-tree only applies to --algo kam")
        if self.command == "check-relation" and None in (
            self.concrete_path,
            self.abstract_path,
            self.map_path,
        ):
            raise ValueError("check-relation needs --concrete, --abstract and --map")
        if self.command in ("synthesize", "chain") and self.spec_path is None:
            raise ValueError(f"{self.command} needs --spec")
        if self.command == "simulate" and self.controller_path is None:
            raise ValueError("simulate needs --controller")
        return self
