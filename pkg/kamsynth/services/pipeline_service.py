"""
Pipeline service for kamsynth.
Runs one CLI subcommand end to end: resolves inputs, calls the algorithm services,
writes the artifacts and assembles the RunReport.
"""

import json
import time
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

from ..api_models import PipelineConfig, RunReport
from ..core.config import get_settings
from ..core.errors import BadParams, DomainMismatch
from ..core.logging import get_logger
from ..dependencies import (
    load_abstraction_map,
    load_specification,
    load_strategy,
    load_system_description,
    resolve_system,
)
from ..domains import SymbolicSystem
from ..domains.geo import GeoSystem
from .baselines_service import GridSpec, grid_abstraction, l_complete_abstraction
from .bisim_service import bisimulation_quotient
from .ka_service import knowledge_abstraction
from .kam_service import kam, refinement_chain, tree_to_json
from .relations_service import (
    AbstractionMap,
    check_frr_variant,
    check_sound_abstraction,
    check_sound_realization,
)
from .synth_service import (
    OutputFeedbackController,
    Unrealizable,
    refine_controller,
    simulate_closed_loop,
    solve,
)
from .systems_service import FiniteSystem, Specification, to_description, to_dot

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_UNREALIZABLE = 2
EXIT_BUDGET = 3

Outcome = Tuple[Dict[str, Any], int]


def _dump(data: Any, indent: int, sort_keys: bool = False) -> str:
    return json.dumps(data, indent=indent or None, sort_keys=sort_keys, ensure_ascii=False) + "\n"


def _write(path: str, text: str) -> None:
    target = Path(path)
    if target.parent and not target.parent.exists():
        target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")


def _with_suffix(path: str, tag: str) -> str:
    """sys.json -> sys.<tag>.json"""
    target = Path(path)
    return str(target.with_name(f"{target.stem}.{tag}{target.suffix}"))


class PipelineService:
    """Service dispatching validated pipeline configurations to the algorithm services."""

    def __init__(self):
        """Initialize the pipeline service with the command table."""
        self.settings = get_settings()
        self.handlers: Dict[str, Callable[[PipelineConfig], Outcome]] = {}
        self._initialize_handlers()

    def _initialize_handlers(self) -> None:
        self.handlers = {
            "model": self.model,
            "abstract": self.abstract,
            "synthesize": self.synthesize,
            "simulate": self.simulate,
            "check-relation": self.check_relation,
            "chain": self.chain,
        }

    def run(self, config: PipelineConfig) -> Tuple[RunReport, int]:
        """
        Execute one subcommand.

        Args:
            config: Validated pipeline configuration

        Returns:
            Tuple[RunReport, int]: The report and the process exit code

        Raises:
            KamSynthError: Any domain error raised by the services
        """
        started = time.perf_counter()
        fields, exit_code = self.handlers[config.command](config)
        elapsed = 0.0 if config.no_timing else round((time.perf_counter() - started) * 1000, 3)
        report = RunReport(
            command=config.command,
            algorithm=config.algorithm,
            parameters=self._parameters(config),
            timing_ms=elapsed,
            **fields,
        )
        logger.info(
            "pipeline_finished",
            command=config.command,
            verdict=report.verdict,
            exit_code=exit_code,
        )
        if config.report_path:
            _write(config.report_path, self.render(report))
        return report, exit_code

    def render(self, report: RunReport) -> str:
        """Report JSON with sorted keys; identical runs give identical text up to timing."""
        return _dump(report.model_dump(mode="json"), self.settings.report_indent, sort_keys=True)

    @staticmethod
    def _parameters(config: PipelineConfig) -> Dict[str, Any]:
        data = config.model_dump(mode="json", exclude_none=True, exclude={"command", "algorithm", "no_timing"})
        return {k: v for k, v in data.items() if not k.endswith("_path")}

    def _resolve(self, config: PipelineConfig, allow_partial: bool = False):
        return resolve_system(config.model, config.system_path, config.model_params, allow_partial)

    def _emit_system(
        self, system: FiniteSystem, config: PipelineConfig, artifacts: Dict[str, str], label: str = "abstraction"
    ) -> None:
        if config.out_path:
            description = to_description(system).model_dump(by_alias=True)
            _write(config.out_path, _dump(description, self.settings.report_indent))
            artifacts[label] = config.out_path
        if config.dot_path:
            _write(config.dot_path, to_dot(system))
            artifacts["dot"] = config.dot_path

    def model(self, config: PipelineConfig) -> Outcome:
        """Build a catalog model (or load a JSON system) and export it."""
        system = self._resolve(config)
        artifacts: Dict[str, str] = {}
        if isinstance(system, FiniteSystem):
            self._emit_system(system, config, artifacts, label="system")
            return {
                "state_counts": {"states": len(system.states)},
                "artifacts": artifacts,
                "extra": {"name": system.name, "kind": "finite"},
            }, EXIT_OK

        summary = system.describe()
        summary["output_regions"] = {y: system.output_region(y).key() for y in system.outputs}
        summary["initial_region"] = system.initial_region().key()
        if config.out_path:
            _write(config.out_path, _dump(summary, self.settings.report_indent))
            artifacts["system"] = config.out_path
        if config.dot_path:
            raise BadParams("DOT export needs a finite system", {"model": config.model})
        return {"artifacts": artifacts, "extra": {"name": system.name, "kind": "symbolic"}}, EXIT_OK

    def abstract(self, config: PipelineConfig) -> Outcome:
        """Compute an abstraction with the configured algorithm."""
        system = self._resolve(config)
        concrete = {"concrete": len(system.states)} if isinstance(system, FiniteSystem) else {}
        artifacts: Dict[str, str] = {}
        extra: Dict[str, Any] = {}
        iterations: Optional[int] = None
        terminated: Optional[bool] = None

        if config.algorithm == "ka":
            result = knowledge_abstraction(system, config.budget)
            abstraction = result.abstraction
            iterations, terminated = result.iterations, result.terminated
            extra["cells"] = {name: result.cells[name].key() for name in abstraction.states}
        elif config.algorithm == "bisim":
            bisim = bisimulation_quotient(system, config.budget)
            abstraction = bisim.quotient
            iterations, terminated = bisim.iterations, bisim.terminated
            extra["blocks"] = {name: bisim.blocks[name].key() for name in abstraction.states}
        elif config.algorithm == "kam":
            run = kam(system, config.budget, config.termcond)
            abstraction = run.abstraction
            iterations, terminated = len(run.extracted), run.terminated
            extra.update(
                {
                    "termcond": run.termcond,
                    "termcond_fired_at": run.termcond_fired_at,
                    "cover": [run.exploration.key(b) for b in run.exploration.cover],
                    "cover_log": [[i, key] for i, key in run.cover_log],
                    "per_iteration": [
                        {"iteration": e.iteration, "states": len(e.system.states), "cover": e.cover_size}
                        for e in run.extracted
                    ],
                }
            )
            if config.tree_path:
                _write(config.tree_path, _dump(tree_to_json(run.exploration), self.settings.report_indent))
                artifacts["tree"] = config.tree_path
            # the last extraction is the abstraction itself, written by _emit_system
            for e in run.extracted[:-1]:
                if config.out_path:
                    path = _with_suffix(config.out_path, f"iter{e.iteration}")
                    _write(path, _dump(to_description(e.system).model_dump(by_alias=True), self.settings.report_indent))
                    artifacts[f"iteration_{e.iteration}"] = path
                if config.dot_path:
                    path = _with_suffix(config.dot_path, f"iter{e.iteration}")
                    _write(path, to_dot(e.system))
                    artifacts[f"iteration_{e.iteration}_dot"] = path
        elif config.algorithm == "grid":
            if not isinstance(system, GeoSystem):
                raise DomainMismatch("grid abstraction needs a translation model such as sigma1")
            abstraction = grid_abstraction(system, GridSpec.parse(str(config.eta), system.width))
            terminated = True
        elif config.algorithm == "lcomplete":
            if not isinstance(system, FiniteSystem):
                raise DomainMismatch("l-complete abstraction needs a finite system (pass --param N=...)")
            abstraction = l_complete_abstraction(system, config.history_length)  # type: ignore[arg-type]
            terminated = True
        else:
            raise BadParams(f"unknown algorithm: {config.algorithm}")

        self._emit_system(abstraction, config, artifacts)
        return {
            "iterations": iterations,
            "terminated": terminated,
            "state_counts": {"abstract": len(abstraction.states), **concrete},
            "artifacts": artifacts,
            "extra": extra,
        }, EXIT_OK

    def _specification(self, config: PipelineConfig) -> Specification:
        return Specification.from_model(load_specification(config.spec_path))  # type: ignore[arg-type]

    def _emit_controller(
        self, controller: OutputFeedbackController, config: PipelineConfig, artifacts: Dict[str, str]
    ) -> None:
        if config.strategy_path:
            data = controller.to_model().model_dump(mode="json", by_alias=True)
            _write(config.strategy_path, _dump(data, self.settings.report_indent))
            artifacts["strategy"] = config.strategy_path

    def synthesize(self, config: PipelineConfig) -> Outcome:
        """Solve the game on a finite abstraction; exit 2 when unrealizable."""
        system = self._resolve(config, allow_partial=True)
        if isinstance(system, SymbolicSystem):
            raise DomainMismatch("synthesis runs on finite abstractions; run abstract first")
        spec = self._specification(config)
        verdict = solve(system, spec)
        counts = {"abstract": len(system.states)}
        if isinstance(verdict, Unrealizable):
            return {
                "verdict": "unrealizable",
                "state_counts": counts,
                "extra": {"witness": verdict.witness, "reason": verdict.reason},
            }, EXIT_UNREALIZABLE

        artifacts: Dict[str, str] = {}
        if config.strategy_path:
            self._emit_controller(refine_controller(system, verdict), config, artifacts)
        return {
            "verdict": "realizable",
            "state_counts": counts,
            "artifacts": artifacts,
            "extra": {
                "memory_size": verdict.memory_size,
                "winning": {str(m): len(states) for m, states in sorted(verdict.winning.items())},
            },
        }, EXIT_OK

    def simulate(self, config: PipelineConfig) -> Outcome:
        """Closed-loop run of a stored controller against the concrete system."""
        system = self._resolve(config)
        controller = OutputFeedbackController.from_model(load_strategy(config.controller_path))  # type: ignore[arg-type]
        result = simulate_closed_loop(system, controller, config.steps, seed=config.seed)
        artifacts: Dict[str, str] = {}
        if config.trace_path:
            lines = [json.dumps(step.model_dump(mode="json"), sort_keys=True) for step in result.trace]
            _write(config.trace_path, "\n".join(lines) + "\n")
            artifacts["trace"] = config.trace_path
        return {
            "verdict": result.verdict,
            "iterations": len(result.trace) - 1,
            "artifacts": artifacts,
            "extra": {
                "violations": result.violations,
                "gaps": {str(i): gap for i, gap in sorted(result.gaps.items())},
                "desync": result.desync,
            },
        }, EXIT_OK

    def check_relation(self, config: PipelineConfig) -> Outcome:
        """Check the map between two finite systems in the configured mode."""
        concrete = load_system_description(config.concrete_path).to_finite_system(  # type: ignore[arg-type]
            allow_partial=config.mode == "frr"
        )
        abstract = load_system_description(config.abstract_path).to_finite_system(  # type: ignore[arg-type]
            allow_partial=True
        )
        amap = AbstractionMap.from_model(load_abstraction_map(config.map_path))  # type: ignore[arg-type]
        checks = {
            "sound": check_sound_abstraction,
            "realization": check_sound_realization,
            "frr": check_frr_variant,
        }
        relation = checks[config.mode](concrete, abstract, amap)
        return {
            "verdict": "pass" if relation.passed else "fail",
            "state_counts": {"concrete": len(concrete.states), "abstract": len(abstract.states)},
            "extra": relation.to_dict(),
        }, EXIT_OK

    def chain(self, config: PipelineConfig) -> Outcome:
        """KAM with synthesis after every iteration; exit 3 when the chain is exhausted."""
        system = self._resolve(config)
        spec = self._specification(config)
        result = refinement_chain(system, config.max_iterations, spec)
        sizes = [len(s.states) for s in result.chain]
        if not result.found:
            return {
                "verdict": "exhausted",
                "iterations": len(result.chain),
                "terminated": False,
                "extra": {"chain_sizes": sizes},
            }, EXIT_BUDGET

        artifacts: Dict[str, str] = {}
        self._emit_system(result.abstraction, config, artifacts)  # type: ignore[arg-type]
        self._emit_controller(result.controller, config, artifacts)
        return {
            "verdict": "realizable",
            "iterations": result.iteration,
            "terminated": True,
            "state_counts": {"abstract": len(result.abstraction.states)},  # type: ignore[union-attr]
            "artifacts": artifacts,
            "extra": {"chain_sizes": sizes},
        }, EXIT_OK


_pipeline_service: Optional[PipelineService] = None


def get_pipeline_service() -> PipelineService:
    """
    Get or create the global pipeline service instance.

    Returns:
        PipelineService: The pipeline service instance
    """
    global _pipeline_service
    if _pipeline_service is None:
        _pipeline_service = PipelineService()
    return _pipeline_service
