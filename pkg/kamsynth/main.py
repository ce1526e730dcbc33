"""
Command-line entry point for kamsynth.
Acts as the orchestrator: parses arguments, validates them into a PipelineConfig
and hands the run to the pipeline service.
"""

import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError as PydanticValidationError

from .api_models import ErrorResponse, PipelineConfig
from .core.config import get_settings
from .core.errors import BadParams, KamSynthError
from .core.logging import configure_logging, get_logger
from .services.pipeline_service import get_pipeline_service

logger = get_logger(__name__)

EXIT_UNEXPECTED = 1


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 means unrealizable here."""

    def error(self, message: str):
        raise BadParams(f"invalid arguments: {message}")


def _param(text: str) -> Dict[str, Any]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text}")
    try:
        return {key: int(value)}
    except ValueError:
        return {key: value}


def _add_system(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", "--name", dest="model", help="built-in model name")
    parser.add_argument("--system", dest="system_path", help="JSON system description")
    parser.add_argument(
        "--param", dest="params", type=_param, action="append", default=[], help="model parameter key=value"
    )


def _add_report(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--report", dest="report_path", help="write the run report here instead of stdout")
    parser.add_argument("--no-timing", dest="no_timing", action="store_true", help="report timing_ms as 0")
    parser.add_argument(
        "--log-level",
        dest="log_level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="override KAMSYNTH_LOG_LEVEL",
    )


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = _Parser(prog="kamsynth", description="Abstraction-based output-feedback controller design")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)
    commands.required = True

    model = commands.add_parser("model", help="build or export a model")
    _add_system(model)
    model.add_argument("--out", dest="out_path")
    model.add_argument("--dot", dest="dot_path")
    _add_report(model)

    abstract = commands.add_parser("abstract", help="compute an abstraction")
    _add_system(abstract)
    abstract.add_argument("--algo", dest="algorithm", choices=["ka", "bisim", "kam", "grid", "lcomplete"])
    abstract.add_argument("--budget", type=int, default=settings.default_budget)
    abstract.add_argument("--termcond", default=settings.default_termcond, help="exact | budget | cover-stable:k")
    abstract.add_argument("--eta", help="grid width p/q")
    abstract.add_argument("--l", dest="history_length", type=int, help="history length")
    abstract.add_argument("--out", dest="out_path")
    abstract.add_argument("--dot", dest="dot_path")
    abstract.add_argument("--emit-tree", dest="tree_path")
    _add_report(abstract)

    synthesize = commands.add_parser("synthesize", help="solve a game on a finite abstraction")
    _add_system(synthesize)
    synthesize.add_argument("--spec", dest="spec_path")
    synthesize.add_argument("--emit-strategy", dest="strategy_path")
    _add_report(synthesize)

    simulate = commands.add_parser("simulate", help="run a controller in closed loop")
    _add_system(simulate)
    simulate.add_argument("--controller", dest="controller_path")
    simulate.add_argument("--steps", type=int, default=100)
    simulate.add_argument("--seed", type=int, default=settings.seed)
    simulate.add_argument("--trace", dest="trace_path", help="JSONL trace")
    _add_report(simulate)

    relation = commands.add_parser("check-relation", help="check an abstraction map")
    relation.add_argument("--concrete", dest="concrete_path")
    relation.add_argument("--abstract", dest="abstract_path")
    relation.add_argument("--map", dest="map_path")
    relation.add_argument("--mode", choices=["sound", "realization", "frr"], default="sound")
    _add_report(relation)

    chain = commands.add_parser("chain", help="refine with KAM until a controller exists")
    _add_system(chain)
    chain.add_argument("--spec", dest="spec_path")
    chain.add_argument("--max-iterations", dest="max_iterations", type=int, default=settings.default_budget)
    chain.add_argument("--emit-strategy", dest="strategy_path")
    chain.add_argument("--out", dest="out_path")
    chain.add_argument("--dot", dest="dot_path")
    _add_report(chain)
    return parser


def _config(args: argparse.Namespace) -> PipelineConfig:
    values = {k: v for k, v in vars(args).items() if v is not None and k not in ("params", "log_level")}
    params: Dict[str, Any] = {}
    for item in getattr(args, "params", []) or []:
        params.update(item)
    try:
        return PipelineConfig(**values, model_params=params)
    except PydanticValidationError as e:
        errors = e.errors(include_url=False, include_context=False, include_input=False)
        raise BadParams("invalid configuration", {"errors": errors})


def _print_error(error: ErrorResponse) -> None:
    sys.stdout.write(json.dumps(error.model_dump(), sort_keys=True, default=str) + "\n")


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and print the report.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        int: 0 success, 2 unrealizable, 3 budget exhausted, 4 input error, 1 unexpected failure
    """
    settings = get_settings()
    configure_logging(settings.log_level, settings.log_format)
    try:
        args = build_parser().parse_args(argv)
        if args.log_level:
            configure_logging(args.log_level, settings.log_format)
        config = _config(args)
        service = get_pipeline_service()
        report, exit_code = service.run(config)
        if not config.report_path:
            sys.stdout.write(service.render(report))
        return exit_code
    except KamSynthError as e:
        logger.error("run_failed", error_code=e.error_code, message=e.message)
        _print_error(ErrorResponse(error_message=e.message, error_code=e.error_code, details=e.details))
        return e.exit_code
    except Exception as e:
        logger.error("unexpected_error", error=str(e), exc_info=True)
        _print_error(ErrorResponse(error_message="Internal error", error_code="INTERNAL_ERROR", details={"error": str(e)}))
        return EXIT_UNEXPECTED


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
