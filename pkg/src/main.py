"""
Command-line entry point: validate configs, run scenarios and write the report.

Exit codes are `EXIT_OK` when every check passes, `EXIT_CHECK_FAILED` when a
check fails and `EXIT_CONFIG_ERROR` for invalid arguments or configs.
"""
import argparse
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from src.config import ConfigError, ExperimentConfig, list_scenarios, validate
from src.data_loader import load_config
from src.reporter import Reporter, RunReport
from src.scenarios import build_scenario
from src.utils import EXIT_CHECK_FAILED, EXIT_CONFIG_ERROR, EXIT_OK

logger = logging.getLogger("src.main")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    p = argparse.ArgumentParser(
        description="Numerical lab for recovering A and q in a convection-diffusion equation from partial data",
        epilog=(
            "Either --config or --scenario is required unless --list is given.\n"
            "Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error."),
        formatter_class=argparse.RawTextHelpFormatter,
    )

    p.add_argument(
        "--config",
        type=Path,
        help="JSON experiment config.",
    )

    p.add_argument(
        "--scenario",
        help="Scenario to run; overrides the config. Use 'all' to run every scenario.",
    )

    p.add_argument(
        "--out",
        help="Output directory (default: output/ or the config's output_dir).",
    )

    p.add_argument(
        "--threads",
        type=int,
        default=1,
        help="Scenarios run in parallel (default: 1).",
    )

    p.add_argument(
        "--seed",
        type=int,
        help="Seed of the randomized checks.",
    )

    p.add_argument(
        "--list",
        action="store_true",
        help="List the scenarios and exit.",
    )

    p.add_argument(
        "--validate-only",
        action="store_true",
        help="Validate the config and exit without running numerics.",
    )

    p.add_argument(
        "--html",
        action="store_true",
        help="Also write the HTML summary report.html.",
    )

    p.add_argument(
        "-v", "--verbose",
        action="count",
        default=0,
        help="-v for INFO, -vv for DEBUG logging.",
    )

    return p.parse_args(argv)


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def raw_configs(args: argparse.Namespace) -> list[dict]:
    """
    Raw config mappings for the requested scenarios, with CLI overrides applied.

    Raises:
        FileNotFoundError: If the config file does not exist.
        ValueError: If the config file is not valid JSON or not an object.
    """
    base = load_config(args.config) if args.config is not None else {}
    if not isinstance(base, dict):
        raise ValueError(f"Config file {args.config} must contain a JSON object")
    if args.seed is not None:
        base["seed"] = args.seed
    if args.out is not None:
        base["output_dir"] = str(args.out)
    if args.scenario == "all":
        return [{**base, "scenario": name} for name, _ in list_scenarios()]
    if args.scenario is not None:
        base["scenario"] = args.scenario
    return [base]


def run_scenario(config: ExperimentConfig) -> tuple[dict, float]:
    """Run one scenario; returns its result and the elapsed seconds."""
    start = time.perf_counter()
    result = build_scenario(config).run()
    return result, time.perf_counter() - start


def run(configs: ExperimentConfig | Sequence[ExperimentConfig], threads: int = 1,
        html: bool = False) -> RunReport:
    """
    Run scenarios and write every table, field dump and the run report.

    Scenarios run in a thread pool; files are written from this thread
    only, in the order the configs were given.

    Args:
        configs: One or more validated configs sharing an output directory.
        threads: Worker threads.
        html: Also write ``report.html``.

    Returns:
        The `RunReport` also written to ``report.json``.
    """
    if isinstance(configs, ExperimentConfig):
        configs = [configs]
    configs = list(configs)
    if not configs:
        raise ValueError("No scenario to run")
    reporter = Reporter(configs[0].output_dir)
    wall_clock: dict[str, float] = {}
    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        outcomes = list(executor.map(run_scenario, configs))
    for config, (result, elapsed) in zip(configs, outcomes):
        wall_clock[config.scenario] = elapsed
        reporter.add_result(result, config.config_hash())
    wall_clock["total"] = time.perf_counter() - start

    report = reporter.build_report(wall_clock)
    reporter.export_json(report)
    if html:
        reporter.export_html(report)
    logger.info("Run finished: passed=%s hash=%s", report.passed, report.report_hash())
    return report


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    configure_logging(args.verbose)

    if args.list:
        for name, description in list_scenarios():
            print(f"{name:<16} {description}")
        return EXIT_OK
    if args.config is None and args.scenario is None:
        print("error: either --config or --scenario is required", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        raws = raw_configs(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    diagnostics = [f"{raw.get('scenario')}: {d}" for raw in raws for d in validate(raw)]
    if diagnostics:
        for d in diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        configs = [ExperimentConfig.from_dict(raw) for raw in raws]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    if args.validate_only:
        print(f"{len(configs)} config(s) valid")
        return EXIT_OK

    report = run(configs, threads=args.threads, html=args.html)
    for name, summary in report.scenarios.items():
        state = "PASS" if summary["passed"] else "FAIL"
        print(f"{state} {name}: {summary['checks_passed']}/{summary['checks_total']} checks")
    print(f"report hash {report.report_hash()}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
