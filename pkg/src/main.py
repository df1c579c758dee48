import functools
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import click
from pydantic import BaseModel

from src.analysis.facts import export_facts
from src.analysis.pipeline import analyze_module
from src.analysis.stats import format_stats_table
from src.bench.runner import DEFAULT_THREADS, format_bench_table, run_bench
from src.bench.workloads import DEFAULT_SCALE
from src.config.log import configure_logging
from src.config.settings import get_settings
from src.corpus.generator import write_corpus
from src.corpus.loader import RANDOM, load_module, module_paths
from src.exceptions import ConfigurationError, RuntimeFaultError, SweepGuardError
from src.metadata.codec import read_tables, write_tables
from src.runtime.interpreter import interp_run
from src.schemas.run import RunConfig, UafVerdict, Verdict
from src.schemas.runtime import ProtectionMode
from src.toolchain import check_uaf, compile_module, module_statistics

logger = logging.getLogger(__name__)

METADATA_SUFFIX = ".ptm"
FACTS_SUFFIX = ".facts"

stack_pointers_option = click.option(
    "--stack-pointers",
    type=click.Choice(["on", "off"]),
    default=None,
    help="Also eliminate dangling pointers held in stack slots.",
)
report_option = click.option(
    "--report", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Write a JSON report here."
)


def handle_errors(command):
    """
    Turn toolchain errors into a message on stderr and the error's exit code.
    """

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except SweepGuardError as exc:
            logger.debug("Command failed", exc_info=True)
            click.echo(f"error: {exc.message}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def _stack_flag(value: Optional[str]) -> bool:
    return get_settings().STACK_POINTERS if value is None else value == "on"


def _write_report(path: Optional[Path], payload) -> None:
    if path is None:
        return
    if isinstance(payload, BaseModel):
        data = payload.model_dump_json(indent=2)
    else:
        data = json.dumps([item.model_dump(mode="json") for item in payload], indent=2)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(data + "\n", encoding="utf-8")
    logger.info("Report written to %s", path)


@click.group()
@click.option("--log-level", default=None, help="Overrides LOG_LEVEL from the environment.")
def cli(log_level: Optional[str]) -> None:
    """Dangling-pointer elimination toolchain for a small typed IR."""
    configure_logging(log_level)


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, path_type=Path))
@click.option("--output", type=click.Path(path_type=Path), default=None, help="Facts file, or directory for a corpus.")
@handle_errors
def analyze(input_path: Path, output: Optional[Path]) -> None:
    """Export stage-1 and stage-2 points-to facts."""
    paths = module_paths(input_path)
    if input_path.is_dir() and output is None:
        raise click.UsageError("--output is required when analyzing a directory")
    for path in paths:
        result = analyze_module(load_module(path))
        facts = export_facts(result.stage1) + export_facts(result.stage2)
        if output is None:
            click.echo(facts, nl=False)
            continue
        target = output / f"{path.stem}{FACTS_SUFFIX}" if input_path.is_dir() else output
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(facts, encoding="utf-8")
    if output is not None:
        click.echo(f"wrote facts for {len(paths)} module(s) to {output}")


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--metadata", type=click.Path(dir_okay=False, path_type=Path), default=None)
@handle_errors
def emit(input_path: Path, metadata: Optional[Path]) -> None:
    """Build the pointer metadata tables and write them to a .ptm file."""
    compiled = compile_module(load_module(input_path))
    target = metadata or input_path.with_suffix(METADATA_SUFFIX)
    write_tables(compiled.metadata, target)
    click.echo(f"wrote {compiled.metadata.record_count()} records to {target}")


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--metadata", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--protected/--unprotected", default=True)
@stack_pointers_option
@click.option("--threads", type=click.IntRange(min=1), default=None)
@click.option("--iterations", type=click.IntRange(min=1), default=1)
@click.option("--sweep", type=click.Choice(["sync", "async"]), default=None)
@click.option("--seed", type=int, default=None)
@report_option
@handle_errors
def run(
    input_path: Path,
    metadata: Optional[Path],
    protected: bool,
    stack_pointers: Optional[str],
    threads: Optional[int],
    iterations: int,
    sweep: Optional[str],
    seed: Optional[int],
    report: Optional[Path],
) -> None:
    """Interpret a module with or without dangling-pointer elimination."""
    settings = get_settings()
    config = RunConfig(
        mode="run",
        input=input_path,
        metadata=metadata,
        report=report,
        protected=protected,
        threads=threads or settings.APP_THREADS,
        iterations=iterations,
        seed=settings.SEED if seed is None else seed,
        stack_pointers=_stack_flag(stack_pointers),
        sweep=sweep or settings.SWEEP_MODE,
    )
    module = load_module(config.input)
    tables = None
    if config.protected:
        tables = read_tables(config.metadata) if config.metadata else compile_module(module).metadata
    execution = interp_run(
        module,
        tables,
        ProtectionMode.PROTECTED if config.protected else ProtectionMode.UNPROTECTED,
        settings,
        stack_pointers=config.stack_pointers,
        sweep_mode=config.sweep,
        threads=config.threads,
        iterations=config.iterations,
    )
    for line in execution.summary_lines():
        click.echo(line)
    _write_report(config.report, execution)
    if execution.faults:
        raise RuntimeFaultError(f"run ended with {len(execution.faults)} fault(s)")


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, path_type=Path))
@click.option("--run/--no-run", "with_run", default=False, help="Fill the runtime columns from a protected run.")
@report_option
@handle_errors
def stats(input_path: Path, with_run: bool, report: Optional[Path]) -> None:
    """Pointer classification statistics per module."""
    settings = get_settings()
    records = [
        module_statistics(compile_module(load_module(path)), name=path.stem, settings=settings, run=with_run)
        for path in module_paths(input_path)
    ]
    click.echo(format_stats_table(records), nl=False)
    _write_report(report, records)


@cli.command()
@click.option("--workload", "workloads", multiple=True, help="alloc-heavy, call-intensive or pointer-dense.")
@click.option("--threads", "thread_counts", type=click.IntRange(min=1), multiple=True)
@click.option("--iterations", type=click.IntRange(min=1), default=1)
@click.option("--scale", type=click.IntRange(min=1), default=DEFAULT_SCALE)
@click.option("--seed", type=int, default=None)
@click.option("--sweep", type=click.Choice(["sync", "async"]), default="async")
@report_option
@handle_errors
def bench(
    workloads: Sequence[str],
    thread_counts: Sequence[int],
    iterations: int,
    scale: int,
    seed: Optional[int],
    sweep: str,
    report: Optional[Path],
) -> None:
    """Compare synthetic workloads across protection configurations."""
    settings = get_settings()
    rows = run_bench(
        workloads or None,
        thread_counts or DEFAULT_THREADS,
        iterations=iterations,
        scale=scale,
        seed=settings.SEED if seed is None else seed,
        sweep_mode=sweep,
        settings=settings,
    )
    click.echo(format_bench_table(rows))
    _write_report(report, rows)


@cli.command("check-uaf")
@click.argument("input_path", type=click.Path(exists=True, path_type=Path))
@stack_pointers_option
@report_option
@handle_errors
def check_uaf_command(input_path: Path, stack_pointers: Optional[str], report: Optional[Path]) -> None:
    """Judge whether protection stops the use-after-free in each scenario."""
    settings = get_settings()
    verdicts: list[UafVerdict] = []
    for path in module_paths(input_path):
        verdict, _, _ = check_uaf(load_module(path), path.stem, settings, _stack_flag(stack_pointers))
        click.echo(verdict.line())
        verdicts.append(verdict)
    _write_report(report, verdicts)
    missed = [verdict.scenario for verdict in verdicts if verdict.verdict == Verdict.NOT_PREVENTED]
    if missed:
        raise SweepGuardError(f"not prevented: {', '.join(missed)}")


@cli.command()
@click.option("--seed", type=int, default=None)
@click.option("--count", type=click.IntRange(min=1), default=1)
@click.option("--output", type=click.Path(file_okay=False, path_type=Path), default=RANDOM)
@handle_errors
def generate(seed: Optional[int], count: int, output: Path) -> None:
    """Write seeded random modules for the soundness corpus."""
    start = get_settings().SEED if seed is None else seed
    paths = write_corpus(output, start, count)
    if not paths:
        raise ConfigurationError("nothing generated")
    click.echo(f"wrote {len(paths)} module(s) to {output}")


if __name__ == "__main__":
    cli()
