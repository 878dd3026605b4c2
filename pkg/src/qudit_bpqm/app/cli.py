import logging
import math
import time
from pathlib import Path
from typing import Any, Callable

import click
import orjson
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from qudit_bpqm.app.emit import FigureId, emit_figure_data
from qudit_bpqm.app.schemas import Command, OutputFormat, RunConfig, parse_eigenlist, parse_grid
from qudit_bpqm.app.verify import SuiteStatus, format_table, run_verify_suite
from qudit_bpqm.config import Config, load_config
from qudit_bpqm.core.channels import (
    LogBase,
    bit_combine,
    channel_fidelity,
    check_combine,
    fidelity_bound_check,
    fidelity_holevo_bounds,
    holevo_information,
    pgm_error,
)
from qudit_bpqm.core.density_evolution import (
    ChannelBag,
    RngStream,
    design_polar_code,
    holevo_limit_lambda0,
    ldpc_de_run,
    ldpc_threshold_curve,
    rate_vs_lambda0_sweep,
    threshold_bisect,
)
from qudit_bpqm.core.errors import (
    ContractViolation,
    DimensionMismatch,
    FidelityBoundViolation,
    GuardViolation,
    InvalidEigenList,
    InvalidEnsemble,
    InvalidGramRow,
    NoTransition,
    NonMonotoneVerdict,
)
from qudit_bpqm.core.storage import ResultWriter

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_NO_TRANSITION = 4


class Outcome(BaseModel):
    summary: Any
    rows: list[dict]
    figures: list[tuple[Any, FigureId]] = Field(default_factory=list)
    status: int = EXIT_OK
    text: str | None = None


def exit_code_for(error: Exception) -> int:
    if isinstance(error, NoTransition):
        return EXIT_NO_TRANSITION
    if isinstance(error, GuardViolation):
        return EXIT_GUARD
    if isinstance(error, (FidelityBoundViolation, ContractViolation, NonMonotoneVerdict)):
        return EXIT_VERIFY_FAILED
    if isinstance(error, (ValidationError, InvalidEigenList, InvalidGramRow, InvalidEnsemble, DimensionMismatch, ValueError)):
        return EXIT_CONFIG
    raise error


def is_prime(q: int) -> bool:
    return q >= 2 and all(q % p for p in range(2, math.isqrt(q) + 1))


def _eigenlist_columns(values) -> dict:
    return {f"lambda_{j}": v for j, v in enumerate(values)}


def channel_info(run: RunConfig, config: Config, progress: bool) -> Outcome:
    lam = run.channel()
    bounds = fidelity_holevo_bounds(lam)
    summary = {
        "q": lam.q,
        "eigenlist": list(lam.values),
        "holevo_nats": holevo_information(lam),
        "holevo_qits": holevo_information(lam, LogBase.Q),
        "fidelity": channel_fidelity(lam),
        "pgm_error": pgm_error(lam),
        "fidelity_lower": bounds.lower,
        "fidelity_upper": bounds.upper,
    }
    row = {k: v for k, v in summary.items() if k != "eigenlist"} | _eigenlist_columns(lam.values)
    return Outcome(summary=summary, rows=[row])


def combine(run: RunConfig, config: Config, progress: bool) -> Outcome:
    lam1, lam2 = run.channel(), run.second_channel()
    ensemble = check_combine(lam1, lam2)
    bit = bit_combine(lam1, lam2)
    report = fidelity_bound_check(lam1, lam2)

    rows = [
        {"node": "check", "label": b.label, "prob": b.prob} | _eigenlist_columns(b.eigenlist.values)
        for b in ensemble.branches
    ]
    rows.append({"node": "bit", "label": None, "prob": 1.0} | _eigenlist_columns(bit.values))
    summary = {
        "check": [{"label": b.label, "prob": b.prob, "eigenlist": list(b.eigenlist.values)} for b in ensemble.branches],
        "bit": list(bit.values),
        "fidelity_report": report.model_dump(),
    }
    return Outcome(summary=summary, rows=rows)


def polar_design(run: RunConfig, config: Config, progress: bool) -> Outcome:
    lam = run.channel()
    rng = RngStream(seed=run.seed)
    results = [
        design_polar_code(lam, n, run.epsilon, run.bag_size, rng, run.threads, config.max_leaf_samples, progress)
        for n in run.n
    ]
    summary = [
        {
            "n": r.n,
            "N": r.N,
            "design_rate": r.design_rate,
            "info_set_size": len(r.info_set),
            "holevo_qits": holevo_information(lam, LogBase.Q),
            "info_set": list(r.info_set),
        }
        for r in results
    ]
    rows = [{"n": r.n} | row for r in results for row in r.channel_rows()]
    return Outcome(summary=summary, rows=rows, figures=[(results, FigureId.POLAR_RANK)])


def polar_sweep(run: RunConfig, config: Config, progress: bool) -> Outcome:
    rng = RngStream(seed=run.seed)
    sweep = []
    for n in run.n:
        sweep.extend(
            rate_vs_lambda0_sweep(
                run.q, n, run.epsilon, run.lambda0_grid, run.bag_size, rng, run.threads, config.max_leaf_samples, progress
            )
        )
    rows = [row.model_dump() for row in sweep]
    return Outcome(summary=rows, rows=rows, figures=[(sweep, FigureId.POLAR_RATE)])


def ldpc_run(run: RunConfig, config: Config, progress: bool) -> Outcome:
    initial = ChannelBag.load(run.resume) if run.resume is not None else None
    result = ldpc_de_run(
        run.channel(),
        run.dv,
        run.dc,
        run.bag_size,
        run.iterations,
        run.delta,
        RngStream(seed=run.seed),
        run.threads,
        progress,
        initial_messages=initial,
        checkpoint=run.checkpoint,
    )
    summary = {
        "verdict": result.verdict.value,
        "iterations": len(result.per_iteration_error),
        "final_error": result.final_error,
    }
    return Outcome(summary=summary, rows=result.trajectory_rows())


def ldpc_threshold(run: RunConfig, config: Config, progress: bool) -> Outcome:
    rng = RngStream(seed=run.seed)
    result = threshold_bisect(
        run.dv, run.dc, run.q, run.bag_size, run.iterations, run.delta, run.tolerance, rng, run.threads, progress
    )
    summary = result.model_dump(mode="json", exclude={"path"})
    rate = 1.0 - run.dv / run.dc
    summary["holevo_limit_lambda0"] = holevo_limit_lambda0(run.dv, run.dc, run.q) if 0.0 < rate < 1.0 else None

    figures = []
    if run.lambda0_grid:
        curve = ldpc_threshold_curve(
            run.dv, run.dc, run.q, run.lambda0_grid, run.bag_size, run.iterations, run.delta, rng, run.threads
        )
        summary["curve"] = [p.model_dump(mode="json") for p in curve]
        figures.append((curve, FigureId.LDPC_THRESHOLD))
    rows = [step.model_dump(mode="json") for step in result.path]
    return Outcome(summary=summary, rows=rows, figures=figures)


def verify(run: RunConfig, config: Config, progress: bool) -> Outcome:
    results = run_verify_suite(run.q, config, pairs=run.pairs, seed=run.seed)
    failed = any(r.status == SuiteStatus.FAIL for r in results)
    rows = [r.model_dump(mode="json") for r in results]
    return Outcome(
        summary=rows, rows=rows, status=EXIT_VERIFY_FAILED if failed else EXIT_OK, text=format_table(results)
    )


HANDLERS: dict[Command, Callable[[RunConfig, Config, bool], Outcome]] = {
    Command.CHANNEL_INFO: channel_info,
    Command.COMBINE: combine,
    Command.POLAR_DESIGN: polar_design,
    Command.POLAR_SWEEP: polar_sweep,
    Command.LDPC_RUN: ldpc_run,
    Command.LDPC_THRESHOLD: ldpc_threshold,
    Command.VERIFY: verify,
}


def run(run_config: RunConfig, config: Config, progress: bool = False) -> int:
    """Execute one command, write its result file and figure data, and return the exit status."""
    if not is_prime(run_config.q):
        logging.warning(f"q={run_config.q} is composite; polarization results assume prime q")

    start = time.perf_counter()
    outcome = HANDLERS[run_config.command](run_config, config, progress)
    wall_time = time.perf_counter() - start

    if outcome.text is not None:
        click.echo(outcome.text)
    else:
        click.echo(orjson.dumps(outcome.summary, option=orjson.OPT_INDENT_2).decode())

    if run_config.output is not None:
        data = outcome.rows if run_config.format == OutputFormat.CSV else {"summary": outcome.summary, "rows": outcome.rows}
        ResultWriter(run_config.output, run_config.format).log_result(
            run_config.command.value, run_config.model_dump(mode="json"), data, wall_time
        )
    if run_config.figure_dir is not None:
        for result, figure_id in outcome.figures:
            emit_figure_data(result, figure_id, run_config.figure_dir)

    logging.info(f"{run_config.command.value} finished in {wall_time:.2f}s")
    return outcome.status


def _dispatch(ctx: click.Context, command: Command, **options) -> None:
    config: Config = ctx.obj
    progress = options.pop("progress", False)
    defaults = {
        "bag_size": config.bag_size,
        "iterations": config.max_iterations,
        "epsilon": config.target_block_error,
        "delta": config.convergence_delta,
        "tolerance": config.bisection_tolerance,
        "seed": config.seed,
        "threads": config.threads,
    }
    values = {k: v for k, v in options.items() if v is not None}
    try:
        if "eigenlist" in values:
            values["eigenlist"] = parse_eigenlist(values["eigenlist"])
        if "second_eigenlist" in values:
            values["second_eigenlist"] = parse_eigenlist(values["second_eigenlist"])
        if "lambda0_grid" in values:
            values["lambda0_grid"] = parse_grid(values["lambda0_grid"])
        if "n" in values:
            values["n"] = list(values["n"])
        run_config = RunConfig(command=command, **(defaults | values))
        status = run(run_config, config, progress)
    except (ValueError, InvalidEigenList, InvalidGramRow, DimensionMismatch) as e:
        logging.error(f"Configuration error: {e}")
        click.echo(f"Configuration error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    except (GuardViolation, NoTransition, NonMonotoneVerdict, FidelityBoundViolation, ContractViolation) as e:
        logging.error(f"{type(e).__name__}: {e}")
        click.echo(f"{type(e).__name__}: {e}", err=True)
        ctx.exit(exit_code_for(e))
    ctx.exit(status)


def channel_options(f):
    f = click.option("--lambda0", type=float, default=None, help="lambda0 of the family [lambda0, (q-lambda0)/(q-1), ...].")(f)
    f = click.option("--eigenlist", type=str, default=None, help="Comma-separated eigen list summing to q.")(f)
    return f


def common_options(f):
    f = click.option("--figure-dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Directory for plot-ready CSVs.")(f)
    f = click.option("--format", "format", type=click.Choice([x.value for x in OutputFormat]), default=None, help="Result file format.")(f)
    f = click.option("--output", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Result file.")(f)
    f = click.option("--seed", type=int, default=None, help="Base seed of every random stream.")(f)
    f = click.option("--q", "q", type=int, required=True, help="Alphabet size.")(f)
    return f


def de_options(f):
    f = click.option("--progress", is_flag=True, help="Show progress bars.")(f)
    f = click.option("--threads", type=int, default=None, help="Worker threads for bag kernels.")(f)
    f = click.option("--M", "--bag-size", "bag_size", type=int, default=None, help="Bag size M.")(f)
    return f


def ldpc_options(f):
    f = click.option("--delta", type=float, default=None, help="Convergence threshold on the mean PGM error.")(f)
    f = click.option("--T", "--iterations", "iterations", type=int, default=None, help="Maximum iterations T.")(f)
    f = click.option("--dc", type=int, required=True, help="Check-node degree.")(f)
    f = click.option("--dv", type=int, required=True, help="Variable-node degree.")(f)
    return f


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="YAML run defaults.")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging.")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, verbose: bool):
    """BPQM density evolution on symmetric q-ary pure-state channels."""
    load_dotenv(override=True)
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")
    ctx.obj = load_config(config_path)


@cli.command("channel-info")
@common_options
@channel_options
@click.pass_context
def channel_info_command(ctx, **options):
    """Holevo information, fidelity, PGM error and fidelity bounds of one channel."""
    _dispatch(ctx, Command.CHANNEL_INFO, **options)


@cli.command("combine")
@common_options
@channel_options
@click.option("--second", "second_eigenlist", type=str, default=None, help="Second eigen list; defaults to the first channel.")
@click.pass_context
def combine_command(ctx, **options):
    """Check-node ensemble, bit-node eigen list and fidelity bounds of two channels."""
    _dispatch(ctx, Command.COMBINE, **options)


@cli.command("polar-design")
@common_options
@channel_options
@de_options
@click.option("--n", "n", type=int, multiple=True, required=True, help="Polarization levels; repeat for several block lengths.")
@click.option("--epsilon", type=float, default=None, help="Target block error rate.")
@click.pass_context
def polar_design_command(ctx, **options):
    """Information set of a polar code meeting the block error budget."""
    _dispatch(ctx, Command.POLAR_DESIGN, **options)


@cli.command("polar-sweep")
@common_options
@de_options
@click.option("--n", "n", type=int, multiple=True, required=True, help="Polarization levels; repeat for several block lengths.")
@click.option("--epsilon", type=float, default=None, help="Target block error rate.")
@click.option("--grid", "lambda0_grid", type=str, required=True, help="lambda0 values, 'a,b,c' or 'start:stop:step'.")
@click.pass_context
def polar_sweep_command(ctx, **options):
    """Design rate against lambda0 for the one-parameter family."""
    _dispatch(ctx, Command.POLAR_SWEEP, **options)


@cli.command("ldpc-run")
@common_options
@channel_options
@de_options
@ldpc_options
@click.option("--checkpoint", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Save the final message bag here.")
@click.option("--resume", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Start from a saved message bag.")
@click.pass_context
def ldpc_run_command(ctx, **options):
    """Per-iteration mean PGM error of LDPC density evolution."""
    _dispatch(ctx, Command.LDPC_RUN, **options)


@cli.command("ldpc-threshold")
@common_options
@de_options
@ldpc_options
@click.option("--tol", "tolerance", type=float, default=None, help="Bisection bracket width.")
@click.option("--grid", "lambda0_grid", type=str, default=None, help="Also evaluate the final error on this lambda0 grid.")
@click.pass_context
def ldpc_threshold_command(ctx, **options):
    """lambda0 threshold of a (dv, dc)-regular ensemble by bisection."""
    _dispatch(ctx, Command.LDPC_THRESHOLD, **options)


@cli.command("verify")
@common_options
@click.option("--pairs", type=int, default=None, help="Random eigen-list pairs per suite.")
@click.pass_context
def verify_command(ctx, **options):
    """Closed forms against dense oracles, and unitary contracts."""
    _dispatch(ctx, Command.VERIFY, **options)
