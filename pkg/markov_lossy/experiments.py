"""Seeded experiment sweeps: encoder scatter against R(D), Viterbi vs annealing, Ziv gap.

A sweep is a list of cells (alpha x replication). Every cell derives its seeds from the
root seed and its own index, runs in an executor, and the results are merged back in
cell order, so a sweep is reproducible regardless of the worker count.
"""

import asyncio
import logging
import time
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import BaseModel

from . import distortion
from .codec import entropy_encode
from .coeff_program import (
    ProgramOptions,
    build_instance,
    coefficients_from_program,
    solve_program,
)
from .coefficients import CoefficientMatrix, default_lambda_max, shortcut_coefficients
from .config import CoefficientMode, Config, EncoderConfig
from .count_model import Sequence
from .db import ExperimentRun, ResultsDatabase
from .exceptions import BudgetExceededError, ConfigError
from .io import write_csv_with_header
from .lz78 import slow_order, worst_excess_by_n, ziv_gap_scan
from .mcmc import AnnealConfig, gibbs_anneal
from .sources import MarkovSource, generate, lagrangian_envelope, rd_curve
from .trellis import EncodeResult, check_state_budget, encode_iterative, viterbi_encode

logger = logging.getLogger(__name__)


def cell_seeds(root_seed: int, cell: int, count: int = 2) -> List[int]:
    """Independent 32-bit seeds for one cell: [source, chain, ...]"""
    state = np.random.SeedSequence(root_seed, spawn_key=(cell,)).generate_state(count)
    return [int(s) for s in state]


def _distortion_matrix(cfg: EncoderConfig, source_size: int) -> npt.NDArray[np.float64]:
    recon = cfg.reconstruction_size or source_size
    if cfg.distortion is None:
        return distortion.hamming(source_size, recon)
    return distortion.validate(cfg.distortion, source_size, recon)


def program_block_length(cfg: EncoderConfig, k: int, source_size: int, recon_size: int) -> int:
    """k1 for program mode: the configured one, else the largest <= k+1 within the LP budget"""
    budget = cfg.max_program_variables

    def variables(k1: int) -> int:
        return int(source_size**k1 * recon_size**k1)

    if cfg.k1 is not None:
        if variables(cfg.k1) > budget:
            raise BudgetExceededError(
                f"k1={cfg.k1} gives {variables(cfg.k1)} program variables (limit {budget}); "
                "pass a smaller --k1 or raise max_program_variables"
            )
        return cfg.k1
    k1 = k + 1
    while k1 > 1 and variables(k1) > budget:
        k1 -= 1
    if variables(k1) > budget:
        raise BudgetExceededError(f"even k1=1 exceeds the budget of {budget} variables")
    if k1 != k + 1:
        logger.info(f"program mode: capping k1 at {k1} (k+1={k + 1} exceeds the LP budget)")
    return k1


def program_coefficients(
    x: Sequence, alpha: float, k1: int, d: npt.ArrayLike, cfg: EncoderConfig
) -> CoefficientMatrix:
    recon = cfg.reconstruction_size or x.alphabet.size
    cap = cfg.lambda_max or default_lambda_max(x.n, recon)
    instance = build_instance(x, alpha, k1 - 1, d, recon)
    options = ProgramOptions(max_variables=cfg.max_program_variables, lambda_max=cap)
    solution = solve_program(instance, options)
    lam = coefficients_from_program(solution, cap)
    if recon == x.alphabet.size:
        shortcut = shortcut_coefficients(x, k1 - 1, cap)
        gap = float(np.abs(lam.values - shortcut.values).max())
        logger.info(
            f"program coefficients differ from the shortcut by at most {gap:.4f} bits "
            f"(objective {solution.objective:.5f})"
        )
    return lam


def encode_with_mode(x: Sequence, alpha: float, k: int, cfg: EncoderConfig) -> EncodeResult:
    """Pick coefficients by the configured mode and run the Viterbi encoder"""
    d = _distortion_matrix(cfg, x.alphabet.size)
    if cfg.mode is not CoefficientMode.PROGRAM:
        check_state_budget(cfg.reconstruction_size or x.alphabet.size, k, cfg.max_states)
    if cfg.mode is CoefficientMode.ITERATIVE:
        return encode_iterative(x, alpha, k, d, cfg.max_rounds, cfg.lambda_max, cfg.max_states)
    if cfg.mode is CoefficientMode.PROGRAM:
        recon = cfg.reconstruction_size or x.alphabet.size
        k1 = program_block_length(cfg, k, x.alphabet.size, recon)
        lam = program_coefficients(x, alpha, k1, d, cfg)
        return viterbi_encode(x, lam, alpha, d, k1 - 1, cfg.max_states)
    if cfg.reconstruction_size not in (None, x.alphabet.size):
        raise ConfigError("shortcut coefficients need equal alphabets; use --mode program")
    lam = shortcut_coefficients(x, k, cfg.lambda_max)
    return viterbi_encode(x, lam, alpha, d, k, cfg.max_states)


class CellTask(BaseModel):
    """Everything a worker needs to run one cell, and what the database stores as provenance"""

    experiment: str
    cell: int
    alpha: float
    replication: int
    root_seed: int
    n: int
    k: int
    q: float
    encoder: EncoderConfig
    anneal_iterations_per_symbol: int = 10


def _viterbi_run(task: CellTask, x: Sequence, source_seed: int) -> ExperimentRun:
    result = encode_with_mode(x, task.alpha, task.k, task.encoder)
    stream = entropy_encode(result.reconstruction, result.k)
    return ExperimentRun(
        experiment=task.experiment,
        cell=task.cell,
        encoder=f"viterbi-{task.encoder.mode.value}",
        alpha=task.alpha,
        replication=task.replication,
        seed=source_seed,
        n=task.n,
        k=result.k,
        q=task.q,
        distortion=result.true.distortion_part,
        entropy=result.true.entropy_part,
        linearized_cost=result.linearized.total if result.linearized else None,
        true_cost=result.true.total,
        bits_per_symbol=stream.payload_bits / task.n,
        wall_clock=result.wall_clock,
        config=task.model_dump(mode="json"),
    )


def _anneal_run(task: CellTask, x: Sequence, chain_seed: int) -> ExperimentRun:
    cfg = AnnealConfig(
        k=task.k,
        alpha=task.alpha,
        iterations_per_symbol=task.anneal_iterations_per_symbol,
        seed=chain_seed,
    )
    trace = gibbs_anneal(x, cfg, _distortion_matrix(task.encoder, x.alphabet.size))
    return ExperimentRun(
        experiment=task.experiment,
        cell=task.cell,
        encoder="mcmc",
        alpha=task.alpha,
        replication=task.replication,
        seed=chain_seed,
        n=task.n,
        k=task.k,
        q=task.q,
        distortion=trace.true.distortion_part,
        entropy=trace.true.entropy_part,
        true_cost=trace.true.total,
        wall_clock=trace.wall_clock,
        config=task.model_dump(mode="json"),
    )


def run_fig1_cell(task: CellTask) -> List[ExperimentRun]:
    source_seed, _ = cell_seeds(task.root_seed, task.cell)
    x = generate(MarkovSource.binary_symmetric(task.q), task.n, seed=source_seed)
    return [_viterbi_run(task, x, source_seed)]


def run_fig3_cell(task: CellTask) -> List[ExperimentRun]:
    """Viterbi and annealing on the same source realization"""
    source_seed, chain_seed = cell_seeds(task.root_seed, task.cell)
    x = generate(MarkovSource.binary_symmetric(task.q), task.n, seed=source_seed)
    return [_viterbi_run(task, x, source_seed), _anneal_run(task, x, chain_seed)]


async def run_cells(
    worker: Callable[[CellTask], List[ExperimentRun]], tasks: List[CellTask], workers: int
) -> List[ExperimentRun]:
    """Run cells concurrently and return their runs in cell order"""
    loop = asyncio.get_running_loop()
    executor: Executor
    if workers > 1:
        executor = ProcessPoolExecutor(max_workers=workers)
    else:
        executor = ThreadPoolExecutor(max_workers=1)
    with executor:
        try:
            results = await asyncio.gather(
                *(loop.run_in_executor(executor, worker, task) for task in tasks)
            )
        except Exception as e:
            logger.error(f"Error in experiment cells: {str(e)}", exc_info=True)
            raise
    return [run for cell_runs in results for run in cell_runs]


def _encoder_for(experiment: str, config: Config) -> EncoderConfig:
    if experiment == "fig3":
        return config.encoder.model_copy(update={"mode": config.experiment.fig3_mode})
    return config.encoder


def _tasks(experiment: str, config: Config, reps: int) -> List[CellTask]:
    encoder = _encoder_for(experiment, config)
    anneal_factor = config.experiment.anneal_iterations_per_symbol
    tasks = []
    for a, alpha in enumerate(config.experiment.alphas):
        for rep in range(reps):
            tasks.append(
                CellTask(
                    experiment=experiment,
                    cell=a * reps + rep,
                    alpha=alpha,
                    replication=rep,
                    root_seed=config.source.seed,
                    n=config.source.n,
                    k=config.encoder.k,
                    q=config.source.q,
                    encoder=encoder,
                    anneal_iterations_per_symbol=anneal_factor,
                )
            )
    return tasks


def _header(experiment: str, config: Config, reps: int) -> Dict[str, Any]:
    return {
        "experiment": experiment,
        "n": config.source.n,
        "k": config.encoder.k,
        "q": config.source.q,
        "alphas": config.experiment.alphas,
        "reps": reps,
        "seed": config.source.seed,
        "mode": _encoder_for(experiment, config).mode.value,
    }


def _store(db: ResultsDatabase | None, runs: List[ExperimentRun]) -> None:
    if db is not None:
        db.upsert_runs(runs)
        logger.info(f"Upserted {len(runs)} runs")


@dataclass
class ExperimentOutput:
    runs: List[ExperimentRun]
    frame: pd.DataFrame
    paths: List[Path]


async def run_fig1(
    config: Config, out_dir: Path, db: ResultsDatabase | None = None
) -> ExperimentOutput:
    """Scatter of (d_n, H_k) per alpha and replication, plus the reference curve"""
    reps = config.experiment.reps
    started = time.perf_counter()
    tasks = _tasks("fig1", config, reps)
    runs = await run_cells(run_fig1_cell, tasks, config.experiment.workers)
    _store(db, runs)

    frame = pd.DataFrame(
        {
            "alpha": [r.alpha for r in runs],
            "run": [r.replication for r in runs],
            "seed": [r.seed for r in runs],
            "distortion": [r.distortion for r in runs],
            "entropy": [r.entropy for r in runs],
            "true_cost": [r.true_cost for r in runs],
            "linearized_cost": [r.linearized_cost for r in runs],
            "bits_per_symbol": [r.bits_per_symbol for r in runs],
        }
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    points = out_dir / "fig1.csv"
    reference = out_dir / "fig1_reference.csv"
    write_csv_with_header(frame, points, _header("fig1", config, reps))
    rd_curve(config.source.q, config.experiment.rd_points).to_csv(reference)
    logger.info(f"fig1: {len(runs)} runs in {time.perf_counter() - started:.1f}s -> {points}")
    return ExperimentOutput(runs, frame, [points, reference])


def fig3_summary(runs: List[ExperimentRun]) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Per-alpha mean true costs (deterministic) and wall-clock comparison"""
    frame = pd.DataFrame([r.model_dump(exclude={"config"}) for r in runs])
    costs = frame.pivot_table(
        index="alpha", columns="encoder", values="true_cost", aggfunc="mean"
    )
    timing = frame.pivot_table(
        index="alpha", columns="encoder", values="wall_clock", aggfunc="mean"
    )
    viterbi = [c for c in costs.columns if c.startswith("viterbi")][0]
    costs = costs.rename(columns={viterbi: "viterbi_cost", "mcmc": "mcmc_cost"}).reset_index()
    timing = timing.rename(columns={viterbi: "viterbi_seconds", "mcmc": "mcmc_seconds"})
    timing["speed_ratio"] = timing["mcmc_seconds"] / timing["viterbi_seconds"]
    return costs, timing.reset_index()


async def run_fig3(
    config: Config, out_dir: Path, db: ResultsDatabase | None = None
) -> ExperimentOutput:
    """Viterbi against annealing on paired source realizations"""
    reps = config.experiment.fig3_reps
    tasks = _tasks("fig3", config, reps)
    runs = await run_cells(run_fig3_cell, tasks, config.experiment.workers)
    _store(db, runs)

    frame = pd.DataFrame(
        {
            "alpha": [r.alpha for r in runs],
            "run": [r.replication for r in runs],
            "encoder": [r.encoder for r in runs],
            "distortion": [r.distortion for r in runs],
            "entropy": [r.entropy for r in runs],
            "true_cost": [r.true_cost for r in runs],
        }
    )
    costs, timing = fig3_summary(runs)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = _header("fig3", config, reps)
    header["anneal_iterations_per_symbol"] = config.experiment.anneal_iterations_per_symbol
    paths = [out_dir / "fig3.csv", out_dir / "fig3_summary.csv", out_dir / "fig3_timing.csv"]
    write_csv_with_header(frame, paths[0], header)
    write_csv_with_header(costs, paths[1], header)
    # wall-clock differs between runs, so it stays out of the reproducible files
    write_csv_with_header(timing, paths[2], header)
    for row in timing.itertuples():
        logger.info(f"fig3 alpha={row.alpha}: viterbi is {row.speed_ratio:.1f}x faster")
    return ExperimentOutput(runs, frame, paths)


def run_ziv_scan(config: Config, out_dir: Path) -> ExperimentOutput:
    frame = ziv_gap_scan(
        slow_order,
        config.experiment.ziv_ns,
        samples=config.experiment.ziv_samples,
        seed=config.source.seed,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "ziv_scan.csv"
    write_csv_with_header(
        frame,
        path,
        {
            "experiment": "ziv-scan",
            "k_of_n": "floor(log2(log2(n)))",
            "ns": config.experiment.ziv_ns,
            "samples": config.experiment.ziv_samples,
            "seed": config.source.seed,
        },
    )
    for n, worst in worst_excess_by_n(frame).items():
        logger.info(f"ziv scan n={n}: worst excess over families {worst:.4f}")
    return ExperimentOutput([], frame, [path])


def run_rd_curve(config: Config, out_dir: Path) -> ExperimentOutput:
    """Reference curve and the Lagrangian envelope at every configured slope"""
    q = config.source.q
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_path = out_dir / "rd_curve.csv"
    envelope_path = out_dir / "rd_envelope.csv"
    rd_curve(q, config.experiment.rd_points).to_csv(curve_path)

    rows = []
    for alpha in config.experiment.alphas:
        point = lagrangian_envelope(q, alpha)
        rows.append({"alpha": alpha, **point.model_dump()})
    frame = pd.DataFrame(rows)
    write_csv_with_header(
        frame,
        envelope_path,
        {"kind": "rd_envelope", "q": q, "alphas": config.experiment.alphas},
    )
    return ExperimentOutput([], frame, [curve_path, envelope_path])
