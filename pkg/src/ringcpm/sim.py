"""AWGN Monte Carlo harness: calibration, channel, and block simulation."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decoders import TERMINATIONS, bcjr_app, branch_metrics, hard_decision, viterbi_mlsd
from .trellis import JointTrellis, build_trellis

__all__ = ["SimConfig", "SimPoint", "SimResult", "calibrate", "awgn", "run_simulation"]

DECODERS = ("mlsd", "app")


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run description; the seed is mandatory for reproducibility."""

    ebn0_db_grid: tuple[float, ...]
    block_len: int
    n_blocks: int
    seed: int
    decoder: str = "mlsd"
    termination: str = "zero-tail"
    min_errors: int = 500
    stop_check_blocks: int = 8
    workers: int = 1

    def __post_init__(self):
        if not self.ebn0_db_grid:
            raise ValueError("Eb/N0 grid must be nonempty")
        if self.block_len < 1:
            raise ValueError("block length must be >= 1")
        if self.n_blocks < 1:
            raise ValueError("block count must be >= 1")
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}")
        if self.termination not in TERMINATIONS:
            raise ValueError(f"termination must be one of {TERMINATIONS}")
        if self.min_errors < 1 or self.stop_check_blocks < 1 or self.workers < 1:
            raise ValueError("min_errors, stop_check_blocks, workers must be >= 1")


@dataclass(frozen=True)
class SimPoint:
    ebn0_db: float
    symbols: int
    errors: int
    ser: float
    ci95: float
    elapsed_s: float


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    points: tuple[SimPoint, ...]


def calibrate(ebn0_db: float, rate: float, M: int) -> float:
    """One-sided noise density N0 for a target Eb/N0 in dB.

    Channel-symbol energy is normalized to one, so Eb = 1 / (rate * log2 M)
    and N0 = Eb / 10^(ebn0_db / 10).
    """
    if not 0 < rate <= 1:
        raise ValueError("rate must lie in (0, 1]")
    if M < 2:
        raise ValueError("M must be >= 2")
    eb = 1.0 / (rate * math.log2(M))
    return eb / 10.0 ** (ebn0_db / 10.0)


def awgn(samples: np.ndarray, n0: float, rng: np.random.Generator, dt: float) -> np.ndarray:
    """Add complex white Gaussian noise matched to the continuous-time model.

    Each real component gets variance N0 / (2 dt) so discrete correlations
    Re sum r s* dt reproduce matched-filter statistics.  n0 = 0 is the
    noiseless limit.
    """
    if n0 < 0:
        raise ValueError("noise density must be nonnegative")
    if dt <= 0:
        raise ValueError("sample spacing must be positive")
    s = np.asarray(samples, dtype=np.complex128)
    if n0 == 0.0:
        return s.copy()
    sigma = math.sqrt(n0 / (2.0 * dt))
    noise = rng.normal(scale=sigma, size=s.shape) + 1j * rng.normal(
        scale=sigma, size=s.shape
    )
    return s + noise


_WORKER_TRELLIS: JointTrellis | None = None
_WORKER_ARGS: tuple | None = None


def _init_worker(gen, punct, cpm, decoder, termination):
    global _WORKER_TRELLIS, _WORKER_ARGS
    _WORKER_TRELLIS = build_trellis(gen, punct, cpm)
    _WORKER_ARGS = (decoder, termination)


def _block_errors(
    trellis: JointTrellis,
    decoder: str,
    termination: str,
    seed: int,
    point_idx: int,
    block_idx: int,
    block_len: int,
    n0: float,
) -> int:
    """Errors in one block; the RNG substream depends only on the indices."""
    rng = np.random.default_rng([seed, point_idx, block_idx])
    M = trellis.M
    m = trellis.generator.m
    message = rng.integers(0, M, size=block_len, dtype=np.int64)
    tail = np.zeros(m, dtype=np.int64) if termination == "zero-tail" else np.zeros(0, dtype=np.int64)
    symbols = np.concatenate([message, tail])
    tx = trellis.synthesize(symbols)
    rx = awgn(tx, n0, rng, trellis.cpm.T / trellis.cpm.n_sps)
    table = branch_metrics(rx, trellis)
    if decoder == "mlsd":
        decided = viterbi_mlsd(trellis, table, termination)
    else:
        app = bcjr_app(trellis, table, None, max(n0, 1e-12), termination=termination)
        decided = hard_decision(app)
    return int(np.count_nonzero(decided[:block_len] != message))


def _block_errors_pool(args) -> int:
    decoder, termination = _WORKER_ARGS
    return _block_errors(_WORKER_TRELLIS, decoder, termination, *args)


def run_simulation(trellis: JointTrellis, config: SimConfig) -> SimResult:
    """Monte Carlo SER over the Eb/N0 grid.

    Blocks draw uniform i.i.d. source symbols, append the zero tail, pass
    through encoder/CPE/AWGN, and are decoded; errors are counted on the
    information symbols only.  Per-block RNG substreams derive from
    (seed, point index, block index), and the early-stop rule is evaluated on
    fixed-size chunks, so results do not depend on the worker count.
    """
    points = []
    pool = None
    try:
        if config.workers > 1:
            pool = ProcessPoolExecutor(
                max_workers=config.workers,
                initializer=_init_worker,
                initargs=(
                    trellis.generator,
                    trellis.puncture,
                    trellis.cpm,
                    config.decoder,
                    config.termination,
                ),
            )
        for point_idx, db in enumerate(config.ebn0_db_grid):
            n0 = calibrate(db, trellis.rate, trellis.M)
            t0 = time.perf_counter()
            errors = 0
            symbols = 0
            block = 0
            while block < config.n_blocks:
                chunk = list(
                    range(block, min(block + config.stop_check_blocks, config.n_blocks))
                )
                args = [
                    (config.seed, point_idx, b, config.block_len, n0) for b in chunk
                ]
                if pool is None:
                    errs = [
                        _block_errors(
                            trellis, config.decoder, config.termination, *a
                        )
                        for a in args
                    ]
                else:
                    errs = list(pool.map(_block_errors_pool, args))
                errors += sum(errs)
                symbols += len(chunk) * config.block_len
                block = chunk[-1] + 1
                if errors >= config.min_errors:
                    break
            ser = errors / symbols
            ci = 1.96 * math.sqrt(max(ser * (1.0 - ser), 0.0) / symbols)
            points.append(
                SimPoint(db, symbols, errors, ser, ci, time.perf_counter() - t0)
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return SimResult(config, tuple(points))
