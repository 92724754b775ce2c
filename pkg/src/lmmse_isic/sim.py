"""Monte-Carlo BER harness, flop measurement and memory audit.

Trial ``t`` of a sweep draws its channel, bits and (unit) noise from its own
generator seeded with ``(master_seed, t)``; the same draw is reused at every
SNR point and by every scheme. Trials are processed in fixed-size chunks so
that the output never depends on how many worker threads ran them.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .constellation import Constellation, build_constellation, symbols_from_bits
from .detectors import SCHEMES, DetectorConfig
from .detectors.common import run_isic

log = logging.getLogger(__name__)

CHUNK = 250
SNR_CONVENTION = "N/sigma2"


def snr_to_sigma2(snr_db: float, N: int) -> float:
    """Noise variance for a receive SNR of ``N / sigma2`` (unit-energy symbols,
    unit-variance channel taps)."""
    return N / 10.0 ** (snr_db / 10.0)


def _cgauss(shape, rng) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def gen_channel(M: int, N: int, rng: np.random.Generator) -> np.ndarray:
    if not M >= N >= 1:
        raise ValueError("need M >= N >= 1")
    return _cgauss((M, N), rng)


def gen_noise(M: int, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    return np.sqrt(sigma2) * _cgauss((M,), rng)


def trial_rng(master_seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed & (2**64 - 1), t]))


@dataclass
class ChannelInstance:
    H: np.ndarray
    x_true: np.ndarray
    bits_true: np.ndarray
    noise: np.ndarray
    y: np.ndarray
    sigma2: float


def draw_instance(N: int, M: int, c: Constellation, sigma2: float, rng) -> ChannelInstance:
    H = gen_channel(M, N, rng)
    bits = rng.integers(0, 2, N * c.bits_per_symbol, dtype=np.uint8)
    x = symbols_from_bits(bits, c)
    noise = gen_noise(M, sigma2, rng)
    return ChannelInstance(H, x, bits, noise, H @ x + noise, sigma2)


@dataclass(frozen=True)
class SimConfig:
    N: int
    M: int
    order: int = 4
    K: int = 3

    def __post_init__(self):
        if not self.M >= self.N >= 1:
            raise ValueError(f"M must be >= N (got N={self.N}, M={self.M})")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        build_constellation(self.order)

    @property
    def constellation(self) -> Constellation:
        return build_constellation(self.order)

    def detector(self, sigma2: float) -> DetectorConfig:
        return DetectorConfig(self.N, self.M, self.K, self.constellation, sigma2)


@dataclass
class TrialResult:
    bit_errors: int
    bits: int
    flops: linalg.FlopCounter | None = None


def run_trial(config: SimConfig, scheme: str, rng, snr_db: float = 10.0,
              count_flops: bool = False) -> TrialResult:
    c = config.constellation
    sigma2 = snr_to_sigma2(snr_db, config.N)
    inst = draw_instance(config.N, config.M, c, sigma2, rng)
    with linalg.counting() as fc:
        det = SCHEMES[scheme].detect(inst.H, inst.y, config.detector(sigma2))
    errors = int(np.count_nonzero(det.bits != inst.bits_true))
    return TrialResult(errors, inst.bits_true.size, fc if count_flops else None)


@dataclass
class BerRecord:
    scheme: str
    N: int
    M: int
    order: int
    K: int
    snr_db: float
    trials: int
    bits: int
    bit_errors: int
    ber: float
    flops_init: int | None = None
    flops_per_iter: float | None = None
    failures: int = field(default=0, compare=False)


def _draw_chunk(config: SimConfig, master_seed: int, start: int, stop: int):
    c = config.constellation
    H, bits, noise = [], [], []
    for t in range(start, stop):
        inst = draw_instance(config.N, config.M, c, 1.0, trial_rng(master_seed, t))
        H.append(inst.H)
        bits.append(inst.bits_true)
        noise.append(inst.noise)
    H, bits, noise = np.stack(H), np.stack(bits), np.stack(noise)
    x = symbols_from_bits(bits, c)
    return H, bits, np.einsum("bmn,bn->bm", H, x), noise


def _detect_errors(scheme, H, y, bits, det_cfg):
    """Per-trial bit error counts; ``-1`` marks a trial whose detector failed."""
    mod = SCHEMES[scheme]
    try:
        return np.count_nonzero(mod.detect(H, y, det_cfg).bits != bits, axis=-1)
    except ArithmeticError:
        out = np.empty(len(H), dtype=int)
        for b in range(len(H)):
            try:
                out[b] = np.count_nonzero(mod.detect(H[b], y[b], det_cfg).bits != bits[b])
            except ArithmeticError as exc:
                log.warning("trial failed (%s): %s", scheme, exc)
                out[b] = -1
        return out


def _run_chunk(config, schemes, snr_grid, master_seed, start, stop):
    H, bits, Hx, unit_noise = _draw_chunk(config, master_seed, start, stop)
    result = {}
    for snr in snr_grid:
        sigma2 = snr_to_sigma2(snr, config.N)
        y = Hx + np.sqrt(sigma2) * unit_noise
        det_cfg = config.detector(sigma2)
        for s in schemes:
            errs = _detect_errors(s, H, y, bits, det_cfg)
            ok = errs >= 0
            result[s, snr] = (int(errs[ok].sum()), int(ok.sum()), int((~ok).sum()))
    return result


def default_threads() -> int:
    env = os.environ.get("ISIC_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(config: SimConfig, snr_grid, trials: int, master_seed: int,
              schemes=("alg1", "alg2"), threads: int | None = None,
              count_flops: bool = False) -> list[BerRecord]:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    snr_grid = [float(s) for s in snr_grid]
    threads = default_threads() if threads is None else threads
    bounds = [(a, min(a + CHUNK, trials)) for a in range(0, trials, CHUNK)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(lambda ab: _run_chunk(config, schemes, snr_grid, master_seed, *ab), bounds))

    per_symbol = config.N * config.constellation.bits_per_symbol
    records = []
    for s in schemes:
        fi = fk = None
        if count_flops:
            fi, fk = measure_flops(s, config.N, config.M, config.K, config.order)
        for snr in snr_grid:
            errors = sum(p[s, snr][0] for p in parts)
            good = sum(p[s, snr][1] for p in parts)
            failed = sum(p[s, snr][2] for p in parts)
            nbits = good * per_symbol
            records.append(BerRecord(
                s, config.N, config.M, config.order, config.K, snr, trials, nbits, errors,
                errors / nbits if nbits else float("nan"), fi, fk, failed,
            ))
    return records


def measure_flops(scheme: str, N: int, M: int, K: int, order: int = 4, snr_db: float = 10.0,
                  seed: int = 0) -> tuple[int, float]:
    """Run the scheme once on a random instance with counting on; return
    (initialization flops, flops per iteration averaged over K)."""
    cfg = SimConfig(N, M, order, K)
    c = cfg.constellation
    sigma2 = snr_to_sigma2(snr_db, N)
    inst = draw_instance(N, M, c, sigma2, trial_rng(seed, 0))
    mod = SCHEMES[scheme]
    if scheme == "hdosic":
        with linalg.counting() as total:
            mod.detect(inst.H, inst.y, cfg.detector(sigma2))
        with linalg.counting() as init:
            mod.init(inst.H, inst.y, sigma2)
        return init.flops(), float(total.flops() - init.flops())
    with linalg.counting() as init:
        state = mod.init(inst.H, inst.y, sigma2, order)
    with linalg.counting() as iters:
        run_isic(state, mod.step, cfg.detector(sigma2))
    return init.flops(), iters.flops() / K


count_flops = measure_flops


@dataclass
class MemoryReport:
    scheme: str
    N: int
    M: int
    matrix_units: int
    breakdown: dict


def expected_memory_units(scheme: str, N: int, M: int) -> int | None:
    return {"alg1": 3 * N * N + 2 * M * N, "alg2": N * N}.get(scheme)


def report_memory(scheme: str, N: int, M: int) -> MemoryReport:
    """Audit the matrices a scheme holds through one iteration.

    One unit stores one real number: a Hermitian n x n matrix costs ``n**2``
    (real diagonal plus one triangle), a general complex r x c matrix ``2 r c``.
    Vectors are not counted.
    """
    cfg = SimConfig(N, M, 4, 1)
    sigma2 = snr_to_sigma2(10.0, N)
    inst = draw_instance(N, M, cfg.constellation, sigma2, trial_rng(0, 0))
    mod = SCHEMES[scheme]
    if scheme == "hdosic":
        state = mod.init(inst.H, inst.y, sigma2)
    else:
        state = mod.init(inst.H, inst.y, sigma2, 4)
        run_isic(state, mod.step, cfg.detector(sigma2))
    breakdown = {}
    for name, (arr, hermitian) in state.matrices().items():
        r, c = arr.shape[-2:]
        breakdown[name] = r * c if hermitian else 2 * r * c
    units = sum(breakdown.values())
    expected = expected_memory_units(scheme, N, M)
    if expected is not None and units != expected:
        raise RuntimeError(f"memory audit for {scheme}: {units} units, formula gives {expected}")
    return MemoryReport(scheme, N, M, units, breakdown)
