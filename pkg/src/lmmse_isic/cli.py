"""Command-line driver: run a BER sweep, write CSV, optionally draw SVGs.

Example::

    lmmse-isic --n 16 --m 16 --mod 4qam --iters 3 --snr 0:2:20 \\
        --trials 10000 --seed 7 --scheme alg1,alg2 --out r.csv --plot r
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from .constellation import SUPPORTED_ORDERS, parse_modulation
from .detectors import SCHEMES
from .plots import emit_plots
from .sim import SNR_CONVENTION, BerRecord, SimConfig, run_sweep

log = logging.getLogger("lmmse_isic")

CSV_HEADER = ["scheme", "N", "M", "mod", "K", "snr_db", "trials", "bits", "bit_errors", "ber",
              "flops_init", "flops_per_iter"]


@dataclass(frozen=True)
class ExperimentConfig:
    schemes: tuple[str, ...]
    sizes: tuple[tuple[int, int], ...]
    order: int
    K: int
    snr_start: float
    snr_step: float
    snr_stop: float
    trials: int
    seed: int
    count_flops: bool
    out_path: Path
    plot_path: Path | None = None
    threads: int | None = None

    @property
    def N(self) -> int:
        return self.sizes[0][0]

    @property
    def M(self) -> int:
        return self.sizes[0][1]

    def snr_grid(self) -> list[float]:
        return snr_grid(self.snr_start, self.snr_step, self.snr_stop)


def snr_grid(start: float, step: float, stop: float) -> list[float]:
    """Inclusive of ``stop`` when it lies on the grid within 1e-9."""
    count = math.floor((stop - start) / step + 1e-9)
    return [start + i * step for i in range(count + 1)] if count >= 0 else []


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lmmse-isic",
        description="Uncoded BER sweeps and flop counts for LMMSE-ISIC MIMO detectors. "
                    f"SNR convention: {SNR_CONVENTION}.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--n", type=_int_list, default=[16], metavar="N[,N...]",
                   help="transmit streams; a comma list runs one sweep per size")
    p.add_argument("--m", type=_int_list, default=None, metavar="M[,M...]",
                   help="receive antennas (default: M = N); one value or one per N")
    p.add_argument("--mod", default="4qam",
                   help="modulation: " + ", ".join(f"{o}qam" for o in SUPPORTED_ORDERS))
    p.add_argument("--iters", type=int, default=3, help="ISIC iterations K")
    p.add_argument("--snr", default="0:2:20", help="SNR grid start:step:stop in dB, or one value")
    p.add_argument("--trials", type=int, default=10000, help="channel realizations per point")
    p.add_argument("--seed", type=int, default=1, help="master seed")
    p.add_argument("--scheme", default="alg1,alg2",
                   help="comma list from: " + ", ".join(SCHEMES))
    p.add_argument("--count-flops", action="store_true",
                   help="measure init and per-iteration flops for each scheme and size")
    p.add_argument("--out", default="results.csv", help="CSV output path")
    p.add_argument("--plot", default=None, metavar="PREFIX",
                   help="write PREFIX_ber.svg (and flop charts when available)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $ISIC_THREADS or CPU count)")
    p.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    return p


def parse_args(argv=None) -> ExperimentConfig:
    parser = build_parser()
    a = parser.parse_args(argv)

    try:
        c = parse_modulation(a.mod)
    except ValueError:
        parser.error(f"--mod: unsupported modulation {a.mod!r}; supported orders: "
                     + ", ".join(f"{o}qam" for o in SUPPORTED_ORDERS))

    schemes = tuple(s.strip() for s in a.scheme.split(",") if s.strip())
    bad = [s for s in schemes if s not in SCHEMES]
    if bad or not schemes:
        parser.error(f"--scheme: unknown scheme(s) {bad}; choose from {', '.join(SCHEMES)}")

    Ns = a.n
    Ms = a.m if a.m is not None else Ns
    if len(Ms) == 1:
        Ms = Ms * len(Ns)
    if len(Ms) != len(Ns):
        parser.error("--m: give one value or one per --n value")
    for n, m in zip(Ns, Ms):
        if m < n:
            parser.error(f"--m: M must be ≥ N (got N={n}, M={m})")

    parts = a.snr.split(":")
    try:
        if len(parts) == 1:
            start = stop = float(parts[0])
            step = 1.0
        elif len(parts) == 3:
            start, step, stop = (float(v) for v in parts)
        else:
            raise ValueError
    except ValueError:
        parser.error(f"--snr: expected start:step:stop or a single value, got {a.snr!r}")
    if not step > 0:
        parser.error("--snr: step must be positive")
    if not snr_grid(start, step, stop):
        parser.error(f"--snr: empty SNR grid {a.snr!r}")

    if a.iters < 1:
        parser.error("--iters: K must be at least 1")
    if a.trials < 1:
        parser.error("--trials: must be at least 1")
    if a.threads is not None and a.threads < 1:
        parser.error("--threads: must be at least 1")

    return ExperimentConfig(
        schemes=schemes, sizes=tuple(zip(Ns, Ms)), order=c.order, K=a.iters,
        snr_start=start, snr_step=step, snr_stop=stop, trials=a.trials, seed=a.seed,
        count_flops=a.count_flops, out_path=Path(a.out),
        plot_path=Path(a.plot) if a.plot else None, threads=a.threads,
    )


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def emit_csv(records, path) -> None:
    if not records:
        raise ValueError("no records to write")
    rows = sorted(records, key=lambda r: (r.scheme, r.snr_db))
    with open(path, "w", newline="") as fh:
        fh.write(f"# snr_convention={SNR_CONVENTION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.scheme, r.N, r.M, f"{r.order}qam", r.K, _num(r.snr_db), r.trials,
                        r.bits, r.bit_errors, _num(r.ber), _num(r.flops_init),
                        _num(r.flops_per_iter)])


def read_csv(path) -> list[BerRecord]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        out.append(BerRecord(
            scheme=row["scheme"], N=int(row["N"]), M=int(row["M"]),
            order=int(row["mod"].removesuffix("qam")), K=int(row["K"]),
            snr_db=float(row["snr_db"]), trials=int(row["trials"]), bits=int(row["bits"]),
            bit_errors=int(row["bit_errors"]), ber=float(row["ber"]),
            flops_init=int(row["flops_init"]) if row["flops_init"] else None,
            flops_per_iter=float(row["flops_per_iter"]) if row["flops_per_iter"] else None,
        ))
    return out


def run(cfg: ExperimentConfig) -> list[BerRecord]:
    records = []
    for n, m in cfg.sizes:
        records += run_sweep(SimConfig(n, m, cfg.order, cfg.K), cfg.snr_grid(), cfg.trials,
                             cfg.seed, cfg.schemes, cfg.threads, cfg.count_flops)
    return records


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    cfg = parse_args(argv)
    records = run(cfg)
    for r in records:
        if r.failures:
            log.warning("%s N=%d M=%d snr=%g: %d failed trials excluded", r.scheme, r.N, r.M,
                        r.snr_db, r.failures)
    try:
        emit_csv(records, cfg.out_path)
        if cfg.plot_path is not None:
            for p in emit_plots(records, cfg.plot_path):
                log.info("wrote %s", p)
    except OSError as exc:
        print(f"lmmse-isic: cannot write output: {exc}", file=sys.stderr)
        return 1
    log.info("wrote %d records to %s (snr_convention=%s)", len(records), cfg.out_path,
             SNR_CONVENTION)
    return 0


if __name__ == "__main__":
    sys.exit(main())
