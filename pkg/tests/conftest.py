import numpy as np
import pytest

from lmmse_isic.constellation import build_constellation, symbols_from_bits
from lmmse_isic.detectors import DetectorConfig


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class Instance:
    def __init__(self, rng, N, M, order=4, snr_db=10.0, K=3, v_min=None):
        self.c = build_constellation(order)
        self.sigma2 = N / 10 ** (snr_db / 10)
        self.H = crandn(rng, M, N)
        self.bits = rng.integers(0, 2, N * self.c.bits_per_symbol)
        self.x = symbols_from_bits(self.bits, self.c)
        self.y = self.H @ self.x + np.sqrt(self.sigma2) * crandn(rng, M)
        kw = {} if v_min is None else {"v_min": v_min}
        self.cfg = DetectorConfig(N, M, K, self.c, self.sigma2, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def instance(rng):
    def make(N=4, M=4, order=4, snr_db=10.0, K=3, v_min=None):
        return Instance(rng, N, M, order, snr_db, K, v_min)

    return make


ACCEPTANCE_LINES = []


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
