import logging

import numpy as np
import pytest

from lmmse_isic import linalg, sim
from lmmse_isic.detectors import SCHEMES
from lmmse_isic.linalg import DegenerateUpdateError
from lmmse_isic.sim import SimConfig


class TestGenerators:
    def test_channel_moments(self):
        H = sim.gen_channel(1000, 1000, np.random.default_rng(5))
        assert np.mean(np.abs(H) ** 2) == pytest.approx(1.0, abs=0.01)
        # mean-zero z-test, each part has variance 1/2
        for part in (H.real, H.imag):
            z = part.mean() / np.sqrt(0.5 / part.size)
            assert abs(z) < 4
            assert part.var() == pytest.approx(0.5, rel=0.01)

    def test_noise_moments(self):
        rng = np.random.default_rng(6)
        n = np.concatenate([sim.gen_noise(1000, 0.3, rng) for _ in range(1000)])
        assert np.mean(np.abs(n) ** 2) == pytest.approx(0.3, rel=0.01)
        for part in (n.real, n.imag):
            assert abs(part.mean() / np.sqrt(0.15 / part.size)) < 4

    def test_determinism(self):
        a = sim.gen_channel(4, 3, sim.trial_rng(9, 17))
        b = sim.gen_channel(4, 3, sim.trial_rng(9, 17))
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(sim.gen_noise(4, 0.5, sim.trial_rng(1, 2)),
                                      sim.gen_noise(4, 0.5, sim.trial_rng(1, 2)))
        assert not np.array_equal(a, sim.gen_channel(4, 3, sim.trial_rng(9, 18)))

    def test_rejects(self):
        with pytest.raises(ValueError):
            sim.gen_channel(2, 3, np.random.default_rng())
        with pytest.raises(ValueError):
            sim.gen_noise(2, 0.0, np.random.default_rng())

    def test_instance_is_consistent(self):
        inst = sim.draw_instance(3, 5, SimConfig(3, 5, 16).constellation, 0.2, sim.trial_rng(0, 0))
        np.testing.assert_array_equal(inst.y, inst.H @ inst.x_true + inst.noise)
        assert inst.bits_true.size == 12


@pytest.mark.parametrize("snr,N,expect", [(0, 1, 1.0), (10, 4, 0.4), (3.0103, 2, 1.0)])
def test_snr_to_sigma2(snr, N, expect):
    assert sim.snr_to_sigma2(snr, N) == pytest.approx(expect, abs=1e-4)


class TestTrials:
    def test_noiseless(self):
        r = sim.run_trial(SimConfig(4, 8, 16, 2), "alg2", sim.trial_rng(3, 0), snr_db=200)
        assert r.bit_errors == 0 and r.bits == 16

    def test_schemes_agree(self):
        cfg = SimConfig(8, 8, 4, 3)
        for t in range(20):
            a = sim.run_trial(cfg, "alg1", sim.trial_rng(4, t), snr_db=6)
            b = sim.run_trial(cfg, "alg2", sim.trial_rng(4, t), snr_db=6)
            assert a.bit_errors == b.bit_errors

    def test_flop_sample(self):
        r = sim.run_trial(SimConfig(4, 4), "alg2", sim.trial_rng(0, 0), count_flops=True)
        assert r.flops.flops() > 0
        assert sim.run_trial(SimConfig(4, 4), "alg2", sim.trial_rng(0, 0)).flops is None

    def test_iterations_help(self):
        # 10^4 trials, N = M = 16, 4-QAM, 14 dB
        k3, k1 = (sim.run_sweep(SimConfig(16, 16, 4, K), [14.0], 10_000, 11, ("alg2",))[0]
                  for K in (3, 1))
        assert k3.ber < k1.ber


class TestSweep:
    def test_single_trial_equals_run_trial(self):
        cfg = SimConfig(4, 6, 16, 2)
        rec = sim.run_sweep(cfg, [8.0], 1, 21, ("alg2",), threads=1)[0]
        r = sim.run_trial(cfg, "alg2", sim.trial_rng(21, 0), snr_db=8.0)
        assert (rec.bit_errors, rec.bits) == (r.bit_errors, r.bits)

    def test_threads_do_not_matter(self):
        cfg = SimConfig(4, 4, 4, 2)
        a = sim.run_sweep(cfg, [0, 5, 10], 700, 3, threads=1)
        b = sim.run_sweep(cfg, [0, 5, 10], 700, 3, threads=8)
        assert a == b

    def test_record_bookkeeping(self):
        recs = sim.run_sweep(SimConfig(2, 3, 16, 1), [0.0, 4.0], 30, 1, ("alg1", "conv"), threads=2)
        assert [(r.scheme, r.snr_db) for r in recs] == [("alg1", 0.0), ("alg1", 4.0), ("conv", 0.0), ("conv", 4.0)]
        for r in recs:
            assert r.bits == 30 * 2 * 4
            assert r.ber == r.bit_errors / r.bits
            assert 0 <= r.ber <= 1

    def test_failures_are_recorded(self, monkeypatch, caplog):
        real = SCHEMES["alg2"].detect
        calls = {"n": 0}

        def flaky(H, y, cfg, **kw):
            calls["n"] += 1
            if H.ndim == 3 or calls["n"] % 3 == 0:
                raise DegenerateUpdateError("injected")
            return real(H, y, cfg, **kw)

        monkeypatch.setattr(SCHEMES["alg2"], "detect", flaky)
        with caplog.at_level(logging.WARNING):
            rec = sim.run_sweep(SimConfig(2, 2), [10.0], 9, 0, ("alg2",), threads=1)[0]
        assert rec.failures == 3
        assert rec.bits == 6 * 4
        assert "injected" in caplog.text

    def test_rejects(self):
        with pytest.raises(ValueError):
            sim.run_sweep(SimConfig(2, 2), [0.0], 0, 0)
        with pytest.raises(ValueError):
            sim.run_sweep(SimConfig(2, 2), [0.0], 1, 0, ("ml",))
        with pytest.raises(ValueError):
            SimConfig(4, 2)

    def test_thread_env(self, monkeypatch):
        monkeypatch.setenv("ISIC_THREADS", "3")
        assert sim.default_threads() == 3


class TestFlops:
    def test_counter_merges_across_threads(self):
        cfg = SimConfig(4, 4)
        total = linalg.FlopCounter()
        for t in range(4):
            total += sim.run_trial(cfg, "alg1", sim.trial_rng(0, t), count_flops=True).flops
        with linalg.counting() as fc:
            for t in range(4):
                sim.run_trial(cfg, "alg1", sim.trial_rng(0, t))
        assert fc == total

    def test_per_iteration_scaling(self):
        # dominant terms: alg2 ~ N^3/2 complex op pairs, alg1 ~ 2N^3 + 2MN^2
        _, a2 = sim.measure_flops("alg2", 32, 32, 2)
        _, a2b = sim.measure_flops("alg2", 64, 64, 2)
        assert a2b / a2 == pytest.approx(8, rel=0.1)
        _, a1 = sim.measure_flops("alg1", 32, 32, 2)
        assert a1 / (8 * 4 * 32**3) == pytest.approx(1, rel=0.15)

    def test_hdosic_flops(self):
        init, rest = sim.measure_flops("hdosic", 8, 8, 1)
        assert init > 0 and rest > 0


class TestMemory:
    @pytest.mark.parametrize("N,M,a1,a2", [(32, 64, 7168, 1024), (1, 1, 5, 1), (16, 16, 1280, 256)])
    def test_units(self, N, M, a1, a2):
        assert sim.report_memory("alg1", N, M).matrix_units == a1
        assert sim.report_memory("alg2", N, M).matrix_units == a2

    def test_ratio_at_square(self):
        assert sim.report_memory("alg2", 8, 8).matrix_units * 5 == sim.report_memory("alg1", 8, 8).matrix_units

    def test_breakdown(self):
        rep = sim.report_memory("alg1", 4, 6)
        assert rep.breakdown == {"W": 16, "G": 32, "H": 48}
