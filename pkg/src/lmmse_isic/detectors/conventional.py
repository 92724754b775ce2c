"""Conventional LMMSE-ISIC: every procedure re-inverts the M x M
interference-plus-noise covariance. Slow, literal, used as the oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import linalg
from .common import V_MIN, DetectorConfig, Detection, IsicSharedState, apply_soft, run_isic


@dataclass
class ConvState:
    H: np.ndarray
    y: np.ndarray
    sigma2: float
    shared: IsicSharedState

    def matrices(self):
        return {"H": (self.H, False)}


def conv_procedure(H, y, shared: IsicSharedState, n: int, sigma2: float):
    """Estimate and bias for symbol ``n`` with its own soft decision removed
    from the cancellation and its variance reset to one."""
    xbar_hat = shared.xbar.copy()
    xbar_hat[..., n] = 0.0
    v_hat = shared.v.copy()
    v_hat[..., n] = 1.0
    y_sic = y - linalg.matvec(H, xbar_hat)
    linalg.tally(cadd=H.shape[-2])
    scaled = H * np.sqrt(v_hat)[..., None, :]
    M, N = H.shape[-2:]
    linalg.tally(rflop=N + 2 * M * N)
    D = linalg.hermitian_inverse(linalg.gram(scaled.conj().swapaxes(-1, -2)), sigma2)
    h = H[..., :, n]
    f = linalg.matvec(D, h)
    return linalg.dot(f, y_sic), linalg.dot(f, h).real


def init(H, y, sigma2: float, order: int, v_min: float = V_MIN) -> ConvState:
    return ConvState(H, y, sigma2, IsicSharedState.initial(H.shape[:-2], H.shape[-1], order, v_min))


def step(state: ConvState, n, c, soft_fn):
    x_hat, mu = conv_procedure(state.H, state.y, state.shared, n, state.sigma2)
    apply_soft(state.shared, n, soft_fn(x_hat, mu, c))
    return x_hat, mu


def detect(H, y, config: DetectorConfig, **kw) -> Detection:
    state = init(H, y, config.sigma2, config.constellation.order, config.v_min)
    return run_isic(state, step, config, **kw)
