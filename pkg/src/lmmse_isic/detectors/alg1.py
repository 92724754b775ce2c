"""Existing low-complexity LMMSE-ISIC based on the affine MMSE filter.

Keeps the non-Hermitian ``G = (W V + sigma2 I)^{-1}`` with ``W = H^H H`` and
patches it with a Sherman-Morrison-Woodbury step whenever one residual
variance changes. The patch for symbol ``j`` is applied at the start of the
procedure that follows the one that produced the new variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import linalg
from .common import V_MIN, DetectorConfig, Detection, IsicSharedState, apply_soft, check_denominator, run_isic


@dataclass
class Alg1State:
    G: np.ndarray
    W: np.ndarray
    H: np.ndarray
    y: np.ndarray
    shared: IsicSharedState
    sigma2: float
    pending: tuple | None = None  # (index, variance before its last write)

    def effective_v(self) -> np.ndarray:
        """The variance vector ``G`` currently corresponds to."""
        if self.pending is None:
            return self.shared.v
        j, v_old = self.pending
        v = self.shared.v.copy()
        v[..., j] = v_old
        return v

    def matrices(self):
        return {"W": (self.W, True), "G": (self.G, False), "H": (self.H, False)}


def init(H, y, sigma2: float, order: int, v_min: float = V_MIN) -> Alg1State:
    W = linalg.gram(H)
    G = linalg.hermitian_inverse(W, sigma2)
    shared = IsicSharedState.initial(H.shape[:-2], H.shape[-1], order, v_min)
    return Alg1State(G, W, H, y, shared, sigma2)


def alg1_update_G(state: Alg1State, j: int, v_old, v_new) -> None:
    """Rank-1 patch of ``G`` for ``v_j: v_old -> v_new``."""
    dv = np.asarray(v_new - v_old)
    z = linalg.matvec(state.G, state.W[..., :, j]) * dv[..., None]
    N = state.G.shape[-1]
    linalg.tally(rflop=2 * N + 1)
    den = z[..., j] + 1.0
    check_denominator(den, "G update")
    scaled = z / den[..., None]
    linalg.tally(cmul=N, cadd=1)
    linalg.outer_subtract(state.G, scaled, state.G[..., j, :].copy())


def alg1_procedure(state: Alg1State, n: int):
    H, shared = state.H, state.shared
    y_tilde = state.y - linalg.matvec(H, shared.xbar)
    linalg.tally(cadd=H.shape[-2])
    f = linalg.matvec(H, state.G[..., n, :].conj())
    h = H[..., :, n]
    alpha = linalg.dot(f, h).real
    vn = shared.v[..., n]
    den = (1.0 - vn) * alpha + 1.0
    check_denominator(den, "beta")
    beta = 1.0 / den
    x_hat = beta * linalg.dot(f, y_tilde) + alpha * beta * shared.xbar[..., n]
    linalg.tally(cmul=1, cadd=1, rflop=10)
    return x_hat, alpha * beta


def step(state: Alg1State, n, c, soft_fn):
    if state.pending is not None:
        j, v_old = state.pending
        alg1_update_G(state, j, v_old, state.shared.v[..., j])
    x_hat, mu = alg1_procedure(state, n)
    _, v_old = apply_soft(state.shared, n, soft_fn(x_hat, mu, c))
    state.pending = (n, v_old)
    return x_hat, mu


def detect(H, y, config: DetectorConfig, **kw) -> Detection:
    state = init(H, y, config.sigma2, config.constellation.order, config.v_min)
    return run_isic(state, step, config, **kw)
