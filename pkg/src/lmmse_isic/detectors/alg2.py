"""LMMSE-ISIC that carries a Hermitian inverse and a scaled estimate vector.

The only matrix held during the iterations is the Hermitian
``Q = (Ht^H Ht + sigma2 I)^{-1}`` of the equivalent channel ``Ht = H sqrt(V)``,
together with the vector ``t = sqrt(V^{-1}) Q Ht^H (y - H xbar)``. A procedure
reads its estimate straight off ``Q(n, n)`` and ``t(n)``, and only then
folds the new soft decision and variance of symbol ``n`` back into ``t`` and
``Q`` with O(N) and one-triangle O(N^2/2) work respectively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import linalg
from ..linalg import PositiveDefinitenessLost
from .common import V_MIN, DetectorConfig, Detection, IsicSharedState, apply_soft, check_denominator, run_isic


@dataclass
class Alg2State:
    Q: np.ndarray
    t: np.ndarray
    shared: IsicSharedState
    sigma2: float

    def matrices(self):
        return {"Q": (self.Q, True)}


def init(H, y, sigma2: float, order: int, v_min: float = V_MIN) -> Alg2State:
    Q = linalg.hermitian_inverse(linalg.gram(H), sigma2)
    t = linalg.matvec(Q, linalg.matvec(H, y, conjugate_transpose=True))
    shared = IsicSharedState.initial(H.shape[:-2], H.shape[-1], order, v_min)
    return Alg2State(Q, t, shared, sigma2)


def alg2_estimate(state: Alg2State, n: int):
    s2w = state.sigma2 * state.Q[..., n, n].real
    vn = state.shared.v[..., n]
    den = 1.0 + s2w * (vn - 1.0)
    check_denominator(den, "estimate")
    one_minus = 1.0 - s2w
    x_hat = (vn * state.t[..., n] + state.shared.xbar[..., n] * one_minus) / den
    linalg.tally(cadd=1, rflop=12)
    return x_hat, one_minus / den


def alg2_update_t(state: Alg2State, n: int, xbar_old, v_old, xbar_new, v_new) -> None:
    """Fold ``(xbar_n, v_n): old -> new`` into ``t``.

    Must run before :func:`alg2_update_Q` for the same ``n``: it reads the
    pre-update column ``Q[:, n]`` and diagonal ``Q(n, n)``.
    """
    N = state.t.shape[-1]
    keep = np.delete(np.arange(N), n)
    s2w = state.sigma2 * state.Q[..., n, n].real
    den = v_new + s2w * (v_old - v_new)
    check_denominator(den, "t update")
    tn = state.t[..., n]
    dx = xbar_new - xbar_old
    coef = state.sigma2 * (dx + (v_new - v_old) * tn) / den
    weight = np.sqrt(v_old[..., None] / state.shared.v[..., keep])
    q = state.Q[..., keep, n]
    state.t[..., keep] += (coef[..., None] * weight) * q
    state.t[..., n] = (v_old * tn + dx * (s2w - 1.0)) / den
    m = N - 1
    linalg.tally(cmul=m, cadd=m + 3, rflop=4 * m + 20)


def alg2_update_Q(state: Alg2State, n: int, v_old, v_new) -> None:
    """Fold ``v_n: v_old -> v_new`` into ``Q`` (one rank-1 triangle update of
    the block without ``n``, then a rescaled row/column ``n``)."""
    Q = state.Q
    N = Q.shape[-1]
    keep = np.delete(np.arange(N), n)
    w_old = Q[..., n, n].real
    den = v_new + state.sigma2 * w_old * (v_old - v_new)
    check_denominator(den, "Q update")
    w_new = w_old * v_old / den
    if not np.all(w_new > 0):
        raise PositiveDefinitenessLost(f"Q({n},{n}) became non-positive")
    c = (w_new * v_new - w_old * v_old) / (w_old**2 * v_old)
    q = Q[..., keep, n].copy()
    linalg.rank1_update(Q, c, q, skip=n)
    q *= ((w_new / w_old) * np.sqrt(v_new / v_old))[..., None]
    Q[..., keep, n] = q
    Q[..., n, keep] = q.conj()
    Q[..., n, n] = w_new
    linalg.tally(rflop=2 * (N - 1) + 16)


def step(state: Alg2State, n, c, soft_fn):
    x_hat, mu = alg2_estimate(state, n)
    xbar_old, v_old = apply_soft(state.shared, n, soft_fn(x_hat, mu, c))
    xbar_new, v_new = state.shared.xbar[..., n], state.shared.v[..., n]
    alg2_update_t(state, n, xbar_old, v_old, xbar_new, v_new)
    alg2_update_Q(state, n, v_old, v_new)
    return x_hat, mu


def detect(H, y, config: DetectorConfig, **kw) -> Detection:
    state = init(H, y, config.sigma2, config.constellation.order, config.v_min)
    return run_isic(state, step, config, **kw)
