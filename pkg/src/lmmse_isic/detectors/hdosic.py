"""Recursive hard-decision ordered SIC.

The inverse ``Q_n = (H_n^H H_n + sigma2 I)^{-1}`` is grown one column at a
time with the partitioned-inverse lemma, then shrunk one detected layer at a
time. The symbol estimate vector ``t = Q_n H_n^H y^(n)`` carries the
interference cancellation, so ``y`` is never touched after initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import linalg
from ..constellation import nearest_index
from ..linalg import PositiveDefinitenessLost, SingularMatrixError
from .common import DetectorConfig, Detection


@dataclass
class HdosicState:
    Q: np.ndarray
    t: np.ndarray
    active: np.ndarray
    decisions: np.ndarray

    def matrices(self):
        return {"Q": (self.Q, True)}


def hdosic_expand(Q_prev, r, gamma):
    """Inverse of ``[[R, r], [r^H, gamma]]`` from ``Q_prev = R^{-1}``."""
    gamma = np.asarray(gamma, dtype=float)
    m = Q_prev.shape[-1]
    if m == 0:
        if not np.all(gamma > 0):
            raise SingularMatrixError("non-positive Schur complement")
        return (1.0 / gamma)[..., None, None].astype(complex)
    Qr = linalg.matvec(Q_prev, r)
    schur = gamma - linalg.dot(r, Qr).real
    if not np.all(schur > 0):
        raise SingularMatrixError("non-positive Schur complement")
    w = 1.0 / schur
    q = -w[..., None] * Qr
    out = np.empty(Q_prev.shape[:-2] + (m + 1, m + 1), dtype=complex)
    out[..., :m, :m] = Q_prev
    linalg.rank1_update(out[..., :m, :m], 1.0 / w, q)
    out[..., :m, m] = q
    out[..., m, :m] = q.conj()
    out[..., m, m] = w
    linalg.tally(rflop=2 * m + 3)
    return out


def hdosic_deflate(Q, k: int):
    """Inverse for the channel with column ``k`` removed."""
    n = Q.shape[-1]
    keep = np.delete(np.arange(n), k)
    w = Q[..., k, k].real
    if not np.all(w > 0):
        raise PositiveDefinitenessLost(f"Q({k},{k}) is not positive")
    q = Q[..., keep, k]
    out = Q[..., keep, :][..., :, keep].copy()
    linalg.rank1_update(out, -1.0 / w, q)
    return out


def init(H, y, sigma2: float) -> HdosicState:
    N = H.shape[-1]
    batch = H.shape[:-2]
    Q = np.zeros(batch + (0, 0), dtype=complex)
    for n in range(N):
        h = H[..., :, n]
        r = linalg.matvec(H[..., :, :n], h, conjugate_transpose=True)
        gamma = linalg.dot(h, h).real + sigma2
        Q = hdosic_expand(Q, r, gamma)
    t = linalg.matvec(Q, linalg.matvec(H, y, conjugate_transpose=True))
    active = np.broadcast_to(np.arange(N), batch + (N,)).copy()
    decisions = np.full(batch + (N,), -1)
    return HdosicState(Q, t, active, decisions)


def _move_last(a, pos, axes):
    """Permute ``a`` along ``axes`` so per-instance position ``pos`` is last."""
    n = a.shape[-1]
    idx = np.arange(n)
    order = np.argsort(idx == pos[..., None], axis=-1, kind="stable")
    for ax in axes:
        shape = [1] * a.ndim
        shape[: order.ndim - 1] = order.shape[:-1]
        shape[ax] = n
        a = np.take_along_axis(a, order.reshape(shape), axis=ax)
    return a


def detect(H, y, config: DetectorConfig, order=None, trace: bool = False) -> Detection:
    """Hard-decision SIC. ``order=None`` picks, at every stage, the undetected
    layer with the smallest ``Q`` diagonal (highest post-MMSE SNR); otherwise
    ``order`` lists original column indices in detection order."""
    c = config.constellation
    state = init(H, y, config.sigma2)
    N = config.N
    rec = {"x_hat": [], "mu": [], "layer": []} if trace else None
    for step in range(N):
        diag = np.diagonal(state.Q, axis1=-2, axis2=-1).real
        if order is None:
            pos = np.argmin(diag, axis=-1)
        else:
            pos = np.argmax(state.active == order[step], axis=-1)
        state.Q = _move_last(state.Q, pos, (-2, -1))
        state.t = _move_last(state.t, pos, (-1,))
        state.active = _move_last(state.active, pos, (-1,))
        w = state.Q[..., -1, -1].real
        x_hat = state.t[..., -1]
        mu = 1.0 - config.sigma2 * w
        idx = nearest_index(x_hat, mu, c)
        layer = state.active[..., -1]
        np.put_along_axis(state.decisions, layer[..., None], idx[..., None], axis=-1)
        if rec is not None:
            rec["x_hat"].append(x_hat.copy())
            rec["mu"].append(mu)
            rec["layer"].append(layer.copy())
        if step == N - 1:
            break
        q = state.Q[..., :-1, -1]
        state.t = state.t[..., :-1] + ((c.points[idx] - x_hat) / w)[..., None] * q
        m = q.shape[-1]
        linalg.tally(cmul=m, cadd=m + 1, rflop=2)
        state.Q = hdosic_deflate(state.Q, state.Q.shape[-1] - 1)
        state.active = state.active[..., :-1]
    if rec is not None:
        rec = {k: np.stack(v) for k, v in rec.items()}
    return Detection(state.decisions, c, rec)
