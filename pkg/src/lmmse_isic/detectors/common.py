"""Pieces shared by the ISIC detectors: configuration, the soft-decision
state, the fixed-K iteration driver and the detection result."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..linalg import DENOMINATOR_FLOOR, DegenerateUpdateError
from ..constellation import Constellation, SoftStats, bits_from_hard_indices, soft_statistics

V_MIN = 1e-8
# what a hard decision reports as its residual variance
HARD_VARIANCE = 1e-12

SoftFn = Callable[[np.ndarray, np.ndarray, Constellation], SoftStats]


@dataclass(frozen=True)
class DetectorConfig:
    N: int
    M: int
    K: int
    constellation: Constellation
    sigma2: float
    v_min: float = V_MIN

    def __post_init__(self):
        if self.N < 1 or self.M < self.N:
            raise ValueError(f"need M >= N >= 1, got N={self.N}, M={self.M}")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not 0 < self.v_min <= 1:
            raise ValueError("v_min must lie in (0, 1]")


@dataclass
class IsicSharedState:
    """Soft decisions, residual variances and last posteriors, batched."""

    xbar: np.ndarray
    v: np.ndarray
    posteriors: np.ndarray
    v_min: float = V_MIN

    @classmethod
    def initial(cls, batch_shape, N: int, order: int, v_min: float = V_MIN) -> "IsicSharedState":
        return cls(
            xbar=np.zeros(batch_shape + (N,), dtype=complex),
            v=np.ones(batch_shape + (N,)),
            posteriors=np.full(batch_shape + (N, order), 1.0 / order),
            v_min=v_min,
        )


def hard_decision_stats(x_hat, mu, c: Constellation) -> SoftStats:
    """Drop-in for ``soft_statistics`` that commits to the most likely point
    with (near) zero residual variance."""
    s = soft_statistics(x_hat, mu, c)
    onehot = np.zeros_like(s.posterior)
    np.put_along_axis(onehot, s.hard_index[..., None], 1.0, axis=-1)
    return SoftStats(onehot, c.points[s.hard_index], np.full(s.hard_index.shape, HARD_VARIANCE), s.hard_index)


@dataclass
class Detection:
    indices: np.ndarray
    constellation: Constellation = field(repr=False)
    trace: dict | None = None

    @property
    def bits(self) -> np.ndarray:
        return bits_from_hard_indices(self.indices, self.constellation)

    @property
    def symbols(self) -> np.ndarray:
        return self.constellation.points[self.indices]


def run_isic(state, step, config: DetectorConfig, *, soft_fn: SoftFn | None = None,
             trace: bool = False, on_procedure=None, iterations: int | None = None) -> Detection:
    """Drive ``K`` iterations of ``N`` procedures in natural order.

    ``step(state, n, c, soft_fn)`` runs one procedure and returns
    ``(x_hat, mu)``. ``on_procedure(state, k, n)`` is called after each one.
    """
    soft_fn = soft_fn or soft_statistics
    K = config.K if iterations is None else iterations
    rec = {"x_hat": [], "mu": [], "v": []} if trace else None
    for k in range(K):
        for n in range(config.N):
            x_hat, mu = step(state, n, config.constellation, soft_fn)
            if rec is not None:
                rec["x_hat"].append(np.copy(x_hat))
                rec["mu"].append(np.copy(mu))
                rec["v"].append(np.copy(state.shared.v[..., n]))
            if on_procedure is not None:
                on_procedure(state, k, n)
    if rec is not None:
        rec = {key: np.stack(val).reshape((K, config.N) + np.shape(val[0])) for key, val in rec.items()}
    indices = np.argmax(state.shared.posteriors, axis=-1)
    return Detection(indices, config.constellation, rec)


def apply_soft(shared: IsicSharedState, n: int, stats: SoftStats):
    """Write one symbol's new soft decision and variance; return the old pair."""
    xbar_old = shared.xbar[..., n].copy()
    v_old = shared.v[..., n].copy()
    shared.xbar[..., n] = stats.soft_decision
    shared.v[..., n] = np.clip(stats.residual_variance, shared.v_min, 1.0)
    shared.posteriors[..., n, :] = stats.posterior
    return xbar_old, v_old


def check_denominator(d, what: str):
    if np.any(np.abs(d) < DENOMINATOR_FLOOR) or not np.all(np.isfinite(d)):
        raise DegenerateUpdateError(f"degenerate denominator in {what}")
