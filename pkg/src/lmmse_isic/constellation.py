"""Square Gray-mapped QAM and the per-symbol soft statistics used by every
ISIC detector.

Point ``k`` of a constellation carries the bit label of the integer ``k``
(MSB first). The upper half of the bits selects the in-phase level, the lower
half the quadrature level; per axis, levels in increasing amplitude carry the
reflected binary code of their position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg

SUPPORTED_ORDERS = (4, 16, 64)
MU_MIN = 1e-12
ETA2_MIN = 1e-30


def _gray(i):
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    order: int
    points: np.ndarray = field(repr=False)
    bit_labels: np.ndarray = field(repr=False)
    energy_scale: float

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def name(self) -> str:
        return f"{self.order}qam"


def build_constellation(order: int) -> Constellation:
    if order not in SUPPORTED_ORDERS:
        raise ValueError(
            f"unsupported QAM order {order}; supported orders: "
            + ", ".join(str(o) for o in SUPPORTED_ORDERS)
        )
    m = int(np.log2(order))
    half = m // 2
    side = 1 << half
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    # position of each Gray label along the axis
    level_of_label = np.empty(side, dtype=int)
    level_of_label[_gray(np.arange(side))] = np.arange(side)
    k = np.arange(order)
    i_lab, q_lab = k >> half, k & (side - 1)
    scale = 1.0 / np.sqrt(2.0 * (order - 1) / 3.0)
    points = scale * (levels[level_of_label[i_lab]] + 1j * levels[level_of_label[q_lab]])
    labels = ((k[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)
    points.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(order, points, labels, float(scale))


def parse_modulation(text: str) -> Constellation:
    """Accept ``4qam``, ``16-QAM``, ``qpsk`` or a bare order."""
    t = text.strip().lower().replace("-", "")
    if t == "qpsk":
        t = "4"
    t = t.removesuffix("qam")
    try:
        order = int(t)
    except ValueError:
        order = -1
    return build_constellation(order)


def symbols_from_bits(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits)
    m = c.bits_per_symbol
    if bits.shape[-1] % m:
        raise ValueError(f"bit count {bits.shape[-1]} is not a multiple of {m}")
    return c.points[indices_from_bits(bits, c)]


def indices_from_bits(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits)
    m = c.bits_per_symbol
    if bits.shape[-1] % m:
        raise ValueError(f"bit count {bits.shape[-1]} is not a multiple of {m}")
    grouped = bits.reshape(bits.shape[:-1] + (-1, m)).astype(np.int64)
    return grouped @ (1 << np.arange(m - 1, -1, -1))


def bits_from_hard_indices(indices, c: Constellation) -> np.ndarray:
    indices = np.asarray(indices)
    if np.any((indices < 0) | (indices >= c.order)):
        raise ValueError("symbol index out of range for this constellation")
    lab = c.bit_labels[indices]
    return lab.reshape(indices.shape[:-1] + (-1,)) if indices.ndim else lab


@dataclass
class SoftStats:
    posterior: np.ndarray
    soft_decision: np.ndarray
    residual_variance: np.ndarray
    hard_index: np.ndarray


def posterior_from_exponents(e: np.ndarray) -> np.ndarray:
    """Normalize ``exp(e)`` along the last axis after shifting by the max."""
    e = e - e.max(axis=-1, keepdims=True)
    psi = np.exp(e)
    return psi / psi.sum(axis=-1, keepdims=True)


def soft_statistics(x_hat, mu, c: Constellation) -> SoftStats:
    """Gaussian-approximation posterior over the alphabet and its moments.

    Works elementwise over any batch shape shared by ``x_hat`` and ``mu``.
    The bias is clamped into ``[MU_MIN, 1 - MU_MIN]`` and the effective
    variance ``mu (1 - mu)`` floored at ``ETA2_MIN``.
    """
    x_hat = np.asarray(x_hat, dtype=complex)
    mu = np.clip(np.asarray(mu, dtype=float), MU_MIN, 1.0 - MU_MIN)
    eta2 = np.maximum(mu * (1.0 - mu), ETA2_MIN)
    d = x_hat[..., None] - mu[..., None] * c.points
    dist = d.real**2 + d.imag**2
    P = posterior_from_exponents(-dist / eta2[..., None])
    xbar = P @ c.points
    r = c.points - xbar[..., None]
    v = np.sum(P * (r.real**2 + r.imag**2), axis=-1)
    hard = np.argmax(P, axis=-1)
    K = c.order
    linalg.tally(cadd=3 * K, rflop=16 * K + 6)
    return SoftStats(P, xbar, v, hard)


def nearest_index(x_hat, mu, c: Constellation) -> np.ndarray:
    """``argmin_x |x_hat - mu x|^2``; ties go to the lowest index."""
    d = np.asarray(x_hat)[..., None] - np.asarray(mu)[..., None] * c.points
    return np.argmin(d.real**2 + d.imag**2, axis=-1)
