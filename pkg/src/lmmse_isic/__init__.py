"""LMMSE iterative soft interference cancellation for MIMO detection.

Four detectors share one interface (see :mod:`lmmse_isic.detectors`): the
conventional per-symbol MMSE re-inversion, the affine-MMSE scheme that patches
a non-Hermitian ``G`` matrix, the recursive scheme that only keeps a Hermitian
inverse ``Q`` and a symbol estimate vector, and recursive hard-decision OSIC.
"""

from .constellation import Constellation, build_constellation, soft_statistics
from .detectors import SCHEMES, DetectorConfig, detect
from .linalg import FlopCounter, counting

__version__ = "0.1.0"

__all__ = [
    "Constellation",
    "DetectorConfig",
    "FlopCounter",
    "SCHEMES",
    "build_constellation",
    "counting",
    "detect",
    "soft_statistics",
]
