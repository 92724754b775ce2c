from . import alg1, alg2, conventional, hdosic
from .common import (
    V_MIN,
    Detection,
    DetectorConfig,
    IsicSharedState,
    hard_decision_stats,
)

SCHEMES = {
    "conv": conventional,
    "alg1": alg1,
    "alg2": alg2,
    "hdosic": hdosic,
}


def detect(scheme: str, H, y, config: DetectorConfig, **kw) -> Detection:
    try:
        mod = SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}") from None
    return mod.detect(H, y, config, **kw)


__all__ = [
    "SCHEMES",
    "V_MIN",
    "Detection",
    "DetectorConfig",
    "IsicSharedState",
    "detect",
    "hard_decision_stats",
    "alg1",
    "alg2",
    "conventional",
    "hdosic",
]
