"""Application utility functions: VoIP step, video and gaming sigmoids, file-transfer log.

Every utility carries a leading ``(1 - FER)`` factor and is clamped to [0, 1].
Rates are in bits/s throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCalibrationError

KINDS = ("voip", "video", "file", "gaming")

# VoIP calibration: three quality levels in kbit/s
VOIP_LEVELS_BPS = ((21e3, 32e3), (32e3, 88e3), (88e3, math.inf))
VOIP_ALPHAS = (0.92, 0.95, 1.0)
DEFAULT_U_MIN = (0.7, 0.5, 0.4, 0.4)


@dataclass(frozen=True)
class UtilitySpec:
    kind: str
    u_min: float = 0.0
    # voip
    levels: tuple = ()
    alphas: tuple = ()
    # video / gaming
    epsilon: float = 0.0
    rate_min: float = 0.0
    # video / file / gaming (gaming: traffic-weighted mean of app_rate_max)
    rate_max: float = 0.0
    # gaming
    shares: tuple = ()
    app_rate_max: tuple = ()
    # derived
    beta: float = 0.0
    gamma: float = 0.0
    gammas: tuple = ()

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "u_min": self.u_min}
        if self.kind == "voip":
            d["levels"] = [[lo, None if math.isinf(hi) else hi] for lo, hi in self.levels]
            d["alphas"] = list(self.alphas)
        elif self.kind == "video":
            d.update(epsilon=self.epsilon, rate_min=self.rate_min, rate_max=self.rate_max)
        elif self.kind == "file":
            d["rate_max"] = self.rate_max
        else:
            d.update(epsilon=self.epsilon, shares=list(self.shares),
                     app_rate_max=list(self.app_rate_max))
        return d


def _sigmoid_slope(epsilon, rate_max):
    return 2.0 * math.log(1.0 / epsilon - 1.0) / rate_max


def build_utility_spec(kind, u_min=0.0, **params) -> UtilitySpec:
    """Validate calibration parameters and derive the sigmoid slopes.

    voip:   ``levels`` as [lo, hi) pairs in bits/s (``hi=None`` for open) and ``alphas``
    video:  ``epsilon``, ``rate_max``, optional ``rate_min``
    file:   ``rate_max``
    gaming: ``epsilon``, ``shares`` (t_i) and ``app_rate_max`` (RATE_max,i)
    """
    if kind not in KINDS:
        raise InvalidCalibrationError("kind", f"unknown utility kind {kind!r}")
    u_min = float(u_min)
    if not 0.0 <= u_min <= 1.0:
        raise InvalidCalibrationError("u_min", "must lie in [0, 1]")

    known = {
        "voip": {"levels", "alphas"},
        "video": {"epsilon", "rate_max", "rate_min"},
        "file": {"rate_max"},
        "gaming": {"epsilon", "shares", "app_rate_max"},
    }[kind]
    extra = set(params) - known
    if extra:
        raise InvalidCalibrationError(sorted(extra)[0], f"not a {kind} parameter")

    if kind == "voip":
        levels = tuple(
            (float(lo), math.inf if hi is None else float(hi))
            for lo, hi in params.get("levels", VOIP_LEVELS_BPS)
        )
        alphas = tuple(float(a) for a in params.get("alphas", VOIP_ALPHAS))
        if not levels or len(levels) != len(alphas):
            raise InvalidCalibrationError("alphas", "need one scale per level")
        for lo, hi in levels:
            if not 0 <= lo < hi:
                raise InvalidCalibrationError("levels", f"empty or negative interval [{lo}, {hi})")
        if any(nxt[0] < cur[1] for cur, nxt in zip(levels, levels[1:])):
            raise InvalidCalibrationError("levels", "intervals must be disjoint and ascending")
        if not (0 < alphas[0] and all(a <= b for a, b in zip(alphas, alphas[1:])) and alphas[-1] <= 1):
            raise InvalidCalibrationError("alphas", "need 0 < alpha_1 <= ... <= alpha_L <= 1")
        return UtilitySpec("voip", u_min, levels=levels, alphas=alphas)

    if kind == "file":
        rate_max = float(params.get("rate_max", 0.0))
        if not rate_max > 0:
            raise InvalidCalibrationError("rate_max", "must be positive")
        return UtilitySpec("file", u_min, rate_max=rate_max)

    eps = float(params.get("epsilon", 0.0))
    if not 0.0 < eps < 0.5:
        raise InvalidCalibrationError("epsilon", "must lie in (0, 0.5)")

    if kind == "video":
        rate_max = float(params.get("rate_max", 0.0))
        rate_min = float(params.get("rate_min", 0.0))
        if not rate_max > 0:
            raise InvalidCalibrationError("rate_max", "must be positive")
        if not 0 <= rate_min < rate_max:
            raise InvalidCalibrationError("rate_min", "must lie in [0, rate_max)")
        return UtilitySpec("video", u_min, epsilon=eps, rate_min=rate_min, rate_max=rate_max,
                           beta=_sigmoid_slope(eps, rate_max))

    shares = tuple(float(t) for t in params.get("shares", ()))
    app_max = tuple(float(r) for r in params.get("app_rate_max", ()))
    if not shares or len(shares) != len(app_max):
        raise InvalidCalibrationError("shares", "need one traffic share per application")
    if any(t < 0 for t in shares) or abs(sum(shares) - 1.0) > 1e-9:
        raise InvalidCalibrationError("shares", "must be nonnegative and sum to 1")
    if any(r <= 0 for r in app_max):
        raise InvalidCalibrationError("app_rate_max", "must be positive")
    gammas = tuple(_sigmoid_slope(eps, r) for r in app_max)
    gamma = 1.0 / sum(t / g for t, g in zip(shares, gammas))
    rate_max = sum(t * r for t, r in zip(shares, app_max))
    return UtilitySpec("gaming", u_min, epsilon=eps, rate_max=rate_max, shares=shares,
                       app_rate_max=app_max, gamma=gamma, gammas=gammas)


def utility_spec_from_dict(d: dict) -> UtilitySpec:
    d = dict(d)
    try:
        kind = d.pop("kind")
    except KeyError:
        raise InvalidCalibrationError("kind", "missing") from None
    return build_utility_spec(kind, **d)


def _rate_utility(spec: UtilitySpec, rate: np.ndarray) -> np.ndarray:
    if spec.kind == "voip":
        u = np.zeros_like(rate)
        for (lo, hi), a in zip(spec.levels, spec.alphas):
            u += a * ((rate >= lo) & (rate < hi))
        return u
    if spec.kind == "file":
        return np.log1p(rate) / math.log1p(spec.rate_max)
    slope = spec.beta if spec.kind == "video" else spec.gamma
    return 1.0 / (1.0 + (1.0 / spec.epsilon - 1.0) * np.exp(-slope * rate))


def eval_utility(spec: UtilitySpec, rate, fer):
    """Utility of delivering ``rate`` bits/s with frame error rate ``fer``."""
    r = np.asarray(rate, dtype=float)
    f = np.asarray(fer, dtype=float)
    base = np.clip(_rate_utility(spec, r), 0.0, 1.0)
    out = np.clip((1.0 - f) * base, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def default_utility_specs() -> list[UtilitySpec]:
    """Receiver i runs application i: VoIP, video, file transfer, online gaming.

    Only the VoIP calibration and the U_min values come from the original
    experiment; the other three calibrations are illustrative defaults.
    """
    return [
        build_utility_spec("voip", DEFAULT_U_MIN[0]),
        build_utility_spec("video", DEFAULT_U_MIN[1], epsilon=0.05, rate_min=6.5e6, rate_max=60e6),
        build_utility_spec("file", DEFAULT_U_MIN[2], rate_max=78e6),
        build_utility_spec("gaming", DEFAULT_U_MIN[3], epsilon=0.05, shares=(0.6, 0.4),
                           app_rate_max=(20e6, 50e6)),
    ]
