"""Synthetic multi-antenna downlink channels and zero-forcing beamforming.

Coefficient arrays are indexed ``[receiver, subcarrier, tx_antenna]``. The
product ``h . w`` is the plain (unconjugated) sum ``sum_i h_i * w_i``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InvalidArgumentError,
    InvalidConfigError,
    SingularChannelError,
    UnsupportedGeometryError,
)

MAX_CONDITION = 1e8


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    coeffs: np.ndarray  # complex, (receivers, subcarriers, num_tx)
    noise_variance: float

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 3 or 0 in c.shape:
            raise InvalidConfigError("coeffs must have shape (receivers, subcarriers, num_tx)")
        if not self.noise_variance > 0:
            raise InvalidConfigError("noise variance must be positive")
        if c.shape[0] > c.shape[2]:
            raise UnsupportedGeometryError(
                f"{c.shape[0]} receivers cannot be zero-forced with {c.shape[2]} antennas"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def receivers(self) -> int:
        return self.coeffs.shape[0]

    @property
    def num_data_subcarriers(self) -> int:
        return self.coeffs.shape[1]

    @property
    def num_tx(self) -> int:
        return self.coeffs.shape[2]

    def scaled(self, amplitude) -> "ChannelRealization":
        """Copy with each receiver's coefficients multiplied by ``amplitude[r]``."""
        a = np.asarray(amplitude, dtype=float).reshape(-1, 1, 1)
        return ChannelRealization(self.coeffs * a, self.noise_variance)


@dataclass(frozen=True, eq=False)
class BeamformingWeights:
    weights: np.ndarray  # complex, (receivers, subcarriers, num_tx), unit-norm rows


def generate_channel(num_tx, receivers, subcarriers, noise_variance, correlation=0.0, seed=0,
                     amplitude=None) -> ChannelRealization:
    """Draw i.i.d. Rayleigh coefficients with AR(1) correlation across subcarriers.

    Each antenna coefficient is CN(0, 1). Neighbouring subcarriers follow
    ``h[l] = c * h[l-1] + sqrt(1 - c**2) * z[l]`` so the marginal variance
    stays 1. ``amplitude`` optionally scales receiver ``r`` by ``amplitude[r]``.
    """
    if receivers > num_tx:
        raise UnsupportedGeometryError(f"{receivers} receivers exceed {num_tx} transmit antennas")
    if not noise_variance > 0:
        raise InvalidConfigError("noise variance must be positive")
    if not 0.0 <= correlation < 1.0:
        raise InvalidConfigError("correlation must lie in [0, 1)")
    if min(num_tx, receivers, subcarriers) < 1:
        raise InvalidConfigError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((receivers, subcarriers, num_tx, 2)) / np.sqrt(2.0)
    z = z[..., 0] + 1j * z[..., 1]
    h = np.empty_like(z)
    h[:, 0] = z[:, 0]
    innov = np.sqrt(1.0 - correlation**2)
    for l in range(1, subcarriers):
        h[:, l] = correlation * h[:, l - 1] + innov * z[:, l]
    if amplitude is not None:
        a = np.asarray(amplitude, dtype=float)
        if a.shape != (receivers,) or np.any(a <= 0):
            raise InvalidConfigError("amplitude needs one positive scale per receiver")
        h *= a[:, None, None]
    return ChannelRealization(h, float(noise_variance))


def zf_weights(channel: ChannelRealization, max_condition=MAX_CONDITION) -> BeamformingWeights:
    """Normalised columns of the right pseudo-inverse of each subcarrier's channel matrix."""
    H = np.transpose(channel.coeffs, (1, 0, 2))  # (L, R, N)
    s = np.linalg.svd(H, compute_uv=False)
    with np.errstate(divide="ignore"):
        cond = np.where(s[:, -1] > 0, s[:, 0] / s[:, -1], np.inf)
    bad = np.flatnonzero(~(cond <= max_condition))
    if bad.size:
        raise SingularChannelError(int(bad[0]), float(cond[bad[0]]))
    pinv = np.linalg.pinv(H)  # (L, N, R)
    w = np.transpose(pinv, (2, 0, 1))  # (R, L, N)
    w = w / np.linalg.norm(w, axis=2, keepdims=True)
    w.setflags(write=False)
    return BeamformingWeights(w)


def beam_gains(channel: ChannelRealization, weights: BeamformingWeights) -> np.ndarray:
    """``|h_r . w_r|**2`` for every receiver and subcarrier, shape ``(R, L)``."""
    return np.abs(np.sum(channel.coeffs * weights.weights, axis=2)) ** 2


def subcarrier_snr(power, h, w, noise_variance) -> float:
    """Post-beamforming SNR of one subcarrier: ``power * |h . w|**2 / noise_variance``."""
    if power < 0:
        raise InvalidArgumentError("power must be nonnegative")
    if not noise_variance > 0:
        raise InvalidArgumentError("noise variance must be positive")
    g = np.dot(np.asarray(h, dtype=complex), np.asarray(w, dtype=complex))
    return float(power * abs(g) ** 2 / noise_variance)


# --------------------------------------------------------------------------
# trace files
#
# Layout (all little-endian):
#   8 bytes  magic b"FLCHTRC\x00"
#   uint32   version (1)
#   uint32   transmissions T
#   uint32   receivers R
#   uint32   data subcarriers L
#   uint32   transmit antennas N
#   float64  noise variance
# followed by T*R*L records in (transmission, receiver, subcarrier) order,
# each holding N (re, im) float64 pairs.

TRACE_MAGIC = b"FLCHTRC\x00"
_HEADER = struct.Struct("<8sIIIIId")


def write_channel_trace(path, realizations) -> None:
    realizations = list(realizations)
    if not realizations:
        raise InvalidArgumentError("nothing to write")
    first = realizations[0]
    shape = first.coeffs.shape
    for ch in realizations:
        if ch.coeffs.shape != shape or ch.noise_variance != first.noise_variance:
            raise InvalidArgumentError("all realizations in a trace must share dims and noise")
    R, L, N = shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TRACE_MAGIC, 1, len(realizations), R, L, N, first.noise_variance))
        for ch in realizations:
            fh.write(np.ascontiguousarray(ch.coeffs).astype("<c16").tobytes())


def read_channel_trace(path) -> list[ChannelRealization]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InvalidConfigError(f"{path}: truncated trace header")
    magic, version, T, R, L, N, noise = _HEADER.unpack_from(data)
    if magic != TRACE_MAGIC or version != 1:
        raise InvalidConfigError(f"{path}: not a version-1 channel trace")
    expected = _HEADER.size + T * R * L * N * 16
    if len(data) != expected:
        raise InvalidConfigError(f"{path}: expected {expected} bytes, found {len(data)}")
    body = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(T, R, L, N)
    return [ChannelRealization(body[t].astype(complex), noise) for t in range(T)]
