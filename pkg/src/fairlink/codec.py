"""Coded frame-error prediction for a wideband OFDM link.

The pipeline is per-subcarrier SNR -> uncoded Gray-coded BER -> mean BER over
the data subcarriers -> union bound on the first-event error probability of a
(punctured) convolutional code -> upper bound on the frame error rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from math import comb

import numpy as np
from scipy.special import erfc

from .errors import InvalidArgumentError, InvalidCodeError, InvalidConfigError

SUPPORTED_BITS_PER_SYMBOL = (1, 2, 4, 6, 8)
SUPPORTED_CODE_RATES = ("1/2", "2/3", "3/4", "5/6")
# tolerance for b drifting past 0.5 through floating point noise
_BER_SLACK = 1e-12


@dataclass(frozen=True)
class McsEntry:
    index: int
    bits_per_symbol: int
    code_rate: str
    phy_rate: float  # bits/s
    interpolated: bool = False

    def __post_init__(self):
        if self.bits_per_symbol not in SUPPORTED_BITS_PER_SYMBOL:
            raise InvalidArgumentError(f"unsupported bits_per_symbol {self.bits_per_symbol}")
        if self.code_rate not in SUPPORTED_CODE_RATES:
            raise InvalidArgumentError(f"unsupported code rate {self.code_rate!r}")
        if self.phy_rate <= 0:
            raise InvalidArgumentError("phy_rate must be positive")

    @property
    def rate_fraction(self) -> Fraction:
        return Fraction(self.code_rate)

    @property
    def label(self) -> str:
        names = {1: "BPSK", 2: "QPSK", 4: "16-QAM", 6: "64-QAM", 8: "256-QAM"}
        return f"{names[self.bits_per_symbol]} {self.code_rate}"


@dataclass(frozen=True)
class CodeSpec:
    """Distance spectrum of a convolutional code.

    ``spectrum`` holds ``(d, a_d)`` pairs for ``d = d_free .. d_free + max_terms - 1``.
    For punctured codes ``a_d`` counts events starting at every phase of one
    puncturing period, the convention of the published 802.11 tables.
    """

    constraint_length: int
    generators: tuple[int, ...]
    puncture_pattern: tuple[tuple[int, ...], ...]
    spectrum: tuple[tuple[int, int], ...]
    max_terms: int

    def __post_init__(self):
        if not self.spectrum:
            raise InvalidCodeError("empty spectrum")
        ds = [d for d, _ in self.spectrum]
        if ds[0] < 1 or any(b <= a for a, b in zip(ds, ds[1:])):
            raise InvalidCodeError("spectrum distances must start >= 1 and strictly increase")
        if any(a < 0 for _, a in self.spectrum):
            raise InvalidCodeError("negative a_d")

    @property
    def d_free(self) -> int:
        return self.spectrum[0][0]

    @property
    def distances(self) -> np.ndarray:
        return np.array([d for d, _ in self.spectrum])

    @property
    def weights(self) -> np.ndarray:
        return np.array([float(a) for _, a in self.spectrum])


@dataclass(frozen=True)
class FerPrediction:
    effective_ber: float
    first_event_bound: float
    fer_upper: float
    frame_length: int


# --------------------------------------------------------------------------
# uncoded BER


def _qam_ber(bits_per_symbol: int, snr: np.ndarray) -> np.ndarray:
    # Exact Gray-coded square M-QAM BER (Cho & Yoon), averaged over bit positions.
    m = 1 << bits_per_symbol
    side = 1 << (bits_per_symbol // 2)
    per_dim = bits_per_symbol // 2
    scale = np.sqrt(3.0 * snr / (2.0 * (m - 1)))
    total = np.zeros_like(snr)
    for k in range(1, per_dim + 1):
        half = 1 << (k - 1)
        acc = np.zeros_like(snr)
        for i in range(int((1 - 2.0 ** -k) * side)):
            sign = -1 if (i * half // side) % 2 else 1
            weight = sign * (half - int(np.floor(i * half / side + 0.5)))
            acc += weight * erfc((2 * i + 1) * scale)
        total += acc / side
    return total / per_dim


def modulation_ber(bits_per_symbol: int, snr):
    """Uncoded bit error probability of a Gray-coded constellation on AWGN.

    ``snr`` is the symbol SNR (linear), scalar or array. BPSK uses
    ``Q(sqrt(2 snr))``; the square QAMs use the exact Gray-mapping expression,
    which reduces to ``Q(sqrt(snr))`` for QPSK and equals 0.5 at zero SNR.
    """
    if bits_per_symbol not in SUPPORTED_BITS_PER_SYMBOL:
        raise InvalidArgumentError(f"unsupported constellation: {bits_per_symbol} bits/symbol")
    s = np.asarray(snr, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise InvalidArgumentError("snr must be nonnegative")
    if bits_per_symbol == 1:
        ber = 0.5 * erfc(np.sqrt(s))
    else:
        ber = _qam_ber(bits_per_symbol, s)
    ber = np.clip(ber, 0.0, 0.5)
    return float(ber) if ber.ndim == 0 else ber


def effective_ber(per_subcarrier_snr, mcs: McsEntry) -> float:
    """Mean of the per-subcarrier BERs for ``mcs``'s constellation."""
    s = np.asarray(per_subcarrier_snr, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise InvalidArgumentError("need a nonempty 1-D list of subcarrier SNRs")
    return float(np.mean(modulation_ber(mcs.bits_per_symbol, s)))


# --------------------------------------------------------------------------
# distance spectrum


def _parse_generator(g) -> int:
    if isinstance(g, str):
        return int(g, 8)
    return int(g)


def _normalise_pattern(pattern, n_out):
    if pattern is None:
        return tuple((1,) for _ in range(n_out))
    rows = tuple(tuple(int(bool(x)) for x in row) for row in pattern)
    if len(rows) != n_out or len({len(r) for r in rows}) != 1 or not rows[0]:
        raise InvalidCodeError("puncture pattern needs one equal-length row per generator")
    if any(sum(r[p] for r in rows) == 0 for p in range(len(rows[0]))):
        raise InvalidCodeError("puncture pattern deletes every output of some branch")
    return rows


def distance_spectrum(constraint_length, generators, puncture_pattern=None, max_terms=10) -> CodeSpec:
    """Enumerate error events of a convolutional code on its trellis.

    Generators are octal strings (``"133"``) or plain integers (``0o133``).
    Paths leave the all-zero state with a 1 input and are counted when they
    first remerge with it. Weight levels are swept in increasing order; the
    zero-weight transitions inside a level are propagated as deltas, which
    terminates for non-catastrophic codes.
    """
    gens = tuple(_parse_generator(g) for g in generators)
    pattern = _normalise_pattern(puncture_pattern, len(gens))
    return _distance_spectrum(int(constraint_length), gens, pattern, int(max_terms))


@lru_cache(maxsize=64)
def _distance_spectrum(k, gens, pattern, max_terms):
    if max_terms < 1:
        raise InvalidArgumentError("max_terms must be >= 1")
    if k < 2:
        raise InvalidCodeError("constraint length must be at least 2")
    if not gens or any(g <= 0 or g >= (1 << k) for g in gens):
        raise InvalidCodeError("generators must be nonzero and fit the constraint length")

    period = len(pattern[0])
    n_nodes = (1 << (k - 1)) * period

    def branch(state, bit, phase):
        reg = (bit << (k - 1)) | state
        w = 0
        for row, g in zip(pattern, gens):
            if row[phase]:
                w += bin(reg & g).count("1") & 1
        return reg >> 1, w

    pending: dict[int, dict] = {}
    events: dict[int, int] = {}

    def push(weight, node, count):
        level = pending.setdefault(weight, {})
        level[node] = level.get(node, 0) + count

    for phase in range(period):
        state, w = branch(0, 1, phase)
        push(w, (state, (phase + 1) % period), 1)

    d_free = None
    weight = 0
    # generous cap: a non-catastrophic code remerges long before this
    limit = 64 * k * period + 16 * max_terms
    while d_free is None or weight < d_free + max_terms:
        if weight > limit:
            raise InvalidCodeError("no remerging error event found; code looks catastrophic")
        delta = pending.pop(weight, {})
        rounds = 0
        while delta:
            rounds += 1
            if rounds > n_nodes + 1:
                raise InvalidCodeError("zero-weight loop off the zero state: catastrophic code")
            nxt = {}
            for (state, phase), count in delta.items():
                for bit in (0, 1):
                    ns, dw = branch(state, bit, phase)
                    if ns == 0:
                        events[weight + dw] = events.get(weight + dw, 0) + count
                        continue
                    node = (ns, (phase + 1) % period)
                    if dw == 0:
                        nxt[node] = nxt.get(node, 0) + count
                    else:
                        push(weight + dw, node, count)
            delta = nxt
        if d_free is None and events.get(weight):
            d_free = weight
        weight += 1

    spectrum = tuple((d, events.get(d, 0)) for d in range(d_free, d_free + max_terms))
    return CodeSpec(k, gens, pattern, spectrum, max_terms)


# --------------------------------------------------------------------------
# union bound


def _check_ber(b):
    arr = np.asarray(b, dtype=float)
    if np.any(arr < 0) or np.any(arr > 0.5 + _BER_SLACK) or np.any(np.isnan(arr)):
        raise InvalidArgumentError("bit error probability must lie in [0, 0.5]")
    return np.minimum(arr, 0.5)


def _pairwise(d: int, b: np.ndarray) -> np.ndarray:
    q = 1.0 - b
    total = np.zeros_like(b)
    for k in range(d // 2 + 1, d + 1):
        total += comb(d, k) * b**k * q ** (d - k)
    if d % 2 == 0:
        half = d // 2
        total += 0.5 * comb(d, half) * b**half * q**half
    return np.clip(total, 0.0, 1.0)


def pairwise_error(d: int, b):
    """Probability that hard-decision decoding prefers a path at Hamming distance ``d``."""
    if d < 1:
        raise InvalidArgumentError("distance must be >= 1")
    out = _pairwise(int(d), _check_ber(b))
    return float(out) if out.ndim == 0 else out


def first_event_bound(spectrum: CodeSpec, b):
    """Union bound on the first-event error probability, clamped to [0, 1]."""
    bb = _check_ber(b)
    d_max = spectrum.spectrum[-1][0]
    b_pow = [np.ones_like(bb)]
    q_pow = [np.ones_like(bb)]
    for _ in range(d_max):
        b_pow.append(b_pow[-1] * bb)
        q_pow.append(q_pow[-1] * (1.0 - bb))
    total = np.zeros_like(bb)
    for d, a in spectrum.spectrum:
        if not a:
            continue
        e_d = np.zeros_like(bb)
        for k in range(d // 2 + 1, d + 1):
            e_d += comb(d, k) * b_pow[k] * q_pow[d - k]
        if d % 2 == 0:
            e_d += 0.5 * comb(d, d // 2) * b_pow[d // 2] * q_pow[d // 2]
        total += a * np.clip(e_d, 0.0, 1.0)
    out = np.clip(total, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def fer_upper_bound(e_u, frame_length: int):
    """``1 - (1 - e_u) ** frame_length``, evaluated without cancellation."""
    if frame_length < 1:
        raise InvalidArgumentError("frame_length must be >= 1")
    e = np.clip(np.asarray(e_u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        out = -np.expm1(frame_length * np.log1p(-e))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# default tables


@dataclass(frozen=True)
class LinkModel:
    """MCS ladder plus the code spectrum used for each code rate."""

    mcs_table: tuple[McsEntry, ...]
    codes: dict = field(hash=False)  # code_rate -> CodeSpec
    frame_length: int = 12000

    def __post_init__(self):
        if not self.mcs_table:
            raise InvalidConfigError("empty MCS table")
        rates = [m.phy_rate for m in self.mcs_table]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise InvalidConfigError("phy_rate must strictly increase with MCS index")
        missing = {m.code_rate for m in self.mcs_table} - set(self.codes)
        if missing:
            raise InvalidConfigError(f"no code spectrum for rates {sorted(missing)}")
        if self.frame_length < 1:
            raise InvalidConfigError("frame_length must be >= 1")

    def predict(self, per_subcarrier_snr, mcs: McsEntry) -> FerPrediction:
        b = effective_ber(per_subcarrier_snr, mcs)
        e_u = first_event_bound(self.codes[mcs.code_rate], b)
        return FerPrediction(b, e_u, fer_upper_bound(e_u, self.frame_length), self.frame_length)

    def fer_matrix(self, snr: np.ndarray) -> np.ndarray:
        """FER bound for every MCS (rows) and every row of ``snr`` (columns).

        ``snr`` has shape ``(n_power, n_subcarriers)``.
        """
        snr = np.atleast_2d(np.asarray(snr, dtype=float))
        out = np.empty((len(self.mcs_table), snr.shape[0]))
        ber_cache = {}
        for i, mcs in enumerate(self.mcs_table):
            bps = mcs.bits_per_symbol
            if bps not in ber_cache:
                ber_cache[bps] = np.mean(modulation_ber(bps, snr), axis=1)
            e_u = first_event_bound(self.codes[mcs.code_rate], ber_cache[bps])
            out[i] = fer_upper_bound(e_u, self.frame_length)
        return out


def load_default_tables(max_terms: int | None = None, frame_length: int | None = None) -> LinkModel:
    raw = json.loads(resources.files("fairlink.data").joinpath("default_tables.json").read_text())
    return link_model_from_dict(raw, max_terms=max_terms, frame_length=frame_length)


def link_model_from_dict(raw: dict, max_terms=None, frame_length=None) -> LinkModel:
    try:
        mcs = tuple(
            McsEntry(
                int(e["index"]), int(e["bits_per_symbol"]), str(e["code_rate"]),
                float(e["phy_rate"]), bool(e.get("interpolated", False)),
            )
            for e in raw["mcs"]
        )
        code = raw["code"]
        terms = int(max_terms or code.get("max_terms", 10))
        codes = {
            rate: distance_spectrum(code["constraint_length"], code["generators"], pattern, terms)
            for rate, pattern in code["puncture_patterns"].items()
        }
        lf = int(frame_length or code.get("frame_length_bits", 12000))
    except (KeyError, TypeError) as exc:
        raise InvalidConfigError(f"malformed MCS/code table: {exc}") from exc
    return LinkModel(mcs, codes, lf)
