"""Batch simulation: channel -> ZF -> policy tables -> allocation schemes -> report."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .allocator import (
    AllocationResult,
    epa_allocate,
    max_utility_allocate,
    proposed_allocate,
)
from .channel import ChannelRealization, beam_gains, generate_channel, zf_weights
from .codec import LinkModel, link_model_from_dict, load_default_tables
from .errors import (
    AllocationError,
    InvalidConfigError,
    SingularChannelError,
    StarvationError,
    UndefinedIndexError,
)
from .metrics import jain_index, mean_with_ci
from .policy import PolicyTable, default_power_grid, table_from_unit_snr
from .utility import UtilitySpec, default_utility_specs, utility_spec_from_dict

logger = logging.getLogger(__name__)

SCHEMES = ("proposed", "epa", "maxutil")
RATIO_BAND = (0.80, 1.00)
RATIO_HARD_FLOOR = 0.60
CSV_COLUMNS = ("transmission", "scheme", "receiver", "power", "mcs", "fer", "utility", "gain",
               "jain", "feasible")


@dataclass(frozen=True)
class SimConfig:
    num_tx: int = 4
    receivers: int = 4
    subcarriers: int = 52
    fft_size: int = 64
    bandwidth: float = 20e6
    carrier: float = 5.25e9  # informational only
    total_power: float = 1.0
    noise_variance: float = 2e-4
    pathloss: tuple = (1.0, 0.8, 0.6, 0.5)  # amplitude scale per receiver
    correlation: float = 0.9
    utilities: tuple = field(default_factory=lambda: tuple(default_utility_specs()))
    power_levels: int = 32
    power_span_db: float = 30.0
    frame_length: int = 12000
    spectrum_terms: int = 10
    transmissions: int = 20000
    schemes: tuple = SCHEMES
    seed: int = 0
    link: dict | None = None  # optional MCS/code table replacing the shipped one

    def __post_init__(self):
        if self.transmissions < 1:
            raise InvalidConfigError("transmissions must be >= 1")
        bad = set(self.schemes) - set(SCHEMES)
        if bad:
            raise InvalidConfigError(f"unknown schemes {sorted(bad)}; choose from {SCHEMES}")
        if len(self.utilities) != self.receivers:
            raise InvalidConfigError("every receiver needs a utility spec")
        if len(self.pathloss) != self.receivers or any(a <= 0 for a in self.pathloss):
            raise InvalidConfigError("pathloss needs one positive amplitude scale per receiver")
        if self.receivers > self.num_tx:
            raise InvalidConfigError("receivers cannot exceed transmit antennas")
        if self.subcarriers > self.fft_size:
            raise InvalidConfigError("data subcarriers cannot exceed the FFT size")
        if not self.total_power > 0 or not self.noise_variance > 0:
            raise InvalidConfigError("total_power and noise_variance must be positive")
        if not 0.0 <= self.correlation < 1.0:
            raise InvalidConfigError("correlation must lie in [0, 1)")

    @property
    def u_min(self) -> tuple:
        return tuple(u.u_min for u in self.utilities)

    def power_grid(self) -> np.ndarray:
        return default_power_grid(self.total_power, self.power_levels, self.power_span_db)

    def link_model(self) -> LinkModel:
        if self.link is not None:
            return link_model_from_dict(self.link, self.spectrum_terms, self.frame_length)
        return load_default_tables(self.spectrum_terms, self.frame_length)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pathloss"] = list(self.pathloss)
        d["schemes"] = list(self.schemes)
        d["utilities"] = [u.to_dict() for u in self.utilities]
        if d["link"] is None:
            del d["link"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        if "utilities" in d:
            d["utilities"] = tuple(utility_spec_from_dict(u) for u in d["utilities"])
        for key in ("pathloss", "schemes"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    try:
        with open(path) as fh:
            return SimConfig.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc


# --------------------------------------------------------------------------
# one transmission


@dataclass
class TransmissionOutcome:
    index: int
    results: dict  # scheme -> AllocationResult
    jain: dict  # scheme -> float | None
    status: str = "ok"  # ok | starved | over-budget | singular


def _null_result(scheme, n, u_min, budget, note):
    return AllocationResult(scheme, (None,) * n, tuple(-u for u in u_min), 0.0, False, budget,
                            note=note)


def _gain_fairness(result: AllocationResult):
    try:
        return jain_index([max(g, 0.0) for g in result.gains])
    except UndefinedIndexError:
        return None


def transmission_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(index)])


def draw_channel(config: SimConfig, index: int) -> ChannelRealization:
    return generate_channel(config.num_tx, config.receivers, config.subcarriers,
                            config.noise_variance, config.correlation,
                            seed=transmission_seed(config.seed, index),
                            amplitude=config.pathloss)


def build_tables(config: SimConfig, channel: ChannelRealization, link: LinkModel,
                 grid=None) -> list[PolicyTable]:
    grid = config.power_grid() if grid is None else grid
    unit = beam_gains(channel, zf_weights(channel)) / channel.noise_variance
    return [table_from_unit_snr(r, unit[r], link, config.utilities[r], grid)
            for r in range(channel.receivers)]


def run_transmission(config: SimConfig, index: int, link: LinkModel, grid,
                     channel: ChannelRealization | None = None) -> TransmissionOutcome:
    channel = draw_channel(config, index) if channel is None else channel
    n, u_min, budget = config.receivers, config.u_min, config.total_power
    try:
        tables = build_tables(config, channel, link, grid)
    except SingularChannelError as exc:
        logger.debug("transmission %d: %s", index, exc)
        results = {s: _null_result(s, n, u_min, budget, "singular channel") for s in config.schemes}
        return TransmissionOutcome(index, results, {s: None for s in config.schemes}, "singular")

    results, status = {}, "ok"
    for scheme in config.schemes:
        if scheme == "proposed":
            try:
                res = proposed_allocate(tables, u_min, budget)
            except AllocationError as exc:
                status = "starved" if isinstance(exc, StarvationError) else "over-budget"
                res = _null_result(scheme, n, u_min, budget, str(exc))
        elif scheme == "epa":
            res = epa_allocate(tables, budget, u_min)
        else:
            res = max_utility_allocate(tables, budget, u_min)
        results[scheme] = res
    jain = {}
    for scheme, res in results.items():
        valid = not (scheme == "proposed" and status != "ok")
        jain[scheme] = _gain_fairness(res) if valid else None
    return TransmissionOutcome(index, results, jain, status)


def _run_chunk(args):
    config, indices, channels = args
    link = config.link_model()
    grid = config.power_grid()
    return [run_transmission(config, i, link, grid, ch) for i, ch in zip(indices, channels)]


# --------------------------------------------------------------------------
# aggregate


@dataclass
class SimReport:
    config: dict
    seed: int
    outcomes: list
    summary: dict

    def jain_series(self, scheme) -> list:
        return [o.jain.get(scheme) for o in self.outcomes]


def _ci_dict(samples):
    samples = [x for x in samples if x is not None]
    if len(samples) < 2:
        return {"mean": float(samples[0]) if samples else None, "half_width": None,
                "n": len(samples), "ci_tight": None}
    ci = mean_with_ci(samples)
    return {"mean": ci.mean, "half_width": ci.half_width, "n": ci.n, "ci_tight": ci.tight}


def summarize(config: SimConfig, outcomes) -> dict:
    counts = {"transmissions": len(outcomes)}
    for status in ("starved", "over-budget", "singular"):
        counts[status] = sum(o.status == status for o in outcomes)
    ok = [o for o in outcomes if o.status == "ok"]
    if counts["starved"] or counts["over-budget"]:
        logger.info("%d starved and %d over-budget transmissions excluded from proposed averages",
                    counts["starved"], counts["over-budget"])

    schemes = {}
    for scheme in config.schemes:
        pool = ok if scheme == "proposed" else [o for o in outcomes if o.status != "singular"]
        per_receiver = [
            _ci_dict([o.results[scheme].utilities[r] for o in pool])
            for r in range(config.receivers)
        ]
        jain = [o.jain[scheme] for o in pool]
        schemes[scheme] = {
            "mean_utility": per_receiver,
            "mean_total_utility": _ci_dict([o.results[scheme].total_utility for o in pool]),
            "jain": _ci_dict(jain),
            "jain_undefined": sum(j is None for j in jain),
            "feasible": sum(o.results[scheme].feasible for o in outcomes),
        }

    ratio = None
    if "proposed" in config.schemes and "maxutil" in config.schemes and ok:
        num = sum(o.results["proposed"].total_utility for o in ok)
        den = sum(o.results["maxutil"].total_utility for o in ok)
        ratio = num / den if den > 0 else None
    ratio_info = {
        "value": ratio,
        "band": list(RATIO_BAND),
        "in_band": None if ratio is None else RATIO_BAND[0] <= ratio <= RATIO_BAND[1],
        "above_floor": None if ratio is None else ratio >= RATIO_HARD_FLOOR,
    }
    if ratio is not None and not ratio_info["in_band"]:
        logger.warning("proposed/maxutil utility ratio %.3f outside %s", ratio, RATIO_BAND)
    return {"counts": counts, "schemes": schemes, "utility_ratio": ratio_info}


def run_simulation(config: SimConfig, channels=None, workers: int = 1) -> SimReport:
    """Run every transmission and aggregate.

    ``channels`` optionally supplies externally generated realizations (one per
    transmission, used as-is: pathloss scaling is not applied to them).
    Each transmission draws from its own seed derived from ``(seed, index)``,
    so the report does not depend on ``workers``.
    """
    if channels is not None:
        channels = list(channels)
        if not channels:
            raise InvalidConfigError("channel trace is empty")
        if len(channels) < config.transmissions:
            logger.warning("trace holds %d transmissions; running that many", len(channels))
        config = replace(config, transmissions=min(config.transmissions, len(channels)))
        for ch in channels:
            if (ch.receivers, ch.num_data_subcarriers, ch.num_tx) != (
                    config.receivers, config.subcarriers, config.num_tx):
                raise InvalidConfigError("trace dimensions do not match the config")
        channels = channels[:config.transmissions]
    else:
        channels = [None] * config.transmissions

    indices = list(range(config.transmissions))
    if workers <= 1:
        outcomes = _run_chunk((config, indices, channels))
    else:
        step = math.ceil(len(indices) / workers)
        chunks = [(config, indices[i:i + step], channels[i:i + step])
                  for i in range(0, len(indices), step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = [o for part in pool.map(_run_chunk, chunks) for o in part]
    return SimReport(config.to_dict(), config.seed, outcomes, summarize(config, outcomes))


# --------------------------------------------------------------------------
# output


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_rows(report: SimReport):
    for o in report.outcomes:
        for scheme, res in o.results.items():
            for r, sel in enumerate(res.selection):
                yield (
                    o.index, scheme, r,
                    0.0 if sel is None else sel.power,
                    None if sel is None else sel.mcs_index,
                    None if sel is None else sel.fer_eff,
                    0.0 if sel is None else sel.utility,
                    res.gains[r], o.jain.get(scheme), res.feasible,
                )


def report_json(report: SimReport) -> dict:
    return {
        "version": __version__,
        "seed": report.seed,
        "config": report.config,
        "summary": report.summary,
        "jain_series": {s: report.jain_series(s) for s in report.config["schemes"]},
        "status_series": [o.status for o in report.outcomes],
    }


def emit_report(report: SimReport, out_dir, formats=("csv", "json"), plots: bool = False) -> list:
    """Write the per-transmission CSV and/or the JSON summary; returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    if "csv" in formats and report.config["schemes"]:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in csv_rows(report):
            w.writerow([_fmt(x) for x in row])
        path = out / "transmissions.csv"
        path.write_text(buf.getvalue())
        written.append(path)
    if "json" in formats:
        path = out / "summary.json"
        path.write_text(json.dumps(_jsonable(report_json(report)), indent=2, sort_keys=True) + "\n")
        written.append(path)
    if plots:
        from .plotting import render_report_figures
        written.extend(render_report_figures(report, out))
    return written


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return _jsonable(x.item())
    return x
