"""Per-receiver policy tables: (power, MCS, FER bound, utility) staircases."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .channel import BeamformingWeights, ChannelRealization, beam_gains
from .codec import LinkModel
from .errors import InvalidArgumentError, InvalidConfigError
from .utility import UtilitySpec, eval_utility


@dataclass(frozen=True)
class PolicyTuple:
    power: float
    mcs_index: int
    fer_eff: float
    utility: float

    def __post_init__(self):
        if self.power < 0 or not 0.0 <= self.fer_eff <= 1.0 or not 0.0 <= self.utility <= 1.0:
            raise InvalidArgumentError(f"policy tuple out of range: {self}")


@dataclass(frozen=True)
class PolicyTable:
    receiver: int
    tuples: tuple[PolicyTuple, ...]

    def __post_init__(self):
        object.__setattr__(self, "tuples", tuple(self.tuples))
        for a, b in zip(self.tuples, self.tuples[1:]):
            if not (a.power < b.power and a.utility < b.utility):
                raise InvalidArgumentError(
                    f"table for receiver {self.receiver} is not a strict power/utility staircase"
                )

    def __len__(self):
        return len(self.tuples)

    def __getitem__(self, i):
        return self.tuples[i]

    def __iter__(self):
        return iter(self.tuples)


def default_power_grid(total_power: float, levels: int = 32, span_db: float = 30.0) -> np.ndarray:
    """``levels`` powers evenly spaced in dB from ``total_power / 10**(span_db/10)`` to ``total_power``."""
    if levels < 1 or total_power <= 0:
        raise InvalidConfigError("power grid needs at least one level and a positive budget")
    if levels == 1:
        return np.array([float(total_power)])
    return total_power * 10.0 ** (np.linspace(-span_db, 0.0, levels) / 10.0)


def _evaluate(unit_snr, powers, link: LinkModel, spec: UtilitySpec):
    """Best MCS per power level; returns (table positions, fer, utility) arrays."""
    snr = np.outer(powers, unit_snr)
    fer = link.fer_matrix(snr)  # (n_mcs, n_power)
    rates = np.array([m.phy_rate for m in link.mcs_table])
    util = eval_utility(spec, rates[:, None], fer)
    best = np.argmax(util, axis=0)  # first maximum, i.e. lowest MCS on ties
    cols = np.arange(len(powers))
    return best, fer[best, cols], util[best, cols]


def select_mcs(power: float, unit_snr, link: LinkModel, utility_spec: UtilitySpec):
    """Utility-maximising MCS at one power level.

    ``unit_snr`` is the per-subcarrier SNR delivered by one watt, i.e.
    ``|h . w|**2 / noise_variance``. Returns ``(mcs_index, fer_eff)``.
    """
    if power < 0:
        raise InvalidArgumentError("power must be nonnegative")
    best, fer, _ = _evaluate(np.asarray(unit_snr, dtype=float), np.array([float(power)]),
                             link, utility_spec)
    return link.mcs_table[best[0]].index, float(fer[0])


def unit_snr_for(receiver: int, channel: ChannelRealization, weights: BeamformingWeights):
    return beam_gains(channel, weights)[receiver] / channel.noise_variance


def prune_staircase(candidates) -> list[PolicyTuple]:
    """Keep a candidate only if it beats the utility of every cheaper one."""
    kept = []
    for t in sorted(candidates, key=lambda t: t.power):
        if not kept or (t.utility > kept[-1].utility and t.power > kept[-1].power):
            kept.append(t)
    return kept


def build_policy_table(receiver, channel, weights, link: LinkModel, utility_spec, power_grid,
                       total_power=None) -> PolicyTable:
    grid = np.asarray(power_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidConfigError("power grid is empty")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise InvalidConfigError("power grid must be nonnegative and strictly increasing")
    if total_power is not None and grid[-1] > total_power:
        raise InvalidConfigError("power grid exceeds the total power budget")
    return table_from_unit_snr(receiver, unit_snr_for(receiver, channel, weights), link,
                               utility_spec, grid)


def table_from_unit_snr(receiver, unit_snr, link, utility_spec, grid) -> PolicyTable:
    best, fer, util = _evaluate(unit_snr, grid, link, utility_spec)
    candidates = [
        PolicyTuple(float(p), link.mcs_table[b].index, float(f), float(u))
        for p, b, f, u in zip(grid, best, fer, util)
    ]
    return PolicyTable(receiver, prune_staircase(candidates))


# --------------------------------------------------------------------------
# export

TABLE_COLUMNS = ("receiver", "power", "mcs", "fer", "utility")


def write_policy_tables(path, tables) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for table in tables:
            for t in table:
                w.writerow([table.receiver, repr(t.power), t.mcs_index, repr(t.fer_eff),
                            repr(t.utility)])


def read_policy_tables(path) -> list[PolicyTable]:
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TABLE_COLUMNS:
            raise InvalidConfigError(f"{path}: expected columns {','.join(TABLE_COLUMNS)}")
        for row in reader:
            rows.setdefault(int(row["receiver"]), []).append(
                PolicyTuple(float(row["power"]), int(row["mcs"]), float(row["fer"]),
                            float(row["utility"]))
            )
    return [PolicyTable(r, sorted(ts, key=lambda t: t.power)) for r, ts in sorted(rows.items())]
