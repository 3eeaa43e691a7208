"""Power/MCS allocation over per-receiver policy tables.

The proposed scheme first finds, per receiver, the cheapest policy meeting
its minimum utility (``find_min_policies``) and then fills gains
progressively (``maxmin_allocate``). ``epa_allocate`` and
``max_utility_allocate`` are the baselines; ``brute_force_maxmin`` is the
exhaustive reference used in testing.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    InfeasibleBudgetError,
    InstanceTooLargeError,
    InvalidArgumentError,
    ResolutionError,
    StarvationError,
)
from .policy import PolicyTable, PolicyTuple

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10**6
DP_CELL_LIMIT = 10**7
_REL_SLACK = 1e-12


def fits(total: float, budget: float) -> bool:
    """Budget test shared by every scheme; tolerates last-ulp summation noise."""
    return total <= budget * (1.0 + _REL_SLACK)


@dataclass(frozen=True)
class AllocationResult:
    scheme: str
    selection: tuple  # PolicyTuple or None per receiver
    gains: tuple
    total_power: float
    feasible: bool
    budget: float
    iterations: int = 0
    note: str = ""

    @property
    def utilities(self) -> tuple:
        return tuple(0.0 if s is None else s.utility for s in self.selection)

    @property
    def min_gain(self) -> float:
        return min(self.gains)

    @property
    def total_utility(self) -> float:
        return sum(self.utilities)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "selection": [None if s is None else _tuple_dict(s) for s in self.selection],
            "gains": list(self.gains),
            "total_power": self.total_power,
            "feasible": self.feasible,
            "budget": self.budget,
            "iterations": self.iterations,
        }


def _result(scheme, selection, u_min, budget, iterations=0, note=""):
    selection = tuple(selection)
    u_min = _thresholds(u_min, len(selection))
    gains = tuple((0.0 if s is None else s.utility) - u for s, u in zip(selection, u_min))
    total = 0.0
    for s in selection:
        if s is not None:
            total += s.power
    feasible = fits(total, budget) and all(g >= 0 for g in gains)
    return AllocationResult(scheme, selection, gains, total, feasible, budget, iterations, note)


def _thresholds(u_min, n):
    if u_min is None:
        return (0.0,) * n
    u_min = tuple(float(u) for u in u_min)
    if len(u_min) != n:
        raise InvalidArgumentError(f"need {n} minimum-utility thresholds, got {len(u_min)}")
    return u_min


# --------------------------------------------------------------------------
# proposed scheme


def find_min_policies(tables, u_min, total_power):
    """Restrict each table to policies meeting ``u_min`` and pick the cheapest.

    Returns ``(filtered_tables, minima)``. The cheapest qualifying policy stays
    at the head of its filtered table; anything not strictly better than it is
    dropped. Raises ``StarvationError`` when a receiver cannot reach its
    threshold and ``InfeasibleBudgetError`` when the minima overrun the budget.
    """
    if not tables:
        raise InvalidArgumentError("no policy tables")
    u_min = _thresholds(u_min, len(tables))
    filtered, minima = [], []
    for table, u in zip(tables, u_min):
        ok = [t for t in table if t.utility >= u]
        if not ok:
            raise StarvationError(table.receiver, u)
        head = min(ok, key=lambda t: t.power)
        rest = [t for t in ok if t.utility > head.utility]
        filtered.append(PolicyTable(table.receiver, [head] + rest))
        minima.append(head)
    need = sum(t.power for t in minima)
    if not fits(need, total_power):
        raise InfeasibleBudgetError(need, total_power)
    return filtered, minima


def maxmin_allocate(filtered, minima, total_power, u_min=None, pace="current") -> AllocationResult:
    """Progressive filling over the filtered tables, starting from the minima.

    ``pace="current"`` repeatedly upgrades the receiver whose current gain
    ``U - U_min`` is smallest (lowest index on ties) and freezes it once its
    table ends or its next step no longer fits the budget. This reaches the
    optimal minimum gain.

    ``pace="prospective"`` ranks receivers by the gain their *next* tuple
    would reach, measured from their minimum policy, and is kept for
    comparison: on discrete tables it can stop short of the optimum.
    """
    n = len(filtered)
    if n == 0 or len(minima) != n:
        raise InvalidArgumentError("filtered tables and minima must align and be nonempty")
    u_min = _thresholds(u_min, n)
    for table, head in zip(filtered, minima):
        if not len(table) or table[0] != head:
            raise InvalidArgumentError(f"receiver {table.receiver}: minimum policy must head its table")
    if pace == "current":
        sel, iterations = _fill_current(filtered, u_min, total_power)
    elif pace == "prospective":
        sel, iterations = _fill_prospective(filtered, minima, total_power)
    else:
        raise InvalidArgumentError(f"unknown pace {pace!r}")
    return _result("proposed", [filtered[r][k] for r, k in enumerate(sel)], u_min, total_power,
                   iterations)


def _fill_current(filtered, u_min, budget):
    n = len(filtered)
    pos = [0] * n
    active = [True] * n
    iterations = 0
    while any(active):
        iterations += 1
        j = min((r for r in range(n) if active[r]),
                key=lambda r: (filtered[r][pos[r]].utility - u_min[r], r))
        if pos[j] + 1 >= len(filtered[j]):
            active[j] = False
            continue
        trial = list(pos)
        trial[j] += 1
        total = 0.0
        for r, k in enumerate(trial):
            total += filtered[r][k].power
        if fits(total, budget):
            pos = trial
        else:
            active[j] = False
    return pos, iterations


def _fill_prospective(filtered, minima, budget):
    # Ranks receivers by the gain their next tuple would reach over the minimum policy.
    n = len(filtered)
    nxt = [1] * n
    sel = [0] * n
    gain = [None] * n  # None marks an exhausted receiver
    for i in range(n):
        if len(filtered[i]) >= 2:
            gain[i] = filtered[i][1].utility - minima[i].utility
    iterations = 0
    while True:
        live = [r for r in range(n) if gain[r] is not None]
        if not live:
            return sel, iterations
        iterations += 1
        j = min(live, key=lambda r: (gain[r], r))
        others = sum(filtered[r][sel[r]].power for r in range(n) if r != j)
        if fits(filtered[j][nxt[j]].power + others, budget):
            sel[j] = nxt[j]
            nxt[j] += 1
            if nxt[j] < len(filtered[j]):
                gain[j] = filtered[j][nxt[j]].utility - minima[j].utility
            else:
                gain[j] = None
        else:
            gain[j] = None


def brute_force_maxmin(filtered, minima, total_power, u_min=None) -> AllocationResult:
    """Exhaustive search maximising the ascending-sorted gain vector."""
    n = len(filtered)
    u_min = _thresholds(u_min, n)
    size = 1
    for t in filtered:
        size *= len(t)
    if size > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(f"{size} combinations exceed the {BRUTE_FORCE_LIMIT} guard")
    best_key, best = None, None
    for combo in itertools.product(*(range(len(t)) for t in filtered)):
        picks = [filtered[r][k] for r, k in enumerate(combo)]
        total = 0.0
        for p in picks:
            total += p.power
        if not fits(total, total_power):
            continue
        gains = [p.utility - u for p, u in zip(picks, u_min)]
        if min(gains) < 0:
            continue
        key = (tuple(sorted(gains)), -total)
        if best_key is None or key > best_key:
            best_key, best = key, picks
    if best is None:
        return _result("bruteforce", [None] * n, u_min, total_power, note="no feasible combination")
    return _result("bruteforce", best, u_min, total_power)


# --------------------------------------------------------------------------
# baselines


def epa_allocate(tables, total_power, u_min=None) -> AllocationResult:
    """Each receiver gets ``total_power / R`` and its best tuple under that cap."""
    if not tables:
        raise InvalidArgumentError("no policy tables")
    cap = total_power / len(tables)
    selection = []
    for table in tables:
        affordable = [t for t in table if fits(t.power, cap)]
        selection.append(max(affordable, key=lambda t: t.utility) if affordable else None)
    return _result("epa", selection, u_min, total_power)


def max_utility_allocate(tables, total_power, u_min=None) -> AllocationResult:
    """Exact multiple-choice knapsack maximising total utility.

    The budget axis is discretised at exactly the reachable power sums: after
    each receiver the DP keeps the Pareto frontier of (power, utility) partial
    allocations, so no power is ever rounded. Ties go to the lower power,
    then to the earlier (receiver-lexicographic) choice.
    """
    if not tables:
        raise InvalidArgumentError("no policy tables")
    power = np.zeros(1)
    util = np.zeros(1)
    pointers = []  # per receiver: (parent frontier index, chosen position or -1)
    for table in tables:
        opt_k = np.array([-1] + [k for k, t in enumerate(table) if fits(t.power, total_power)])
        opt_p = np.array([0.0] + [table[k].power for k in opt_k[1:]])
        opt_u = np.array([0.0] + [table[k].utility for k in opt_k[1:]])
        cells = power.size * opt_k.size
        if cells > DP_CELL_LIMIT:
            raise ResolutionError(
                f"knapsack frontier would reach {cells} cells; use a coarser power grid"
            )
        tot_p = (power[:, None] + opt_p[None, :]).ravel()
        tot_u = (util[:, None] + opt_u[None, :]).ravel()
        parent = np.repeat(np.arange(power.size), opt_k.size)
        choice = np.tile(opt_k, power.size)
        ok = tot_p <= total_power * (1.0 + _REL_SLACK)
        tot_p, tot_u, parent, choice = tot_p[ok], tot_u[ok], parent[ok], choice[ok]
        order = np.lexsort((choice, parent, -tot_u, tot_p))
        tot_p, tot_u, parent, choice = tot_p[order], tot_u[order], parent[order], choice[order]
        best_before = np.concatenate(([-np.inf], np.maximum.accumulate(tot_u)[:-1]))
        keep = tot_u > best_before
        power, util = tot_p[keep], tot_u[keep]
        pointers.append((parent[keep], choice[keep]))
    # frontier utilities strictly increase with power: the last state is the optimum
    idx = power.size - 1
    picks = []
    for parent, choice in reversed(pointers):
        picks.append(int(choice[idx]))
        idx = int(parent[idx])
    picks.reverse()
    selection = [None if k < 0 else table[k] for table, k in zip(tables, picks)]
    return _result("maxutil", selection, u_min, total_power)


# --------------------------------------------------------------------------
# proposed scheme end to end


def proposed_allocate(tables, u_min, total_power, pace="current") -> AllocationResult:
    filtered, minima = find_min_policies(tables, u_min, total_power)
    return maxmin_allocate(filtered, minima, total_power, u_min, pace=pace)


def compare_with_oracle(filtered, minima, total_power, u_min=None):
    """Run both solvers; log any gain-vector mismatch beyond the minimum."""
    fast = maxmin_allocate(filtered, minima, total_power, u_min)
    slow = brute_force_maxmin(filtered, minima, total_power, u_min)
    if sorted(fast.gains) != sorted(slow.gains):
        logger.info("gain vectors differ: filling=%s exhaustive=%s", fast.gains, slow.gains)
    return fast, slow


# --------------------------------------------------------------------------
# serialisation


def _tuple_dict(t: PolicyTuple) -> dict:
    return {"power": t.power, "mcs": t.mcs_index, "fer": t.fer_eff, "utility": t.utility}


def instance_to_dict(tables, u_min, total_power) -> dict:
    return {
        "total_power": total_power,
        "u_min": list(_thresholds(u_min, len(tables))),
        "tables": [
            {"receiver": t.receiver, "tuples": [_tuple_dict(x) for x in t]} for t in tables
        ],
    }


def instance_from_dict(d: dict):
    tables = [
        PolicyTable(
            int(t["receiver"]),
            [PolicyTuple(float(x["power"]), int(x["mcs"]), float(x["fer"]), float(x["utility"]))
             for x in t["tuples"]],
        )
        for t in d["tables"]
    ]
    return tables, [float(u) for u in d["u_min"]], float(d["total_power"])


def dump_instance(path, tables, u_min, total_power) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(tables, u_min, total_power), fh, indent=2)
        fh.write("\n")


def load_instance(path):
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
