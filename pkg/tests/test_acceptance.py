"""End-to-end acceptance checks; each records one pass/fail line in the terminal summary."""

import csv
import math
import random
import time
from collections import defaultdict
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_instance
from fairlink.allocator import brute_force_maxmin, find_min_policies, maxmin_allocate
from fairlink.channel import generate_channel, zf_weights
from fairlink.codec import distance_spectrum, first_event_bound, fer_upper_bound, modulation_ber
from fairlink.sim import RATIO_BAND, RATIO_HARD_FLOOR, SimConfig, emit_report, run_simulation
from fairlink.utility import build_utility_spec, eval_utility

RUN_TRANSMISSIONS = 2000


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
    return ok


# ------------------------------------------------------------------ allocator


@pytest.fixture(scope="module")
def oracle_runs():
    rng = random.Random(20240601)
    runs = []
    start = time.perf_counter()
    for _ in range(250):
        tables, u_min, budget = random_instance(rng, max_receivers=4, max_len=6)
        filtered, minima = find_min_policies(tables, u_min, budget)
        fast = maxmin_allocate(filtered, minima, budget, u_min)
        slow = brute_force_maxmin(filtered, minima, budget, u_min)
        runs.append((filtered, fast, slow))
    return runs, time.perf_counter() - start


def test_criterion_1_maxmin_matches_exhaustive(oracle_runs):
    runs, elapsed = oracle_runs
    mismatches = sum(fast.min_gain != slow.min_gain for _, fast, slow in runs)
    ok = len(runs) >= 200 and mismatches == 0 and elapsed < 10.0
    assert record(1, ok, f"{len(runs)} instances, {mismatches} min-gain mismatches, {elapsed:.2f} s")


def test_criterion_2_iterations_linear(oracle_runs):
    runs, _ = oracle_runs
    over = sum(fast.iterations > sum(len(t) for t in filtered) for filtered, fast, _ in runs)
    worst = max(fast.iterations / sum(len(t) for t in filtered) for filtered, fast, _ in runs)
    assert record(2, over == 0, f"{over} instances above the table-size bound, "
                                f"worst ratio {worst:.2f}")


# ------------------------------------------------------------------ codec


def transfer_function_counts(terms):
    """Expand D^5 / (1 - 2D), the path enumerator of the (5,7) code, by long division."""
    den = [1, -2]
    num = [0] * 5 + [1] + [0] * (terms + 5)
    q = []
    for k in range(len(num)):
        c = num[k] - sum(den[j] * q[k - j] for j in range(1, len(den)) if k - j >= 0)
        q.append(c)
    return {d: q[d] for d in range(5, 5 + terms) if q[d]}


def state_machine_counts(g1, g2, memory, max_weight):
    """Count trellis detours by output weight with a state-by-weight recursion."""
    n_states = 1 << memory

    def step(state, bit):
        reg = (bit << memory) | state
        w = bin(reg & g1).count("1") % 2 + bin(reg & g2).count("1") % 2
        return reg >> 1, w

    # paths[s][w]: ways to reach state 0 from s with accumulated weight w
    paths = [[0] * (max_weight + 1) for _ in range(n_states)]
    paths[0][0] = 1
    for w in range(max_weight + 1):
        for _ in range(n_states):  # settle zero-weight edges (acyclic off state 0)
            for s in range(1, n_states):
                total = 0
                for bit in (0, 1):
                    nxt, o = step(s, bit)
                    if o <= w:
                        total += paths[nxt][w - o]
                paths[s][w] = total
    nxt, o = step(0, 1)
    return {w: paths[nxt][w - o] for w in range(o, max_weight + 1) if paths[nxt][w - o]}


def test_criterion_3_spectrum_matches_transfer_function():
    spec = distance_spectrum(3, ["5", "7"], max_terms=8)
    expected = transfer_function_counts(8)
    walked = state_machine_counts(0b101, 0b111, 2, 12)
    got = dict(spec.spectrum)
    ok = (spec.d_free == 5 and got == expected
          and all(walked[d] == a for d, a in expected.items())
          and all(a == 2 ** (d - 5) for d, a in got.items()))
    assert record(3, ok, f"d_free={spec.d_free}, terms {[a for _, a in spec.spectrum]}")


def test_criterion_4_fer_pipeline_monotone(link):
    rng = np.random.default_rng(404)
    draws, steps, L = 10_000, 10, 52
    mean_db = rng.uniform(-10, 35, draws)
    base = rng.exponential(1.0, (draws, L)) * 10 ** (mean_db[:, None] / 10)
    scales = np.geomspace(0.1, 10.0, steps)
    snr = base[:, None, :] * scales[None, :, None]  # (draw, step, subcarrier)
    mcs_pick = rng.integers(0, len(link.mcs_table), draws)
    violations = 0
    for i, mcs in enumerate(link.mcs_table):
        sel = mcs_pick == i
        if not sel.any():
            continue
        ber = modulation_ber(mcs.bits_per_symbol, snr[sel]).mean(axis=2)
        fer = fer_upper_bound(first_event_bound(link.codes[mcs.code_rate], ber), link.frame_length)
        violations += int(np.sum((ber < 0) | (ber > 0.5)))
        violations += int(np.sum((fer < 0) | (fer > 1)))
        violations += int(np.sum(np.diff(ber, axis=1) > 0))
        violations += int(np.sum(np.diff(fer, axis=1) > 0))
    assert record(4, violations == 0, f"{draws} draws x {steps} scale steps, {violations} violations")


# ------------------------------------------------------------------ channel


def test_criterion_5_zero_forcing():
    worst_leak = worst_norm = 0.0
    for seed in range(1000):
        ch = generate_channel(4, 4, 1, 1.0, seed=seed)
        w = zf_weights(ch).weights[:, 0, :]
        h = ch.coeffs[:, 0, :]
        cross = np.abs(h @ w.T) / np.linalg.norm(h, axis=1)[:, None]
        np.fill_diagonal(cross, 0.0)
        worst_leak = max(worst_leak, float(cross.max()))
        worst_norm = max(worst_norm, float(np.max(np.abs(np.linalg.norm(w, axis=1) - 1))))
    ok = worst_leak < 1e-9 and worst_norm < 1e-9
    assert record(5, ok, f"1000 channels, leakage {worst_leak:.1e}, norm error {worst_norm:.1e}")


# ------------------------------------------------------------------ utility


def test_criterion_6_utility_calibration():
    voip = build_utility_spec("voip", 0.7)
    video = build_utility_spec("video", epsilon=0.05, rate_max=60e6)
    checks = [
        abs(eval_utility(voip, 100e3, 0.0) - 1.0),
        abs(eval_utility(voip, 25e3, 0.0) - 0.92),
        abs(eval_utility(video, 0.0, 0.0) - 0.05),
    ]
    assert record(6, max(checks) <= 1e-12, f"max calibration error {max(checks):.1e}")


# ------------------------------------------------------------------ simulation


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    cfg = replace(SimConfig(), transmissions=RUN_TRANSMISSIONS)
    start = time.perf_counter()
    report = run_simulation(cfg)
    elapsed = time.perf_counter() - start
    out = tmp_path_factory.mktemp("run_a")
    emit_report(report, out)
    return cfg, report, elapsed, out


@pytest.mark.slow
def test_criterion_7_fairness(default_run):
    _, report, elapsed, _ = default_run
    s = report.summary["schemes"]
    prop, epa = s["proposed"]["jain"]["mean"], s["epa"]["jain"]["mean"]
    ok = prop > epa and prop >= 0.95 and elapsed < 120.0
    assert record(7, ok, f"Jain proposed {prop:.4f} vs EPA {epa:.4f}, {elapsed:.1f} s "
                         f"({report.summary['counts']})")


@pytest.mark.slow
def test_criterion_8_efficiency(default_run):
    _, report, _, _ = default_run
    ratio = report.summary["utility_ratio"]
    value = ratio["value"]
    assert value is not None
    note = "in band" if ratio["in_band"] else f"FLAGGED outside {list(RATIO_BAND)}"
    assert record(8, value >= RATIO_HARD_FLOOR, f"proposed/maxutil utility ratio {value:.4f} ({note})")


@pytest.mark.slow
def test_criterion_9_determinism(default_run, tmp_path):
    cfg, _, _, first = default_run
    emit_report(run_simulation(cfg), tmp_path)
    same = all((first / n).read_bytes() == (tmp_path / n).read_bytes()
               for n in ("transmissions.csv", "summary.json"))
    assert record(9, same, "two runs byte-identical" if same else "outputs differ")


@pytest.mark.slow
def test_criterion_10_feasibility_scan(default_run):
    cfg, _, _, out = default_run
    groups = defaultdict(list)
    with open(out / "transmissions.csv") as fh:
        for row in csv.DictReader(fh):
            groups[(row["transmission"], row["scheme"])].append(row)
    bad = 0
    checked = 0
    for rows in groups.values():
        if rows[0]["feasible"] != "1":
            continue
        checked += 1
        total = math.fsum(float(r["power"]) for r in rows)
        under = any(float(r["utility"]) < cfg.u_min[int(r["receiver"])] for r in rows)
        negative = any(float(r["gain"]) < 0 for r in rows)
        bad += total > cfg.total_power or under or negative
    assert record(10, bad == 0, f"{checked} feasible row groups scanned, {bad} violations")


@pytest.mark.slow
def test_maxutil_never_below_proposed(default_run):
    _, report, _, _ = default_run
    for o in report.outcomes:
        if o.status == "ok":
            assert (o.results["maxutil"].total_utility
                    >= o.results["proposed"].total_utility - 1e-12)
