import csv
import json
from dataclasses import replace

import pytest

from fairlink import cli
from fairlink.allocator import epa_allocate, max_utility_allocate, proposed_allocate
from fairlink.errors import InvalidConfigError
from fairlink.metrics import jain_index
from fairlink.sim import (
    CSV_COLUMNS,
    SimConfig,
    build_tables,
    draw_channel,
    emit_report,
    load_config,
    run_simulation,
)
from fairlink.utility import build_utility_spec

SMALL = SimConfig(transmissions=6, seed=3)


def test_config_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL.to_dict()))
    assert load_config(path) == SMALL


@pytest.mark.parametrize("change", [
    {"bogus": 1},
    {"schemes": ["proposed", "magic"]},
    {"pathloss": [1.0, 1.0]},
    {"transmissions": 0},
    {"receivers": 5, "pathloss": [1] * 5},
    {"correlation": 1.0},
])
def test_config_rejects(change):
    d = SMALL.to_dict()
    d.update(change)
    with pytest.raises(InvalidConfigError):
        SimConfig.from_dict(d)


def test_unreadable_config(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(InvalidConfigError):
        load_config(path)


def test_single_transmission_matches_library_pipeline():
    cfg = replace(SMALL, transmissions=1)
    report = run_simulation(cfg)
    link = cfg.link_model()
    tables = build_tables(cfg, draw_channel(cfg, 0), link)
    direct = {
        "proposed": proposed_allocate(tables, cfg.u_min, cfg.total_power),
        "epa": epa_allocate(tables, cfg.total_power, cfg.u_min),
        "maxutil": max_utility_allocate(tables, cfg.total_power, cfg.u_min),
    }
    got = report.outcomes[0].results
    for scheme, res in direct.items():
        assert got[scheme] == res
    assert report.outcomes[0].jain["proposed"] == pytest.approx(
        jain_index([max(g, 0) for g in direct["proposed"].gains]))


def test_symmetric_receivers_proposed_at_least_as_fair():
    spec = build_utility_spec("file", 0.3, rate_max=78e6)
    cfg = replace(SMALL, transmissions=60, pathloss=(1.0,) * 4, utilities=(spec,) * 4)
    s = run_simulation(cfg).summary["schemes"]
    assert s["proposed"]["jain"]["mean"] >= s["epa"]["jain"]["mean"] - 0.01


def test_empty_schemes_writes_summary_only(tmp_path):
    report = run_simulation(replace(SMALL, transmissions=2, schemes=()))
    paths = emit_report(report, tmp_path)
    assert [p.name for p in paths] == ["summary.json"]
    assert json.loads(paths[0].read_text())["summary"]["schemes"] == {}


def test_csv_shape(tmp_path):
    cfg = replace(SMALL, transmissions=2, schemes=("proposed", "epa"))
    emit_report(run_simulation(cfg), tmp_path, formats=("csv",))
    with open(tmp_path / "transmissions.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) - 1 == 2 * 2 * 4


def test_reemit_is_byte_identical(tmp_path):
    report = run_simulation(SMALL)
    emit_report(report, tmp_path / "a")
    emit_report(report, tmp_path / "b")
    for name in ("transmissions.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_trace_driven_run_uses_given_channels():
    chans = [draw_channel(SMALL, i) for i in range(SMALL.transmissions)]
    a = run_simulation(SMALL)
    b = run_simulation(SMALL, channels=chans)
    assert [o.results for o in a.outcomes] == [o.results for o in b.outcomes]


def test_short_trace_truncates_run():
    chans = [draw_channel(SMALL, i) for i in range(2)]
    assert len(run_simulation(SMALL, channels=chans).outcomes) == 2


def test_workers_do_not_change_results():
    a = run_simulation(SMALL, workers=1)
    b = run_simulation(SMALL, workers=2)
    assert a.summary == b.summary
    assert [o.results for o in a.outcomes] == [o.results for o in b.outcomes]


def test_plots_written(tmp_path):
    paths = emit_report(run_simulation(replace(SMALL, transmissions=3)), tmp_path, plots=True)
    names = {p.name for p in paths}
    assert {"jain.png", "utility.png", "receiver_utilities.png"} <= names


# ---------------------------------------------------------------------- CLI


def test_cli_default_config(capsys):
    assert cli.main(["default-config"]) == 0
    assert SimConfig.from_dict(json.loads(capsys.readouterr().out)) == SimConfig()


def test_cli_run(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL.to_dict()))
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg), "--transmissions", "3", "--out", str(out),
                     "--no-plots"]) == 0
    assert "proposed/maxutil" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["summary"]["counts"]["transmissions"] == 3


def test_cli_bad_config_exits_nonzero(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"transmissions": -4}))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path)]) != 0
    assert "error" in capsys.readouterr().err


def test_cli_tables_and_allocate(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    assert cli.main(["tables", "--out", str(tmp_path / "t.csv"), "--instance", str(inst),
                     "--transmission", "1"]) == 0
    capsys.readouterr()
    assert cli.main(["allocate", str(inst)]) == 0
    fast = json.loads(capsys.readouterr().out)
    assert cli.main(["allocate", str(inst), "--scheme", "bruteforce"]) == 0
    slow = json.loads(capsys.readouterr().out)
    assert min(fast["gains"]) == pytest.approx(min(slow["gains"]), abs=1e-12)


def test_cli_trace_then_run(tmp_path):
    trace = tmp_path / "ch.bin"
    assert cli.main(["trace", "--out", str(trace), "--transmissions", "2"]) == 0
    assert cli.main(["run", "--channel-trace", str(trace), "--out", str(tmp_path / "o"),
                     "--no-plots", "--transmissions", "2"]) == 0
    assert (tmp_path / "o" / "transmissions.csv").exists()


def test_cli_spectrum(capsys):
    assert cli.main(["spectrum"]) == 0
    out = capsys.readouterr().out
    assert "d_free=10" in out and "d_free=6" in out


def test_cli_missing_trace(tmp_path, capsys):
    assert cli.main(["run", "--channel-trace", str(tmp_path / "none.bin"),
                     "--out", str(tmp_path)]) == 2


def test_trace_dimension_mismatch(tmp_path):
    chans = [draw_channel(replace(SMALL, subcarriers=48), 0)]
    with pytest.raises(InvalidConfigError):
        run_simulation(SMALL, channels=chans)
