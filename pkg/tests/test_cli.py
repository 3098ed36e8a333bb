import json

import numpy as np
import pytest

from tilewave.cli import DEFAULT_RX, Scenario, ScenarioError, main, run


def _tiny(case="plain", out="out", **kw):
    defaults = dict(case=case, frequency_hz=60e9, seed=3, rays=20_000, bounces=2,
                    population=4, generations=1, out_dir=out)
    defaults.update(kw)
    return Scenario(**defaults)


def test_default_receiver_grid_matches_deployment():
    xs = sorted({p[0] for p in DEFAULT_RX})
    ys = sorted({p[1] for p in DEFAULT_RX})
    assert xs == [0.75, 3.25]
    assert ys == [1.25, 3.75, 6.25, 8.75, 11.25, 13.75]
    assert all(p[2] == 1.5 for p in DEFAULT_RX)
    assert len(DEFAULT_RX) == 12


def test_plain_run_artifacts(tmp_path):
    sc = _tiny(out=str(tmp_path / "run"))
    assert run(sc) == 0
    out = tmp_path / "run"
    for name in ("run_config.json", "summary.txt", "receiver_power.csv",
                 "receiver_delay_spread.csv", "best_genome.json", "ga_history.csv"):
        assert (out / name).exists(), name
        text = (out / name).read_text()
        if name.endswith((".txt", ".csv")):
            assert "seed=3" in text  # every artifact carries the seed
    summary = (out / "summary.txt").read_text()
    assert "Case A (dBmW)" in summary and "Case B (nsec)" in summary
    for row in ("Max", "Mean", "Min"):
        assert row in summary


def test_run_config_roundtrip_reproduces_outputs(tmp_path):
    sc = _tiny(out=str(tmp_path / "a"))
    assert run(sc) == 0
    rc = Scenario.from_file(tmp_path / "a" / "run_config.json")
    rc.out_dir = str(tmp_path / "b")
    assert run(rc) == 0
    for name in ("summary.txt", "receiver_power.csv", "receiver_delay_spread.csv",
                 "best_genome.json", "ga_history.csv"):
        assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()


def test_degenerate_case_a_equals_plain(tmp_path):
    plain = _tiny(case="plain", out=str(tmp_path / "p"), seed=9)
    run(plain)
    degenerate = _tiny(case="case_a", out=str(tmp_path / "d"), seed=9,
                       generations=0, seed_population="plain-only")
    run(degenerate)
    p_csv = (tmp_path / "p" / "receiver_power.csv").read_text().splitlines()
    d_csv = (tmp_path / "d" / "receiver_power.csv").read_text().splitlines()
    # identical per-receiver values (headers differ by the case field)
    assert [l for l in p_csv if not l.startswith("#")] == \
           [l for l in d_csv if not l.startswith("#")]


def test_case_b_requires_threshold(tmp_path):
    sc = _tiny(case="case_b", out=str(tmp_path / "x"))
    with pytest.raises(ScenarioError) as err:
        run(sc)
    assert err.value.code == 3


def test_scenario_schema_errors(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text('{"version": 1,\n  "case": }\n')
    with pytest.raises(ScenarioError) as err:
        Scenario.from_file(bad_json)
    assert err.value.code == 2
    assert "line 2" in str(err.value)

    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"version": 1, "case": "plain", "bogus": 1}))
    with pytest.raises(ScenarioError) as err:
        Scenario.from_file(unknown)
    assert "bogus" in str(err.value)

    wrong_version = tmp_path / "v9.json"
    wrong_version.write_text(json.dumps({"version": 9}))
    with pytest.raises(ScenarioError):
        Scenario.from_file(wrong_version)


def test_main_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert main(["from-file", str(bad)]) == 2
    ok = tmp_path / "ok.json"
    ok.write_text(json.dumps(_tiny(out=str(tmp_path / "o")).to_dict()))
    assert main(["from-file", str(ok)]) == 0
    assert main(["from-file", str(ok), "--out", str(tmp_path / "o2")]) == 0
    assert (tmp_path / "o2" / "summary.txt").exists()


def test_main_subcommand_plain(tmp_path):
    code = main(["plain", "--out", str(tmp_path / "cli"), "--rays", "20000",
                 "--bounces", "2", "--seed", "4", "--freq", "60GHz"])
    assert code == 0
    cfg = json.loads((tmp_path / "cli" / "run_config.json").read_text())
    assert cfg["case"] == "plain" and cfg["seed"] == 4
    assert cfg["frequency_hz"] == 60e9


def test_scene_file_scenario(tmp_path, floorplan):
    scene_file = tmp_path / "scene.json"
    floorplan.save(scene_file)
    sc = _tiny(out=str(tmp_path / "s"), scene=str(scene_file))
    assert run(sc) == 0
    missing = _tiny(out=str(tmp_path / "s2"), scene=str(tmp_path / "nope.json"))
    with pytest.raises(ScenarioError) as err:
        run(missing)
    assert err.value.code == 2


def test_grid_csv_fixed_formatting(tmp_path):
    sc = _tiny(out=str(tmp_path / "fmt"))
    run(sc)
    rows = [l for l in (tmp_path / "fmt" / "receiver_power.csv").read_text().splitlines()
            if l and not l.startswith("#")][1:]
    assert len(rows) == 12
    for row in rows:
        cells = row.split(",")
        assert len(cells) == 6
        assert "." in cells[4] and "." in cells[5]  # fixed decimal places
