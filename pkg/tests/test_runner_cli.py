import csv
import json
from pathlib import Path

import numpy as np
import pytest

from solhier.cli import main
from solhier.errors import ConfigurationError
from solhier.oracles import build_split_oracle
from solhier.runner import RunOptions, Scenario, emit_plot_data, run_scenario, write_atomic

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def minimal(**over):
    doc = {"name": "tiny", "task": "derive-flow", "family": "tau", "seed": 1,
           "grid": {"boundary": "periodic", "axes": [{"name": "x", "start": -20, "stop": 20, "size": 128}]},
           "tolerances": {"nls": 1e-6, "runtime_s": 5.0}, "params": {"kind": "nls"}}
    doc.update(over)
    return doc


def test_every_shipped_scenario_validates():
    files = sorted(SCENARIOS.glob("*.json"))
    assert len(files) >= 10
    for f in files:
        Scenario.load(f)


@pytest.mark.parametrize("change,where", [
    ({"task": "solve"}, "task"),
    ({"tolerances": {"nls": -1.0}}, "tolerances/nls"),
    ({"extra": 1}, "<root>"),
    ({"grid": {"boundary": "periodic", "axes": [{"name": "x", "start": 0, "stop": 1, "size": 2}]}}, "grid/axes/0/size"),
])
def test_schema_errors_name_the_field(change, where):
    with pytest.raises(ConfigurationError, match=where):
        Scenario.from_dict(minimal(**change))


def test_grid_is_required_for_grid_tasks():
    doc = minimal()
    del doc["grid"]
    with pytest.raises(ConfigurationError, match="grid"):
        Scenario.from_dict(doc)


def test_missing_tolerance_and_unknown_kind(tmp_path):
    sc = Scenario.from_dict(minimal(tolerances={"nls": 1e-6}))
    with pytest.raises(ConfigurationError, match="runtime_s"):
        run_scenario(sc, RunOptions(write=False))
    sc = Scenario.from_dict(minimal(params={"kind": "kdv"}))
    with pytest.raises(ConfigurationError):
        run_scenario(sc, RunOptions(write=False))


def test_reports_are_reproducible_under_a_fixed_seed():
    sc = Scenario.load(SCENARIOS / "c05_first_flow_su3.json")
    a = run_scenario(sc, RunOptions(seed=42, write=False)).to_dict(with_timing=False)
    b = run_scenario(sc, RunOptions(seed=42, write=False)).to_dict(with_timing=False)
    assert a == b and a["seed"] == 42


def test_cli_pass_writes_report_and_plot_data(tmp_path, capsys):
    code = main(["derive-flow", "--scenario", str(SCENARIOS / "c03_nls_reproduction.json"), "--out", str(tmp_path)])
    assert code == 0
    out = tmp_path / "c03_nls_reproduction"
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["environment"]["numpy"] == np.__version__
    with open(out / "nls_rhs.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "re_qt", "im_qt", "re_expected", "im_expected"] and len(rows) == 513
    manifest = json.loads((out / "nls_rhs.json").read_text())
    assert manifest["units"] == "dimensionless"
    assert "PASS" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setenv("SOLHIER_OUT", str(tmp_path))
    c03 = str(SCENARIOS / "c03_nls_reproduction.json")
    assert main(["derive-flow", "--scenario", c03, "--tolerance-scale", "1e-20"]) == 1
    assert (tmp_path / "c03_nls_reproduction" / "report.json").exists()
    assert main(["evolve", "--scenario", c03]) == 2
    assert main(["run", "--scenario", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--scenario", str(bad)]) == 2
    with pytest.raises(SystemExit) as info:
        main(["derive-flow", "--scenario", c03, "--lambda-probes", "1,zero"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_cli_lambda_probes_reach_the_task(tmp_path, capsys):
    sc = str(SCENARIOS / "c08b_gsge_dressed_crossvalidation.json")
    code = main(["gsge-check", "--scenario", sc, "--no-write", "--json", "--lambda-probes", "0.7,1.3"])
    report = json.loads(capsys.readouterr().out)
    assert code == 0 and report["passed"]


def test_plot_data_with_no_rows_is_header_only(tmp_path):
    files = emit_plot_data(tmp_path, "empty", ["a", "b"], [])
    assert Path(files[0]).read_text() == "a,b\n"


def test_atomic_write_leaves_no_temporaries(tmp_path):
    write_atomic(tmp_path / "sub" / "f.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]


def test_oracle_rejects_unknown_family_and_detects_non_members():
    with pytest.raises(ConfigurationError):
        build_split_oracle("affine", 2, 1)
    oracle = build_split_oracle("tau", 2, 1)
    from solhier.loops import LoopElement
    outside = LoopElement(np.stack([np.eye(2)] * 3), -1)
    assert oracle.split(outside)[2] > 1e-3
