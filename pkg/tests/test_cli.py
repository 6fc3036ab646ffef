import json

import pandas as pd
import pytest

from spectrum_market.config.presets import get_preset
from spectrum_market.main import main


@pytest.fixture
def b1_config(tmp_path):
    path = tmp_path / "b1.json"
    path.write_text(json.dumps(get_preset("b1-w1").market.model_dump(mode="json")), encoding="utf-8")
    return path


def test_validate_good_config(b1_config, tmp_path):
    out = tmp_path / "out"
    assert main(["validate", str(b1_config), "--output", str(out)]) == 0
    report = json.loads((out / "validation.json").read_text(encoding="utf-8"))
    assert report["ok"] is True
    assert report["notes"] == ["partial coverage at C=0"]


def test_validate_broken_config(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"providers": [{"id": "e", "kind": "entrant"}],
                                "classes": [{"demand": {"kind": "box"}}]}), encoding="utf-8")
    assert main(["validate", str(path), "--output", str(tmp_path / "out")]) == 1
    assert "classes[0].demand.valuation" in capsys.readouterr().out


def test_validate_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    assert main(["validate", str(path), "--output", str(tmp_path / "out")]) == 1


def test_validate_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "missing.json"), "--output", str(tmp_path / "out")]) == 2


def test_missing_verb():
    assert main([]) == 2


def test_unknown_preset(tmp_path):
    assert main(["reproduce", "b9", "--output", str(tmp_path)]) == 2


def test_solve_writes_json(b1_config, tmp_path):
    out = tmp_path / "out"
    assert main(["solve", str(b1_config), "--capacity", "1.0", "--output", str(out)]) == 0
    payload = json.loads((out / "equilibrium.json").read_text(encoding="utf-8"))
    assert payload["result"]["capacity"] == 1.0
    assert payload["result"]["prices"]["licensed"]["incumbent"] == pytest.approx(0.5)
    assert payload["result"]["regime"] == "Interior"


def test_solve_writes_csv(b1_config, tmp_path):
    out = tmp_path / "out"
    assert main(["solve", str(b1_config), "--capacity", "2.0", "--format", "csv", "--output", str(out)]) == 0
    frame = pd.read_csv(out / "equilibrium.csv")
    assert frame["price_incumbent"][0] == pytest.approx(0.25)
    assert frame["SW"][0] == pytest.approx(0.625)


def test_solve_output_is_deterministic(b1_config, tmp_path):
    for name in ("first", "second"):
        assert main(["solve", str(b1_config), "--capacity", "0.6", "--output", str(tmp_path / name)]) == 0
    first = (tmp_path / "first" / "equilibrium.json").read_bytes()
    assert first == (tmp_path / "second" / "equilibrium.json").read_bytes()


def test_sweep_columns(b1_config, tmp_path):
    out = tmp_path / "out"
    args = ["sweep", str(b1_config), "--grid-step", "0.1", "--c-max", "2", "--name", "b1", "--output", str(out)]
    assert main(args) == 0
    frame = pd.read_csv(out / "b1_sweep.csv")
    assert list(frame.columns) == [
        "C", "price_incumbent", "p_w",
        "x_licensed_h", "x_licensed_l", "X_w_h", "X_w_l", "delivered_h", "delivered_l",
        "SW", "CS", "revenue_incumbent", "revenue_entrant", "regime", "stage", "error",
    ]
    assert len(frame) == 21
    breakpoints = json.loads((out / "b1_breakpoints.json").read_text(encoding="utf-8"))
    assert breakpoints["family"] == "homogeneous"
    assert breakpoints["closed_form"]["c1"] == pytest.approx(0.5)


def test_divided_sweep(tmp_path):
    config = tmp_path / "b2.json"
    config.write_text(json.dumps(get_preset("b2-symmetric").market.model_dump(mode="json")), encoding="utf-8")
    out = tmp_path / "out"
    args = ["sweep", str(config), "--divided", "--grid-step", "0.5", "--c-max", "1", "--output", str(out)]
    assert main(args) == 0
    frame = pd.read_csv(out / "sweep_sweep.csv")
    assert frame["C"].tolist() == [0.0, 0.5, 1.0]
    assert frame["price_sp1"].iloc[-1] == pytest.approx(0.125, abs=1e-6)


def test_certify(b1_config, tmp_path):
    out = tmp_path / "out"
    assert main(["certify", str(b1_config), "--capacity", "0.6", "--resolution", "0.01", "--output", str(out)]) == 0
    certificate = json.loads((out / "certificate.json").read_text(encoding="utf-8"))
    assert certificate["passed"] is True
    assert certificate["unlicensed_prices_zero"] is True
    diagnostics = certificate["result"]["diagnostics"]
    assert diagnostics["certificate"]["max_gain"] <= 1e-6
    assert diagnostics["deviation_margin"] == pytest.approx(-diagnostics["certificate"]["max_gain"])
    assert certificate["result"]["prices"]["licensed"]["incumbent"] == pytest.approx(0.6)


def test_reproduce_homogeneous(tmp_path):
    assert main(["reproduce", "b1-w1", "--output", str(tmp_path)]) == 0
    table = pd.read_csv(tmp_path / "b1-w1_reproduction.csv")
    assert list(table.columns) == ["quantity", "expected", "computed", "tolerance", "status"]
    assert (table["status"] == "PASS").all()
    assert (tmp_path / "b1-w1_sweep.csv").exists()
    assert (tmp_path / "b1-w1_breakpoints.json").exists()


def test_invalid_setting_is_adjusted(b1_config, tmp_path):
    # 非正的容差被恢复为默认值，求解照常进行
    assert main(["solve", str(b1_config), "--wardrop-tol", "-1", "--output", str(tmp_path)]) == 0


def test_tolerance_flags_reach_settings(b1_config):
    from spectrum_market.main import _settings, build_parser

    args = build_parser().parse_args([
        "solve", str(b1_config), "--bisection-tol", "1e-8", "--golden-tol", "1e-10",
        "--convergence-tol", "1e-9", "--deviation-tol", "1e-7", "--damping", "0.7",
        "--max-iterations", "50", "--fallback-grid-points", "500",
    ])
    settings = _settings(args)
    assert settings.bisection_tol == 1e-8
    assert settings.golden_tol == 1e-10
    assert settings.convergence_tol == 1e-9
    assert settings.deviation_tol == 1e-7
    assert settings.damping == 0.7
    assert settings.max_iterations == 50
    assert settings.fallback_grid_points == 500


def test_solve_with_tolerance_flags(b1_config, tmp_path):
    args = ["solve", str(b1_config), "--capacity", "1.0", "--damping", "0.8", "--golden-tol", "1e-10",
            "--output", str(tmp_path)]
    assert main(args) == 0
