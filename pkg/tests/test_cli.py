"""Command-line surface: config parsing, exit codes, and output files."""

import dataclasses
import json
from pathlib import Path

import pytest

from cbf_guard.cli import (
    EXIT_CONFIG,
    EXIT_HALTED,
    EXIT_NO_CANDIDATE,
    EXIT_OK,
    main,
    parse_run_config,
)
from cbf_guard.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _load(name):
    with open(CONFIGS / name) as fh:
        return json.load(fh)


class TestRunConfigParsing:
    def test_round_trip(self):
        doc = _load("di_multi.json")
        cfg = parse_run_config(doc)
        again = parse_run_config(cfg.to_dict())
        assert again == cfg

    @pytest.mark.parametrize(
        "mutate, path_fragment",
        [
            (lambda d: d.pop("x0"), "$.x0"),
            (lambda d: d.__setitem__("dt_integ", d["dt_control"]), "$.dt_integ"),
            (lambda d: d["system"].__setitem__("kind", "hovercraft"), "$.system.kind"),
            (lambda d: d["barriers"][0].__setitem__("gamma_slope", -1.0),
             "$.barriers[0].gamma_slope"),
            (lambda d: d["barriers"][0].__setitem__("c", [0.0]), "$.barriers[0].c"),
            (lambda d: d["policy"].__setitem__("kind", "lqr"), "$.policy.kind"),
            (lambda d: d.__setitem__("input_set", {}), "$.input_set"),
        ],
    )
    def test_errors_carry_json_path(self, mutate, path_fragment):
        doc = _load("di_single.json")
        mutate(doc)
        with pytest.raises(ConfigError) as exc_info:
            parse_run_config(doc)
        assert path_fragment in str(exc_info.value)

    def test_auto_tightening_requires_policy_lipschitz(self):
        doc = _load("di_multi.json")
        doc.pop("l_pi")
        with pytest.raises(ConfigError) as exc_info:
            parse_run_config(doc)
        assert "l_pi" in str(exc_info.value)


class TestSimulateCommand:
    def test_halting_run_writes_partial_outputs(self, tmp_path, capsys):
        code = main(
            ["simulate", "--config", str(CONFIGS / "di_single.json"),
             "--out", str(tmp_path), "--quiet"]
        )
        assert code == EXIT_HALTED
        traj = (tmp_path / "di_single_trajectory.csv").read_text().splitlines()
        assert traj[0].startswith("t,x1,x2,u1,uc1,h1")
        assert len(traj) > 100
        metrics = json.loads((tmp_path / "di_single_metrics.json").read_text())
        assert metrics["halted"]["reason"] == "InfeasibleQP"
        assert metrics["min_h"] < 0.0

    def test_outputs_are_reproducible(self, tmp_path):
        for sub in ("a", "b"):
            code = main(
                ["simulate", "--config", str(CONFIGS / "di_single.json"),
                 "--out", str(tmp_path / sub), "--quiet"]
            )
            assert code == EXIT_HALTED
        name = "di_single_trajectory.csv"
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()

    def test_missing_config_exits_1(self, tmp_path, capsys):
        code = main(["simulate", "--config", str(tmp_path / "nope.json")])
        assert code == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_malformed_json_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main(["simulate", "--config", str(bad)])
        assert code == EXIT_CONFIG
        assert "invalid JSON" in capsys.readouterr().err

    def test_bad_field_reports_path_on_stderr(self, tmp_path, capsys):
        doc = _load("di_single.json")
        doc["barriers"][0]["p_diag"] = "wide"
        bad = tmp_path / "bad_field.json"
        bad.write_text(json.dumps(doc))
        code = main(["simulate", "--config", str(bad)])
        assert code == EXIT_CONFIG
        assert "$.barriers[0].p_diag" in capsys.readouterr().err


class TestMetricsCommand:
    def test_matches_simulate_report(self, tmp_path, capsys):
        main(
            ["simulate", "--config", str(CONFIGS / "di_single.json"),
             "--out", str(tmp_path), "--quiet"]
        )
        code = main(
            ["metrics", "--traj", str(tmp_path / "di_single_trajectory.csv"),
             "--out", str(tmp_path / "re"), "--quiet"]
        )
        assert code == EXIT_OK
        original = json.loads((tmp_path / "di_single_metrics.json").read_text())
        recomputed = json.loads((tmp_path / "re" / "metrics.json").read_text())
        assert recomputed["switch_count"] == original["switch_count"]
        assert recomputed["input_total_variation"] == pytest.approx(
            original["input_total_variation"], rel=1e-9
        )


class TestInactivityMapCommand:
    def test_writes_labelled_grid(self, tmp_path):
        code = main(
            ["inactivity-map", "--config", str(CONFIGS / "di_inactivity.json"),
             "--out", str(tmp_path), "--quiet"]
        )
        assert code == EXIT_OK
        lines = (tmp_path / "di_inactivity.csv").read_text().splitlines()
        assert lines[0] == "x1,x2,label"
        assert len(lines) == 1 + 101 * 101
        labels = {line.rsplit(",", 1)[1] for line in lines[1:]}
        assert labels == {"0", "1", "2"}


class TestSynthesizeCommand:
    def test_zero_budget_exits_3(self, tmp_path, capsys):
        doc = _load("synth_di.json")
        doc["iteration_budget"] = 0
        cfg = tmp_path / "synth0.json"
        cfg.write_text(json.dumps(doc))
        code = main(["synthesize", "--config", str(cfg),
                     "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_NO_CANDIDATE
        report = json.loads((tmp_path / "synth_di_result.json").read_text())
        assert report["status"] == "no_feasible_candidate"


class TestAnalyzeCommand:
    def test_recovers_control_rate_from_auto_tightening(self, tmp_path):
        code = main(
            ["analyze", "--config", str(CONFIGS / "di_multi.json"),
             "--out", str(tmp_path), "--quiet"]
        )
        assert code == EXIT_OK
        report = json.loads((tmp_path / "analysis.json").read_text())
        cfg = _load("di_multi.json")
        assert report["dt_max"] == pytest.approx(cfg["dt_control"], rel=1e-9)
        assert all(0 < d < 1 for d in report["d_i"])
        assert report["L"] > 0 and report["u_bar"] > 0
