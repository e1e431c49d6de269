"""CLI configuration, command dispatch, report emission and exit codes."""

import json
import os

import pytest

from hkcce.cli import RunConfig, fmt15, main, parse_config


class TestParseConfig:
    def test_defaults(self):
        cfg = parse_config(["qcurv"])
        assert cfg.command == "qcurv"
        assert cfg.n == [4] and cfg.gamma == [0.5] and cfg.k == [1.0]
        assert cfg.ode_tol == 1e-8 and cfg.quad_tol == 1e-6 and cfg.T == 18.0
        assert cfg.emit_csv and cfg.emit_json

    def test_explicit_case(self):
        cfg = parse_config(["qcurv", "--n", "4", "--gamma", "0.5", "--k", "1"])
        assert (cfg.n, cfg.gamma, cfg.k) == ([4], [0.5], [1.0])

    def test_range_syntax(self):
        cfg = parse_config(["verify", "prop21", "--n", "5..8"])
        assert cfg.n == [5, 6, 7, 8]
        assert cfg.verify_target == "prop21"

    def test_comma_lists(self):
        cfg = parse_config(["sweep", "--gamma", "0.25,0.5,0.75", "--k", "0.5,1,2"])
        assert cfg.gamma == [0.25, 0.5, 0.75]
        assert cfg.k == [0.5, 1.0, 2.0]

    def test_resonance_guard(self):
        with pytest.raises(ValueError):
            parse_config(["qcurv", "--gamma", "0.99"])

    def test_flag_overrides_config_file(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"gamma": [0.25, 0.5, 0.75], "k": [2.0]}))
        cfg = parse_config(["qcurv", "--config", str(cfg_file), "--gamma", "0.5"])
        assert cfg.gamma == [0.5]       # flag wins
        assert cfg.k == [2.0]           # file fills the rest

    def test_env_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HKCCE_OUT", str(tmp_path / "envout"))
        cfg = parse_config(["qcurv"])
        assert cfg.out == str(tmp_path / "envout")

    def test_emit_selection(self):
        cfg = parse_config(["qcurv", "--emit", "csv"])
        assert cfg.emit_csv and not cfg.emit_json

    def test_bad_emit(self):
        with pytest.raises(ValueError):
            parse_config(["qcurv", "--emit", "yaml"])

    def test_missing_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            parse_config([])
        assert exc.value.code != 0

    def test_validate_ranges(self):
        with pytest.raises(ValueError):
            RunConfig(command="qcurv", ode_tol=1e-14).validate()
        with pytest.raises(ValueError):
            RunConfig(command="qcurv", T=50.0).validate()
        with pytest.raises(ValueError):
            RunConfig(command="qcurv", n=[]).validate()


class TestFormatting:
    def test_fmt15(self):
        assert fmt15(1.0) == "1"
        assert fmt15(0.1) == "0.1"
        assert len(fmt15(2.0 / 3.0).replace("0.", "")) == 15


class TestCommands:
    def test_qcurv_unit_case(self, tmp_path, capsys):
        rc = main(["qcurv", "--n", "4", "--gamma", "0.5", "--k", "1",
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        lines = (tmp_path / "o" / "tables" / "qcurv.csv").read_text().strip().split("\n")
        assert lines[0].startswith("n,gamma,k,Q_num,Q_oracle,rel_err")
        row = lines[1].split(",")
        assert float(row[3]) == pytest.approx(1.0, abs=1e-6)
        assert float(row[5]) <= 1e-6
        assert row[-1] == "pass"

    def test_prop21_certificate(self, tmp_path):
        rc = main(["verify", "prop21", "--n", "5", "--out", str(tmp_path / "o")])
        assert rc == 0
        payload = json.loads((tmp_path / "o" / "reports" / "prop21_n5.json").read_text())
        assert payload["beta"]["intE2"] == "1/135"
        assert payload["ok"] is True

    def test_prop21_small_n_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            from hkcce.cli import run_command
            run_command(parse_config(["verify", "prop21", "--n", "4",
                                      "--out", str(tmp_path / "o")]))

    def test_verify_adapted_strict_exit_zero(self, tmp_path):
        rc = main(["verify", "hk-adapted", "--gamma", "0.25",
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        rows = json.loads((tmp_path / "o" / "reports" / "hk-adapted.json").read_text())
        assert rows[0]["verdict"] == "strict"

    def test_sweep_cardinality_and_schema(self, tmp_path):
        rc = main(["sweep", "--n", "4", "--gamma", "0.25,0.5", "--k", "1,2",
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        lines = (tmp_path / "o" / "tables" / "sweep.csv").read_text().strip().split("\n")
        assert lines[0] == "n,gamma,k,Q_num,Q_oracle,rel_err,lhs,rhs,gap,verdict"
        assert len(lines) == 1 + 4

    def test_determinism_byte_identical(self, tmp_path):
        args = ["sweep", "--n", "4", "--gamma", "0.25,0.5", "--k", "1"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "tables" / "sweep.csv").read_bytes()
        b = (tmp_path / "b" / "tables" / "sweep.csv").read_bytes()
        assert a == b

    def test_manifest_completeness(self, tmp_path):
        rc = main(["qcurv", "--out", str(tmp_path / "o"), "--quad-tol", "1e-7"])
        assert rc == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["tolerances"] == {"ode_tol": 1e-8, "quad_tol": 1e-7}
        assert manifest["T"] == 18.0
        assert manifest["all_pass"] is True
        assert "wall_clock_s" in manifest and "version" in manifest

    def test_residuals_command(self, tmp_path):
        rc = main(["residuals", "--n", "4", "--gamma", "0.5",
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        rows = json.loads((tmp_path / "o" / "reports" / "residuals.json").read_text())
        kinds = {r["kind"] for r in rows}
        assert kinds == {"adapted", "lee"}
        # profile dumps follow the documented column layout
        dump = tmp_path / "o" / "tables" / "profile_adapted_n4_g0.5_k1.0.csv"
        header = dump.read_text().split("\n", 1)[0]
        assert header == "t,r,rho,drho,grad_sq,T_or_J,res_rho,res_T_or_J"
        assert (tmp_path / "o" / "tables" / "profile_lee_n4_k1.0.csv").exists()

    def test_asymptotic_command(self, tmp_path):
        rc = main(["asymptotic", "--n", "5", "--k", "1", "--out", str(tmp_path / "o")])
        assert rc == 0
        lines = (tmp_path / "o" / "tables" / "asymptotic.csv").read_text().strip().split("\n")
        assert lines[0] == "n,k,r,ratio,abs_err"
        assert len(lines) == 1 + 20

    def test_parallel_jobs(self, tmp_path):
        rc = main(["qcurv", "--n", "4,5", "--gamma", "0.5", "--k", "1",
                   "--jobs", "2", "--out", str(tmp_path / "o")])
        assert rc == 0
        lines = (tmp_path / "o" / "tables" / "qcurv.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + 2

    def test_failing_verdict_exits_one(self, tmp_path, capsys):
        # quad_tol below the quadrature error floor forces inconclusive
        rc = main(["verify", "hk-adapted", "--gamma", "0.25",
                   "--quad-tol", "1e-10", "--out", str(tmp_path / "o")])
        assert rc == 1
        captured = capsys.readouterr()
        assert "failing verdict" in captured.err

    def test_io_failure_exits_two(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        rc = main(["qcurv", "--out", str(blocker / "sub")])
        assert rc == 2

    def test_usage_error_nonzero(self):
        rc = main(["qcurv", "--gamma", "0.99"])
        assert rc == 2
