# -*- coding: utf-8 -*-
# SPDX-License-Identifier: AGPL-3.0-or-later
# Copyright (c) 2026 IVQRLab contributors
#
# This file is part of IVQRLab.
#
"""命令行：报告结构、退出码与可复现性"""


from __future__ import annotations

import json

import pytest

from ivqrlab import SCHEMA_VERSION
from ivqrlab.cli import main

FAST = ["--subsample", "40", "--node-limit", "20", "--draws", "100", "-q"]


def _error(capsys) -> dict:
    """stderr 中的错误JSON"""
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith('{"error"')]
    assert lines, "stderr 中没有错误JSON"
    return json.loads(lines[-1])


def _run_json(tmp_path, args, name="out.json") -> dict:
    out = tmp_path / name
    assert main([*args, "--out", str(out)]) == 0
    return json.loads(out.read_text(encoding="utf-8"))


class TestEstimate:

    def test_report_structure(self, tmp_path):
        report = _run_json(tmp_path, ["estimate", "--demo", "--tau", "0.5", "--omit-timings", *FAST])
        assert report['schema_version'] == SCHEMA_VERSION
        assert report['command'] == "estimate"
        assert report['config']['taus'] == [0.5]
        (result,) = report['results']
        assert result['tau'] == 0.5
        assert len(result['report']['beta_tilde']) == 4
        assert 'timings' not in result['report']
        assert 'wall_time' not in result['milp']
        assert result['milp']['metadata']['subsample_size'] == 40

    def test_several_quantiles(self, tmp_path):
        report = _run_json(tmp_path, ["estimate", "--demo", "--tau", "0.25,0.5,0.75", "--omit-timings", *FAST])
        assert [r['tau'] for r in report['results']] == [0.25, 0.5, 0.75]

    def test_byte_identical_reruns(self, tmp_path):
        args = ["estimate", "--demo", "--tau", "0.5", "--seed", "9", "--omit-timings", *FAST]
        assert main([*args, "--out", str(tmp_path / "a.json")]) == 0
        assert main([*args, "--out", str(tmp_path / "b.json")]) == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_worker_count_does_not_change_report(self, tmp_path):
        args = ["estimate", "--demo", "--tau", "0.5", "--seed", "9", "--omit-timings", *FAST]
        assert main([*args, "--jobs", "1", "--out", str(tmp_path / "serial.json")]) == 0
        assert main([*args, "--jobs", "4", "--out", str(tmp_path / "parallel.json")]) == 0
        assert (tmp_path / "serial.json").read_bytes() == (tmp_path / "parallel.json").read_bytes()

    def test_settings_block(self, tmp_path):
        report = _run_json(tmp_path, ["estimate", "--demo", "--omit-timings", *FAST])
        assert set(report['settings']) == {'solver', 'bootstrap', 'inference'}
        assert report['settings']['solver']['lp_backend'] == "simplex"
        assert 'jobs' not in report['config']

    def test_stdout_output(self, capsys):
        assert main(["estimate", "--demo", "--omit-timings", *FAST, "--out", "-"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report['results'][0]['tau'] == 0.5

    def test_standardized_instruments_recorded(self, tmp_path):
        report = _run_json(tmp_path, ["estimate", "--demo", "--standardize-z", "--omit-timings", *FAST])
        assert report['standardization']['intercept_column'] == 0


class TestErrors:

    def test_missing_column(self, tmp_path, capsys):
        code = main(["estimate", "--demo", "--y", "income", "--out", str(tmp_path / "r.json"), "-q"])
        assert code == 3
        error = _error(capsys)['error']
        assert error['type'] == "MissingColumnError"
        assert error['details']['column'] == "income"

    def test_missing_file(self, tmp_path, capsys):
        code = main(["estimate", "--input", str(tmp_path / "none.csv"), "--y", "y", "--x", "x", "--z", "x",
                     "--out", "-", "-q"])
        assert code == 3
        assert _error(capsys)['error']['type'] == "DataError"

    @pytest.mark.parametrize("args", [
        ["estimate", "--demo", "--tau", "1.5"],
        ["estimate", "--demo", "--tau", "abc"],
        ["estimate", "--demo", "--bogus"],
        ["estimate"],
        ["estimate", "--demo", "--model", "censored-ivqr"],
        ["estimate", "--demo", "--model", "hd-ivqr", "--lambda", "0.1"],
        ["milp-export", "--demo", "--model", "hd-ivqr"],
        ["jacobian", "--demo", "--beta", "1,1"],
        ["simulate"],
        ["simulate", "--experiment", "nope"],
    ])
    def test_config_errors(self, args, capsys):
        assert main([*args, "--out", "-"]) == 2
        assert _error(capsys)['error']['exit_code'] == 2

    def test_missing_out_flag(self, capsys):
        assert main(["estimate", "--demo"]) == 2
        assert _error(capsys)['schema_version'] == SCHEMA_VERSION

    def test_rmse_cell_outside_grid(self, capsys):
        assert main(["simulate", "--experiment", "rmse", "--n", "500", "--out", "-", "-q"]) == 2


class TestMilpExport:

    def test_lp_file_and_summary(self, tmp_path, capsys):
        path = tmp_path / "ivqr.lp"
        assert main(["milp-export", "--demo", "--subsample", "20", "--out", str(path), "-q"]) == 0
        summary = json.loads(capsys.readouterr().out)['summary']
        text = path.read_text(encoding="utf-8")
        assert text.startswith("\\ ivqrlab kind=ivqr\n")
        assert text.endswith("End\n")
        assert summary['binaries'] == 20
        assert summary['variables'] == 4 + 20 + 1
        assert summary['big_m'] > 0
        assert summary['q_star'] > 0
        assert summary['lp_path'] == str(path)

    def test_deterministic(self, tmp_path):
        for name in ("a.lp", "b.lp"):
            assert main(["milp-export", "--demo", "--subsample", "15", "--seed", "4",
                         "--out", str(tmp_path / name), "-q"]) == 0
        assert (tmp_path / "a.lp").read_bytes() == (tmp_path / "b.lp").read_bytes()

    def test_lp_text_on_stdout(self, capsys):
        assert main(["milp-export", "--demo", "--subsample", "5", "--out", "-", "-q"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("\\ ivqrlab kind=ivqr")
        assert "Binaries" in out

    def test_hd_ivqr(self, tmp_path):
        path = tmp_path / "hd.lp"
        assert main(["milp-export", "--demo", "--model", "hd-ivqr", "--lambda", "0.05",
                     "--subsample", "10", "--out", str(path), "-q"]) == 0
        text = path.read_text(encoding="utf-8")
        assert "kind=hd-ivqr" in text
        assert "betap_0" in text and "mom_up_0" in text


class TestJacobian:

    def test_user_beta(self, tmp_path):
        report = _run_json(tmp_path, ["jacobian", "--demo", "--beta", "1,1,1,1", "--draws", "50", "-q"])
        (result,) = report['results']
        assert result['beta_source'] == "user"
        assert len(result['gamma']) == 4
        assert all(len(row) == 4 for row in result['gamma'])
        assert len(result['diagnostics']) == 16

    def test_density_mode(self, tmp_path):
        report = _run_json(tmp_path, ["jacobian", "--demo", "--density", "y", "--tau", "0.5,0.9",
                                      "--draws", "100", "-q"])
        assert report['mode'] == "density"
        assert [r['tau'] for r in report['results']] == [0.5, 0.9]
        assert all(r['density'] > 0 for r in report['results'])


class TestSimulate:

    def test_rmse(self, tmp_path):
        report = _run_json(tmp_path, ["simulate", "--experiment", "rmse", "--n", "400", "--lambda", "10",
                                      "--replications", "2", "-q"])
        assert report['experiment'] == "rmse"
        assert len(report['table']) == 2
        assert {row['beta'] for row in report['table']} == {1.5, 3.0}

    def test_early_stop(self, tmp_path):
        report = _run_json(tmp_path, ["simulate", "--experiment", "early-stop", "--n", "30", "--p", "2",
                                      "--replications", "2", "--node-limit", "10", "-q"])
        assert report['report']['replications'] == 2
        assert report['report']['tau'] == 0.7
