import csv
import io
import json

import numpy as np
import pytest

from gkpcodes.cli import FORMAT_VERSION, THREADS_ENV, main
from gkpcodes.symplectic import sqrep2, sqrep2_encoding


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestLatticeInfo:
    def test_hexagonal(self, capsys):
        code, out, _ = run(["lattice", "info", "hexagonal"], capsys)
        d = json.loads(out)
        assert code == 0
        assert round(d["min_norm_over_ell"], 2) == 1.07
        assert d["self_dual"] is True

    def test_square_self_dual(self, capsys):
        _, out, _ = run(["lattice", "info", "square"], capsys)
        assert json.loads(out)["self_dual"] is True

    def test_d4_integral(self, capsys):
        _, out, _ = run(["lattice", "info", "d4"], capsys)
        d = json.loads(out)
        assert d["integral"] and d["modes"] == 2

    def test_unknown_lattice(self, capsys):
        code, _, err = run(["lattice", "info", "e8"], capsys)
        assert code == 2 and "unknown lattice" in err

    def test_lattice_file(self, capsys, tmp_path):
        from gkpcodes.lattice import hexagonal
        p = tmp_path / "lat.json"
        p.write_text(hexagonal().to_json())
        _, out, _ = run(["lattice", "info", str(p)], capsys)
        assert json.loads(out)["label"] == "hexagonal"


class TestDecodeEval:
    def test_square_reference_check(self, capsys):
        code, out, _ = run(["decode", "eval", "--lattice", "square", "--sigma-sq", "0.01",
                            "--check"], capsys)
        assert code == 0
        assert abs(json.loads(out)["sigma_rms_sq"] - 1.25129e-3) < 5e-7

    def test_check_failure_exit_code(self, capsys):
        code, _, err = run(["decode", "eval", "--lattice", "square", "--sigma-sq", "0.01",
                            "--gain", "2.0", "--check"], capsys)
        assert code == 4 and "check failed" in err

    def test_mc_reproducible(self, capsys, tmp_path):
        outs = []
        for i in range(2):
            p = tmp_path / f"r{i}.csv"
            assert main(["decode", "eval", "--lattice", "hexagonal", "--sigma", "0.3",
                         "--gain", "2.0", "--method", "mc", "--samples", "20000", "--seed", "7",
                         "--out", str(p)]) == 0
            outs.append(p.read_bytes())
        assert outs[0] == outs[1]
        r = rows(outs[0].decode())[0]
        assert r["format_version"] == str(FORMAT_VERSION)
        assert r["method"] == "mc-rb"

    def test_mmse_not_worse_than_linear(self, capsys):
        vals = {}
        for est in ("mmse", "linear"):
            _, out, _ = run(["decode", "eval", "--sigma", "0.5", "--gain", "1.5",
                             "--estimator", est], capsys)
            vals[est] = json.loads(out)["sigma_rms_sq"]
        assert vals["mmse"] <= vals["linear"]

    def test_sigma_conflict(self, capsys):
        code, _, err = run(["decode", "eval", "--sigma", "0.1", "--sigma-sq", "0.01"], capsys)
        assert code == 2

    def test_missing_sigma(self, capsys):
        assert run(["decode", "eval"], capsys)[0] == 2

    def test_multimode_needs_gain(self, capsys):
        assert run(["decode", "eval", "--lattice", "d4", "--sigma", "0.3"], capsys)[0] == 2

    def test_numerical_failure_exit_code(self, capsys):
        code, _, err = run(["decode", "eval", "--sigma", "0.3", "--gain", "1e9"], capsys)
        assert code == 3 and "numerical failure" in err

    def test_twelve_digits(self, capsys, tmp_path):
        p = tmp_path / "r.csv"
        main(["decode", "eval", "--sigma", "0.1", "--gain", "3.0", "--out", str(p)])
        v = rows(p.read_text())[0]["sigma_gm_sq"]
        assert len(v.replace(".", "").replace("e-", "").lstrip("0")) <= 14


class TestConfig:
    def test_config_overlay(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"sigma": 0.2, "gain": 2.0, "estimator": "linear"}))
        _, out, _ = run(["decode", "eval", "--config", str(cfg)], capsys)
        d = json.loads(out)
        assert d["sigma"] == 0.2 and d["estimator"] == "linear"

    def test_cli_wins_over_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"sigma": 0.2, "gain": 2.0}))
        _, out, _ = run(["decode", "eval", "--config", str(cfg), "--gain", "3.0"], capsys)
        assert json.loads(out)["gain"] == 3.0

    @pytest.mark.parametrize("content", ['{"bogus": 1}', "[1, 2]", "not json"])
    def test_rejected(self, capsys, tmp_path, content):
        cfg = tmp_path / "c.json"
        cfg.write_text(content)
        code, _, err = run(["decode", "eval", "--config", str(cfg)], capsys)
        assert code == 2 and "configuration error" in err

    def test_missing_file(self, capsys):
        assert run(["decode", "eval", "--config", "/nonexistent.json"], capsys)[0] == 2

    def test_argparse_errors_exit_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["decode", "eval", "--estimator", "ml"])
        assert exc.value.code == 2
        with pytest.raises(SystemExit):
            main(["decode", "eval", "--sig", "0.1"])

    def test_threads_env(self, capsys, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "x")
        code = main(["decode", "eval", "--sigma", "0.3", "--gain", "2", "--method", "mc",
                     "--samples", "1000"])
        assert code == 2
        monkeypatch.setenv(THREADS_ENV, "2")
        assert main(["decode", "eval", "--sigma", "0.3", "--gain", "2", "--method", "mc",
                     "--samples", "1000"]) == 0


class TestOtherCommands:
    def test_bounds(self, capsys):
        code, out, _ = run(["bounds", "--ratios", "1", "2", "--points", "5"], capsys)
        r = rows(out)
        assert code == 0 and len(r) == 10
        assert set(r[0]) == {"format_version", "m_over_n", "sigma", "sigma_lb", "ratio"}

    def test_reduce_sqrep2(self, capsys, tmp_path):
        p = tmp_path / "s.npy"
        np.save(p, sqrep2(1.3))
        _, out, _ = run(["reduce", str(p), "--n", "1", "--m", "1", "--inverse"], capsys)
        assert abs(json.loads(out)["gains"][0] - (np.sqrt(2) + 1) / 2) < 1e-10
        p2 = tmp_path / "s.json"
        p2.write_text(json.dumps(sqrep2_encoding(1.3).tolist()))
        _, out, _ = run(["reduce", str(p2), "--n", "1", "--m", "1"], capsys)
        assert abs(json.loads(out)["gains"][0] - (np.sqrt(2) + 1) / 2) < 1e-10

    def test_reduce_errors(self, capsys, tmp_path):
        p = tmp_path / "s.txt"
        p.write_text("1 0\n0 1\n")
        assert run(["reduce", str(p), "--n", "1", "--m", "1"], capsys)[0] == 2
        assert run(["reduce", str(tmp_path / "none.npy"), "--n", "1", "--m", "1"], capsys)[0] == 2

    def test_sweep(self, capsys):
        code, out, _ = run(["sweep", "--n-r", "2", "--n-theta", "2", "--sigma", "0.1"], capsys)
        r = rows(out)
        assert code == 0 and len(r) == 4
        assert float(r[0]["G_opt"]) > 1

    def test_breakeven(self, capsys):
        code, out, _ = run(["breakeven", "--estimator", "linear", "--low", "0.5", "--high",
                            "0.6", "--tol", "0.005"], capsys)
        d = json.loads(out)
        assert code == 0 and abs(d["sigma_star"] - 0.5585) < 0.005

    def test_breakeven_unbracketed(self, capsys):
        assert run(["breakeven", "--low", "0.65", "--high", "0.7"], capsys)[0] == 3

    def test_finite(self, capsys):
        code, out, _ = run(["finite", "--gkp-dbs", "inf", "20", "--sigmas", "0.2"], capsys)
        r = rows(out)
        assert code == 0 and len(r) == 2
        assert float(r[0]["qec_gain"]) > float(r[1]["qec_gain"])

    def test_table3_small(self, capsys):
        code, out, _ = run(["table3", "--lattices", "square", "--sigmas", "0.3",
                            "--samples", "2048"], capsys)
        r = rows(out)
        assert code == 0 and len(r) == 1
        assert float(r[0]["G1"]) > 1

    def test_module_entry_point(self):
        import subprocess
        import sys
        out = subprocess.run([sys.executable, "-m", "gkpcodes", "lattice", "info", "square"],
                             capture_output=True, text=True, check=True)
        assert json.loads(out.stdout)["self_dual"] is True
