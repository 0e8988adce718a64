import json
import os

import numpy as np
import pytest

from capexbound import cli
from capexbound.artifacts import read_boundary_csv, write_boundary_csv, fmt
from capexbound.config import ConfigError, load_config, parse_config


CLOSED_FORM = {
    "grid": {"T": 1.0, "N": 300},
    "coefficients": {"mu_C": 0.0, "sigma": 0.0, "f_C": 1.0, "mu_F": 1.0, "w": 1.0, "r": 1.0},
    "production": {"variant": "power_marginal", "scale": 1.0, "exponent": 1.0},
    "scrap": {"variant": "zero"},
    "mc": {"paths": 500, "seed": 42},
}

STOCHASTIC = {
    "grid": {"T": 1.0, "N": 25},
    "coefficients": {"mu_C": 0.05, "sigma": 0.1, "f_C": 1.0, "mu_F": 0.05, "w": 1.0, "r": 1.0},
    "production": {"variant": "power_marginal", "scale": 0.2, "exponent": 1.0},
    "scrap": {"variant": "saturating_exponential", "a": 0.5, "b": 1.0},
    "mc": {"paths": 3000, "seed": 5},
}


def write_cfg(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


class TestConfigParsing:
    def test_good_config(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, STOCHASTIC))
        assert cfg.grid.n_steps == 25
        assert cfg.mc.n_paths == 3000
        assert len(cfg.config_hash) == 64
        assert cfg.model_hash != cfg.config_hash

    def test_unknown_root_key(self):
        bad = dict(STOCHASTIC, extra={"x": 1})
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_unknown_section_key(self):
        bad = json.loads(json.dumps(STOCHASTIC))
        bad["coefficients"]["typo"] = 1.0
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_wrong_node_array_length(self):
        bad = json.loads(json.dumps(STOCHASTIC))
        bad["coefficients"]["w"] = [1.0, 1.0, 1.0]
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_node_array_accepted(self):
        good = json.loads(json.dumps(STOCHASTIC))
        good["coefficients"]["w"] = [1.0] * 26
        cfg = parse_config(good)
        assert np.all(cfg.coeffs.w == 1.0)

    def test_model_hash_ignores_mc_section(self):
        a = parse_config(json.loads(json.dumps(STOCHASTIC)))
        other = json.loads(json.dumps(STOCHASTIC))
        other["mc"]["seed"] = 99
        b = parse_config(other)
        assert a.model_hash == b.model_hash
        assert a.config_hash != b.config_hash


class TestBoundaryCsv:
    def test_round_trip_lossless(self, tmp_path):
        import capexbound as cb
        grid = cb.TimeGrid.uniform(1.0, 7)
        rng = np.random.default_rng(0)
        vals = rng.uniform(0.1, 2.0, 7)
        curve = cb.BoundaryCurve(grid, vals, rng.normal(size=7) * 1e-7,
                                 rng.uniform(1e-9, 1e-6, 7), np.zeros(7),
                                 np.arange(7), meta={})
        path = str(tmp_path / "b.csv")
        write_boundary_csv(path, curve, "abc123", 9)
        back = read_boundary_csv(path)
        assert np.array_equal(back.yhat, vals)
        assert np.array_equal(back.residual, curve.residual)
        assert back.model_hash == "abc123"
        assert back.seed == 9

    def test_fmt_17_digits_round_trip(self):
        x = 1.0 / 3.0
        assert float(fmt(x)) == x


class TestCliSolve:
    def test_closed_form_end_to_end(self, tmp_path):
        cfg = write_cfg(tmp_path, CLOSED_FORM)
        out = str(tmp_path / "run")
        rc = cli.main(["solve", "--config", cfg, "--out", out, "--allow-zero-scrap"])
        assert rc == 0
        b = read_boundary_csv(os.path.join(out, "boundary.csv"))
        err = np.abs(b.yhat - (1 - np.exp(-(1 - b.t))))
        assert err.max() <= 1e-6
        manifest = json.loads(open(os.path.join(out, "manifest.json")).read())
        assert manifest["model_hash"] == load_config(cfg).model_hash

    def test_missing_grid_T_exits_2(self, tmp_path):
        bad = json.loads(json.dumps(CLOSED_FORM))
        del bad["grid"]["T"]
        rc = cli.main(["solve", "--config", write_cfg(tmp_path, bad),
                       "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_bad_exponent_sum_exits_3(self, tmp_path):
        bad = json.loads(json.dumps(STOCHASTIC))
        bad["production"] = {"variant": "cobb_douglas", "alpha": 0.3, "beta": 0.4, "gamma": 0.4}
        rc = cli.main(["solve", "--config", write_cfg(tmp_path, bad),
                       "--out", str(tmp_path / "o")])
        assert rc == 3

    def test_zero_scrap_needs_flag(self, tmp_path):
        cfg = write_cfg(tmp_path, CLOSED_FORM)
        rc = cli.main(["solve", "--config", cfg, "--out", str(tmp_path / "o")])
        assert rc == 3


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipeline")
    cfg = write_cfg(tmp, STOCHASTIC)
    out = str(tmp / "solve")
    assert cli.main(["solve", "--config", cfg, "--out", out]) == 0
    return tmp, cfg, os.path.join(out, "boundary.csv")


class TestCliSimulateVerify:
    def test_inactive_control_matches_zero_plan(self, solved, tmp_path):
        tmp, cfg, boundary = solved
        b = read_boundary_csv(boundary)
        y_high = 10.0 * b.yhat.max()
        out = str(tmp_path / "sim")
        rc = cli.main(["simulate", "--config", cfg, "--boundary", boundary,
                       "--y", str(y_high), "--out", out, "--paths", "500"])
        assert rc == 0
        summary = json.loads(open(os.path.join(out, "manifest.json")).read())["summary"]
        assert summary["J_opt"] == summary["J_zero"]
        assert summary["mean_initial_jump"] == 0.0

    def test_initial_jump_on_degenerate_paths(self, tmp_path):
        cfg_payload = json.loads(json.dumps(CLOSED_FORM))
        cfg_payload["grid"]["N"] = 60
        cfg = write_cfg(tmp_path, cfg_payload)
        out = str(tmp_path / "s")
        assert cli.main(["solve", "--config", cfg, "--out", out, "--allow-zero-scrap"]) == 0
        boundary = os.path.join(out, "boundary.csv")
        b = read_boundary_csv(boundary)
        y = 0.5 * b.yhat[0]
        sim_out = str(tmp_path / "sim")
        rc = cli.main(["simulate", "--config", cfg, "--boundary", boundary,
                       "--y", str(y), "--out", sim_out, "--paths", "64"])
        assert rc == 0
        summary = json.loads(open(os.path.join(sim_out, "manifest.json")).read())["summary"]
        assert summary["mean_initial_jump"] == pytest.approx(b.yhat[0] - y, rel=1e-9)

    def test_dominance(self, solved, tmp_path):
        tmp, cfg, boundary = solved
        b = read_boundary_csv(boundary)
        out = str(tmp_path / "sim")
        rc = cli.main(["simulate", "--config", cfg, "--boundary", boundary,
                       "--y", str(0.5 * b.yhat[0]), "--out", out])
        assert rc == 0
        s = json.loads(open(os.path.join(out, "manifest.json")).read())["summary"]
        assert s["J_opt"] >= s["J_zero"] - 2 * s["J_opt_se"]
        assert s["J_opt"] >= s["J_const_rate"] - 2 * s["J_opt_se"]

    def test_hash_mismatch_exits_5(self, solved, tmp_path):
        tmp, cfg, boundary = solved
        other = json.loads(json.dumps(STOCHASTIC))
        other["production"]["scale"] = 0.25
        cfg2 = write_cfg(tmp_path, other, "other.json")
        rc = cli.main(["simulate", "--config", cfg2, "--boundary", boundary,
                       "--y", "0.2", "--out", str(tmp_path / "x")])
        assert rc == 5

    def test_verify_passes(self, solved, tmp_path):
        tmp, cfg, boundary = solved
        out = str(tmp_path / "v")
        rc = cli.main(["verify", "--config", cfg, "--boundary", boundary, "--out", out])
        assert rc == 0
        report = json.loads(open(os.path.join(out, "report.json")).read())
        assert report["hard_pass"]
        assert report["checks"]["foc"]["passed"]

    def test_perturbed_boundary_exits_6(self, solved, tmp_path):
        tmp, cfg, boundary = solved
        lines = open(boundary).read().splitlines()
        out_lines = []
        for ln in lines:
            if ln.startswith("#") or ln.startswith("t,"):
                out_lines.append(ln)
                continue
            parts = ln.split(",")
            parts[1] = fmt(float(parts[1]) * 1.2)
            out_lines.append(",".join(parts))
        perturbed = str(tmp_path / "perturbed.csv")
        open(perturbed, "w").write("\n".join(out_lines) + "\n")
        rc = cli.main(["verify", "--config", cfg, "--boundary", perturbed,
                       "--out", str(tmp_path / "v")])
        assert rc == 6

    def test_oracle_command(self, solved, tmp_path):
        tmp, cfg, boundary = solved
        out = str(tmp_path / "orc")
        rc = cli.main(["oracle", "--config", cfg, "--boundary", boundary, "--out", out])
        assert rc == 0
        report = json.loads(open(os.path.join(out, "report.json")).read())
        assert report["summary"]["shadow_value_max_rel_gap"] < 0.2


class TestReproducibility:
    def test_thread_flag_does_not_change_bytes(self, tmp_path):
        cfg = write_cfg(tmp_path, STOCHASTIC)
        outs = []
        for threads in ("1", "4"):
            out = str(tmp_path / f"t{threads}")
            assert cli.main(["solve", "--config", cfg, "--out", out,
                             "--threads", threads]) == 0
            outs.append(open(os.path.join(out, "boundary.csv"), "rb").read())
        assert outs[0] == outs[1]
