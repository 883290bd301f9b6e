import csv
import io
import math

import numpy as np
import pytest

from secure_dfrc import experiments as ex
from secure_dfrc.cli import ConfigError, build_configs, main, parse_grid
from secure_dfrc.optimizer import RunConfig
from secure_dfrc.scenario import ArrayGeometry, ScenarioConfig, load_scenario

from .conftest import SMALL

SMALL_SETS = ["n_tx=4", "n_rx=3", "irs_rows=2", "irs_cols=3", "t_max=4"]


def small_spec(kind, **kw):
    return ex.ExperimentSpec(kind=kind, scenario=ScenarioConfig(geometry=SMALL), run=RunConfig(t_max=4), **kw)


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def cli(*args):
    argv = list(args)
    for item in SMALL_SETS:
        argv += ["--set", item]
    return main(argv)


class TestSpec:
    def test_default_grid(self):
        g = ex.default_omega_grid()
        assert len(g) == 19 and g[0] == 0.1 and g[-1] == 1.0

    @pytest.mark.parametrize("kw", [{"kind": "bogus"}, {"kind": "convergence", "n_trials": 0},
                                    {"kind": "omega_sweep", "omega_grid": ()},
                                    {"kind": "omega_sweep", "omega_grid": (0.5, 1.5)},
                                    {"kind": "convergence", "workers": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ex.ExperimentSpec(**kw)


class TestConvergence:
    def test_single_trial_has_zero_variance(self):
        table = ex.run_convergence(small_spec("convergence", n_trials=1))
        assert all(r.var_secrecy == 0 for r in table.rows)
        assert table.rows[0].n_active == 1

    def test_table_shape_and_carry_forward(self):
        table = ex.run_convergence(small_spec("convergence", n_trials=3))
        longest = max(len(o.secrecy_trace) for o in table.trials)
        assert [r.t for r in table.rows] == list(range(longest))
        # finished trials keep contributing their final value
        last = np.mean([o.secrecy_rate for o in table.trials])
        assert table.rows[-1].mean_secrecy == pytest.approx(last)
        assert all(r.n_active <= 3 for r in table.rows)
        got = rows(table.to_csv())
        assert got[0] == ["t", "mean_secrecy", "var_secrecy", "n_active"]
        assert len(got) == len(table.rows) + 1

    def test_reproducible_bytes(self):
        a = ex.run_convergence(small_spec("convergence", n_trials=2, seed_base=5)).to_csv()
        b = ex.run_convergence(small_spec("convergence", n_trials=2, seed_base=5)).to_csv()
        assert a == b

    def test_worker_pool_matches_serial(self):
        a = ex.run_convergence(small_spec("convergence", n_trials=2)).to_csv()
        b = ex.run_convergence(small_spec("convergence", n_trials=2, workers=2)).to_csv()
        assert a == b

    def test_infeasible_batch(self):
        spec = ex.ExperimentSpec(kind="convergence", n_trials=2, scenario=ScenarioConfig(geometry=SMALL),
                                 run=RunConfig(gamma_th=1e12, max_redraws=2))
        with pytest.raises(ex.NoFeasibleTrials):
            ex.run_convergence(spec)


class TestSweep:
    def test_sweep_table(self):
        spec = small_spec("omega_sweep", n_trials=2, omega_grid=(0.5, 1.0))
        table = ex.run_omega_sweep(spec)
        assert [r.omega for r in table.rows] == [0.5, 1.0]
        got = rows(table.to_csv())
        assert got[0] == ["omega", "mean_Ru", "mean_Rte", "mean_secrecy", "stderr_secrecy"]
        m = table.secrecy_matrix()
        assert m.shape == (2, 2)
        np.testing.assert_allclose([r.mean_secrecy for r in table.rows], m.mean(axis=1))
        # same channel draws at every omega
        assert [o.seed for o in table.trials[0.5]] == [o.seed for o in table.trials[1.0]]

    def test_stderr(self):
        assert ex.stderr(np.array([1.0])) == 0.0
        assert ex.stderr(np.array([1.0, 3.0])) == pytest.approx(1.0)

    def test_sweep_row_skips_failed(self):
        good = ex.TrialOutcome(0, 0.5, (1.0, 2.0), 3.0, 1.0, "Converged", True)
        bad = ex.TrialOutcome(1, 0.5, error="InitializationInfeasible")
        row = ex.sweep_row(0.5, [good, bad])
        assert row.n_ok == 1 and row.mean_secrecy == 2.0 and row.mean_Ru == 3.0


class TestConfig:
    def test_defaults(self):
        scfg, rcfg = build_configs({})
        assert scfg == ScenarioConfig() and rcfg == RunConfig()

    def test_db_conversions(self):
        scfg, rcfg = build_configs({"p_r_dbm": "30", "gamma_th_db": "-11", "epsilon_db": "-20",
                                    "beta_db": "-40", "sigma2_u_dbm": "0"})
        assert rcfg.p_r == pytest.approx(1.0)
        assert rcfg.gamma_th == pytest.approx(10 ** -1.1)
        assert rcfg.epsilon == pytest.approx(1e-2)
        assert scfg.beta_abs == pytest.approx(0.01)
        assert scfg.sigma2_u == pytest.approx(1e-3)

    def test_omega_none(self):
        assert build_configs({"omega": "none"})[1].omega is None
        assert build_configs({"omega": "0.7"})[1].omega == 0.7

    @pytest.mark.parametrize("values", [{"bogus": "1"}, {"n_tx": "two"}, {"t_max": "0"}, {"omega": "3"}])
    def test_bad(self, values):
        with pytest.raises(ConfigError):
            build_configs(values)

    def test_grid(self):
        g = parse_grid("0.1:0.05:1.0")
        assert len(g) == 19 and g[-1] == 1.0
        assert parse_grid("0.2, 0.4") == (0.2, 0.4)
        for bad in ("1:0:2", "a:b:c", "1:0.1:0.5"):
            with pytest.raises(ConfigError):
                parse_grid(bad)


class TestCli:
    def test_run_trace(self, tmp_path):
        out = tmp_path / "trace.csv"
        assert cli("run", "--omega", "0.8", "--seed", "1", "--out", str(out)) == 0
        got = rows(out.read_text())
        assert got[0] == ["t", "secrecy_rate", "user_rate", "ed_rate", "radar_snr", "power_used", "term_reason"]
        assert got[-1][-1] in ("Converged", "IterCap", "Stalled")

    def test_convergence(self, tmp_path):
        out = tmp_path / "fig2.csv"
        assert cli("convergence", "--trials", "2", "--seed", "7", "--out", str(out)) == 0
        assert rows(out.read_text())[0] == ["t", "mean_secrecy", "var_secrecy", "n_active"]

    def test_sweep(self, tmp_path):
        out = tmp_path / "fig3.csv"
        assert cli("omega-sweep", "--trials", "1", "--grid", "0.5,1.0", "--out", str(out)) == 0
        got = rows(out.read_text())
        assert got[0] == ["omega", "mean_Ru", "mean_Rte", "mean_secrecy", "stderr_secrecy"]
        assert [r[0] for r in got[1:]] == ["0.5", "1.0"]

    def test_dump_scenario_round_trip(self, tmp_path):
        out = tmp_path / "s.txt"
        assert cli("dump-scenario", "--seed", "3", "--out", str(out)) == 0
        s = load_scenario(out.read_text())
        ref = ex.trial_scenario(3, ScenarioConfig(geometry=ArrayGeometry(4, 3, 2, 3)))
        np.testing.assert_array_equal(s.H_dl, ref.H_dl)
        assert s.beta == ref.beta

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n_tx = 4\nn_rx = 3\nirs_rows = 2\nirs_cols = 3\nt_max = 7\n")
        out = tmp_path / "t.csv"
        assert main(["run", "--config", str(cfg), "--set", "t_max=1", "--out", str(out)]) == 0
        assert len(rows(out.read_text())) <= 3

    def test_config_errors(self, capsys):
        assert cli("run", "--set", "bogus=1") == 2
        assert cli("omega-sweep", "--grid", "1:0:2") == 2
        assert main(["run", "--set", "novalue"]) == 2
        assert main(["run", "--config", "/nonexistent/file.cfg"]) == 2
        assert "error" in capsys.readouterr().err

    def test_infeasible_exit(self):
        assert cli("run", "--set", "gamma_th_db=120", "--set", "max_redraws=2") == 3
        assert cli("convergence", "--trials", "2", "--set", "gamma_th_db=120", "--set", "max_redraws=2") == 3

    def test_deterministic_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cli("convergence", "--trials", "2", "--seed", "4", "--out", str(a))
        cli("convergence", "--trials", "2", "--seed", "4", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()


def test_trial_outcome_nan_defaults():
    o = ex.TrialOutcome(0, None, error="x")
    assert not o.ok and math.isnan(o.secrecy_rate)
