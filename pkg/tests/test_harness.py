import numpy as np
import pytest
import yaml

from fdswipt.allocation import allocate_antennas
from fdswipt.channel import partition, sample_channel
from fdswipt.cli import main as cli_main
from fdswipt.config import DEFAULTS, load_config
from fdswipt.harness import (
    CSV_HEADER,
    ExperimentScenario,
    ResultRow,
    compare_methods,
    evaluate_trial,
    paired_gains,
    run_monte_carlo,
    trial_seed,
)
from fdswipt.metrics import info_rate
from fdswipt.numerics import ContractError
from fdswipt.precoding import equal_power
from fdswipt.units import dbm_to_watt, watt_to_dbm


def small_scenario(method="antenna_split_equal_power", **overrides):
    base = dict(method=method, m=2, n=2, ps_dbm=(20.0, 30.0), trials=64,
                master_seed=7, workers=1)
    base.update(overrides)
    return ExperimentScenario(**base)


class TestScenario:
    def test_method_validation(self):
        with pytest.raises(ContractError):
            small_scenario(method="nonsense")

    def test_policy_method_needs_path(self):
        with pytest.raises(ContractError):
            small_scenario(method="drl_policy")

    def test_budget_tracks_sweep(self):
        scenario = small_scenario()
        budget = scenario.budget(30.0)
        assert budget.p_s == pytest.approx(1.0)
        assert budget.p_q == pytest.approx(1.0)
        assert budget.p_h == pytest.approx(1.0)


class TestUnits:
    def test_round_trip(self):
        assert dbm_to_watt(30.0) == pytest.approx(1.0)
        assert watt_to_dbm(1.0) == pytest.approx(30.0)
        assert dbm_to_watt(watt_to_dbm(0.123)) == pytest.approx(0.123)


class TestRunMonteCarlo:
    def test_single_trial_matches_direct_evaluation(self):
        scenario = small_scenario(trials=1, ps_dbm=(30.0,))
        rows = run_monte_carlo(scenario)
        params = scenario.channel_params()
        chan = sample_channel(params, trial_seed(7, 0))
        budget = scenario.budget(30.0)
        config = allocate_antennas(chan, budget.p_s, budget.p_q)
        sub = partition(chan, config, params.sigma2)
        expected = info_rate(sub, equal_power(sub, budget))
        assert rows[0].mean_rate == pytest.approx(expected, abs=1e-12)
        assert rows[0].trials == 1
        assert rows[0].std_rate == 0.0

    def test_mean_is_sum_over_trials(self):
        scenario = small_scenario(trials=32, ps_dbm=(25.0,))
        rows = run_monte_carlo(scenario)
        params = scenario.channel_params()
        budget = scenario.budget(25.0)
        rates = [evaluate_trial(scenario, 25.0, t)[0] for t in range(32)]
        assert rows[0].mean_rate == pytest.approx(np.sum(rates) / 32, abs=1e-12)

    def test_csv_byte_identical_across_runs(self, tmp_path):
        scenario = small_scenario()
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        run_monte_carlo(scenario, csv_path=str(a))
        run_monte_carlo(scenario, csv_path=str(b))
        assert a.read_bytes() == b.read_bytes()
        header = a.read_text().splitlines()[0]
        assert header == CSV_HEADER

    def test_worker_pool_matches_serial(self, tmp_path):
        serial = small_scenario(trials=40)
        pooled = small_scenario(trials=40, workers=2)
        a = tmp_path / "serial.csv"
        b = tmp_path / "pooled.csv"
        run_monte_carlo(serial, csv_path=str(a))
        run_monte_carlo(pooled, csv_path=str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_sidecar_telemetry(self, tmp_path):
        scenario = small_scenario(trials=4)
        sidecar = {}
        run_monte_carlo(scenario, csv_path=str(tmp_path / "r.csv"), sidecar=sidecar)
        assert len(sidecar["rows"]) == 2
        assert all(r["failures"] == 0 for r in sidecar["rows"])

    def test_exhaustive_method(self):
        scenario = small_scenario(method="exhaustive", trials=3, ps_dbm=(30.0,),
                                  power_grid=3)
        rows = run_monte_carlo(scenario)
        assert rows[0].trials == 3
        assert rows[0].mean_rate > 0.0

    def test_time_switching_method(self):
        scenario = small_scenario(method="time_switching", trials=5, ps_dbm=(30.0,))
        rows = run_monte_carlo(scenario)
        assert rows[0].mean_rate > 0.0
        assert rows[0].mean_harvested_w <= dbm_to_watt(30.0) + 1e-12


class TestResultRow:
    def test_degraded_threshold(self):
        good = ResultRow("m", 30.0, 1.0, 0.0, 0.0, trials=1000, wall_ms=0.0, failures=10)
        bad = ResultRow("m", 30.0, 1.0, 0.0, 0.0, trials=1000, wall_ms=0.0, failures=11)
        assert not good.degraded
        assert bad.degraded


class TestComparisons:
    def test_self_comparison_is_zero(self):
        scenario = small_scenario(trials=24)
        rows = paired_gains(scenario, small_scenario(trials=24))
        assert all(g["mean_gain"] == 0.0 for g in rows)
        assert all(g["paired_se"] == 0.0 for g in rows)

    def test_pairing_equals_difference_of_runs(self):
        a = small_scenario(method="antenna_split_equal_power", trials=24)
        b = small_scenario(method="time_switching", trials=24)
        gains = paired_gains(a, b)
        rows_a = run_monte_carlo(a)
        rows_b = run_monte_carlo(b)
        for g, ra, rb in zip(gains, rows_a, rows_b):
            assert g["mean_gain"] == pytest.approx(ra.mean_rate - rb.mean_rate, abs=1e-9)

    def test_mismatched_sweep_rejected(self):
        a = small_scenario()
        b = small_scenario(ps_dbm=(20.0, 40.0))
        with pytest.raises(ContractError):
            paired_gains(a, b)

    def test_compare_methods_csv(self, tmp_path):
        scenarios = [small_scenario(method="antenna_split_equal_power", trials=16),
                     small_scenario(method="time_switching", trials=16)]
        path = tmp_path / "cmp.csv"
        rows = compare_methods(scenarios, csv_path=str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "ps_dbm,method_a,method_b,mean_gain,paired_se,trials"
        assert len(lines) == 1 + len(rows)


class TestConfigFile:
    def test_defaults_round_trip(self):
        config = load_config(None)
        assert config == DEFAULTS
        assert config is not DEFAULTS

    def test_file_overrides(self, tmp_path):
        path = tmp_path / "conf.yaml"
        path.write_text(yaml.safe_dump({"experiment": {"trials": 5},
                                        "budget": {"alpha": 0.25}}))
        config = load_config(str(path))
        assert config["experiment"]["trials"] == 5
        assert config["budget"]["alpha"] == 0.25
        assert config["channel"]["rician_k_db"] == 10.0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "conf.yaml"
        path.write_text("experiment: {turbo: true}\n")
        with pytest.raises(ContractError):
            load_config(str(path))


class TestCli:
    def test_simulate_writes_outputs_and_echoes_config(self, tmp_path):
        code = cli_main(["--seed", "3", "--out", str(tmp_path), "--trials", "8",
                         "--quiet", "simulate", "--method", "antenna_split_equal_power",
                         "--m", "2", "--n", "2", "--ps-dbm", "20,30"])
        assert code == 0
        csv_text = (tmp_path / "results.csv").read_text()
        assert csv_text.splitlines()[0] == CSV_HEADER
        assert len(csv_text.splitlines()) == 3
        sidecar = yaml.safe_load((tmp_path / "results.config.yaml").read_text())
        assert sidecar["experiment"]["seed"] == 3
        assert sidecar["experiment"]["trials"] == 8
        assert "telemetry" in sidecar

    def test_simulate_reproducible(self, tmp_path):
        args = ["--seed", "5", "--trials", "6", "--quiet",
                "simulate", "--method", "time_switching", "--m", "2", "--n", "2",
                "--ps-dbm", "30"]
        cli_main(["--out", str(tmp_path / "one")] + args)
        cli_main(["--out", str(tmp_path / "two")] + args)
        assert (tmp_path / "one/results.csv").read_bytes() \
            == (tmp_path / "two/results.csv").read_bytes()

    def test_bad_method_is_config_error(self, tmp_path, capsys):
        code = cli_main(["--out", str(tmp_path), "simulate", "--method", "bogus"])
        assert code == 2
        assert "configuration error" in capsys.readouterr().err

    def test_bad_config_file_is_config_error(self, tmp_path):
        conf = tmp_path / "c.yaml"
        conf.write_text("nope: 1\n")
        code = cli_main(["--config", str(conf), "--out", str(tmp_path),
                         "simulate", "--method", "time_switching"])
        assert code == 2

    def test_allocate_prints_config(self, tmp_path, capsys):
        code = cli_main(["--seed", "1", "--out", str(tmp_path),
                         "allocate", "--m", "3", "--n", "3"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("delta=")

    def test_precode_writes_trace(self, tmp_path, capsys):
        code = cli_main(["--seed", "1", "--out", str(tmp_path), "--quiet",
                         "precode", "--m", "2", "--n", "2"])
        assert code == 0
        trace = (tmp_path / "sca_trace.csv").read_text().splitlines()
        assert trace[0] == "iteration,objective,tr_q1_w,tr_q2_w,inner_iters"
        assert len(trace) >= 2

    def test_train_and_eval_policy(self, tmp_path):
        code = cli_main(["--seed", "2", "--out", str(tmp_path), "--quiet",
                         "train", "--m", "2", "--n", "2", "--episodes", "1",
                         "--steps", "4", "--freeze-channel"])
        assert code == 0
        policy = tmp_path / "policy.txt"
        assert policy.exists()
        curve = (tmp_path / "training_curve.csv").read_text().splitlines()
        assert curve[0] == "episode,mean_reward,mean_harvested_w,epsilon"
        assert len(curve) == 2

        code = cli_main(["--seed", "2", "--out", str(tmp_path), "--trials", "3",
                         "--quiet", "eval-policy", "--policy", str(policy),
                         "--m", "2", "--n", "2", "--ps-dbm", "30"])
        assert code == 0
        rows = (tmp_path / "policy_eval.csv").read_text().splitlines()
        assert rows[0] == CSV_HEADER
        assert rows[1].startswith("drl_policy,30.0,")

    def test_compare_command(self, tmp_path, capsys):
        code = cli_main(["--seed", "4", "--out", str(tmp_path), "--trials", "6",
                         "compare", "--m", "2", "--n", "2", "--ps-dbm", "30",
                         "--methods", "antenna_split_equal_power,time_switching"])
        assert code == 0
        assert (tmp_path / "comparison.csv").exists()
        assert "gain" in capsys.readouterr().out
