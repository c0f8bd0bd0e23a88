import io
import json

import numpy as np
import pytest

import powerobs as po
from powerobs import cli
from powerobs.errors import EmptyWindow, ParseError, ValidationError


@pytest.fixture(scope="module")
def table1_doc():
    return json.loads(po.bundled_config_path().read_text())


@pytest.fixture()
def short_doc(table1_doc):
    """A fast variant of the shipped scenario for CLI round trips."""
    doc = json.loads(json.dumps(table1_doc))
    doc["t_end"] = 0.5
    doc["decimate"] = 5
    del doc["event_time"]
    return doc


def write_doc(tmp_path, doc, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


# ---------------------------------------------------------------------------
# parsing


class TestParseConfig:
    def test_shipped_table1_values(self):
        scenario, run_cfg = po.load_config(po.bundled_config_path())
        assert scenario.n == 2
        assert scenario.mp_initial.a[0] == 0.2614
        assert scenario.mp_after.a[0] == 0.2898
        assert scenario.net_initial.B_shunt[1] == -0.4294
        assert scenario.net_after.G_shunt[0] == 0.1256
        assert scenario.event_time == 10.0
        assert set(run_cfg.observers) == {"drem", "ftc", "speed", "kalman"}

    def test_missing_dt_defaults(self, table1_doc):
        doc = json.loads(json.dumps(table1_doc))
        del doc["dt"]
        scenario, _ = po.parse_config(json.dumps(doc))
        assert scenario.dt == 1e-3

    def test_asymmetric_Y_names_entry(self, table1_doc):
        doc = json.loads(json.dumps(table1_doc))
        doc["network"]["initial"]["Y"][0][1] = 0.1032 + 1e-3
        with pytest.raises(ValidationError, match=r"network\.initial\.Y\[0\]\[1\]"):
            po.parse_config(json.dumps(doc))

    def test_syntax_error(self):
        with pytest.raises(ParseError):
            po.parse_config("{not json")

    def test_single_machine_rejected(self, table1_doc):
        doc = json.loads(json.dumps(table1_doc))
        doc["n"] = 1
        with pytest.raises(ValidationError, match="n:"):
            po.parse_config(json.dumps(doc))

    def test_schema_field_required(self, table1_doc):
        doc = json.loads(json.dumps(table1_doc))
        del doc["schema"]
        with pytest.raises(ValidationError, match="schema"):
            po.parse_config(json.dumps(doc))

    def test_raw_machine_constants_path(self, table1_doc):
        doc = json.loads(json.dumps(table1_doc))
        del doc["event_time"]
        doc["machines"] = {"initial": {
            "raw": {"M": [1.0, 1.0], "D_m": [1.0, 0.2], "P_m": [28.22, 28.22],
                    "tau": [1.0, 1.0], "omega_0": [1.0, 1.0],
                    "x_d": [1.8, 1.8], "x_dp": [0.3, 0.3],
                    "B_shunt": [-0.4373, -0.4294],
                    "E_f": [0.2405, 0.2405], "nu": [1.0, 1.0]}}}
        scenario, _ = po.parse_config(json.dumps(doc))
        assert np.allclose(scenario.mp_initial.a,
                           (1.0 - 1.5 * np.array([-0.4373, -0.4294])))
        assert np.allclose(scenario.mp_initial.b, 1.5)

    def test_composite_takes_precedence_over_raw(self, table1_doc):
        doc = json.loads(json.dumps(table1_doc))
        doc["machines"]["initial"]["raw"] = {"M": 1, "D_m": 1, "P_m": 1,
                                             "tau": 1, "omega_0": 1,
                                             "x_d": 2, "x_dp": 1, "B_shunt": -1}
        scenario, _ = po.parse_config(json.dumps(doc))
        assert scenario.mp_initial.a[0] == 0.2614


# ---------------------------------------------------------------------------
# simulate


class TestSimulate:
    def test_csv_schema_and_roundtrip(self, tmp_path, short_doc):
        cfg_path = write_doc(tmp_path, short_doc)
        out_path = tmp_path / "run.csv"
        cfg = cli.RunConfig(config_path=str(cfg_path), out_path=str(out_path))
        buf = io.StringIO()
        cli.cmd_simulate(cfg, out=buf)
        lines = out_path.read_text().splitlines()
        header = lines[0].split(",")
        assert header == [
            "t", "delta_1", "delta_2", "omega_1", "omega_2", "E_1", "E_2",
            "Ehat_drem_1", "Ehat_drem_2", "Ehat_ftc_1", "Ehat_ftc_2",
            "Ehat_kalman_1", "Ehat_kalman_2", "omegahat_1", "omegahat_2",
            "err_E_drem", "err_E_ftc", "err_E_kalman", "err_omega",
            "Delta", "intDelta2", "w",
        ]
        # 17-significant-digit round trip against the in-memory log
        scenario, _ = po.load_config(cfg_path)
        log = po.run_scenario(scenario)
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == len(log.t)
        for j, row in enumerate(rows[:: max(1, len(rows) // 7)]):
            i = j * max(1, len(rows) // 7)
            binary = [log.t[i], *log.delta[i], *log.omega[i], *log.E[i],
                      *log.E_hat_drem[i], *log.E_hat_ftc[i],
                      *log.E_hat_kalman[i], *log.omega_hat[i],
                      log.err_E("drem")[i], log.err_E("ftc")[i],
                      log.err_E("kalman")[i], log.err_omega()[i],
                      log.Delta[i], log.int_Delta2[i], log.w[i]]
            parsed = [float(v) for v in rows[i]]
            assert parsed == binary

    def test_summary_mentions_required_quantities(self, tmp_path, short_doc):
        cfg_path = write_doc(tmp_path, short_doc)
        cfg = cli.RunConfig(config_path=str(cfg_path),
                            out_path=str(tmp_path / "o.csv"))
        buf = io.StringIO()
        info = cli.cmd_simulate(cfg, out=buf)
        text = buf.getvalue()
        for token in ("final err_E_drem", "final err_E_ftc", "final err_E_kalman",
                      "final err_omega", "t_c:", "intDelta2 at t_end",
                      "gramian: min_eig"):
            assert token in text
        assert "kalman_converged" in info
        assert "t_c" in info and "intDelta2" in info
        # the summary's t_c is the monitor's t_c on the same log
        scenario, _ = po.load_config(cfg.config_path)
        log = po.run_scenario(scenario)
        rep = po.excitation_monitor(log.Delta, log.sample_dt,
                                    scenario.observers.ftc_gamma,
                                    scenario.observers.mu)
        assert info["t_c"] == rep.t_c

    def test_observer_subset_drops_columns(self, tmp_path, short_doc):
        cfg_path = write_doc(tmp_path, short_doc)
        out_path = tmp_path / "kal.csv"
        cfg = cli.RunConfig(config_path=str(cfg_path), out_path=str(out_path),
                            observers=("kalman",))
        cli.cmd_simulate(cfg, out=io.StringIO())
        header = out_path.read_text().splitlines()[0].split(",")
        assert header == ["t", "delta_1", "delta_2", "omega_1", "omega_2",
                          "E_1", "E_2", "Ehat_kalman_1", "Ehat_kalman_2",
                          "err_E_kalman"]

    def test_empty_observer_selection_rejected_before_running(self, tmp_path,
                                                              short_doc):
        doc = json.loads(json.dumps(short_doc))
        del doc["observers"]
        cfg_path = write_doc(tmp_path, doc)
        cfg = cli.RunConfig(config_path=str(cfg_path),
                            out_path=str(tmp_path / "x.csv"))
        with pytest.raises(ValidationError, match="observers"):
            cli.cmd_simulate(cfg, out=io.StringIO())
        assert not (tmp_path / "x.csv").exists()


# ---------------------------------------------------------------------------
# gramian


class TestGramianCmd:
    def test_window_beyond_horizon_rejected(self, tmp_path, short_doc):
        cfg_path = write_doc(tmp_path, short_doc)
        cfg = cli.RunConfig(config_path=str(cfg_path))
        with pytest.raises(ValidationError, match="window"):
            cli.cmd_gramian(cfg, window=1e9, out=io.StringIO())

    def test_single_sample_window_is_empty(self, tmp_path, short_doc):
        # logging every 5th step leaves one sample inside [0, dt]
        cfg_path = write_doc(tmp_path, short_doc)
        cfg = cli.RunConfig(config_path=str(cfg_path))
        with pytest.raises(EmptyWindow):
            cli.cmd_gramian(cfg, window=short_doc["dt"], out=io.StringIO())

    def test_reports_ratio_and_verdict(self, tmp_path, short_doc):
        cfg_path = write_doc(tmp_path, short_doc)
        cfg = cli.RunConfig(config_path=str(cfg_path))
        buf = io.StringIO()
        rep = cli.cmd_gramian(cfg, window=0.4, out=buf)
        assert rep["verdict"] in ("not UCO", "UCO evidence")
        assert "verdict" in buf.getvalue()
        assert rep["min_eig"] <= rep["max_eig"]

    def test_identity_output_map_reads_as_uco(self):
        # full-rank constant output map: the op itself gives clear evidence
        m = 101
        Phi = [np.eye(2)] * m
        C = [np.eye(2)] * m
        gmin, gmax = po.observability_gramian(Phi, C, 0.01)
        assert gmin / gmax > 1e-8


# ---------------------------------------------------------------------------
# sweep


class TestSweep:
    def test_single_value_matches_simulate(self, tmp_path, short_doc):
        cfg_path = write_doc(tmp_path, short_doc)
        sim_out = tmp_path / "sim.csv"
        cli.cmd_simulate(cli.RunConfig(config_path=str(cfg_path),
                                       out_path=str(sim_out)),
                         out=io.StringIO())
        sweep_out = tmp_path / "sweep.csv"
        rows = cli.cmd_sweep(cli.RunConfig(config_path=str(cfg_path),
                                           out_path=str(sweep_out)),
                             "gamma", [10.0], out=io.StringIO())
        traj = tmp_path / "sweep_gamma_10.csv"
        assert traj.read_bytes() == sim_out.read_bytes()
        metrics = {r["metric"] for r in rows}
        assert "err_E_drem" in metrics and "err_omega" in metrics
        header = sweep_out.read_text().splitlines()[0]
        assert header == "param,value,metric,settling_time,final_error,csv"

    def test_empty_values_rejected(self, tmp_path, short_doc):
        cfg_path = write_doc(tmp_path, short_doc)
        cfg = cli.RunConfig(config_path=str(cfg_path),
                            out_path=str(tmp_path / "s.csv"))
        with pytest.raises(ValidationError, match="values"):
            cli.cmd_sweep(cfg, "gamma", [], out=io.StringIO())

    def test_unknown_parameter_rejected(self, tmp_path, short_doc):
        cfg_path = write_doc(tmp_path, short_doc)
        cfg = cli.RunConfig(config_path=str(cfg_path),
                            out_path=str(tmp_path / "s.csv"))
        with pytest.raises(ValidationError, match="param"):
            cli.cmd_sweep(cfg, "nonsense", [1.0], out=io.StringIO())


# ---------------------------------------------------------------------------
# entry point


class TestMain:
    def test_simulate_exit_zero(self, tmp_path, short_doc, capsys):
        cfg_path = write_doc(tmp_path, short_doc)
        rc = cli.main(["simulate", "--config", str(cfg_path),
                       "--out", str(tmp_path / "out.csv")])
        assert rc == 0
        assert (tmp_path / "out.csv").exists()

    def test_missing_config_exit_one(self, tmp_path, capsys):
        rc = cli.main(["simulate", "--config", str(tmp_path / "nope.json"),
                       "--out", str(tmp_path / "out.csv")])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error: ")
        assert err.count("\n") == 1

    def test_validation_error_exit_one(self, tmp_path, short_doc, capsys):
        doc = json.loads(json.dumps(short_doc))
        doc["network"]["initial"]["Y"][1][0] = 0.9
        cfg_path = write_doc(tmp_path, doc)
        rc = cli.main(["simulate", "--config", str(cfg_path),
                       "--out", str(tmp_path / "out.csv")])
        assert rc == 1
        assert "error: ValidationError:" in capsys.readouterr().err

    def test_gramian_subcommand(self, tmp_path, short_doc, capsys):
        cfg_path = write_doc(tmp_path, short_doc)
        rc = cli.main(["gramian", "--config", str(cfg_path), "--window", "0.4"])
        assert rc == 0
        assert "verdict" in capsys.readouterr().out

    def test_overrides_apply(self, tmp_path, short_doc):
        cfg_path = write_doc(tmp_path, short_doc)
        out = tmp_path / "o.csv"
        rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out),
                       "--observers", "speed", "--t-end", "0.2",
                       "--decimate", "1"])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0].split(",") == ["t", "delta_1", "delta_2", "omega_1",
                                       "omega_2", "E_1", "E_2", "omegahat_1",
                                       "omegahat_2", "err_omega"]
        assert len(lines) == 1 + 201
