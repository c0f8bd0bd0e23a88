import subprocess
import sys

import pytest

from plotdata import write_csv


@pytest.fixture(scope="session")
def table1_csv(tmp_path_factory):
    """Full shipped-scenario CSV produced through the simulator CLI.

    The plotting package talks to the simulator only through its command
    line and file formats.
    """
    out = tmp_path_factory.mktemp("csv") / "table1.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "powerobs.cli", "simulate",
         "--config", _bundled_config(), "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return out


def _bundled_config():
    import powerobs
    return str(powerobs.bundled_config_path())


@pytest.fixture()
def small_speed_csv(tmp_path):
    """Hand-written schema-conformant log with a speed observer column."""
    header = ["t", "delta_1", "delta_2", "omega_1", "omega_2", "E_1", "E_2",
              "omegahat_1", "omegahat_2", "err_omega"]
    rows = []
    for i in range(50):
        t = 0.1 * i
        om1, om2 = 0.5 * t, -0.2 * t
        rows.append([t, 0.01 * i, -0.01 * i, om1, om2, 7.0, 6.0,
                     om1 + 2.0 ** (-i), om2 - 2.0 ** (-i), 2.0 ** (-i)])
    return write_csv(tmp_path / "speed.csv", header, rows)
