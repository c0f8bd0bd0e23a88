import dataclasses

import pytest

import powerobs as po


@pytest.fixture(scope="session")
def table1():
    """Parsed shipped two-machine scenario."""
    scenario, _ = po.load_config(po.bundled_config_path())
    return scenario


@pytest.fixture(scope="session")
def table1_log(table1):
    """One full run of the shipped scenario with every observer enabled."""
    return po.run_scenario(table1)


@pytest.fixture(scope="session")
def cosim_log(table1):
    """Voltage-pipeline co-simulation over [0, 20] s at full sampling."""
    scenario = dataclasses.replace(
        table1,
        t_end=20.0,
        decimate=1,
        observers=dataclasses.replace(
            table1.observers, ftc=False, speed=False, kalman=False
        ),
    )
    return po.run_scenario(scenario)
