"""Simulator and state observers for multimachine power systems with lossy lines.

The package splits into four layers:

* :mod:`powerobs.model` — the n-machine flux-decay model and its algebraic
  maps (currents, powers, the A/S/T/C matrices);
* :mod:`powerobs.observers` — the voltage-observer pipeline (open-loop
  extension, regression filtering and adjugate mixing, gradient and
  finite-time estimators), the speed observer, a Kalman-Bucy baseline and
  excitation diagnostics;
* :mod:`powerobs.sim` — synchronized fixed-step RK4 integration of plant
  plus observers with parameter-change events and trajectory logging;
* :mod:`powerobs.cli` — the ``powerobs`` command (simulate / gramian /
  sweep) with JSON scenario input and CSV output.
"""

from .errors import (
    EmptyWindow,
    NonFiniteState,
    NonPositiveDerivedConstant,
    ParseError,
    PowerobsError,
    RiccatiDivergence,
    ValidationError,
)
from .model import (
    MachineParams,
    Measurements,
    NetworkParams,
    SystemState,
    build_A,
    build_C,
    build_ST,
    currents,
    derive_params,
    measure,
    plant_rhs,
    powers,
)
from .observers import (
    DremEstimator,
    ExcitationReport,
    FilterBank,
    KalmanState,
    PeboState,
    SpeedObserver,
    adjugate,
    drem_mix,
    excitation_monitor,
    filter_step,
    ftc_reconstruct,
    ftc_rhs,
    gradient_rhs,
    kalman_rhs,
    observability_gramian,
    pebo_rhs,
    regression,
    speed_obs_rhs,
    voltage_estimate,
)
from .sim import (
    ObserverSetup,
    Scenario,
    TrajectoryLog,
    apply_event,
    rk4_step,
    run_scenario,
    settling_time,
)
from .cli import bundled_config_path, load_config, parse_config

__version__ = "0.1.0"
