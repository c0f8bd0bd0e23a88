"""Fixed-step integration of the plant together with all enabled observers.

One synchronized classical RK4 advances the full augmented state; the
observers see measurements computed from the true plant state at every
stage.  A parameter-change event swaps the active network/machine set
between steps (right-continuous: the step starting at the event time uses
the after-set) for both the plant and the observers' A/C construction.

run_scenario is deterministic: the same scenario yields bit-identical
logs.  Distinct scenarios may run concurrently; nothing here is shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel, model
from ._kernel import (
    O_DELTA, O_E, O_EHAT, O_H, O_ID2, O_OMEGA, O_PHI, O_PSILAG, O_THD,
    O_THF, O_TOTAL, O_W, O_XIE, O_XIOM,
)
from .errors import NonFiniteState, RiccatiDivergence, ValidationError
from .model import MachineParams, NetworkParams, SystemState

__all__ = [
    "ObserverSetup",
    "Scenario",
    "TrajectoryLog",
    "rk4_step",
    "apply_event",
    "run_scenario",
    "settling_time",
]


@dataclass(frozen=True)
class ObserverSetup:
    """Which observers run and with what gains and initial estimator states."""

    drem: bool = False
    ftc: bool = False
    speed: bool = False
    kalman: bool = False
    drem_gamma: np.ndarray | float = 1.0
    ftc_gamma: float = 1.0
    mu: float = 0.1
    filter_poles: np.ndarray | float = 1.0
    k_omega: np.ndarray | float = 1.0
    xi_E0: np.ndarray | None = None
    theta0: np.ndarray | None = None
    xi_omega0: np.ndarray | None = None
    E_hat0: np.ndarray | None = None
    H0: np.ndarray | None = None
    S_noise: np.ndarray | None = None
    h_bound: float = 1e6

    @property
    def pebo(self) -> bool:
        """The voltage pipeline (extension + filters + mixing) is shared."""
        return self.drem or self.ftc

    def any_enabled(self) -> bool:
        return self.drem or self.ftc or self.speed or self.kalman


@dataclass(frozen=True)
class Scenario:
    """A complete simulation description, including the parameter event."""

    net_initial: NetworkParams
    mp_initial: MachineParams
    x0: SystemState
    t_end: float = 50.0
    dt: float = 1e-3
    event_time: float | None = None
    net_after: NetworkParams | None = None
    mp_after: MachineParams | None = None
    observers: ObserverSetup = field(default_factory=ObserverSetup)
    decimate: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValidationError(f"dt: must be positive, got {self.dt!r}")
        if self.t_end <= 0.0:
            raise ValidationError(f"t_end: must be positive, got {self.t_end!r}")
        if self.event_time is not None and not (0.0 < self.event_time < self.t_end):
            raise ValidationError(
                f"event_time: must lie in (0, t_end), got {self.event_time!r}"
            )
        n = self.net_initial.n
        if self.mp_initial.n != n or self.x0.n != n:
            raise ValidationError("machine/network/state dimensions disagree")
        if self.event_time is not None and (self.net_after is None or self.mp_after is None):
            raise ValidationError("event_time set but no after-event parameter set given")
        if self.decimate < 1:
            raise ValidationError(f"decimate: must be >= 1, got {self.decimate!r}")
        nsteps = int(round(self.t_end / self.dt))
        if nsteps % self.decimate != 0:
            raise ValidationError(
                f"decimate: {self.decimate} does not divide the {nsteps} steps evenly"
            )

    @property
    def n(self) -> int:
        return self.net_initial.n


def apply_event(s: Scenario, t: float):
    """Active (net, mp) pair at time t; right-continuous at the event."""
    if s.event_time is not None and t >= s.event_time:
        return s.net_after, s.mp_after
    return s.net_initial, s.mp_initial


def rk4_step(rhs, x: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of dx/dt = rhs(t, x)."""
    if dt <= 0.0:
        raise ValidationError(f"dt: must be positive, got {dt!r}")
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = rhs(t + dt, x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"non-finite state after step from t = {t!r}", t=t)
    return out


@dataclass
class TrajectoryLog:
    """Uniformly sampled record of one run.

    Arrays are indexed [sample, ...]; observer fields are None when the
    observer was disabled.  sample_dt is the logging period
    (decimate * dt); the integrator always stepped at dt.
    """

    t: np.ndarray
    delta: np.ndarray
    omega: np.ndarray
    E: np.ndarray
    sample_dt: float
    scenario: Scenario
    xi_E: np.ndarray | None = None
    Phi: np.ndarray | None = None
    theta_drem: np.ndarray | None = None
    theta_ftc: np.ndarray | None = None
    w: np.ndarray | None = None
    Delta: np.ndarray | None = None
    int_Delta2: np.ndarray | None = None
    E_hat_drem: np.ndarray | None = None
    E_hat_ftc: np.ndarray | None = None
    E_hat_kalman: np.ndarray | None = None
    H: np.ndarray | None = None
    omega_hat: np.ndarray | None = None
    C: np.ndarray | None = None

    def err_E(self, which: str) -> np.ndarray:
        """Per-sample voltage error norm for observer 'drem'|'ftc'|'kalman'."""
        est = getattr(self, f"E_hat_{which}")
        if est is None:
            raise ValidationError(f"observer {which!r} was not enabled in this run")
        return np.linalg.norm(est - self.E, axis=1)

    def err_omega(self) -> np.ndarray:
        if self.omega_hat is None:
            raise ValidationError("speed observer was not enabled in this run")
        return np.linalg.norm(self.omega_hat - self.omega, axis=1)


def _param_arrays(net: NetworkParams, mp: MachineParams):
    return (
        np.ascontiguousarray(net.Y), np.ascontiguousarray(net.alpha),
        np.ascontiguousarray(net.G_shunt), np.ascontiguousarray(net.B_shunt),
        np.ascontiguousarray(mp.a), np.ascontiguousarray(mp.b),
        np.ascontiguousarray(mp.D), np.ascontiguousarray(mp.P),
        np.ascontiguousarray(mp.d), np.ascontiguousarray(mp.u),
    )


def _as_vec(v, n):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    return np.full(n, arr[0]) if arr.shape[0] == 1 else arr


def pack_initial(s: Scenario):
    """Flat initial augmented state plus the layout offsets."""
    n = s.n
    ob = s.observers
    off = _kernel.layout(n, ob.pebo, ob.drem, ob.ftc, ob.speed, ob.kalman)
    x = np.zeros(off[O_TOTAL])
    x[off[O_DELTA]:off[O_DELTA] + n] = s.x0.delta
    x[off[O_OMEGA]:off[O_OMEGA] + n] = s.x0.omega
    x[off[O_E]:off[O_E] + n] = s.x0.E
    if ob.pebo:
        if ob.xi_E0 is not None:
            x[off[O_XIE]:off[O_XIE] + n] = ob.xi_E0
        x[off[O_PHI]:off[O_PHI] + n * n] = np.eye(n).ravel()
    if ob.drem and ob.theta0 is not None:
        x[off[O_THD]:off[O_THD] + n] = ob.theta0
    if ob.ftc:
        if ob.theta0 is not None:
            x[off[O_THF]:off[O_THF] + n] = ob.theta0
        x[off[O_W]] = 1.0
    if ob.speed and ob.xi_omega0 is not None:
        x[off[O_XIOM]:off[O_XIOM] + n] = ob.xi_omega0
    if ob.kalman:
        if ob.E_hat0 is not None:
            x[off[O_EHAT]:off[O_EHAT] + n] = ob.E_hat0
        H0 = np.eye(n) if ob.H0 is None else np.asarray(ob.H0, dtype=float)
        x[off[O_H]:off[O_H] + n * n] = H0.ravel()
    return x, off


def _gain_arrays(s: Scenario):
    n = s.n
    ob = s.observers
    gamma_d = _as_vec(ob.drem_gamma, n)
    gamma_f = float(np.atleast_1d(np.asarray(ob.ftc_gamma, dtype=float))[0])
    poles = np.atleast_1d(np.asarray(ob.filter_poles, dtype=float))
    if poles.shape[0] == 1 and n > 2:
        # distinct poles derived from the scalar: k, 2k, ..., (n-1)k
        poles = poles[0] * np.arange(1, n)
    if ob.pebo and poles.shape[0] != n - 1:
        raise ValidationError(
            f"filter_poles: expected {n - 1} poles for n = {n}, got {poles.shape[0]}"
        )
    if np.any(poles <= 0.0):
        raise ValidationError("filter_poles: must be strictly positive")
    if n > 2 and np.unique(poles).shape[0] != poles.shape[0]:
        raise ValidationError("filter_poles: must be pairwise distinct for n > 2")
    k_om = _as_vec(ob.k_omega, n)
    if ob.speed and np.any(k_om <= 0.0):
        raise ValidationError("k_omega: must be strictly positive")
    if ob.drem and np.any(gamma_d <= 0.0):
        raise ValidationError("drem_gamma: must be strictly positive")
    if ob.ftc and gamma_f <= 0.0:
        raise ValidationError("ftc_gamma: must be strictly positive")
    if ob.ftc and not (0.0 < ob.mu < 1.0):
        raise ValidationError(f"mu: must lie in (0, 1), got {ob.mu!r}")
    S_noise = np.eye(n) if ob.S_noise is None else np.asarray(ob.S_noise, dtype=float)
    return gamma_d, gamma_f, np.ascontiguousarray(poles), k_om, np.ascontiguousarray(S_noise)


def augmented_rhs(s: Scenario, t: float, x: np.ndarray, off=None) -> np.ndarray:
    """Reference augmented derivative via the compiled kernel.

    Exposed for tests and for the generic rk4_step; run_scenario uses the
    in-kernel stepping loop instead.
    """
    if off is None:
        _, off = pack_initial(s)
    net, mp = apply_event(s, t)
    gamma_d, gamma_f, poles, k_om, S_noise = _gain_arrays(s)
    dx = np.empty_like(x)
    _kernel.aug_rhs(x, dx, off, s.n, *_param_arrays(net, mp),
                    gamma_d, gamma_f, poles, k_om, S_noise)
    return dx


def run_scenario(s: Scenario) -> TrajectoryLog:
    """Integrate the scenario from 0 to t_end and log every decimate-th step."""
    n = s.n
    ob = s.observers
    dt = s.dt
    nsteps = int(round(s.t_end / dt))
    x, off = pack_initial(s)
    gains = _gain_arrays(s)
    pars_init = _param_arrays(s.net_initial, s.mp_initial)
    pars_after = None
    if s.event_time is not None:
        pars_after = _param_arrays(s.net_after, s.mp_after)
        event_step = int(math.ceil(s.event_time / dt - 1e-9))
    else:
        event_step = nsteps + 1

    nsamp = nsteps // s.decimate + 1
    samples = np.empty((nsamp, x.shape[0]))
    samples[0] = x
    isamp = 1
    h_norm_bound = ob.h_bound if ob.kalman else None

    step = 0
    while step < nsteps:
        # advance in uninterrupted spans: to the event, then between samples
        boundary = min(nsteps, event_step) if step < event_step else nsteps
        next_sample = (step // s.decimate + 1) * s.decimate
        span_end = min(boundary, next_sample)
        pars = pars_init if step < event_step else pars_after
        bad = _kernel.rk4_span(x, dt, span_end - step, off, n, *pars, *gains)
        if bad:
            raise NonFiniteState(
                f"non-finite state within steps {step}..{span_end} "
                f"(t <= {span_end * dt!r})", t=span_end * dt,
            )
        step = span_end
        if h_norm_bound is not None:
            H = x[off[O_H]:off[O_H] + n * n]
            if np.linalg.norm(H) > h_norm_bound:
                raise RiccatiDivergence(
                    f"||H|| = {np.linalg.norm(H):.3e} exceeds bound at t = {step * dt!r}",
                    t=step * dt,
                )
        if step % s.decimate == 0:
            samples[isamp] = x
            isamp += 1

    return _build_log(s, off, samples)


def _build_log(s: Scenario, off, samples: np.ndarray) -> TrajectoryLog:
    n = s.n
    ob = s.observers
    nsamp = samples.shape[0]
    sample_dt = s.dt * s.decimate
    t = np.arange(nsamp) * sample_dt
    seg = lambda o, ln: samples[:, o:o + ln]

    log = TrajectoryLog(
        t=t,
        delta=seg(off[O_DELTA], n).copy(),
        omega=seg(off[O_OMEGA], n).copy(),
        E=seg(off[O_E], n).copy(),
        sample_dt=sample_dt,
        scenario=s,
    )
    if ob.pebo:
        log.xi_E = seg(off[O_XIE], n).copy()
        log.Phi = seg(off[O_PHI], n * n).reshape(nsamp, n, n).copy()
        log.int_Delta2 = samples[:, off[O_ID2]].copy()
        # C and Delta recomputed per sample from the logged states
        C = np.empty((nsamp, n, n))
        Delta = np.empty(nsamp)
        for i in range(nsamp):
            net, mp = apply_event(s, t[i])
            st = SystemState(delta=log.delta[i], omega=log.omega[i], E=log.E[i])
            C[i] = model.build_C(model.measure(st, mp, net), net)
            y1 = C[i][0] @ log.xi_E[i]
            psi1 = C[i][0] @ log.Phi[i]
            Psi = np.vstack((psi1[None, :],
                             seg(off[O_PSILAG], (n - 1) * n)[i].reshape(n - 1, n)))
            if n == 2:
                Delta[i] = Psi[0, 0] * Psi[1, 1] - Psi[0, 1] * Psi[1, 0]
            else:
                Delta[i] = np.linalg.det(Psi)
        log.C = C
        log.Delta = Delta
    if ob.drem:
        log.theta_drem = seg(off[O_THD], n).copy()
        log.E_hat_drem = log.xi_E - np.einsum("sij,sj->si", log.Phi, log.theta_drem)
    if ob.ftc:
        log.theta_ftc = seg(off[O_THF], n).copy()
        log.w = samples[:, off[O_W]].copy()
        theta0 = np.zeros(n) if ob.theta0 is None else np.asarray(ob.theta0, dtype=float)
        w_c = np.minimum(log.w, 1.0 - ob.mu)
        theta_rec = (log.theta_ftc - w_c[:, None] * theta0[None, :]) / (1.0 - w_c)[:, None]
        log.E_hat_ftc = log.xi_E - np.einsum("sij,sj->si", log.Phi, theta_rec)
    if ob.speed:
        k_om = _as_vec(ob.k_omega, n)
        log.omega_hat = seg(off[O_XIOM], n) + k_om[None, :] * log.delta
    if ob.kalman:
        log.E_hat_kalman = seg(off[O_EHAT], n).copy()
        log.H = seg(off[O_H], n * n).reshape(nsamp, n, n).copy()
    return log


def settling_time(t: np.ndarray, err: np.ndarray, threshold: float = 1e-3):
    """First time the error norm stays below threshold for the rest of the
    window, refined by log-linear interpolation at the final crossing.

    Returns t[0] if the error never exceeds the threshold, None if it is
    still above at the final sample.
    """
    above = np.flatnonzero(err > threshold)
    if above.shape[0] == 0:
        return float(t[0])
    i = above[-1]
    if i == t.shape[0] - 1:
        return None
    ea, eb = err[i], err[i + 1]
    if eb <= 0.0 or ea <= 0.0:
        frac = 1.0
    else:
        frac = (np.log(threshold) - np.log(ea)) / (np.log(eb) - np.log(ea))
    return float(t[i] + frac * (t[i + 1] - t[i]))
