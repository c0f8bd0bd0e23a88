"""Estimation machinery for the multimachine voltage and speed states.

The voltage observer works in three layers:

1. An open-loop copy of the voltage dynamics plus its transition matrix
   (``PeboState``).  The mismatch between copy and plant is Phi @ theta for
   a constant unknown theta = xi_E(0) - E(0), so state observation becomes
   parameter estimation.
2. A linear regression y = psi @ theta built from the measurable matrix C
   (``regression``), extended through a bank of first-order lags
   (``FilterBank``) and mixed with the adjugate into n decoupled scalar
   regressions script_Y_i = Delta * theta_i (``drem_mix``).
3. Scalar estimators: a per-channel gradient law (``gradient_rhs``) and a
   finite-time reconstruction that inverts the known error contraction
   w(t) = exp(-gamma * int Delta^2) once enough excitation has accumulated
   (``ftc_rhs`` / ``ftc_reconstruct``).

A proportional speed observer, a Kalman-Bucy baseline and two excitation
diagnostics (observability Gramian, Delta-energy monitor) complete the set.
All right-hand sides are pure functions over frozen value types.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyWindow, RiccatiDivergence, ValidationError
from .model import MachineParams, Measurements

__all__ = [
    "PeboState",
    "FilterBank",
    "DremEstimator",
    "SpeedObserver",
    "KalmanState",
    "ExcitationReport",
    "adjugate",
    "pebo_rhs",
    "regression",
    "filter_step",
    "drem_mix",
    "gradient_rhs",
    "ftc_rhs",
    "ftc_reconstruct",
    "voltage_estimate",
    "speed_obs_rhs",
    "kalman_rhs",
    "observability_gramian",
    "excitation_monitor",
]


# ---------------------------------------------------------------------------
# open-loop voltage copy + transition matrix


@dataclass(frozen=True)
class PeboState:
    """Dynamic extension state: open-loop voltage copy xi_E and transition
    matrix Phi, with Phi(0) = I enforced at construction."""

    xi_E: np.ndarray
    Phi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi_E, dtype=float)
        object.__setattr__(self, "xi_E", xi)
        object.__setattr__(self, "Phi", np.asarray(self.Phi, dtype=float))
        n = xi.shape[0]
        if self.Phi.shape != (n, n):
            raise ValidationError(f"Phi: expected {n}x{n}, got {self.Phi.shape}")

    @classmethod
    def initial(cls, n: int, xi_E0=None) -> "PeboState":
        xi = np.zeros(n) if xi_E0 is None else np.asarray(xi_E0, dtype=float)
        return cls(xi_E=xi, Phi=np.eye(n))


def pebo_rhs(p: PeboState, A: np.ndarray, u: np.ndarray) -> PeboState:
    """Derivative of the extension: dxi_E = A xi_E + u, dPhi = A Phi."""
    return PeboState(xi_E=A @ p.xi_E + u, Phi=A @ p.Phi)


def regression(C: np.ndarray, p: PeboState):
    """Measurable regression pair: y = C xi_E and psi = C Phi.

    Along model-consistent trajectories y = psi @ theta with
    theta = xi_E(0) - E(0).
    """
    return C @ p.xi_E, C @ p.Phi


def voltage_estimate(p: PeboState, theta_est: np.ndarray) -> np.ndarray:
    """Voltage reconstruction E_hat = xi_E - Phi @ theta_est."""
    return p.xi_E - p.Phi @ np.asarray(theta_est, dtype=float)


# ---------------------------------------------------------------------------
# regression extension filter


@dataclass
class FilterBank:
    """First-order lag bank extending the first scalar regression row.

    Row 1 of the extended regression is the raw first equation
    (y_1, psi row 1); row 1 + j is the lag k_j/(s + k_j) of that same
    equation.  For n = 2 this is exactly the transfer matrix
    [[1, 0], [k/(s+k), 0]].  For n > 2 the poles must be distinct or the
    lagged rows would coincide and the mixed determinant would vanish
    identically.
    """

    poles: np.ndarray
    y_lag: np.ndarray = field(default=None)  # type: ignore[assignment]
    psi_lag: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.poles = np.atleast_1d(np.asarray(self.poles, dtype=float))
        m = self.poles.shape[0]
        n = m + 1
        if np.any(self.poles <= 0.0):
            raise ValidationError("filter poles must be strictly positive")
        if m > 1 and np.unique(self.poles).shape[0] != m:
            raise ValidationError("filter poles must be pairwise distinct for n > 2")
        if self.y_lag is None:
            self.y_lag = np.zeros(m)
        if self.psi_lag is None:
            self.psi_lag = np.zeros((m, n))
        self.y_lag = np.asarray(self.y_lag, dtype=float)
        self.psi_lag = np.asarray(self.psi_lag, dtype=float)

    @property
    def n(self) -> int:
        return self.poles.shape[0] + 1

    def derivative(self, y1: float, psi1: np.ndarray):
        """State derivatives for raw first-row inputs (y_1, psi row 1)."""
        dy = self.poles * (y1 - self.y_lag)
        dpsi = self.poles[:, None] * (psi1[None, :] - self.psi_lag)
        return dy, dpsi

    def outputs(self, y1: float, psi1: np.ndarray):
        """Extended regression (Y, Psi) for the current filter state."""
        Y = np.concatenate(([y1], self.y_lag))
        Psi = np.vstack((psi1[None, :], self.psi_lag))
        return Y, Psi


def filter_step(f: FilterBank, inp, dt: float):
    """Advance the bank one RK4 step under a zero-order-held input and
    return the filtered output.

    Vector inputs are treated as y (only entry 0 feeds the bank); matrix
    inputs are treated as psi and filtered column-by-column through the
    same lags.  Returns the extended output after the step.
    """
    if dt <= 0.0:
        raise ValidationError(f"dt must be positive, got {dt!r}")
    inp = np.asarray(inp, dtype=float)
    if inp.ndim == 1:
        y1 = inp[0]
        # lag ODE dx = k (y1 - x), input held constant over the step
        x = f.y_lag
        k = f.poles
        k1 = k * (y1 - x)
        k2 = k * (y1 - (x + 0.5 * dt * k1))
        k3 = k * (y1 - (x + 0.5 * dt * k2))
        k4 = k * (y1 - (x + dt * k3))
        f.y_lag = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return np.concatenate(([y1], f.y_lag))
    psi1 = inp[0, :]
    x = f.psi_lag
    k = f.poles[:, None]
    k1 = k * (psi1[None, :] - x)
    k2 = k * (psi1[None, :] - (x + 0.5 * dt * k1))
    k3 = k * (psi1[None, :] - (x + 0.5 * dt * k2))
    k4 = k * (psi1[None, :] - (x + dt * k3))
    f.psi_lag = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return np.vstack((psi1[None, :], f.psi_lag))


# ---------------------------------------------------------------------------
# adjugate mixing


def adjugate(M: np.ndarray) -> np.ndarray:
    """Adjugate (transpose of the cofactor matrix); adj(M) @ M = det(M) I
    holds for singular M as well."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])
    cof = np.empty((n, n))
    rows = np.arange(n)
    for i in range(n):
        for j in range(n):
            minor = M[np.ix_(rows != i, rows != j)]
            cof[i, j] = (-1.0) ** (i + j) * np.linalg.det(minor)
    return cof.T


def drem_mix(Y: np.ndarray, Psi: np.ndarray):
    """Adjugate mixing: script_Y = adj(Psi) Y and Delta = det(Psi), so that
    script_Y_i = Delta * theta_i channel by channel.  Delta = 0 is a legal
    output (no excitation)."""
    Y = np.asarray(Y, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    adj = adjugate(Psi)
    if Psi.shape[0] == 2:
        Delta = Psi[0, 0] * Psi[1, 1] - Psi[0, 1] * Psi[1, 0]
    else:
        Delta = float(np.linalg.det(Psi))
    return adj @ Y, Delta


# ---------------------------------------------------------------------------
# scalar estimators


@dataclass
class DremEstimator:
    """Decoupled parameter estimator state.

    mode "asymptotic" runs the per-channel gradient law; mode "ftc" adds
    the contraction tracker w and requires a single shared gain.
    """

    theta_hat: np.ndarray
    gamma: np.ndarray
    mu: float = 0.1
    mode: str = "asymptotic"
    w: float = 1.0
    theta_hat0: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.theta_hat = np.asarray(self.theta_hat, dtype=float)
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if self.mode not in ("asymptotic", "ftc"):
            raise ValidationError(f"mode: expected 'asymptotic' or 'ftc', got {self.mode!r}")
        if self.mode == "ftc":
            if gamma.shape[0] != 1 and np.unique(gamma).shape[0] != 1:
                raise ValidationError("ftc mode requires a single shared gain gamma")
            gamma = np.full(self.theta_hat.shape[0], gamma.flat[0])
            if not (0.0 < self.mu < 1.0):
                raise ValidationError(f"mu: expected value in (0, 1), got {self.mu!r}")
        elif gamma.shape[0] == 1:
            gamma = np.full(self.theta_hat.shape[0], gamma[0])
        if np.any(gamma <= 0.0):
            raise ValidationError("gamma: adaptation gains must be strictly positive")
        self.gamma = gamma
        if self.theta_hat0 is None:
            self.theta_hat0 = self.theta_hat.copy()
        else:
            self.theta_hat0 = np.asarray(self.theta_hat0, dtype=float)


def gradient_rhs(est: DremEstimator, script_Y: np.ndarray, Delta: float) -> np.ndarray:
    """Gradient update dtheta_hat_i = -gamma_i Delta (Delta theta_hat_i - script_Y_i).

    Substituting script_Y_i = Delta theta_i gives the error contraction
    dtheta_err_i = -gamma_i Delta^2 theta_err_i; with Delta = 0 the
    estimate freezes.
    """
    return -est.gamma * Delta * (Delta * est.theta_hat - script_Y)


def ftc_rhs(est: DremEstimator, Delta: float) -> float:
    """Contraction tracker dw = -gamma Delta^2 w, w(0) = 1."""
    if est.mode != "ftc":
        raise ValidationError("ftc_rhs requires an estimator in ftc mode")
    return -est.gamma[0] * Delta * Delta * est.w


def ftc_reconstruct(est: DremEstimator) -> np.ndarray:
    """Finite-time parameter reconstruction.

    Clips w at 1 - mu so the division is always well posed; once the
    excitation integral has crossed -ln(1 - mu)/gamma the clip is inactive
    and the return equals theta exactly (up to integration error).
    """
    w_c = est.w if est.w < 1.0 - est.mu else 1.0 - est.mu
    return (est.theta_hat - w_c * est.theta_hat0) / (1.0 - w_c)


# ---------------------------------------------------------------------------
# speed observer


@dataclass
class SpeedObserver:
    """Proportional speed observer with per-machine injection gains."""

    xi_omega: np.ndarray
    k_omega: np.ndarray

    def __post_init__(self):
        self.xi_omega = np.asarray(self.xi_omega, dtype=float)
        k = np.atleast_1d(np.asarray(self.k_omega, dtype=float))
        if k.shape[0] == 1:
            k = np.full(self.xi_omega.shape[0], k[0])
        if np.any(k <= 0.0):
            raise ValidationError("k_omega: gains must be strictly positive")
        self.k_omega = k


def speed_obs_rhs(s: SpeedObserver, meas: Measurements, mp: MachineParams):
    """Observer derivative and current estimate.

    omega_hat = xi_omega + k_omega * delta;
    dxi_omega = -D omega_hat + P - d P_e - k_omega omega_hat.
    The error obeys the autonomous contraction
    domega_err = -(D + k_omega) omega_err, untouched by load changes.
    """
    omega_hat = s.xi_omega + s.k_omega * meas.delta
    dxi = -mp.D * omega_hat + mp.P - mp.d * meas.P_e - s.k_omega * omega_hat
    return dxi, omega_hat


# ---------------------------------------------------------------------------
# Kalman-Bucy baseline


@dataclass
class KalmanState:
    """Kalman-Bucy observer state: estimate, Riccati solution, design noise."""

    E_hat: np.ndarray
    H: np.ndarray
    S_noise: np.ndarray
    h_bound: float = 1e6

    def __post_init__(self):
        self.E_hat = np.asarray(self.E_hat, dtype=float)
        self.H = np.asarray(self.H, dtype=float)
        self.S_noise = np.asarray(self.S_noise, dtype=float)
        n = self.E_hat.shape[0]
        for name in ("H", "S_noise"):
            m = getattr(self, name)
            if m.shape != (n, n):
                raise ValidationError(f"{name}: expected {n}x{n}, got {m.shape}")
            if np.abs(m - m.T).max() > 1e-9:
                raise ValidationError(f"{name}: must be symmetric")
        if np.any(np.linalg.eigvalsh(self.H) <= 0.0):
            raise ValidationError("H: must be positive definite")
        if np.any(np.linalg.eigvalsh(self.S_noise) < -1e-12):
            raise ValidationError("S_noise: must be positive semidefinite")


def kalman_rhs(ks: KalmanState, A: np.ndarray, C: np.ndarray, u: np.ndarray):
    """Kalman-Bucy derivatives.

    dE_hat = (A - H C^T C) E_hat + u,
    dH     = H A^T + A H - H C^T C H + S.
    Raises RiccatiDivergence when ||H|| exceeds the configured bound.
    """
    if np.linalg.norm(ks.H) > ks.h_bound:
        raise RiccatiDivergence(f"||H|| = {np.linalg.norm(ks.H):.3e} exceeds bound {ks.h_bound:.3e}")
    CtC = C.T @ C
    dE = (A - ks.H @ CtC) @ ks.E_hat + u
    dH = ks.H @ A.T + A @ ks.H - ks.H @ CtC @ ks.H + ks.S_noise
    return dE, dH


# ---------------------------------------------------------------------------
# excitation diagnostics


def observability_gramian(Phi_samples, C_samples, dt: float):
    """Eigen-extremes of the windowed observability Gramian.

    Accumulates sum of Phi^T C^T C Phi * dt with trapezoidal weights over
    the sample window and returns (min_eig, max_eig).
    """
    if dt <= 0.0:
        raise ValidationError(f"dt must be positive, got {dt!r}")
    m = len(Phi_samples)
    if m != len(C_samples):
        raise ValidationError("Phi and C sample sequences must have equal length")
    if m < 2:
        raise EmptyWindow(f"need at least 2 samples, got {m}")
    n = np.asarray(Phi_samples[0]).shape[0]
    W = np.zeros((n, n))
    for i in range(m):
        CP = np.asarray(C_samples[i]) @ np.asarray(Phi_samples[i])
        wgt = 0.5 * dt if i in (0, m - 1) else dt
        W += wgt * (CP.T @ CP)
    W = 0.5 * (W + W.T)
    eigs = np.linalg.eigvalsh(W)
    return float(eigs[0]), float(eigs[-1])


@dataclass(frozen=True)
class ExcitationReport:
    """Outcome of the Delta-energy monitor."""

    integral: float
    threshold: float
    t_c: float | None
    tail_increase: float
    still_growing: bool
    running: np.ndarray


def excitation_monitor(Delta_samples, dt: float, gamma: float, mu: float) -> ExcitationReport:
    """Running energy of Delta against the finite-time threshold.

    Accumulates int Delta^2 by the trapezoidal rule, reports the first
    sample time at which it crosses -ln(1 - mu)/gamma (or None), and a
    weak not-square-integrable heuristic: whether the integral is still
    strictly growing over the final 20% of the window.  The tail growth is
    summed independently so it is not absorbed by the head of the integral
    in floating point.
    """
    if dt <= 0.0:
        raise ValidationError(f"dt must be positive, got {dt!r}")
    if gamma <= 0.0:
        raise ValidationError(f"gamma must be positive, got {gamma!r}")
    if not (0.0 < mu < 1.0):
        raise ValidationError(f"mu must lie in (0, 1), got {mu!r}")
    D2 = np.asarray(Delta_samples, dtype=float) ** 2
    running = np.concatenate(([0.0], np.cumsum(0.5 * (D2[1:] + D2[:-1]) * dt)))
    threshold = -np.log(1.0 - mu) / gamma
    idx = np.searchsorted(running, threshold)
    t_c = float(idx * dt) if idx < running.shape[0] else None
    i80 = int(0.8 * (D2.shape[0] - 1))
    tail = float(np.sum(0.5 * (D2[i80:-1] + D2[i80 + 1:]) * dt)) if i80 < D2.shape[0] - 1 else 0.0
    return ExcitationReport(
        integral=float(running[-1]),
        threshold=float(threshold),
        t_c=t_c,
        tail_increase=tail,
        still_growing=bool(tail > 0.0),
        running=running,
    )
