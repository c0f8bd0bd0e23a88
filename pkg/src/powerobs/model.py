"""Flux-decay model of an n-machine power network with lossy lines.

Each machine i carries three states: rotor angle delta_i (rad), speed
deviation omega_i (rad/s) and quadrature internal voltage E_i (p.u.).
The network is described by line admittance magnitudes Y_ij and angles
alpha_ij plus per-node shunt terms, all after Kron reduction.  The
per-machine composite constants (a, b, D, P, d) enter the dynamics

    ddelta_i = omega_i
    domega_i = -D_i omega_i + P_i - d_i (G_ii E_i^2
               - E_i sum_{j!=i} E_j Y_ij sin(delta_ij + alpha_ij))
    dE_i     = -a_i E_i + b_i sum_{j!=i} E_j Y_ij cos(delta_ij + alpha_ij) + u_i

with delta_ij = delta_i - delta_j and u_i = (E_f_i + nu_i)/tau_i.

All functions here are pure; the dataclasses are frozen value types, so
everything in this module is safe to use from multiple threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDerivedConstant, ValidationError

__all__ = [
    "NetworkParams",
    "MachineParams",
    "SystemState",
    "Measurements",
    "derive_params",
    "currents",
    "powers",
    "build_A",
    "build_ST",
    "build_C",
    "plant_rhs",
    "measure",
]


def _vec(x, n, name):
    v = np.asarray(x, dtype=float)
    if v.shape != (n,):
        raise ValidationError(f"{name}: expected {n} entries, got shape {v.shape}")
    return v


def _mat(x, n, name):
    m = np.asarray(x, dtype=float)
    if m.shape != (n, n):
        raise ValidationError(f"{name}: expected {n}x{n} matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class NetworkParams:
    """Kron-reduced network data: line admittances and shunt terms.

    Y and alpha must be symmetric; their diagonals are never read (the
    coupling sums exclude j = i).
    """

    n: int
    Y: np.ndarray
    alpha: np.ndarray
    G_shunt: np.ndarray
    B_shunt: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"n: machine count must be >= 2, got {self.n}")
        object.__setattr__(self, "Y", _mat(self.Y, self.n, "Y"))
        object.__setattr__(self, "alpha", _mat(self.alpha, self.n, "alpha"))
        object.__setattr__(self, "G_shunt", _vec(self.G_shunt, self.n, "G_shunt"))
        object.__setattr__(self, "B_shunt", _vec(self.B_shunt, self.n, "B_shunt"))
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if self.Y[i, j] != self.Y[j, i]:
                    raise ValidationError(
                        f"Y[{i}][{j}] != Y[{j}][{i}] ({self.Y[i, j]!r} vs {self.Y[j, i]!r})"
                    )
                if self.Y[i, j] < 0.0:
                    raise ValidationError(f"Y[{i}][{j}]: admittance magnitude must be >= 0")
                if self.alpha[i, j] != self.alpha[j, i]:
                    raise ValidationError(
                        f"alpha[{i}][{j}] != alpha[{j}][{i}] "
                        f"({self.alpha[i, j]!r} vs {self.alpha[j, i]!r})"
                    )


@dataclass(frozen=True)
class MachineParams:
    """Per-machine composite constants and excitation inputs.

    The effective voltage input is u = (E_f + nu)/tau; shipping configs
    use tau = 1 so that u is just E_f + nu.
    """

    a: np.ndarray
    b: np.ndarray
    D: np.ndarray
    P: np.ndarray
    d: np.ndarray
    E_f: np.ndarray
    nu: np.ndarray
    tau: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        n = np.asarray(self.a, dtype=float).shape[0]
        for name in ("a", "b", "D", "P", "d", "E_f", "nu"):
            object.__setattr__(self, name, _vec(getattr(self, name), n, name))
        tau = np.ones(n) if self.tau is None else _vec(self.tau, n, "tau")
        object.__setattr__(self, "tau", tau)
        for name in ("a", "D", "d", "tau"):
            v = getattr(self, name)
            if np.any(v <= 0.0):
                i = int(np.argmin(v))
                raise ValidationError(f"{name}[{i}]: must be strictly positive, got {v[i]!r}")
        if np.any(self.b < 0.0):
            i = int(np.argmin(self.b))
            raise ValidationError(f"b[{i}]: must be non-negative, got {self.b[i]!r}")
        if np.any(self.b == 0.0):
            warnings.warn("b contains zero entries (degenerate reactance difference)")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def u(self) -> np.ndarray:
        """Effective voltage-channel input (E_f + nu)/tau."""
        return (self.E_f + self.nu) / self.tau


@dataclass(frozen=True)
class SystemState:
    """Plant state of all machines: angles, speed deviations, voltages."""

    delta: np.ndarray
    omega: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.delta, dtype=float).shape[0]
        for name in ("delta", "omega", "E"):
            object.__setattr__(self, name, _vec(getattr(self, name), n, name))

    @property
    def n(self) -> int:
        return self.delta.shape[0]


@dataclass(frozen=True)
class Measurements:
    """The measured signal set at one instant: delta, u, P_e, Q_e."""

    delta: np.ndarray
    u: np.ndarray
    P_e: np.ndarray
    Q_e: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.delta, dtype=float).shape[0]
        for name in ("delta", "u", "P_e", "Q_e"):
            object.__setattr__(self, name, _vec(getattr(self, name), n, name))


def derive_params(raw: dict) -> MachineParams:
    """Convert raw physical constants to the composite machine constants.

    raw must contain n-vectors (or scalars broadcast by the caller) for
    M, D_m, P_m, tau, omega_0, x_d, x_dp and B_shunt; it may carry E_f
    and nu, which default to zero.  The derived values are

        D = D_m/M,  d = omega_0/M,  P = d*P_m,
        a = (1 - (x_d - x_dp)*B_shunt)/tau,  b = (x_d - x_dp)/tau.
    """
    required = ("M", "D_m", "P_m", "tau", "omega_0", "x_d", "x_dp", "B_shunt")
    missing = [k for k in required if k not in raw]
    if missing:
        raise ValidationError(f"raw machine constants missing {missing}")
    vals = {k: np.atleast_1d(np.asarray(raw[k], dtype=float)) for k in required}
    n = max(v.shape[0] for v in vals.values())
    for k, v in vals.items():
        if v.shape[0] == 1:
            vals[k] = np.full(n, v[0])
        elif v.shape[0] != n:
            raise ValidationError(f"raw.{k}: expected {n} entries, got {v.shape[0]}")
    for k in ("M", "D_m", "P_m", "tau", "omega_0", "x_d", "x_dp"):
        if np.any(vals[k] <= 0.0):
            i = int(np.argmin(vals[k]))
            raise ValidationError(f"raw.{k}[{i}]: must be positive, got {vals[k][i]!r}")
    if np.any(vals["x_d"] < vals["x_dp"]):
        i = int(np.argmin(vals["x_d"] - vals["x_dp"]))
        raise ValidationError(f"raw.x_d[{i}] < raw.x_dp[{i}]")

    xdiff = vals["x_d"] - vals["x_dp"]
    D = vals["D_m"] / vals["M"]
    d = vals["omega_0"] / vals["M"]
    P = d * vals["P_m"]
    a = (1.0 - xdiff * vals["B_shunt"]) / vals["tau"]
    b = xdiff / vals["tau"]
    if np.any(a <= 0.0):
        i = int(np.argmin(a))
        raise NonPositiveDerivedConstant(f"a[{i}] = {a[i]!r} <= 0")
    if np.any(b < 0.0):
        i = int(np.argmin(b))
        raise NonPositiveDerivedConstant(f"b[{i}] = {b[i]!r} < 0")

    E_f = np.atleast_1d(np.asarray(raw.get("E_f", np.zeros(n)), dtype=float))
    nu = np.atleast_1d(np.asarray(raw.get("nu", np.zeros(n)), dtype=float))
    if E_f.shape[0] == 1:
        E_f = np.full(n, E_f[0])
    if nu.shape[0] == 1:
        nu = np.full(n, nu[0])
    return MachineParams(a=a, b=b, D=D, P=P, d=d, E_f=E_f, nu=nu, tau=vals["tau"])


def _angle_matrix(delta: np.ndarray, net: NetworkParams) -> np.ndarray:
    # delta_ij + alpha_ij; diagonal entries are never used downstream
    return delta[:, None] - delta[None, :] + net.alpha


def build_ST(delta: np.ndarray, net: NetworkParams):
    """Current maps S(delta), T(delta) with I_q = S E and I_d = T E."""
    dd = _angle_matrix(np.asarray(delta, dtype=float), net)
    S = net.Y * np.sin(dd)
    T = -net.Y * np.cos(dd)
    idx = np.arange(net.n)
    S[idx, idx] = net.G_shunt
    T[idx, idx] = -net.B_shunt
    return S, T


def currents(state: SystemState, net: NetworkParams):
    """Axis currents (I_q, I_d) for the given plant state."""
    S, T = build_ST(state.delta, net)
    return S @ state.E, T @ state.E


def powers(state: SystemState, I_q: np.ndarray, I_d: np.ndarray):
    """Active and reactive electrical power (P_e, Q_e) = (E*I_q, E*I_d)."""
    return state.E * I_q, state.E * I_d


def build_A(delta: np.ndarray, mp: MachineParams, net: NetworkParams) -> np.ndarray:
    """Voltage-dynamics system matrix: A_ii = -a_i, A_ij = b_i Y_ij cos(delta_ij + alpha_ij)."""
    dd = _angle_matrix(np.asarray(delta, dtype=float), net)
    A = mp.b[:, None] * net.Y * np.cos(dd)
    idx = np.arange(net.n)
    A[idx, idx] = -mp.a
    return A


def build_C(meas: Measurements, net: NetworkParams) -> np.ndarray:
    """Measurable matrix with C(P_e, Q_e, delta) E = 0 along consistent signals.

    Row i is P_e_i * T_i(delta) - Q_e_i * S_i(delta).
    """
    S, T = build_ST(meas.delta, net)
    return meas.P_e[:, None] * T - meas.Q_e[:, None] * S


def plant_rhs(state: SystemState, mp: MachineParams, net: NetworkParams) -> SystemState:
    """Time derivative of the plant state."""
    I_q, I_d = currents(state, net)
    P_e, _ = powers(state, I_q, I_d)
    ddelta = state.omega
    domega = -mp.D * state.omega + mp.P - mp.d * P_e
    dd = _angle_matrix(state.delta, net)
    coup = net.Y * np.cos(dd)
    np.fill_diagonal(coup, 0.0)
    dE = -mp.a * state.E + mp.b * (coup @ state.E) + mp.u
    return SystemState(delta=ddelta, omega=domega, E=dE)


def measure(state: SystemState, mp: MachineParams, net: NetworkParams) -> Measurements:
    """The measured signal set produced by the plant at this state."""
    I_q, I_d = currents(state, net)
    P_e, Q_e = powers(state, I_q, I_d)
    return Measurements(delta=state.delta, u=mp.u, P_e=P_e, Q_e=Q_e)
