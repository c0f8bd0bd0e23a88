"""Compiled right-hand side of the augmented plant + observers system.

The integration loop calls this a few hundred thousand times per run, so
it is written once as an njit kernel over a flat state vector.  The
formulas mirror the numpy implementations in model.py / observers.py;
tests pin the two paths against each other.

Flat state layout (segments absent when the owning observer is disabled):

    delta[n] omega[n] E[n]
    xi_E[n] Phi[n*n] y_lag[n-1] psi_lag[(n-1)*n]      (voltage pipeline)
    theta_drem[n]                                      (gradient estimator)
    theta_ftc[n] w[1]                                  (finite-time estimator)
    xi_omega[n]                                        (speed observer)
    E_hat[n] H[n*n]                                    (Kalman-Bucy)
    int_Delta2[1]                                      (voltage pipeline)
"""

import numpy as np
from numba import njit

# offsets array indices (value -1 marks an absent segment)
O_DELTA, O_OMEGA, O_E, O_XIE, O_PHI, O_YLAG, O_PSILAG = 0, 1, 2, 3, 4, 5, 6
O_THD, O_THF, O_W, O_XIOM, O_EHAT, O_H, O_ID2, O_TOTAL = 7, 8, 9, 10, 11, 12, 13, 14


def layout(n, pebo, drem, ftc, speed, kalman):
    """Segment offsets for the flat augmented state; -1 = absent."""
    off = np.full(O_TOTAL + 1, -1, dtype=np.int64)
    pos = 0
    off[O_DELTA] = pos; pos += n
    off[O_OMEGA] = pos; pos += n
    off[O_E] = pos; pos += n
    if pebo:
        off[O_XIE] = pos; pos += n
        off[O_PHI] = pos; pos += n * n
        off[O_YLAG] = pos; pos += n - 1
        off[O_PSILAG] = pos; pos += (n - 1) * n
    if drem:
        off[O_THD] = pos; pos += n
    if ftc:
        off[O_THF] = pos; pos += n
        off[O_W] = pos; pos += 1
    if speed:
        off[O_XIOM] = pos; pos += n
    if kalman:
        off[O_EHAT] = pos; pos += n
        off[O_H] = pos; pos += n * n
    if pebo:
        off[O_ID2] = pos; pos += 1
    off[O_TOTAL] = pos
    return off


@njit(cache=True)
def _adj_det(M, adj):
    """Adjugate into adj, returns det; stable for singular M (cofactors)."""
    n = M.shape[0]
    if n == 2:
        adj[0, 0] = M[1, 1]
        adj[0, 1] = -M[0, 1]
        adj[1, 0] = -M[1, 0]
        adj[1, 1] = M[0, 0]
        return M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    minor = np.empty((n - 1, n - 1))
    det = 0.0
    for i in range(n):
        for j in range(n):
            r = 0
            for ii in range(n):
                if ii == i:
                    continue
                c = 0
                for jj in range(n):
                    if jj == j:
                        continue
                    minor[r, c] = M[ii, jj]
                    c += 1
                r += 1
            cof = ((-1.0) ** (i + j)) * np.linalg.det(np.ascontiguousarray(minor))
            adj[j, i] = cof
            if i == 0:
                det += M[0, j] * cof
    return det


@njit(cache=True)
def aug_rhs(x, dx, off, n,
            Y, alpha, Gsh, Bsh, a, b, D, P, d, u,
            gamma_d, gamma_f, poles, k_om, S_noise):
    """Fill dx with the augmented derivative at state x."""
    o_delta = off[O_DELTA]; o_omega = off[O_OMEGA]; o_E = off[O_E]

    # trig couplings and measurements from the true plant state
    S = np.empty((n, n))
    T = np.empty((n, n))
    A = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                S[i, i] = Gsh[i]
                T[i, i] = -Bsh[i]
                A[i, i] = -a[i]
            else:
                ang = x[o_delta + i] - x[o_delta + j] + alpha[i, j]
                S[i, j] = Y[i, j] * np.sin(ang)
                T[i, j] = -Y[i, j] * np.cos(ang)
                A[i, j] = b[i] * Y[i, j] * np.cos(ang)

    Iq = np.empty(n)
    Id = np.empty(n)
    for i in range(n):
        sq = 0.0
        sd = 0.0
        for j in range(n):
            sq += S[i, j] * x[o_E + j]
            sd += T[i, j] * x[o_E + j]
        Iq[i] = sq
        Id[i] = sd
    Pe = np.empty(n)
    Qe = np.empty(n)
    for i in range(n):
        Pe[i] = x[o_E + i] * Iq[i]
        Qe[i] = x[o_E + i] * Id[i]

    # plant
    for i in range(n):
        dx[o_delta + i] = x[o_omega + i]
        dx[o_omega + i] = -D[i] * x[o_omega + i] + P[i] - d[i] * Pe[i]
        s = 0.0
        for j in range(n):
            if j != i:
                s += A[i, j] * x[o_E + j]
        dx[o_E + i] = -a[i] * x[o_E + i] + s + u[i]

    # measurable matrix C: row i = Pe_i * T_i - Qe_i * S_i
    C = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            C[i, j] = Pe[i] * T[i, j] - Qe[i] * S[i, j]

    Delta = 0.0
    if off[O_XIE] >= 0:
        o_xie = off[O_XIE]; o_phi = off[O_PHI]
        o_ylag = off[O_YLAG]; o_psilag = off[O_PSILAG]
        # open-loop copy and transition matrix
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += A[i, j] * x[o_xie + j]
            dx[o_xie + i] = s + u[i]
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += A[i, l] * x[o_phi + l * n + j]
                dx[o_phi + i * n + j] = s

        # first regression row: y1 = C[0] . xi_E, psi1 = C[0] . Phi
        y1 = 0.0
        for j in range(n):
            y1 += C[0, j] * x[o_xie + j]
        psi1 = np.empty(n)
        for j in range(n):
            s = 0.0
            for l in range(n):
                s += C[0, l] * x[o_phi + l * n + j]
            psi1[j] = s

        # lag bank
        for m in range(n - 1):
            dx[o_ylag + m] = poles[m] * (y1 - x[o_ylag + m])
            for j in range(n):
                dx[o_psilag + m * n + j] = poles[m] * (psi1[j] - x[o_psilag + m * n + j])

        # extended regression and adjugate mixing
        Psi = np.empty((n, n))
        Yv = np.empty(n)
        Yv[0] = y1
        for j in range(n):
            Psi[0, j] = psi1[j]
        for m in range(n - 1):
            Yv[m + 1] = x[o_ylag + m]
            for j in range(n):
                Psi[m + 1, j] = x[o_psilag + m * n + j]
        adj = np.empty((n, n))
        Delta = _adj_det(Psi, adj)
        sY = np.empty(n)
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += adj[i, j] * Yv[j]
            sY[i] = s

        if off[O_THD] >= 0:
            o_thd = off[O_THD]
            for i in range(n):
                dx[o_thd + i] = -gamma_d[i] * Delta * (Delta * x[o_thd + i] - sY[i])
        if off[O_THF] >= 0:
            o_thf = off[O_THF]
            for i in range(n):
                dx[o_thf + i] = -gamma_f * Delta * (Delta * x[o_thf + i] - sY[i])
            dx[off[O_W]] = -gamma_f * Delta * Delta * x[off[O_W]]
        dx[off[O_ID2]] = Delta * Delta

    if off[O_XIOM] >= 0:
        o_xiom = off[O_XIOM]
        for i in range(n):
            omhat = x[o_xiom + i] + k_om[i] * x[o_delta + i]
            dx[o_xiom + i] = -D[i] * omhat + P[i] - d[i] * Pe[i] - k_om[i] * omhat

    if off[O_EHAT] >= 0:
        o_eh = off[O_EHAT]; o_h = off[O_H]
        CtC = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += C[l, i] * C[l, j]
                CtC[i, j] = s
        HC = np.empty((n, n))  # H @ CtC
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += x[o_h + i * n + l] * CtC[l, j]
                HC[i, j] = s
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += (A[i, j] - HC[i, j]) * x[o_eh + j]
            dx[o_eh + i] = s + u[i]
        for i in range(n):
            for j in range(n):
                s = S_noise[i, j]
                for l in range(n):
                    s += x[o_h + i * n + l] * A[j, l] + A[i, l] * x[o_h + l * n + j]
                    s -= HC[i, l] * x[o_h + l * n + j]
                dx[o_h + i * n + j] = s
    return Delta


@njit(cache=True)
def rk4_span(x, dt, nsteps, off, n,
             Y, alpha, Gsh, Bsh, a, b, D, P, d, u,
             gamma_d, gamma_f, poles, k_om, S_noise):
    """Advance nsteps classical RK4 steps in place; returns 0, or 1 when a
    non-finite component appears (state left as produced)."""
    m = x.shape[0]
    k1 = np.empty(m); k2 = np.empty(m); k3 = np.empty(m); k4 = np.empty(m)
    xs = np.empty(m)
    o_h = off[O_H]
    for step in range(nsteps):
        aug_rhs(x, k1, off, n, Y, alpha, Gsh, Bsh, a, b, D, P, d, u,
                gamma_d, gamma_f, poles, k_om, S_noise)
        for i in range(m):
            xs[i] = x[i] + 0.5 * dt * k1[i]
        aug_rhs(xs, k2, off, n, Y, alpha, Gsh, Bsh, a, b, D, P, d, u,
                gamma_d, gamma_f, poles, k_om, S_noise)
        for i in range(m):
            xs[i] = x[i] + 0.5 * dt * k2[i]
        aug_rhs(xs, k3, off, n, Y, alpha, Gsh, Bsh, a, b, D, P, d, u,
                gamma_d, gamma_f, poles, k_om, S_noise)
        for i in range(m):
            xs[i] = x[i] + dt * k3[i]
        aug_rhs(xs, k4, off, n, Y, alpha, Gsh, Bsh, a, b, D, P, d, u,
                gamma_d, gamma_f, poles, k_om, S_noise)
        for i in range(m):
            x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if o_h >= 0:
            # keep the Riccati solution symmetric against drift
            for i in range(n):
                for j in range(i + 1, n):
                    hij = 0.5 * (x[o_h + i * n + j] + x[o_h + j * n + i])
                    x[o_h + i * n + j] = hij
                    x[o_h + j * n + i] = hij
        for i in range(m):
            if not np.isfinite(x[i]):
                return 1
    return 0
