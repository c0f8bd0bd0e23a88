"""Random instance builders shared across the test modules."""

import numpy as np

import powerobs as po


def random_network(rng, n):
    Y = rng.uniform(0.05, 1.0, (n, n))
    Y = 0.5 * (Y + Y.T)
    alpha = rng.uniform(-0.5, 0.5, (n, n))
    alpha = 0.5 * (alpha + alpha.T)
    return po.NetworkParams(
        n=n, Y=Y, alpha=alpha,
        G_shunt=rng.uniform(0.01, 0.5, n),
        B_shunt=rng.uniform(-1.0, -0.1, n),
    )


def random_machines(rng, n):
    return po.MachineParams(
        a=rng.uniform(0.1, 1.0, n),
        b=rng.uniform(0.05, 0.5, n),
        D=rng.uniform(0.1, 2.0, n),
        P=rng.uniform(0.5, 5.0, n),
        d=rng.uniform(0.5, 2.0, n),
        E_f=rng.uniform(0.1, 1.0, n),
        nu=rng.uniform(0.0, 1.0, n),
    )


def random_state(rng, n):
    return po.SystemState(
        delta=rng.uniform(-np.pi, np.pi, n),
        omega=rng.uniform(-1.0, 1.0, n),
        E=rng.uniform(0.5, 3.0, n),
    )
