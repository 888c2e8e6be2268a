import math

import numpy as np


def binomial_sd(p, m):
    return math.sqrt(p * (1 - p) / m)


def random_state(rng, n, vacuum=True):
    from qclocksync.quantum import generalized_state

    vac = complex(rng.normal(), rng.normal()) if vacuum else 0.0
    return generalized_state(vac, rng.normal(size=n) + 1j * rng.normal(size=n))


def marginal(table, n, qubits, outcomes):
    """Sum a 2**n outcome table over all qubits not in ``qubits``."""
    idx = np.arange(table.size)
    mask = np.ones(table.size, bool)
    for q, s in zip(qubits, outcomes):
        mask &= ((idx >> q) & 1) == (1 if s == -1 else 0)
    return float(table[mask].sum())
