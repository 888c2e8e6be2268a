"""Dense 2**n statevector reference, used only to cross-check the analytic paths.

Amplitude index bit k is qubit k (little-endian).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quantum
from .errors import InvalidStateError, SizeError
from .quantum import PairDensity, SingleExcitationState

MAX_QUBITS = 14

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


@dataclass(frozen=True)
class DenseState:
    n: int
    amps: np.ndarray

    def __post_init__(self):
        if self.n > MAX_QUBITS:
            raise SizeError(f"dense oracle limited to n <= {MAX_QUBITS}, got {self.n}")
        amps = np.array(self.amps, dtype=complex)
        if amps.shape != (1 << self.n,):
            raise InvalidStateError(f"expected {1 << self.n} amplitudes, got {amps.shape}")
        if abs(np.vdot(amps, amps).real - 1.0) > 1e-12:
            raise InvalidStateError("dense state not normalized")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    def tensor(self) -> np.ndarray:
        # axis a of the reshaped tensor is qubit n - 1 - a
        return self.amps.reshape((2,) * self.n)


def _axis(n: int, q: int) -> int:
    return n - 1 - q


def embed(state: SingleExcitationState) -> DenseState:
    if state.n > MAX_QUBITS:
        raise SizeError(f"dense oracle limited to n <= {MAX_QUBITS}, got {state.n}")
    amps = np.zeros(1 << state.n, dtype=complex)
    amps[0] = state.vacuum_amp
    for k, a in enumerate(state.exc_amps):
        amps[1 << k] = a
    return DenseState(state.n, amps)


def uniform_vacuum(n: int) -> DenseState:
    return DenseState(n, np.eye(1, 1 << n, dtype=complex)[0])


def _apply_1q(psi: np.ndarray, gate: np.ndarray, q: int, n: int) -> np.ndarray:
    ax = _axis(n, q)
    psi = np.tensordot(gate, psi, axes=([1], [ax]))
    return np.moveaxis(psi, 0, ax)


def brute_joint_distribution(state: DenseState, schedule) -> np.ndarray:
    """Outcome table by evolving each qubit to its time and projecting onto |+->.

    Returned index bit k = 1 means qubit k was found in |->.
    """
    n = state.n
    if n > MAX_QUBITS:
        raise SizeError(f"dense oracle limited to n <= {MAX_QUBITS}, got {n}")
    psi = state.tensor()
    for q, t in schedule.entries:
        u = np.diag([1.0, complex(quantum.excited_phase(schedule.omega, t))])
        # H maps |+> -> |0>, |-> -> |1>, so a computational readout after H is the |+-> readout
        psi = _apply_1q(psi, _H @ u, q, n)
    return (np.abs(psi) ** 2).reshape(-1)


def brute_pair_density(state: DenseState, i: int, j: int) -> PairDensity:
    n = state.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InvalidStateError(f"bad pair ({i}, {j}) for n={n}")
    psi = np.moveaxis(state.tensor(), [_axis(n, i), _axis(n, j)], [0, 1]).reshape(4, -1)
    return PairDensity(psi @ psi.conj().T, quantum.COMPUTATIONAL)
