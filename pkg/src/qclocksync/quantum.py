"""Exact algebra for single-excitation states and their two-qubit reductions.

States live in the span of the vacuum |00...0> and the n one-excitation
states |e_k>. Pair and qubit density matrices are small dense arrays tagged
with the basis they are written in: ``"computational"`` ({|0>, |1>}) or
``"measurement"`` ({|+>, |->}).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidStateError, UndefinedConditionalError

COMPUTATIONAL = "computational"
MEASUREMENT = "measurement"
_BASES = (COMPUTATIONAL, MEASUREMENT)

# Phase acquired by the excited amplitude is exp(EVOLUTION_SIGN * 1j * omega * t).
# +1 is the convention under which the conditional receiver state evolves with
# off-diagonal (n - 2 + 2i sin wt) / 2n in its upper-right entry.
EVOLUTION_SIGN = 1

ALGEBRA_TOL = 1e-12
POSITIVITY_TOL = 1e-10

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
_HH = np.kron(_H, _H)
_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def excited_phase(omega: float, t) -> complex | np.ndarray:
    """Phase factor picked up by |1> after standard time ``t``."""
    return np.exp(EVOLUTION_SIGN * 1j * omega * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SingleExcitationState:
    n: int
    vacuum_amp: complex
    exc_amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.exc_amps, dtype=complex)
        if amps.ndim != 1 or amps.size < 2 or amps.size != self.n:
            raise InvalidStateError(f"need n >= 2 excitation amplitudes, got shape {amps.shape} for n={self.n}")
        v = complex(self.vacuum_amp)
        if not (np.all(np.isfinite(amps)) and cmath.isfinite(v)):
            raise InvalidStateError("amplitudes must be finite")
        norm2 = abs(v) ** 2 + float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > ALGEBRA_TOL:
            raise InvalidStateError(f"state not normalized: |psi|^2 = {norm2!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "vacuum_amp", v)
        object.__setattr__(self, "exc_amps", amps)

    def norm(self) -> float:
        return math.sqrt(abs(self.vacuum_amp) ** 2 + float(np.vdot(self.exc_amps, self.exc_amps).real))


class _Density:
    dim = 0

    def __init__(self, m, basis: str = COMPUTATIONAL):
        m = np.array(m, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise InvalidStateError(f"expected {self.dim}x{self.dim} matrix, got {m.shape}")
        if basis not in _BASES:
            raise InvalidStateError(f"unknown basis tag {basis!r}")
        if not np.all(np.isfinite(m)):
            raise InvalidStateError("matrix entries must be finite")
        if np.max(np.abs(m - m.conj().T)) > ALGEBRA_TOL:
            raise InvalidStateError("matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > ALGEBRA_TOL:
            raise InvalidStateError(f"trace {np.trace(m).real!r} != 1")
        if np.linalg.eigvalsh(m).min() < -POSITIVITY_TOL:
            raise InvalidStateError("matrix has a negative eigenvalue")
        m.setflags(write=False)
        self.m = m
        self.basis = basis

    def __repr__(self):
        return f"{type(self).__name__}(basis={self.basis!r}, m={self.m.tolist()!r})"

    def allclose(self, other, atol: float = ALGEBRA_TOL) -> bool:
        o = other.m if isinstance(other, _Density) else np.asarray(other)
        return bool(np.max(np.abs(self.m - o)) <= atol)


class QubitDensity(_Density):
    dim = 2


class PairDensity(_Density):
    dim = 4


def w_state(n: int) -> SingleExcitationState:
    """Symmetric single-excitation state (|10..0> + |01..0> + ... + |0..01>)/sqrt(n)."""
    if int(n) != n or n < 2:
        raise InvalidStateError(f"w_state needs n >= 2 parties, got {n}")
    n = int(n)
    return SingleExcitationState(n, 0j, np.full(n, 1.0 / math.sqrt(n), dtype=complex))


def generalized_state(vacuum_amp: complex, exc_amps: Sequence[complex]) -> SingleExcitationState:
    """Build a single-excitation state from arbitrary amplitudes, renormalizing."""
    amps = np.asarray(exc_amps, dtype=complex)
    if amps.ndim != 1 or amps.size < 2:
        raise InvalidStateError("need at least two excitation amplitudes")
    v = complex(vacuum_amp)
    norm = math.sqrt(abs(v) ** 2 + float(np.vdot(amps, amps).real))
    if not math.isfinite(norm):
        raise InvalidStateError("amplitudes must be finite")
    if norm == 0.0:
        raise InvalidStateError("all amplitudes are zero")
    return SingleExcitationState(amps.size, v / norm, amps / norm)


def _check_pair(state: SingleExcitationState, i: int, j: int):
    for q in (i, j):
        if not (0 <= q < state.n):
            raise InvalidStateError(f"qubit index {q} out of range for n={state.n}")
    if i == j:
        raise InvalidStateError("pair indices must differ")


def pair_density_computational(state: SingleExcitationState, i: int, j: int) -> PairDensity:
    """Reduced density of qubits (i, j) in the basis |00>, |01>, |10>, |11> (i is the first bit)."""
    _check_pair(state, i, j)
    a = state.exc_amps
    psi = np.array([state.vacuum_amp, a[j], a[i], 0.0], dtype=complex)
    rho = np.outer(psi, psi.conj())
    # every other excitation leaves the pair in |00>
    rest = float(np.vdot(a, a).real) - abs(a[i]) ** 2 - abs(a[j]) ** 2
    rho[0, 0] += max(rest, 0.0)
    return PairDensity(rho, COMPUTATIONAL)


def to_measurement_basis(rho: PairDensity) -> PairDensity:
    if rho.basis != COMPUTATIONAL:
        raise InvalidStateError(f"expected computational basis, got {rho.basis!r}")
    return PairDensity(_HH @ rho.m @ _HH, MEASUREMENT)


def to_computational_basis(rho: PairDensity) -> PairDensity:
    if rho.basis != MEASUREMENT:
        raise InvalidStateError(f"expected measurement basis, got {rho.basis!r}")
    return PairDensity(_HH @ rho.m @ _HH, COMPUTATIONAL)


def conditional_receiver_state(rho: PairDensity, publisher_outcome: int) -> tuple[float, QubitDensity]:
    """Probability of the first qubit's |+-> outcome and the second qubit's state given it.

    The returned qubit density is in the measurement basis.
    """
    if rho.basis != MEASUREMENT:
        raise InvalidStateError(f"expected measurement basis, got {rho.basis!r}")
    if publisher_outcome not in (1, -1):
        raise InvalidStateError(f"outcome must be +1 or -1, got {publisher_outcome!r}")
    k = 0 if publisher_outcome == 1 else 2
    block = rho.m[k:k + 2, k:k + 2]
    prob = float(np.trace(block).real)
    if prob <= POSITIVITY_TOL:
        raise UndefinedConditionalError(f"publisher outcome {publisher_outcome:+d} has probability {prob!r}")
    return prob, QubitDensity(block / prob, MEASUREMENT)


def reduced_qubit(rho: PairDensity, keep: int = 1) -> QubitDensity:
    """Partial trace of a pair density down to one qubit (0 = first, 1 = second)."""
    t = rho.m.reshape(2, 2, 2, 2)
    m = np.einsum("ajbj->ab", t) if keep == 0 else np.einsum("jajb->ab", t)
    return QubitDensity(m, rho.basis)


def evolve_qubit(rho: QubitDensity, t: float, omega: float) -> QubitDensity:
    """Free evolution for standard time ``t`` of a qubit with gap ``omega``."""
    if not omega > 0:
        raise InvalidStateError(f"omega must be positive, got {omega!r}")
    u = np.diag([1.0, complex(excited_phase(omega, t))])
    if rho.basis == MEASUREMENT:
        u = _H @ u @ _H
    return QubitDensity(u @ rho.m @ u.conj().T, rho.basis)


def outcome_probabilities(n: int, delta: float, omega: float, publisher_outcome: int = 1) -> tuple[float, float]:
    """Receiver's (P(+), P(-)) given the publisher's outcome, for the n-party W state."""
    if n < 2:
        raise InvalidStateError(f"need n >= 2, got {n}")
    if publisher_outcome not in (1, -1):
        raise InvalidStateError(f"outcome must be +1 or -1, got {publisher_outcome!r}")
    shift = publisher_outcome * math.cos(omega * delta) / n
    return 0.5 + shift, 0.5 - shift


def pair_correlation(state: SingleExcitationState, i: int, j: int, delta: float, omega: float) -> dict[tuple[int, int], float]:
    """Joint |+-> outcome probabilities of qubits i and j when j is measured ``delta`` after i."""
    _check_pair(state, i, j)
    a = state.exc_amps
    cross = (a[i] * np.conj(a[j]) * cmath.exp(-1j * EVOLUTION_SIGN * omega * delta)).real
    if state.vacuum_amp != 0:
        # vacuum interference adds single-party bias terms; use the exact pair density instead
        return _pair_correlation_general(state, i, j, delta, omega)
    return {(si, sj): float(0.25 + 0.5 * si * sj * cross) for si in (1, -1) for sj in (1, -1)}


def _pair_correlation_general(state, i, j, delta, omega):
    rho = pair_density_computational(state, i, j).m
    u = np.kron(np.eye(2), np.diag([1.0, complex(excited_phase(omega, delta))]))
    m = _HH @ (u @ rho @ u.conj().T) @ _HH
    p = np.clip(np.diag(m).real, 0.0, None)
    keys = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    return {k: float(v) for k, v in zip(keys, p)}


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    # eigenvalues at rounding level are exact zeros of a rank-deficient state
    w = np.where(w > 64 * np.finfo(float).eps * max(w.max(), 1.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def concurrence(rho: PairDensity) -> float:
    """Two-qubit concurrence max(0, l1 - l2 - l3 - l4).

    The l_k are computed as singular values of sqrt(rho) (Y x Y) sqrt(rho)*,
    which avoids taking square roots of near-zero eigenvalues of rho rho~.
    """
    m = rho.m if rho.basis == COMPUTATIONAL else to_computational_basis(rho).m
    s = _psd_sqrt(m)
    lam = np.linalg.svd(s @ _YY @ s.conj(), compute_uv=False)
    c = lam[0] - lam[1] - lam[2] - lam[3]
    return float(min(max(c, 0.0), 1.0))
