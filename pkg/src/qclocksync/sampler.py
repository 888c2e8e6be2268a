"""Exact sequential |+-> measurement of single-excitation states.

A |+-> measurement of one qubit maps v|0..0> + sum_k a_k |e_k> to a state of
the same form on the remaining qubits, so a round costs O(n) time and memory.
Free evolution is applied lazily: qubit j's amplitude picks up its phase only
when it is measured.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import quantum
from .errors import InvalidStateError, SizeError
from .quantum import SingleExcitationState

MAX_ENUMERATION_QUBITS = 20
_NORM_TOL = 1e-9
_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class MeasurementSchedule:
    """Ordered (qubit, standard time) pairs plus the qubits' angular frequency."""

    entries: tuple[tuple[int, float], ...]
    omega: float = 1.0

    def __post_init__(self):
        entries = tuple((int(q), float(t)) for q, t in self.entries)
        qubits = [q for q, _ in entries]
        if len(set(qubits)) != len(qubits):
            raise InvalidStateError("each qubit must appear exactly once in a schedule")
        if not all(math.isfinite(t) for _, t in entries):
            raise InvalidStateError("schedule times must be finite")
        if not self.omega > 0:
            raise InvalidStateError(f"omega must be positive, got {self.omega!r}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_times(cls, times: Iterable[float], omega: float = 1.0, order: Iterable[int] | None = None):
        times = list(times)
        order = range(len(times)) if order is None else order
        return cls(tuple((q, times[q]) for q in order), omega)

    @property
    def times(self) -> np.ndarray:
        t = np.empty(len(self.entries))
        for q, tq in self.entries:
            t[q] = tq
        return t

    @property
    def order(self) -> list[int]:
        return [q for q, _ in self.entries]

    def covers(self, n: int) -> bool:
        return sorted(self.order) == list(range(n))


@dataclass
class SimState:
    vacuum_amp: complex
    pending: dict[int, complex]
    omega: float
    # lazily applied normalization of every pending amplitude, and the
    # unscaled squared norm of the pending amplitudes
    _scale: float = field(default=1.0, repr=False)
    _pending2: float = field(default=float("nan"), repr=False)

    def __post_init__(self):
        if math.isnan(self._pending2):
            self._pending2 = sum(abs(a) ** 2 for a in self.pending.values())

    @classmethod
    def from_state(cls, state: SingleExcitationState, omega: float) -> SimState:
        return cls(state.vacuum_amp, {k: complex(a) for k, a in enumerate(state.exc_amps)}, omega)

    def amplitude(self, qubit: int) -> complex:
        return self.pending[qubit] * self._scale

    def norm2(self) -> float:
        return abs(self.vacuum_amp) ** 2 + self._scale ** 2 * self._pending2

    def copy(self) -> SimState:
        return SimState(self.vacuum_amp, dict(self.pending), self.omega, self._scale, self._pending2)


RoundOutcome = dict  # qubit index -> +1 / -1


def _collapse(state: SimState, qubit: int, t: float, u: float) -> int:
    # in place; u is a uniform draw in [0, 1)
    raw = state.pending.pop(qubit)
    state._pending2 = max(state._pending2 - abs(raw) ** 2, 0.0)
    a = raw * state._scale * complex(quantum.excited_phase(state.omega, t))
    rest = state._scale ** 2 * state._pending2
    wp = abs(state.vacuum_amp + a) ** 2 + rest
    wm = abs(state.vacuum_amp - a) ** 2 + rest
    p_plus = wp / (wp + wm)
    if -_CLAMP_TOL <= p_plus < 0.0:
        p_plus = 0.0
    s = 1 if u < p_plus else -1
    norm = math.sqrt(wp if s == 1 else wm)
    state.vacuum_amp = state.vacuum_amp + s * a
    if norm > 0.0:
        state.vacuum_amp /= norm
        state._scale /= norm
    if abs(state.norm2() - 1.0) > _NORM_TOL:
        raise InvalidStateError(f"collapse lost normalization: {state.norm2()!r}")
    return s


def measure_qubit(state: SimState, qubit: int, t: float, rng: np.random.Generator) -> tuple[int, SimState]:
    """Measure ``qubit`` in the |+-> basis at standard time ``t``.

    Returns the outcome and the collapsed state over the remaining qubits;
    ``state`` itself is left untouched.
    """
    if qubit not in state.pending:
        raise InvalidStateError(f"qubit {qubit} already measured or unknown")
    new = state.copy()
    s = _collapse(new, qubit, t, rng.random())
    return s, new


def run_round(state: SingleExcitationState, schedule: MeasurementSchedule, rng: np.random.Generator) -> RoundOutcome:
    if not schedule.covers(state.n):
        raise InvalidStateError(f"schedule must cover qubits 0..{state.n - 1} exactly once")
    sim = SimState.from_state(state, schedule.omega)
    return {q: _collapse(sim, q, t, rng.random()) for q, t in schedule.entries}


def outcome_index(outcomes) -> int:
    """Table index of an outcome assignment: bit k set means qubit k gave -1."""
    return sum(1 << k for k, s in enumerate(outcomes) if s == -1)


def joint_distribution(state: SingleExcitationState, schedule: MeasurementSchedule) -> np.ndarray:
    """Exact table of 2**n outcome probabilities by recursive collapse.

    Index bit k = 1 means qubit k was found in |->.
    """
    n = state.n
    if n > MAX_ENUMERATION_QUBITS:
        raise SizeError(f"exact enumeration limited to n <= {MAX_ENUMERATION_QUBITS}, got {n}")
    if not schedule.covers(n):
        raise InvalidStateError(f"schedule must cover qubits 0..{n - 1} exactly once")
    amps = state.exc_amps
    order = schedule.order
    times = schedule.times
    w2 = np.abs(amps[order]) ** 2
    rest_after = np.concatenate([np.cumsum(w2[::-1])[::-1][1:], [0.0]])

    # breadth-first over branches; each branch carries (vacuum amp, scale, prob, index)
    v = np.array([state.vacuum_amp], dtype=complex)
    c = np.ones(1)
    p = np.ones(1)
    idx = np.zeros(1, dtype=np.int64)
    for step, q in enumerate(order):
        a = amps[q] * c * quantum.excited_phase(schedule.omega, times[q])
        r = c * c * rest_after[step]
        wp = np.abs(v + a) ** 2 + r
        wm = np.abs(v - a) ** 2 + r
        tot = wp + wm
        v = np.concatenate([v + a, v - a])
        norm = np.sqrt(np.concatenate([wp, wm]))
        safe = np.where(norm > 0, norm, 1.0)
        v = v / safe
        c = np.concatenate([c, c]) / safe
        p = np.concatenate([p * wp / tot, p * wm / tot])
        idx = np.concatenate([idx, idx | (1 << q)])
    table = np.zeros(1 << n)
    table[idx] = p
    return table
