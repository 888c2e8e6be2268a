"""Seed derivation and keyed counter-based uniforms.

Every simulated qubit set draws from its own substream keyed by
``(stream_key, set_id)``, and the d-th draw inside that substream is a pure
function of ``(stream_key, set_id, d)``. Results therefore do not depend on
how sets are batched, ordered or spread across workers.
"""
from __future__ import annotations

import numpy as np

import functools

from ._accel import HAVE_NUMBA, njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# spawn-key namespaces for SeedSequence children
PROTOCOL_STREAM = 0
NOISE_STREAM = 1
TRIAL_STREAM = 2


@njit
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def keyed_uniform(key, set_id, draw):
    """Uniform in [0, 1) for draw ``draw`` of substream ``(key, set_id)``."""
    s = _mix64(key ^ _mix64(np.uint64(set_id) + _GOLDEN))
    z = _mix64(s + (np.uint64(draw) + np.uint64(1)) * _GOLDEN)
    return float(z >> _S11) * _INV53


if not HAVE_NUMBA:
    # uint64 wraparound is intended; only the interpreted path warns about it
    _keyed_uniform_py = keyed_uniform

    @functools.wraps(_keyed_uniform_py)
    def keyed_uniform(key, set_id, draw):
        with np.errstate(over="ignore"):
            return _keyed_uniform_py(np.uint64(key), set_id, draw)


def keyed_uniforms(key, set_ids, draw) -> np.ndarray:
    """Vectorized ``keyed_uniform`` over an array of set ids (numpy only)."""
    with np.errstate(over="ignore"):
        ids = np.asarray(set_ids).astype(np.uint64)
        key = np.uint64(key)
        s = _np_mix64(key ^ _np_mix64(ids + _GOLDEN))
        z = _np_mix64(s + (np.uint64(draw) + np.uint64(1)) * _GOLDEN)
    return (z >> _S11).astype(np.float64) * _INV53


def _np_mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def derive_key(seed: int, *path: int) -> int:
    """64-bit child key of ``seed`` along ``path`` (SeedSequence spawn key)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def generator(seed: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))))
