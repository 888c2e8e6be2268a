"""Batch sampler for |+-> measurements on single-excitation states.

``sample_sets`` draws one complete round per qubit set. Both implementations
consume the same keyed uniforms, so they produce identical outcomes.
"""
from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, njit
from .rng import keyed_uniform, keyed_uniforms


@njit(nogil=True)
def _sample_sets_jit(vac, amps, set_ids, omegas, times, order, key, sign, out):
    n_sets = set_ids.shape[0]
    n = order.shape[0]
    shared = amps.shape[0] == 1
    rest = np.empty(n)
    for m in range(n_sets):
        row = 0 if shared else m
        if m == 0 or not shared:
            acc = 0.0
            for idx in range(n - 1, -1, -1):
                rest[idx] = acc
                a = amps[row, order[idx]]
                acc += a.real * a.real + a.imag * a.imag
        v = vac[row]
        c = 1.0
        w = omegas[m]
        for idx in range(n):
            j = order[idx]
            ph = sign * w * times[j]
            a = amps[row, j] * c * complex(np.cos(ph), np.sin(ph))
            r = c * c * rest[idx]
            vp = v + a
            vm = v - a
            wp = vp.real * vp.real + vp.imag * vp.imag + r
            wm = vm.real * vm.real + vm.imag * vm.imag + r
            p_plus = wp / (wp + wm)
            u = keyed_uniform(key, set_ids[m], j)
            if u < p_plus:
                out[m, j] = 1
                nv, wt = vp, wp
            else:
                out[m, j] = -1
                nv, wt = vm, wm
            norm = np.sqrt(wt)
            if norm > 0.0:
                v = nv / norm
                c = c / norm


def _sample_sets_numpy(vac, amps, set_ids, omegas, times, order, key, sign, out):
    n = order.shape[0]
    shared = amps.shape[0] == 1
    w2 = (amps[:, order] * amps[:, order].conj()).real
    rest = np.cumsum(w2[:, ::-1], axis=1)[:, ::-1] - w2  # sum over later qubits
    if shared:
        v = np.full(set_ids.shape[0], vac[0], dtype=complex)
    else:
        v = vac.astype(complex).copy()
    c = np.ones(set_ids.shape[0])
    for idx in range(n):
        j = order[idx]
        ph = sign * omegas * times[j]
        a = amps[:, j] * c * (np.cos(ph) + 1j * np.sin(ph))
        r = c * c * rest[:, idx]
        vp = v + a
        vm = v - a
        wp = vp.real * vp.real + vp.imag * vp.imag + r
        wm = vm.real * vm.real + vm.imag * vm.imag + r
        p_plus = wp / (wp + wm)
        u = keyed_uniforms(key, set_ids, j)
        plus = u < p_plus
        out[:, j] = np.where(plus, 1, -1)
        nv = np.where(plus, vp, vm)
        norm = np.sqrt(np.where(plus, wp, wm))
        ok = norm > 0.0
        safe = np.where(ok, norm, 1.0)
        v = np.where(ok, nv / safe, nv)
        c = np.where(ok, c / safe, c)


def sample_sets(vac, amps, set_ids, omegas, times, order, key, sign, *, use_numba=None):
    """Sample outcomes (+1/-1, int8, shape (len(set_ids), n)) for every set.

    vac: (S,) vacuum amplitudes, amps: (S, n) excitation amplitudes with S == 1
    (shared by all sets) or S == len(set_ids). times: per-qubit standard
    measurement times. order: measurement order (any permutation of range(n)).
    """
    vac = np.ascontiguousarray(vac, dtype=np.complex128)
    amps = np.ascontiguousarray(amps, dtype=np.complex128)
    set_ids = np.ascontiguousarray(set_ids, dtype=np.int64)
    omegas = np.ascontiguousarray(np.broadcast_to(omegas, set_ids.shape), dtype=np.float64)
    times = np.ascontiguousarray(times, dtype=np.float64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    out = np.zeros((set_ids.shape[0], amps.shape[1]), dtype=np.int8)
    if set_ids.shape[0] == 0:
        return out
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but unavailable")
        _sample_sets_jit(vac, amps, set_ids, omegas, times, order, np.uint64(key), float(sign), out)
    else:
        _sample_sets_numpy(vac, amps, set_ids, omegas, times, order, np.uint64(key), float(sign), out)
    return out
