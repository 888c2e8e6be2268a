"""Offset estimation from publisher/receiver outcome agreement.

For the n-party W state, a publisher/receiver pair agrees with probability
1/2 + cos(omega * delta) / n, whatever the publisher's outcome. The estimator
pools both publisher outcomes, inverts that law for cos(omega * delta), and
reports every offset magnitude consistent with it inside a search window.
The sign of delta is not identifiable from agreement statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, QClockError

CLAMPED = "clamped"
NEAR_SINGULAR = "near_singular"
INSUFFICIENT_DATA = "insufficient_data"
RESOLVED = "two_frequency_resolved"
AMBIGUOUS = "ambiguous"
INCONSISTENT = "inconsistent"

SINGULAR_SIN = 1e-6
_DEDUP_TOL = 1e-12


@dataclass(frozen=True)
class AgreementCounts:
    n_agree: int
    n_total: int
    freq_tag: str = ""

    def __post_init__(self):
        if not 0 <= self.n_agree <= self.n_total:
            raise QClockError(f"need 0 <= n_agree <= n_total, got {self.n_agree}/{self.n_total}")

    @property
    def frequency(self) -> float:
        return self.n_agree / self.n_total if self.n_total else math.nan


@dataclass
class EstimateReport:
    c_hat: float
    principal_delta: float
    delta_candidates: list[float]
    std_error: float
    n_sets_used: int
    flags: list[str] = field(default_factory=list)
    c_hat_raw: float = math.nan
    omega: float = math.nan
    freq_tag: str = ""
    resolved_delta: float = math.nan
    components: tuple = ()

    def to_dict(self) -> dict:
        """Export object; an unbounded std_error is written as null and flagged."""
        return {
            "c_hat": _num(self.c_hat),
            "delta_candidates": [_num(x) for x in self.delta_candidates],
            "principal_delta": _num(self.principal_delta),
            "std_error": _num(self.std_error),
            "n_sets_used": int(self.n_sets_used),
            "flags": sorted(set(self.flags)),
        }


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _as_columns(records):
    """(set_ids, outcomes, freq_tags) arrays from a record table or a record list."""
    if hasattr(records, "set_ids"):
        return np.asarray(records.set_ids), np.asarray(records.outcomes), np.asarray(records.freq_tags)
    records = list(records)
    return (
        np.array([r.set_id for r in records], dtype=np.int64),
        np.array([r.outcome for r in records], dtype=np.int8),
        np.array([r.freq_tag for r in records], dtype=object),
    )


def tally_agreement(published, local) -> dict[str, AgreementCounts]:
    """Agreement counts over the sets both sides recorded, one entry per frequency tag."""
    p_ids, p_out, p_tag = _as_columns(published)
    l_ids, l_out, l_tag = _as_columns(local)
    if p_ids.shape == l_ids.shape and np.array_equal(p_ids, l_ids):
        pi = li = slice(None)
    else:
        _, pi, li = np.intersect1d(p_ids, l_ids, assume_unique=True, return_indices=True)
    tags = p_tag[pi]
    if tags.size == 0:
        raise InsufficientDataError("publisher and receiver share no qubit sets")
    if np.any(tags != l_tag[li]):
        raise QClockError("frequency tags disagree between publisher and receiver records")
    agree = p_out[pi] == l_out[li]
    uniq, inv = np.unique(tags.astype(str), return_inverse=True)
    totals = np.bincount(inv, minlength=uniq.size)
    hits = np.bincount(inv, weights=agree, minlength=uniq.size)
    out = {}
    for k, tag in enumerate(uniq.tolist()):
        out[tag] = AgreementCounts(int(round(hits[k])), int(totals[k]), tag)
    return out


def estimate_cos(counts: AgreementCounts, n: int) -> tuple[float, bool, float]:
    """Estimate cos(omega * delta) as n * (f_agree - 1/2).

    Returns (clamped estimate, clamped flag, raw estimate).
    """
    if counts.n_total == 0:
        raise InsufficientDataError("no agreement data")
    raw = n * (counts.n_agree / counts.n_total - 0.5)
    c = min(max(raw, -1.0), 1.0)
    return c, c != raw, raw


def invert_to_offset(c_hat: float, omega: float, window: tuple[float, float]) -> tuple[float, list[float]]:
    """Principal offset arccos(c)/omega and all magnitudes +-principal + 2 pi k / omega in ``window``."""
    if not -1.0 <= c_hat <= 1.0:
        raise QClockError(f"c_hat must lie in [-1, 1], got {c_hat!r}")
    if not omega > 0:
        raise QClockError(f"omega must be positive, got {omega!r}")
    lo, hi = window
    principal = math.acos(c_hat) / omega
    period = 2.0 * math.pi / omega
    lo_mag = max(lo, 0.0)
    cands = []
    k_max = int(math.ceil(hi / period)) + 1
    for k in range(0, k_max + 1):
        for x in (principal + k * period, -principal + k * period):
            if lo_mag <= x < hi and not any(abs(x - y) <= _DEDUP_TOL * max(1.0, period) for y in cands):
                cands.append(x)
    return principal, sorted(cands)


def predicted_std_error(n: int, m: int, omega: float, delta_hat: float) -> tuple[float, bool]:
    """Delta-method standard error of the offset estimate; (inf, True) when near-singular."""
    if m < 1:
        raise InsufficientDataError("need at least one set")
    s = abs(math.sin(omega * delta_hat))
    if s < SINGULAR_SIN:
        return math.inf, True
    p = 0.5 + math.cos(omega * delta_hat) / n
    p = min(max(p, 0.0), 1.0)
    return n * math.sqrt(p * (1.0 - p) / m) / (omega * s), False


def estimate_offset(counts: AgreementCounts, n: int, omega: float, window: tuple[float, float] | None = None) -> EstimateReport:
    if window is None:
        window = (0.0, 2.0 * math.pi / omega)
    if counts.n_total == 0:
        return EstimateReport(math.nan, math.nan, [], math.inf, 0, [INSUFFICIENT_DATA], math.nan, omega, counts.freq_tag)
    c, clamped, raw = estimate_cos(counts, n)
    principal, cands = invert_to_offset(c, omega, window)
    se, singular = predicted_std_error(n, counts.n_total, omega, principal)
    flags = []
    if clamped:
        flags.append(CLAMPED)
    if singular:
        flags.append(NEAR_SINGULAR)
    return EstimateReport(c, principal, cands, se, counts.n_total, flags, raw, omega, counts.freq_tag)


@dataclass
class Resolution:
    value: float
    survivors: list[float]
    flags: list[str]

    @property
    def unique(self) -> bool:
        return RESOLVED in self.flags


def two_frequency_resolve(report_1: EstimateReport, report_2: EstimateReport, omega_1: float, omega_2: float,
                          window: tuple[float, float], tol: float | None = None) -> Resolution:
    """Intersect the offset candidates seen at two frequencies."""
    if omega_1 == omega_2:
        raise QClockError("two-frequency resolution needs distinct frequencies")
    if INSUFFICIENT_DATA in report_1.flags or INSUFFICIENT_DATA in report_2.flags:
        return Resolution(math.nan, [], [INSUFFICIENT_DATA])
    lo, hi = window
    c1 = invert_to_offset(report_1.c_hat, omega_1, window)[1]
    c2 = invert_to_offset(report_2.c_hat, omega_2, window)[1]
    s1, s2 = report_1.std_error, report_2.std_error
    if tol is None:
        tol = default_tolerance(s1, s2, omega_1, omega_2)
    survivors = []
    for x in c1:
        near = [y for y in c2 if abs(x - y) <= tol]
        if near:
            y = min(near, key=lambda y: abs(x - y))
            survivors.append(_combine(x, y, s1, s2))
    if not survivors:
        return Resolution(math.nan, [], [INCONSISTENT])
    if len(survivors) == 1:
        return Resolution(survivors[0], survivors, [RESOLVED])
    return Resolution(math.nan, survivors, [AMBIGUOUS])


def default_tolerance(s1: float, s2: float, omega_1: float, omega_2: float) -> float:
    cap = math.pi / (4.0 * max(omega_1, omega_2))
    tol = 4.0 * math.hypot(s1, s2)
    return min(tol, cap) if math.isfinite(tol) else cap


def _combine(x, y, s1, s2):
    if math.isfinite(s1) and math.isfinite(s2) and s1 > 0 and s2 > 0:
        w1, w2 = 1.0 / s1 ** 2, 1.0 / s2 ** 2
        return (w1 * x + w2 * y) / (w1 + w2)
    if math.isfinite(s1) and not math.isfinite(s2):
        return x
    if math.isfinite(s2) and not math.isfinite(s1):
        return y
    return 0.5 * (x + y)
