"""Parties, the public bulletin board, and the publish / fetch / synchronize steps.

Every party measures its qubit of every set in the |+-> basis at its own local
time zero, which is standard time ``offset``. Outcomes go on an append-only
bulletin keyed by (set, party). Any party can later act as the standard: a
receiver only needs the standard-holder's records and its own.

Records carry no timestamps and nothing here reads a clock.
"""
from __future__ import annotations

import io
import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from . import estimation, rng as rngmod
from ._kernels import sample_sets
from .config import ExperimentConfig, apply_noise
from .errors import BulletinConflictError, InsufficientDataError, QClockError
from .estimation import EstimateReport
from .quantum import EVOLUTION_SIGN


@dataclass(frozen=True)
class Party:
    id: int
    clock_offset: float = 0.0


@dataclass(frozen=True)
class QubitSet:
    set_id: int
    freq_tag: str
    phases: tuple[float, ...] = ()


@dataclass(frozen=True)
class BulletinRecord:
    set_id: int
    party_id: int
    outcome: int
    freq_tag: str

    def __post_init__(self):
        if self.outcome not in (1, -1):
            raise QClockError(f"outcome must be +1 or -1, got {self.outcome!r}")
        if self.set_id < 0 or self.party_id < 0:
            raise QClockError("set and party ids must be non-negative")


class RecordTable(NamedTuple):
    set_ids: np.ndarray
    outcomes: np.ndarray
    freq_tags: np.ndarray

    def __len__(self):
        return len(self.set_ids)

    def records(self, party_id: int) -> list[BulletinRecord]:
        return [BulletinRecord(int(s), party_id, int(o), str(f))
                for s, o, f in zip(self.set_ids, self.outcomes, self.freq_tags)]

    def subset(self, mask) -> RecordTable:
        return RecordTable(self.set_ids[mask], self.outcomes[mask], self.freq_tags[mask])


def freq_tag(omega: float) -> str:
    """Canonical tag for a qubit frequency; parses back with ``float``."""
    return repr(float(omega))


def _empty_table() -> RecordTable:
    return RecordTable(np.zeros(0, np.int64), np.zeros(0, np.int8), np.zeros(0, dtype="<U1"))


class Bulletin:
    """Append-only board of measurement outcomes, one per (set, party).

    Republishing an identical record is a no-op; a conflicting one raises
    ``BulletinConflictError``. Appends and reads are safe from multiple threads.
    """

    def __init__(self):
        self._tables: dict[int, RecordTable] = {}
        self._lock = threading.Lock()

    def publish_columns(self, party_id: int, set_ids, outcomes, freq_tags) -> int:
        """Bulk publish for one party; returns the number of new records."""
        set_ids = np.asarray(set_ids, dtype=np.int64)
        outcomes = np.asarray(outcomes, dtype=np.int8)
        freq_tags = np.broadcast_to(np.asarray(freq_tags, dtype=str), set_ids.shape)
        if party_id < 0:
            raise QClockError("party ids must be non-negative")
        if set_ids.size and set_ids.min() < 0:
            raise QClockError("set ids must be non-negative")
        if not np.all((outcomes == 1) | (outcomes == -1)):
            raise QClockError("outcomes must be +1 or -1")
        order = np.argsort(set_ids, kind="stable")
        set_ids, outcomes, freq_tags = set_ids[order], outcomes[order], freq_tags[order]
        dup = np.flatnonzero(np.diff(set_ids) == 0)
        if dup.size:
            a, b = dup, dup + 1
            if np.any(outcomes[a] != outcomes[b]) or np.any(freq_tags[a] != freq_tags[b]):
                raise BulletinConflictError(f"conflicting records for party {party_id} within one publish")
            keep = np.ones(set_ids.size, bool)
            keep[b] = False
            set_ids, outcomes, freq_tags = set_ids[keep], outcomes[keep], freq_tags[keep]
        with self._lock:
            old = self._tables.get(party_id)
            if old is None or len(old) == 0:
                self._tables[party_id] = RecordTable(set_ids, outcomes, freq_tags.copy())
                return int(set_ids.size)
            _, oi, ni = np.intersect1d(old.set_ids, set_ids, assume_unique=True, return_indices=True)
            if oi.size:
                if np.any(old.outcomes[oi] != outcomes[ni]) or np.any(old.freq_tags[oi] != freq_tags[ni]):
                    bad = int(old.set_ids[oi][np.flatnonzero((old.outcomes[oi] != outcomes[ni]) | (old.freq_tags[oi] != freq_tags[ni]))[0]])
                    raise BulletinConflictError(f"conflicting record for set {bad}, party {party_id}")
                fresh = np.ones(set_ids.size, bool)
                fresh[ni] = False
                set_ids, outcomes, freq_tags = set_ids[fresh], outcomes[fresh], freq_tags[fresh]
            ids = np.concatenate([old.set_ids, set_ids])
            order = np.argsort(ids, kind="stable")
            self._tables[party_id] = RecordTable(
                ids[order],
                np.concatenate([old.outcomes, outcomes])[order],
                np.concatenate([old.freq_tags, freq_tags])[order],
            )
            return int(set_ids.size)

    def table(self, party_id: int) -> RecordTable:
        with self._lock:
            t = self._tables.get(party_id)
        return _empty_table() if t is None else t

    def parties(self) -> list[int]:
        with self._lock:
            return sorted(p for p, t in self._tables.items() if len(t))

    def __len__(self):
        with self._lock:
            return sum(len(t) for t in self._tables.values())

    def records(self) -> list[BulletinRecord]:
        """All records sorted by (set, party)."""
        out = []
        for p in self.parties():
            out.extend(self.table(p).records(p))
        out.sort(key=lambda r: (r.set_id, r.party_id))
        return out

    def restricted(self, parties: Iterable[int]) -> Bulletin:
        b = Bulletin()
        for p in parties:
            t = self.table(p)
            if len(t):
                b.publish_columns(p, *t)
        return b


def publish(board: Bulletin, records: Iterable[BulletinRecord]) -> None:
    by_party: dict[int, list[BulletinRecord]] = {}
    for r in records:
        by_party.setdefault(r.party_id, []).append(r)
    for p, recs in by_party.items():
        board.publish_columns(p, [r.set_id for r in recs], [r.outcome for r in recs], [r.freq_tag for r in recs])


def fetch(board: Bulletin, party_id: int) -> list[BulletinRecord]:
    return board.table(party_id).records(party_id)


def parties_from_config(config: ExperimentConfig) -> list[Party]:
    return [Party(i, float(x)) for i, x in enumerate(config.offsets)]


def set_frequencies(config: ExperimentConfig) -> np.ndarray:
    """Angular frequency of each set: the first round(freq_split * M) sets use ``omega``."""
    m = config.n_sets
    omegas = np.full(m, float(config.omega))
    if config.omega2 is not None:
        omegas[int(round(config.freq_split * m)):] = float(config.omega2)
    return omegas


def run_protocol(config: ExperimentConfig, seed: int | None = None, *, use_numba: bool | None = None) -> Bulletin:
    """Simulate every set and put every party's outcomes on a fresh bulletin."""
    config.validate()
    seed = config.seed if seed is None else seed
    board = Bulletin()
    n, m = config.n_parties, config.n_sets
    if m == 0:
        return board
    ensemble = apply_noise(config.replace(seed=seed))
    omegas = set_frequencies(config)
    times = np.asarray(config.offsets, dtype=float)
    order = np.argsort(times, kind="stable")
    key = rngmod.derive_key(seed, rngmod.PROTOCOL_STREAM)
    set_ids = np.arange(m, dtype=np.int64)
    out = sample_sets(ensemble.vacuum, ensemble.amps, set_ids, omegas, times, order, key, EVOLUTION_SIGN,
                      use_numba=use_numba)
    tag_of = {w: freq_tag(w) for w in config.omegas}
    tags = np.array([tag_of[w] for w in config.omegas])
    codes = np.zeros(m, dtype=np.int64) if config.omega2 is None else (omegas == config.omega2).astype(np.int64)
    set_tags = tags[codes]
    for p in range(n):
        board.publish_columns(p, set_ids, out[:, p], set_tags)
    return board


def _omega_of(tag: str, omegas: dict | None) -> float:
    if omegas and tag in omegas:
        return float(omegas[tag])
    try:
        w = float(tag)
    except ValueError:
        raise QClockError(f"frequency tag {tag!r} is not numeric; pass its omega explicitly") from None
    if not (math.isfinite(w) and w > 0):
        raise QClockError(f"frequency tag {tag!r} is not a positive frequency")
    return w


def synchronize(local, published, n: int, omegas: dict[str, float] | None = None,
                window: tuple[float, float] | None = None, tol: float | None = None) -> EstimateReport:
    """Estimate the receiver's offset magnitude from its own and the publisher's records.

    With one frequency tag the report is the plain inversion. With two, each
    frequency is inverted separately and the candidate sets are intersected;
    ``delta_candidates`` then holds the survivors and the flags say whether the
    result is unique.
    """
    counts = estimation.tally_agreement(published, local)
    tags = list(counts)
    w = {t: _omega_of(t, omegas) for t in tags}
    if window is None:
        window = (0.0, 2.0 * math.pi / min(w.values()))
    if len(tags) == 1:
        return estimation.estimate_offset(counts[tags[0]], n, w[tags[0]], window)
    if len(tags) != 2:
        raise QClockError(f"at most two frequencies supported, got tags {tags}")
    t1, t2 = sorted(tags, key=lambda t: -w[t])
    r1 = estimation.estimate_offset(counts[t1], n, w[t1], window)
    r2 = estimation.estimate_offset(counts[t2], n, w[t2], window)
    res = estimation.two_frequency_resolve(r1, r2, w[t1], w[t2], window, tol)
    return EstimateReport(
        r1.c_hat, r1.principal_delta, res.survivors, r1.std_error,
        r1.n_sets_used + r2.n_sets_used, sorted(set(r1.flags) | set(res.flags)),
        r1.c_hat_raw, r1.omega, r1.freq_tag, res.value, (r1, r2),
    )


def estimate_between(board: Bulletin, publisher: int, receiver: int, n: int | None = None, **kw) -> EstimateReport:
    """``synchronize`` for one (publisher, receiver) pair read off a bulletin."""
    n = len(board.parties()) if n is None else n
    if n < 2:
        raise InsufficientDataError("need records from at least two parties")
    return synchronize(board.table(receiver), board.table(publisher), n, **kw)


# ---- file formats ------------------------------------------------------------------

def dump_bulletin(board: Bulletin, fh) -> None:
    """Newline-delimited records sorted by (set, party)."""
    ids, parties, outs, tags = [], [], [], []
    for p in board.parties():
        t = board.table(p)
        ids.append(t.set_ids)
        parties.append(np.full(len(t), p, dtype=np.int64))
        outs.append(t.outcomes)
        tags.append(t.freq_tags)
    if not ids:
        return
    ids, parties, outs, tags = map(np.concatenate, (ids, parties, outs, tags))
    order = np.lexsort((parties, ids))
    enc = {t: json.dumps(str(t), ensure_ascii=False) for t in np.unique(tags)}
    write = fh.write
    for k in order:
        write(f'{{"set": {ids[k]}, "party": {parties[k]}, "outcome": {outs[k]}, "freq": {enc[tags[k]]}}}\n')


def write_bulletin(board: Bulletin, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        dump_bulletin(board, fh)


def bulletin_to_text(board: Bulletin) -> str:
    buf = io.StringIO()
    dump_bulletin(board, buf)
    return buf.getvalue()


def parse_bulletin(lines: Iterable[str]) -> Bulletin:
    cols: dict[int, tuple[list, list, list]] = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise QClockError(f"bulletin line {lineno}: {e}") from None
        if not isinstance(obj, dict) or set(obj) != {"set", "party", "outcome", "freq"}:
            raise QClockError(f"bulletin line {lineno}: expected keys set, party, outcome, freq")
        s, p, o, f = obj["set"], obj["party"], obj["outcome"], obj["freq"]
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (s, p, o)) or not isinstance(f, str):
            raise QClockError(f"bulletin line {lineno}: bad field types")
        if s < 0 or p < 0 or o not in (1, -1):
            raise QClockError(f"bulletin line {lineno}: bad field values")
        c = cols.setdefault(p, ([], [], []))
        c[0].append(s)
        c[1].append(o)
        c[2].append(f)
    board = Bulletin()
    for p in sorted(cols):
        board.publish_columns(p, *cols[p])
    return board


def read_bulletin(path) -> Bulletin:
    with open(path, encoding="utf-8") as fh:
        return parse_bulletin(fh)


def report_to_json(report: EstimateReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def write_report(report: EstimateReport, path) -> None:
    Path(path).write_text(report_to_json(report), encoding="utf-8")
