import datetime
import json
import math
import threading
import time

import numpy as np
import pytest

from qclocksync import estimation, protocol
from qclocksync.config import ExperimentConfig
from qclocksync.errors import BulletinConflictError, ConfigError, InsufficientDataError, QClockError
from qclocksync.estimation import AgreementCounts
from qclocksync.protocol import Bulletin, BulletinRecord, fetch, publish, run_protocol, synchronize

from helpers import binomial_sd


def test_two_parties_zero_offset_always_agree():
    board = run_protocol(ExperimentConfig(n_parties=2, n_sets=1000, offsets=[0.0, 0.0], seed=1))
    np.testing.assert_array_equal(board.table(0).outcomes, board.table(1).outcomes)
    assert len(board) == 2000


def test_zero_sets_gives_empty_bulletin():
    board = run_protocol(ExperimentConfig(n_parties=4, n_sets=0, offsets=[0.0] * 4))
    assert len(board) == 0 and board.parties() == []


def test_invalid_config_rejected():
    with pytest.raises(ConfigError):
        run_protocol(ExperimentConfig(n_parties=1, n_sets=10, offsets=[0.0]))


def test_pair_sees_only_its_own_difference():
    m = 100_000
    board = run_protocol(ExperimentConfig(n_parties=3, n_sets=m, offsets=[0.0, 0.4, 1.1], seed=5))
    c = estimation.tally_agreement(board.table(1), board.table(2))["1.0"]
    p = 0.5 + math.cos(0.7) / 3
    assert abs(c.frequency - p) < 4 * binomial_sd(p, m)


def test_deterministic_given_seed():
    cfg = ExperimentConfig(n_parties=3, n_sets=2000, offsets=[0.0, 0.3, 0.9], seed=77)
    a, b = run_protocol(cfg), run_protocol(cfg)
    assert protocol.bulletin_to_text(a) == protocol.bulletin_to_text(b)
    c = run_protocol(cfg, seed=78)
    assert protocol.bulletin_to_text(a) != protocol.bulletin_to_text(c)


def test_seed_independent_of_backend():
    cfg = ExperimentConfig(n_parties=3, n_sets=3000, offsets=[0.0, 0.3, 0.9], seed=9)
    a = run_protocol(cfg, use_numba=False)
    b = run_protocol(cfg)
    assert protocol.bulletin_to_text(a) == protocol.bulletin_to_text(b)


# --- publish / fetch ------------------------------------------------------------------

def _recs(party, outs, tag="1.0", start=0):
    return [BulletinRecord(start + k, party, o, tag) for k, o in enumerate(outs)]


def test_publish_fetch_round_trip():
    board = Bulletin()
    recs = _recs(0, [1, -1, 1])
    publish(board, list(reversed(recs)))
    assert fetch(board, 0) == recs


def test_fetch_unknown_party_empty():
    assert fetch(Bulletin(), 3) == []


def test_publish_idempotent():
    board = Bulletin()
    publish(board, _recs(0, [1, -1]))
    publish(board, _recs(0, [1, -1]))
    assert len(board) == 2


def test_publish_conflict_rejected():
    board = Bulletin()
    publish(board, _recs(0, [1, -1]))
    with pytest.raises(BulletinConflictError):
        publish(board, _recs(0, [1, 1]))
    assert fetch(board, 0) == _recs(0, [1, -1])
    with pytest.raises(BulletinConflictError):
        publish(Bulletin(), [BulletinRecord(0, 0, 1, "1.0"), BulletinRecord(0, 0, -1, "1.0")])


def test_record_validation():
    with pytest.raises(QClockError):
        BulletinRecord(0, 0, 0, "1.0")
    with pytest.raises(QClockError):
        BulletinRecord(-1, 0, 1, "1.0")


def test_concurrent_disjoint_appends():
    board = Bulletin()
    rng = np.random.default_rng(0)
    outs = rng.choice([-1, 1], size=(8, 4000))

    def work(p):
        for chunk in range(4):
            sl = slice(chunk * 1000, (chunk + 1) * 1000)
            board.publish_columns(p, np.arange(4000)[sl], outs[p, sl], "1.0")

    threads = [threading.Thread(target=work, args=(p,)) for p in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(board) == 32000
    for p in range(8):
        np.testing.assert_array_equal(board.table(p).outcomes, outs[p])


# --- synchronize ----------------------------------------------------------------------

def _inject(monkeypatch, f, tag="1.0"):
    big = 10 ** 15
    monkeypatch.setattr(estimation, "tally_agreement",
                        lambda pub, loc: {tag: AgreementCounts(int(round(f * big)), big, tag)})


def test_synchronize_exact_frequency(monkeypatch):
    _inject(monkeypatch, 0.5 + math.cos(0.7) / 4)
    rep = synchronize([], [], 4)
    assert abs(rep.principal_delta - 0.7) < 1e-9
    assert rep.omega == 1.0


def test_synchronize_perfect_correlation_is_zero(monkeypatch):
    _inject(monkeypatch, 0.5 + 1 / 3)
    rep = synchronize([], [], 3)
    assert rep.principal_delta == pytest.approx(0.0, abs=1e-6)
    assert estimation.NEAR_SINGULAR in rep.flags


def test_synchronize_needs_common_sets():
    with pytest.raises(InsufficientDataError):
        synchronize(_recs(1, [1], start=5), _recs(0, [1]), 2)


def test_synchronize_nonnumeric_tag_needs_omega():
    pub, loc = _recs(0, [1, -1, 1, 1], "fast"), _recs(1, [1, -1, -1, 1], "fast")
    with pytest.raises(QClockError):
        synchronize(loc, pub, 2)
    rep = synchronize(loc, pub, 2, omegas={"fast": 2.0})
    assert rep.omega == 2.0


def test_role_swap_gives_same_estimate():
    board = run_protocol(ExperimentConfig(n_parties=4, n_sets=50_000, offsets=[0.0, 0.6, 0.2, 0.9], seed=11))
    a = protocol.estimate_between(board, 0, 1)
    b = protocol.estimate_between(board, 1, 0)
    assert a.principal_delta == pytest.approx(b.principal_delta, abs=1e-12)
    assert abs(a.principal_delta - 0.6) < 5 * a.std_error


def test_two_receivers_share_one_publisher():
    board = run_protocol(ExperimentConfig(n_parties=3, n_sets=100_000, offsets=[0.0, 0.5, 1.0], seed=12))
    pub = fetch(board, 0)
    for r, true in ((1, 0.5), (2, 1.0)):
        rep = synchronize(fetch(board, r), pub, 3)
        assert abs(rep.principal_delta - true) < 5 * rep.std_error


def test_subgroups_match_full_board():
    board = run_protocol(ExperimentConfig(n_parties=4, n_sets=20_000, offsets=[0.0, 0.5, 0.3, 1.2], seed=13))
    g1, g2 = board.restricted([0, 1]), board.restricted([2, 3])
    assert protocol.estimate_between(g1, 0, 1, n=4).to_dict() == protocol.estimate_between(board, 0, 1).to_dict()
    assert protocol.estimate_between(g2, 2, 3, n=4).to_dict() == protocol.estimate_between(board, 2, 3).to_dict()


def test_estimate_never_reads_wall_clock(monkeypatch):
    board = run_protocol(ExperimentConfig(n_parties=2, n_sets=5000, offsets=[0.0, 0.8], seed=2))
    text = protocol.bulletin_to_text(board)

    def boom(*a, **k):
        raise AssertionError("wall clock read")

    class NoClock(datetime.datetime):
        now = utcnow = today = classmethod(boom)

    for name in ("time", "time_ns", "monotonic", "monotonic_ns", "perf_counter", "perf_counter_ns"):
        monkeypatch.setattr(time, name, boom)
    monkeypatch.setattr(datetime, "datetime", NoClock)
    b = protocol.parse_bulletin(text.splitlines())
    rep = protocol.estimate_between(b, 0, 1)
    assert math.isfinite(rep.principal_delta)


def test_records_carry_no_time_field():
    board = run_protocol(ExperimentConfig(n_parties=2, n_sets=3, offsets=[0.0, 0.8]))
    for line in protocol.bulletin_to_text(board).splitlines():
        assert set(json.loads(line)) == {"set", "party", "outcome", "freq"}


# --- file formats ---------------------------------------------------------------------

def test_bulletin_file_round_trip(tmp_path):
    cfg = ExperimentConfig(n_parties=3, n_sets=500, omega2=0.7, offsets=[0.0, 0.4, 2.0], seed=4)
    board = run_protocol(cfg)
    p1, p2 = tmp_path / "a.ndjson", tmp_path / "b.ndjson"
    protocol.write_bulletin(board, p1)
    back = protocol.read_bulletin(p1)
    assert back.records() == board.records()
    protocol.write_bulletin(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_bulletin_export_sorted_by_set_then_party():
    board = Bulletin()
    publish(board, [BulletinRecord(1, 1, 1, "1.0"), BulletinRecord(0, 1, -1, "1.0"), BulletinRecord(1, 0, 1, "1.0")])
    lines = protocol.bulletin_to_text(board).splitlines()
    assert [(json.loads(x)["set"], json.loads(x)["party"]) for x in lines] == [(0, 1), (1, 0), (1, 1)]
    assert lines[0] == '{"set": 0, "party": 1, "outcome": -1, "freq": "1.0"}'


@pytest.mark.parametrize("line", [
    "not json",
    '{"set": 0, "party": 0, "outcome": 2, "freq": "1.0"}',
    '{"set": 0, "party": 0, "outcome": 1}',
    '{"set": "0", "party": 0, "outcome": 1, "freq": "1.0"}',
    '{"set": 0, "party": 0, "outcome": true, "freq": "1.0"}',
])
def test_parse_bulletin_rejects_malformed(line):
    with pytest.raises(QClockError):
        protocol.parse_bulletin([line])


def test_report_export(tmp_path):
    board = run_protocol(ExperimentConfig(n_parties=2, n_sets=1000, offsets=[0.0, 0.8], seed=3))
    rep = protocol.estimate_between(board, 0, 1)
    path = tmp_path / "r.json"
    protocol.write_report(rep, path)
    d = json.loads(path.read_text())
    assert {"c_hat", "delta_candidates", "principal_delta", "std_error", "n_sets_used", "flags"} <= set(d)
    assert d["n_sets_used"] == 1000
    assert d["principal_delta"] == rep.principal_delta


def test_two_frequency_synchronize():
    cfg = ExperimentConfig(n_parties=2, n_sets=200_000, omega=1.0, omega2=0.7, offsets=[0.0, 4.0], seed=21)
    rep = protocol.estimate_between(run_protocol(cfg), 0, 1)
    assert estimation.RESOLVED in rep.flags
    assert abs(rep.resolved_delta - 4.0) < 0.05
    assert {c.freq_tag for c in rep.components} == {"1.0", "0.7"}
