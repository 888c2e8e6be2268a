"""Experiment driver: single runs, Monte Carlo sweeps and the self-check suite."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimation, oracle, quantum, rng as rngmod, sampler
from .config import NOISE_MODEL_NOTE, ExperimentConfig, SweepSpec, apply_noise
from .errors import ConfigError, InsufficientDataError
from .protocol import Bulletin, run_protocol, synchronize

__all__ = [
    "apply_noise", "simulate", "run_experiment", "run_sweep", "summarize_sweep", "validate",
    "EXPERIMENT_COLUMNS", "SWEEP_COLUMNS", "SUMMARY_COLUMNS", "metadata",
]

EXPERIMENT_COLUMNS = [
    "receiver", "publisher", "true_delta", "abs_true_delta", "delta_hat", "principal_delta",
    "delta_candidates", "c_hat", "c_hat_raw", "std_error", "n_sets_used", "flags",
]
SWEEP_COLUMNS = [
    "axis", "value", "trial", "n_parties", "n_sets", "omega", "true_delta", "delta_hat",
    "error", "c_hat", "std_error", "predicted_se", "flags",
]
SUMMARY_COLUMNS = ["axis", "value", "trials", "rmse", "bias", "predicted_se", "rmse_over_predicted", "n_flagged"]


def _receiver_row(board: Bulletin, config: ExperimentConfig, receiver: int) -> dict:
    p = config.publisher
    true = float(config.offsets[receiver] - config.offsets[p])
    row = {"receiver": receiver, "publisher": p, "true_delta": true, "abs_true_delta": abs(true)}
    try:
        rep = synchronize(board.table(receiver), board.table(p), config.n_parties,
                          window=config.inversion_window)
    except InsufficientDataError:
        row.update(delta_hat=math.nan, principal_delta=math.nan, delta_candidates=[], c_hat=math.nan,
                   c_hat_raw=math.nan, std_error=math.nan, n_sets_used=0, flags=[estimation.INSUFFICIENT_DATA])
        return row
    two = len(rep.components) == 2
    row.update(
        delta_hat=rep.resolved_delta if two else rep.principal_delta,
        principal_delta=rep.principal_delta,
        delta_candidates=list(rep.delta_candidates),
        c_hat=rep.c_hat,
        c_hat_raw=rep.c_hat_raw,
        std_error=rep.std_error,
        n_sets_used=rep.n_sets_used,
        flags=sorted(set(rep.flags)),
    )
    return row


def simulate(config: ExperimentConfig, *, use_numba: bool | None = None) -> tuple[list[dict], Bulletin]:
    config.validate()
    board = run_protocol(config, use_numba=use_numba)
    rows = [_receiver_row(board, config, r) for r in range(config.n_parties) if r != config.publisher]
    return rows, board


def run_experiment(config: ExperimentConfig, *, use_numba: bool | None = None) -> list[dict]:
    """One protocol run; a row per receiver, estimated against ``config.publisher``."""
    return simulate(config, use_numba=use_numba)[0]


def metadata(config: ExperimentConfig, **extra) -> dict:
    return {"config": config.to_dict(), "noise_model": NOISE_MODEL_NOTE, **extra}


def _sweep_receiver(config: ExperimentConfig) -> int:
    return 1 if config.publisher == 0 else 0


def _point_config(spec: SweepSpec, base: ExperimentConfig, value) -> ExperimentConfig:
    r, p = _sweep_receiver(base), base.publisher
    if spec.axis == "n":
        n = int(value)
        if n < 2:
            raise ConfigError(f"values: n must be >= 2, got {value!r}")
        offsets = [0.0] * n
        misalign = [0.0] * n
        # keep the tracked pair's timing and basis as configured
        for k in {p, r}:
            if k < n:
                offsets[k] = base.offsets[k]
                misalign[k] = base.basis_misalign[k]
        return base.replace(n_parties=n, offsets=offsets, basis_misalign=misalign)
    if spec.axis == "M":
        return base.replace(n_sets=int(value))
    if spec.axis == "delta":
        offsets = list(base.offsets)
        offsets[r] = offsets[p] + float(value)
        return base.replace(offsets=offsets)
    return base.replace(phase_noise_scale=float(value))


def _sweep_trial(spec: SweepSpec, cfg: ExperimentConfig, point: int, value, trial: int, use_numba) -> dict:
    seed = rngmod.derive_key(cfg.seed, rngmod.TRIAL_STREAM, point, trial)
    tcfg = cfg.replace(seed=seed)
    board = run_protocol(tcfg, use_numba=use_numba)
    r = _sweep_receiver(cfg)
    row = _receiver_row(board, tcfg, r)
    true = row["abs_true_delta"]
    if row["n_sets_used"]:
        pred, _ = estimation.predicted_std_error(cfg.n_parties, row["n_sets_used"], cfg.omega, true)
    else:
        pred = math.inf
    return {
        "axis": spec.axis, "value": value, "trial": trial, "n_parties": cfg.n_parties,
        "n_sets": cfg.n_sets, "omega": cfg.omega, "true_delta": row["true_delta"],
        "delta_hat": row["delta_hat"], "error": row["delta_hat"] - true, "c_hat": row["c_hat"],
        "std_error": row["std_error"], "predicted_se": pred, "flags": row["flags"],
    }


def run_sweep(spec: SweepSpec, base: ExperimentConfig, *, workers: int = 1, use_numba: bool | None = None) -> list[dict]:
    """Monte Carlo over one axis; rows ordered by (value, trial) whatever the worker count."""
    base.validate()
    configs = [_point_config(spec, base, v).validate() for v in spec.values]
    tasks = [(k, v, t) for k, v in enumerate(spec.values) for t in range(spec.trials)]

    def one(task):
        k, v, t = task
        return _sweep_trial(spec, configs[k], k, v, t, use_numba)

    if workers <= 1:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, tasks))


def summarize_sweep(rows: list[dict]) -> list[dict]:
    out = []
    keys = []
    for r in rows:
        if (r["axis"], r["value"]) not in keys:
            keys.append((r["axis"], r["value"]))
    for axis, value in keys:
        sel = [r for r in rows if r["axis"] == axis and r["value"] == value]
        err = np.array([r["error"] for r in sel], dtype=float)
        ok = np.isfinite(err)
        rmse = float(np.sqrt(np.mean(err[ok] ** 2))) if ok.any() else math.nan
        bias = float(np.mean(err[ok])) if ok.any() else math.nan
        pred = float(np.mean([r["predicted_se"] for r in sel]))
        out.append({
            "axis": axis, "value": value, "trials": len(sel), "rmse": rmse, "bias": bias,
            "predicted_se": pred, "rmse_over_predicted": rmse / pred if pred and math.isfinite(pred) else math.nan,
            "n_flagged": sum(1 for r in sel if r["flags"]),
        })
    return out


# ---- self-check suite -------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    observed: float
    expected: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: observed={self.observed:.3g} expected<={self.expected:.3g} {self.detail}".rstrip()


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def w_pair_computational(n: int) -> np.ndarray:
    return np.array([[n - 2, 0, 0, 0], [0, 1, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0]], dtype=float) / n


def w_pair_measurement(n: int) -> np.ndarray:
    a, b, c = n + 2, n - 2, n - 6
    return np.array([[a, b, b, c], [b, b, b, b], [b, b, b, b], [c, b, b, a]], dtype=float) / (4 * n)


def w_conditional(n: int) -> np.ndarray:
    return np.array([[n + 2, n - 2], [n - 2, n - 2]], dtype=float) / (2 * n)


def w_conditional_evolved(n: int, wt: float) -> np.ndarray:
    c, s = math.cos(wt), math.sin(wt)
    return np.array([[n + 2 * c, n - 2 + 2j * s], [n - 2 - 2j * s, n - 2 * c]]) / (2 * n)


def _err(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def validate(seed: int = 2024, n_random: int = 50) -> ValidationReport:
    """Closed-form matrix identities plus analytic-vs-brute-force comparisons."""
    rep = ValidationReport()
    add = rep.checks.append
    tol = 1e-12
    for n in (2, 3, 4, 6, 10):
        s = quantum.w_state(n)
        pc = quantum.pair_density_computational(s, 0, 1)
        e = _err(pc.m, w_pair_computational(n))
        add(Check(f"pair density, computational basis, n={n}", e < tol, e, tol))
        pm = quantum.to_measurement_basis(pc)
        e = _err(pm.m, w_pair_measurement(n))
        add(Check(f"pair density, measurement basis, n={n}", e < tol, e, tol))
        prob, cond = quantum.conditional_receiver_state(pm, 1)
        e = max(_err(cond.m, w_conditional(n)), abs(prob - 0.5))
        add(Check(f"conditional receiver state, n={n}", e < tol, e, tol))
        for wt in (0.0, math.pi / 4, math.pi / 2, math.pi, 3 * math.pi / 2):
            ev = quantum.evolve_qubit(cond, wt, 1.0)
            e = _err(ev.m, w_conditional_evolved(n, wt))
            add(Check(f"evolved receiver state, n={n}, wt={wt:.4f}", e < tol, e, tol))
            pp, pm_ = quantum.outcome_probabilities(n, wt, 1.0, 1)
            e = max(abs(pp - ev.m[0, 0].real), abs(pm_ - ev.m[1, 1].real))
            add(Check(f"outcome probabilities, n={n}, wt={wt:.4f}", e < tol, e, tol))
    worst = max(abs(quantum.concurrence(quantum.pair_density_computational(quantum.w_state(n), 0, n - 1)) - 2 / n)
                for n in range(2, 65))
    add(Check("W-state pair concurrence = 2/n, n=2..64", worst < tol, worst, tol))

    rng = np.random.default_rng(seed)
    worst_joint = worst_pair = worst_corr = 0.0
    for case in range(n_random):
        n = int(rng.integers(2, 11))
        vac = 0.0 if case % 2 else complex(rng.normal(), rng.normal())
        state = quantum.generalized_state(vac, rng.normal(size=n) + 1j * rng.normal(size=n))
        omega = float(rng.uniform(0.2, 3.0))
        sched = sampler.MeasurementSchedule.from_times(rng.uniform(-5, 5, size=n), omega, rng.permutation(n))
        dense = oracle.embed(state)
        worst_joint = max(worst_joint, _err(sampler.joint_distribution(state, sched),
                                            oracle.brute_joint_distribution(dense, sched)))
        i, j = rng.choice(n, size=2, replace=False)
        worst_pair = max(worst_pair, _err(quantum.pair_density_computational(state, i, j).m,
                                          oracle.brute_pair_density(dense, i, j).m))
        delta = float(rng.uniform(-4, 4))
        times = np.zeros(n)
        times[j] = delta
        table = oracle.brute_joint_distribution(dense, sampler.MeasurementSchedule.from_times(times, omega))
        corr = quantum.pair_correlation(state, int(i), int(j), delta, omega)
        for (si, sj), p in corr.items():
            idx = np.arange(table.size)
            mask = (((idx >> i) & 1) == (si == -1)) & (((idx >> j) & 1) == (sj == -1))
            worst_corr = max(worst_corr, abs(p - table[mask].sum()))
    add(Check(f"recursive-collapse vs dense joint distribution ({n_random} cases, n<=10)", worst_joint < 1e-10, worst_joint, 1e-10))
    add(Check(f"analytic vs dense pair density ({n_random} cases)", worst_pair < 1e-10, worst_pair, 1e-10))
    add(Check(f"pair correlation vs dense marginals ({n_random} cases)", worst_corr < 1e-10, worst_corr, 1e-10))
    return rep
