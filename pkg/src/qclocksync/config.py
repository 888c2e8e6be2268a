"""Experiment configuration and the transport/basis noise model."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import ConfigError
from .quantum import SingleExcitationState

SWEEP_AXES = ("n", "M", "delta", "phase_noise_scale")

NOISE_MODEL_NOTE = (
    "transport phases multiply excitation amplitudes by exp(i*phi); basis misalignment "
    "is modeled as a rotation of the party's |+-> basis about the energy axis by eps, "
    "folded in as an extra amplitude phase exp(-i*eps); general SU(2) misalignment is not modeled"
)


@dataclass
class ExperimentConfig:
    n_parties: int = 2
    n_sets: int = 10000
    omega: float = 1.0
    omega2: float | None = None
    freq_split: float = 0.5  # fraction of sets at ``omega`` when ``omega2`` is given
    offsets: list[float] | None = None  # per-party standard time of local zero
    publisher: int = 0
    seed: int = 0
    phase_noise: str = "none"
    phase_noise_scale: float = 1.0
    basis_misalign: list[float] | None = None
    window: tuple[float, float] | None = None

    def __post_init__(self):
        if self.offsets is None:
            self.offsets = [0.0] * int(self.n_parties) if isinstance(self.n_parties, int) else []
        if self.basis_misalign is None:
            self.basis_misalign = [0.0] * len(self.offsets)

    @property
    def omegas(self) -> list[float]:
        return [self.omega] if self.omega2 is None else [self.omega, self.omega2]

    @property
    def inversion_window(self) -> tuple[float, float]:
        if self.window is not None:
            return tuple(self.window)
        return (0.0, 2.0 * math.pi / min(self.omegas))

    def problems(self) -> list[str]:
        p = []
        if not isinstance(self.n_parties, (int, np.integer)) or self.n_parties < 2:
            p.append(f"n_parties: need an integer >= 2, got {self.n_parties!r}")
        if not isinstance(self.n_sets, (int, np.integer)) or self.n_sets < 0:
            p.append(f"n_sets: need an integer >= 0, got {self.n_sets!r}")
        for name in ("omega", "omega2"):
            w = getattr(self, name)
            if w is not None and not (isinstance(w, (int, float)) and math.isfinite(w) and w > 0):
                p.append(f"{name}: need a finite positive frequency, got {w!r}")
        if self.omega2 is not None and self.omega2 == self.omega:
            p.append("omega2: must differ from omega")
        if not 0.0 <= self.freq_split <= 1.0:
            p.append(f"freq_split: need a value in [0, 1], got {self.freq_split!r}")
        n = self.n_parties if isinstance(self.n_parties, (int, np.integer)) else -1
        if len(self.offsets) != n:
            p.append(f"offsets: need {n} values, got {len(self.offsets)}")
        if not all(math.isfinite(x) for x in self.offsets):
            p.append("offsets: values must be finite")
        if len(self.basis_misalign) != n:
            p.append(f"basis_misalign: need {n} values, got {len(self.basis_misalign)}")
        if not all(math.isfinite(x) for x in self.basis_misalign):
            p.append("basis_misalign: values must be finite")
        if not (0 <= self.publisher < max(n, 0)):
            p.append(f"publisher: need an index in [0, {n}), got {self.publisher!r}")
        if not (0 <= int(self.seed) < 2 ** 64):
            p.append(f"seed: need an unsigned 64-bit integer, got {self.seed!r}")
        if self.window is not None:
            lo, hi = self.window
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                p.append(f"window: need finite lo < hi, got {self.window!r}")
        try:
            parse_phase_noise(self.phase_noise, max(n, 0))
        except ValueError as e:
            p.append(f"phase_noise: {e}")
        if not math.isfinite(self.phase_noise_scale):
            p.append("phase_noise_scale: must be finite")
        return p

    def validate(self) -> ExperimentConfig:
        p = self.problems()
        if p:
            raise ConfigError(p)
        return self

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["window"] = list(self.window) if self.window is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError([f"{k}: unknown field" for k in unknown])
        d = dict(d)
        if d.get("window") is not None:
            d["window"] = tuple(float(x) for x in d["window"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: not valid JSON ({e})") from None
        if not isinstance(d, dict):
            raise ConfigError("config: expected a single JSON object")
        return cls.from_dict(d)


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    trials: int = 200

    def __post_init__(self):
        p = []
        if self.axis not in SWEEP_AXES:
            p.append(f"axis: must be one of {', '.join(SWEEP_AXES)}, got {self.axis!r}")
        if len(self.values) == 0:
            p.append("values: need at least one value")
        if self.trials < 1:
            p.append(f"trials: need >= 1, got {self.trials!r}")
        if p:
            raise ConfigError(p)
        object.__setattr__(self, "values", tuple(self.values))


def parse_phase_noise(spec: str, n: int) -> tuple[str, np.ndarray | float]:
    """Parse a transport-phase spec.

    ``none``; ``fixed:p0,p1,...`` (one phase per qubit, same for every set);
    ``normal:sigma`` or ``uniform:half_width`` (fresh iid phases per set and qubit).
    """
    spec = (spec or "none").strip()
    kind, _, arg = spec.partition(":")
    kind = kind.lower()
    if kind == "none":
        return "none", 0.0
    if kind == "fixed":
        vals = np.array([float(x) for x in arg.split(",") if x.strip()])
        if vals.size != n:
            raise ValueError(f"fixed phases need {n} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("phases must be finite")
        return "fixed", vals
    if kind in ("normal", "uniform"):
        try:
            scale = float(arg)
        except ValueError:
            raise ValueError(f"{kind} needs a numeric width, got {arg!r}") from None
        if not (math.isfinite(scale) and scale >= 0):
            raise ValueError(f"{kind} width must be finite and >= 0")
        return kind, scale
    raise ValueError(f"unknown phase noise spec {spec!r}")


class NoisyEnsemble:
    """Per-set single-excitation states, stored as one amplitude row per set.

    When no per-set randomness is configured a single row is shared by all sets.
    """

    def __init__(self, vacuum: np.ndarray, amps: np.ndarray, n_sets: int):
        self.vacuum = vacuum
        self.amps = amps
        self.n_sets = n_sets

    @property
    def shared(self) -> bool:
        return self.amps.shape[0] == 1

    def __len__(self):
        return self.n_sets

    def __getitem__(self, set_id: int) -> SingleExcitationState:
        if not 0 <= set_id < self.n_sets:
            raise IndexError(set_id)
        row = 0 if self.shared else set_id
        return SingleExcitationState(self.amps.shape[1], complex(self.vacuum[row]), self.amps[row])

    def __iter__(self):
        return (self[k] for k in range(self.n_sets))


def apply_noise(config: ExperimentConfig) -> NoisyEnsemble:
    """W states with transport phases and basis misalignment folded into amplitude phases."""
    config.validate()
    n, m = config.n_parties, config.n_sets
    kind, arg = parse_phase_noise(config.phase_noise, n)
    base = np.full(n, 1.0 / math.sqrt(n), dtype=complex)
    static = -np.asarray(config.basis_misalign, dtype=float)
    if kind == "fixed":
        static = static + config.phase_noise_scale * arg
    base = base * np.exp(1j * static)
    if kind in ("normal", "uniform") and arg * config.phase_noise_scale > 0 and m > 0:
        g = rngmod.generator(config.seed, rngmod.NOISE_STREAM)
        width = arg * config.phase_noise_scale
        if kind == "normal":
            phi = g.normal(0.0, width, size=(m, n))
        else:
            phi = g.uniform(-width, width, size=(m, n))
        amps = base[None, :] * np.exp(1j * phi)
        return NoisyEnsemble(np.zeros(m, dtype=complex), amps, m)
    return NoisyEnsemble(np.zeros(1, dtype=complex), base[None, :], m)


def merge_config(base: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Apply non-None overrides on top of ``base`` (flag > file > default)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    cfg = base.replace(**changes)
    # resize per-party lists that were left at their defaults
    if "n_parties" in changes:
        if "offsets" not in changes and len(cfg.offsets) != cfg.n_parties and not any(base.offsets):
            cfg.offsets = [0.0] * cfg.n_parties
        if "basis_misalign" not in changes and len(cfg.basis_misalign) != cfg.n_parties and not any(base.basis_misalign):
            cfg.basis_misalign = [0.0] * cfg.n_parties
    return cfg


__all__ = [
    "ExperimentConfig", "SweepSpec", "NoisyEnsemble", "apply_noise", "parse_phase_noise",
    "merge_config", "NOISE_MODEL_NOTE", "SWEEP_AXES",
]
