"""Command-line entry point: ``qclocksync {simulate,sweep,estimate,validate}``.

Exit status: 0 success, 1 a validation check failed, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

from . import harness, protocol
from .config import ExperimentConfig, SweepSpec, merge_config
from .errors import ConfigError, QClockError

log = logging.getLogger("qclocksync")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_CONFIG = 0, 1, 2

# flag dest -> ExperimentConfig field
_FIELD_OF = {
    "parties": "n_parties", "sets": "n_sets", "omega": "omega", "omega2": "omega2",
    "freq_split": "freq_split", "offsets": "offsets", "seed": "seed", "phase_noise": "phase_noise",
    "phase_noise_scale": "phase_noise_scale", "basis_misalign": "basis_misalign", "window": "window",
    "publisher": "publisher",
}
_SWEEP_KEYS = ("axis", "values", "trials", "workers")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _window(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return vals[0], vals[1]


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text!r}")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_CONFIG, f"{self.prog}: error: {message}\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment configuration (flag > --config file > default)")
    g.add_argument("--config", type=Path, help="JSON object with configuration fields")
    g.add_argument("--parties", type=int, help="number of parties n")
    g.add_argument("--sets", type=int, help="number of qubit sets M")
    g.add_argument("--omega", type=float, help="qubit angular frequency")
    g.add_argument("--omega2", type=float, help="second frequency for wraparound resolution")
    g.add_argument("--freq-split", dest="freq_split", type=float, help="fraction of sets at --omega")
    g.add_argument("--offsets", type=_floats, help="per-party clock offsets, comma-separated")
    g.add_argument("--seed", type=_u64)
    g.add_argument("--phase-noise", dest="phase_noise",
                   help="none | fixed:p0,p1,... | normal:SIGMA | uniform:HALFWIDTH")
    g.add_argument("--phase-noise-scale", dest="phase_noise_scale", type=float)
    g.add_argument("--basis-misalign", dest="basis_misalign", type=_floats, help="per-party basis angles")
    g.add_argument("--window", type=_window, help="offset search window LO,HI")
    g.add_argument("--publisher", type=int, help="index of the standard clock holder")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "records"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qclocksync", description="Entanglement-based multi-party clock synchronization simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run one experiment and estimate every receiver's offset")
    _add_config_flags(p)
    _add_output_flags(p)
    p.add_argument("--bulletin", type=Path, help="also write the bulletin records here")

    p = sub.add_parser("sweep", help="Monte Carlo sweep over n, M, delta or phase_noise_scale")
    _add_config_flags(p)
    _add_output_flags(p)
    p.add_argument("--axis", choices=("n", "M", "delta", "phase_noise_scale"))
    p.add_argument("--values", type=_floats)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--summary", type=Path, help="also write per-value RMSE summary here")

    p = sub.add_parser("estimate", help="estimate an offset from a bulletin file")
    p.add_argument("--bulletin", type=Path, required=True)
    p.add_argument("--publisher", type=int, default=0)
    p.add_argument("--receiver", type=int)
    p.add_argument("--parties", type=int, help="n (default: number of parties on the bulletin)")
    p.add_argument("--window", type=_window)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("validate", help="run the analytic and brute-force self-checks")
    p.add_argument("--out", type=Path, help="also write the check lines here")
    return parser


def _load_file(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"config: cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: not valid JSON ({e})") from None
    if not isinstance(obj, dict):
        raise ConfigError("config: expected a single JSON object")
    return obj


def resolve_config(args) -> tuple[ExperimentConfig, dict]:
    """Merge defaults, the --config file and flags; returns (config, sweep settings)."""
    raw = _load_file(getattr(args, "config", None))
    sweep = {k: raw.pop(k) for k in _SWEEP_KEYS if k in raw}
    file_fields = {_FIELD_OF.get(k, k): v for k, v in raw.items()}
    base = ExperimentConfig.from_dict(file_fields) if file_fields else ExperimentConfig()
    flags = {_FIELD_OF[k]: getattr(args, k) for k in _FIELD_OF if getattr(args, k, None) is not None}
    cfg = merge_config(base, flags)
    for k in _SWEEP_KEYS:
        if getattr(args, k, None) is not None:
            sweep[k] = getattr(args, k)
    return cfg.validate(), sweep


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    if isinstance(v, float):
        return "%.17g" % v if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if hasattr(v, "item"):
        return _cell(v.item())
    return str(v)


def _json_value(v):
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def format_table(rows: list[dict], columns: list[str], fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])
    else:
        for r in rows:
            buf.write(json.dumps({c: _json_value(r[c]) for c in columns}) + "\n")
    return buf.getvalue()


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _write_meta(out: Path | None, meta: dict) -> None:
    if out is not None:
        Path(str(out) + ".meta.json").write_text(json.dumps(_json_value_deep(meta), indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")


def _json_value_deep(v):
    if isinstance(v, dict):
        return {k: _json_value_deep(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value_deep(x) for x in v]
    return _json_value(v)


def cmd_simulate(args) -> int:
    cfg, _ = resolve_config(args)
    rows, board = harness.simulate(cfg)
    _emit(format_table(rows, harness.EXPERIMENT_COLUMNS, args.format), args.out)
    if args.bulletin is not None:
        protocol.write_bulletin(board, args.bulletin)
    _write_meta(args.out, harness.metadata(cfg, command="simulate"))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, sw = resolve_config(args)
    if "axis" not in sw or "values" not in sw:
        raise ConfigError("sweep: --axis and --values are required (flag or config file)")
    spec = SweepSpec(sw["axis"], tuple(sw["values"]), int(sw.get("trials", 200)))
    rows = harness.run_sweep(spec, cfg, workers=int(sw.get("workers", 1)))
    _emit(format_table(rows, harness.SWEEP_COLUMNS, args.format), args.out)
    if args.summary is not None:
        _emit(format_table(harness.summarize_sweep(rows), harness.SUMMARY_COLUMNS, args.format), args.summary)
    _write_meta(args.out, harness.metadata(cfg, command="sweep", axis=spec.axis, values=list(spec.values),
                                           trials=spec.trials))
    return EXIT_OK


def cmd_estimate(args) -> int:
    try:
        board = protocol.read_bulletin(args.bulletin)
    except OSError as e:
        raise ConfigError(f"bulletin: cannot read {args.bulletin}: {e.strerror}") from None
    parties = board.parties()
    n = args.parties if args.parties is not None else len(parties)
    receiver = args.receiver
    if receiver is None:
        others = [p for p in parties if p != args.publisher]
        if len(others) != 1:
            raise ConfigError("receiver: --receiver is required when the bulletin has more than two parties")
        receiver = others[0]
    for name, p in (("publisher", args.publisher), ("receiver", receiver)):
        if p not in parties:
            raise ConfigError(f"{name}: party {p} has no records on the bulletin")
    rep = protocol.estimate_between(board, args.publisher, receiver, n, window=args.window)
    _emit(protocol.report_to_json(rep), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    rep = harness.validate()
    text = "\n".join(rep.lines()) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        _emit(text, args.out)
    n_fail = len(rep.failures())
    sys.stdout.write(f"{len(rep.checks) - n_fail}/{len(rep.checks)} checks passed\n")
    return EXIT_OK if rep.ok else EXIT_CHECK_FAILED


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "estimate": cmd_estimate, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    log.debug("command %s", args.command)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        for prob in e.problems:
            print(f"configuration error: {prob}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except QClockError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
