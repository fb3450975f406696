"""Command-line entry point.

Exit codes: 0 all verdicts pass, 1 some verdict fails, 2 configuration
error, 3 budget abort (or a run refused for exceeding its step budget).
``LATWALK_SEED`` overrides the master seed of experiment configs.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import mpmath
import numpy as np

from .constants import epsilon_p, thm13_sequences, thm14_sequences, verify_thm13, verify_thm14
from .experiments import (
    CONFIG_FIELDS,
    EXPERIMENT_DEFAULTS,
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    run_experiment,
)
from .intervals import fraction_str
from .lattice import LatticeBasis, systole_sq
from .laws import theorem11_law, trial_rng
from .ratmat import BudgetExceeded, RationalMatrix
from .walk import WALK_BUDGET_BITS, run_exact_walk, run_ledger_walk, trace_to_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3
SEED_ENV = "LATWALK_SEED"


@dataclass
class CliInvocation:
    command: str
    config_path: str | None = None
    overrides: list[str] = field(default_factory=list)
    output_dir: str | None = None
    options: dict = field(default_factory=dict)


# -- JSON helpers -----------------------------------------------------------------


def _json_default(x):
    if isinstance(x, Fraction):
        return fraction_str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (tuple, set)):
        return list(x)
    return str(x)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


# -- configuration ------------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(raw: dict, item: str, errors: list[str]) -> None:
    if "=" not in item:
        errors.append(f"override {item!r} is not key=value")
        return
    key, value = item.split("=", 1)
    parts = key.strip().split(".")
    target = raw
    for p in parts[:-1]:
        target = target.setdefault(p, {})
        if not isinstance(target, dict):
            errors.append(f"override {key!r} indexes into a non-table")
            return
    target[parts[-1]] = _parse_value(value)


def load_config(path: str | os.PathLike | None, overrides=(), name: str | None = None) -> ExperimentConfig:
    """Read a JSON config, apply ``key=value`` overrides (dotted keys for params/thresholds) and validate.

    Every unknown key is collected and reported in a single ConfigError.
    """
    raw: dict = {}
    if path is not None:
        text = Path(path).read_text()
        if text.strip():
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: not valid JSON ({e})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
    errors: list[str] = []
    for item in overrides:
        _apply_override(raw, item, errors)
    name = raw.get("name", name)
    if name is None:
        raise ConfigError("config needs an experiment name")
    if name not in EXPERIMENT_DEFAULTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENT_DEFAULTS)}")
    defaults = EXPERIMENT_DEFAULTS[name]
    for k in raw:
        if k not in CONFIG_FIELDS:
            errors.append(f"unknown key {k!r}")
    for table in ("params", "thresholds"):
        sub = raw.get(table, {})
        if not isinstance(sub, dict):
            errors.append(f"{table} must be an object")
            continue
        for k in sub:
            if k not in defaults.get(table, {}):
                errors.append(f"unknown key {table}.{k}")
    if errors:
        raise ConfigError("; ".join(errors))
    fields = {k: v for k, v in raw.items() if k != "name"}
    if SEED_ENV in os.environ:
        try:
            fields["master_seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    try:
        return ExperimentConfig.default(name, **fields)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def write_config(cfg: ExperimentConfig, path: str | os.PathLike) -> Path:
    p = Path(path)
    p.write_text(dumps(cfg.to_json()))
    return p


# -- reports -----------------------------------------------------------------------------


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "mpmath": mpmath.__version__, "latwalk": pkg}


def report_filename(name: str, seed, payload: str) -> str:
    digest = hashlib.sha256(payload.encode()).hexdigest()[:16]
    return f"{name}-seed{seed}-{digest}"


def write_report(report: ExperimentReport | dict, out_dir: str | os.PathLike) -> list[Path]:
    """Write the JSON report (and a CSV when the report has a series); names are content-addressed."""
    obj = report.to_json() if isinstance(report, ExperimentReport) else dict(report)
    series = report.series if isinstance(report, ExperimentReport) else obj.pop("series", None)
    cfg = obj.get("config", {})
    stem = report_filename(obj.get("name", "report"), cfg.get("master_seed", "na"), dumps(cfg))
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    jp = d / f"{stem}.json"
    try:
        jp.write_text(dumps(obj))
        paths.append(jp)
        if series:
            cp = d / f"{stem}.csv"
            cols = list(series[0].keys())
            lines = [",".join(cols)] + [",".join(str(row.get(c, "")) for c in cols) for row in series]
            cp.write_text("\n".join(lines) + "\n")
            paths.append(cp)
    except OSError as e:
        raise OSError(f"cannot write report to {d}: {e}") from e
    return paths


def write_manifest(out_dir: str | os.PathLike, command: str, config: dict, seed) -> Path:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    body = {"command": command, "config": config, "seed": seed, "versions": _versions()}
    p = d / f"manifest-{report_filename(command, seed, dumps(config))}.json"
    p.write_text(dumps(body))
    return p


# -- commands ------------------------------------------------------------------------------


def _emit(obj, inv: CliInvocation, command: str, seed=None) -> None:
    sys.stdout.write(dumps(obj))
    if inv.output_dir:
        cfg = {"command": command, **{k: v for k, v in inv.options.items() if v is not None}}
        write_manifest(inv.output_dir, command, cfg, seed)
        write_report({"name": command, "config": cfg, **({"result": obj} if not isinstance(obj, dict) else obj)}, inv.output_dir)


def _cmd_constants(inv: CliInvocation) -> int:
    o = inv.options
    pipe = epsilon_p(Fraction(str(o["p"])), o["bits"])
    _emit(pipe.to_json(), inv, "constants")
    return EXIT_OK


def _cmd_sequences(inv: CliInvocation) -> int:
    o = inv.options
    if o["variant"] == "thm13":
        p = None if o["p"] is None else Fraction(str(o["p"]))
        table = thm13_sequences(p, Fraction(str(o["p_prime"])), Fraction(str(o["M"])),
                                Fraction(str(o["M_prime"])), Fraction(str(o["eps"])), o["j_max"], mode=o["mode"])
        checks = verify_thm13(table)
    else:
        table = thm14_sequences(Fraction(str(o["M"])), o["j_max"], mode=o["mode"])
        checks = verify_thm14(table)
    ok = all(v for c in checks for k, v in c.items() if k != "j")
    _emit({"table": table.to_json(), "checks": checks, "all_verified": ok}, inv, "sequences")
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_systole(inv: CliInvocation) -> int:
    try:
        g = RationalMatrix.from_json(inv.options["matrix"], unimodular=True)
        res = systole_sq(LatticeBasis(g))
    except (ValueError, json.JSONDecodeError) as e:
        raise ConfigError(f"bad matrix: {e}") from None
    _emit(res.to_json(), inv, "systole")
    return EXIT_OK


def _cmd_walk(inv: CliInvocation) -> int:
    o = inv.options
    rng = trial_rng(o["seed"], 0, 0)
    if o["engine"] == "exact":
        law = theorem11_law(o["d"], max_exponent=o["cap"])
        trace = run_exact_walk(law, o["n"], rng=rng, budget_bits=o["budget_bits"])
        out = {
            "engine": "exact",
            "steps": len(trace),
            "budget_exceeded": trace.budget_exceeded,
            "violations": trace.certificate_violations(),
            "final": None if not len(trace) else {
                "systole": trace.systoles[-1].to_json(),
                "certificate": trace.certificates[-1].to_json(),
            },
        }
        status = EXIT_BUDGET if trace.budget_exceeded else (EXIT_FAIL if out["violations"] else EXIT_OK)
    else:
        law = theorem11_law(o["d"])
        trace = run_ledger_walk(law, o["n"], rng)
        out = {"engine": "ledger", "steps": trace.n, "final_certificate": trace.final_certificate().to_json()}
        status = EXIT_OK
    if o.get("csv"):
        Path(o["csv"]).write_text(trace_to_csv(trace))
    _emit(out, inv, "walk", o["seed"])
    return status


def _verdict_status(report: ExperimentReport) -> int:
    if report.status == "refused":
        return EXIT_BUDGET
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_experiment(inv: CliInvocation) -> int:
    cfg = load_config(inv.config_path, inv.overrides, inv.options.get("name"))
    report = run_experiment(cfg)
    if inv.output_dir:
        write_manifest(inv.output_dir, "experiment", cfg.to_json(), cfg.master_seed)
        write_report(report, inv.output_dir)
    summary = {"name": report.name, "status": report.status, "passed": report.passed, "verdicts": report.verdicts,
               "aggregates": report.aggregates, "notes": report.notes}
    sys.stdout.write(dumps(summary))
    return _verdict_status(report)


def _cmd_verify_all(inv: CliInvocation) -> int:
    worst = EXIT_OK
    scale = inv.options.get("scale", 1.0)
    results = {}
    for name, defaults in EXPERIMENT_DEFAULTS.items():
        trials = max(1, int(defaults["trials"] * scale))
        cfg = load_config(None, [f"trials={trials}"] + list(inv.overrides), name)
        report = run_experiment(cfg)
        if inv.output_dir:
            write_manifest(inv.output_dir, "verify-all", cfg.to_json(), cfg.master_seed)
            write_report(report, inv.output_dir)
        code = _verdict_status(report)
        results[name] = {"status": report.status, "passed": report.passed}
        print(f"{'PASS' if code == EXIT_OK else 'FAIL'} {name}", file=sys.stderr)
        worst = max(worst, code) if code != EXIT_OK else worst
    sys.stdout.write(dumps(results))
    return worst


COMMANDS = {
    "constants": _cmd_constants,
    "sequences": _cmd_sequences,
    "systole": _cmd_systole,
    "walk": _cmd_walk,
    "experiment": _cmd_experiment,
    "verify-all": _cmd_verify_all,
}


def run_command(inv: CliInvocation) -> int:
    try:
        return COMMANDS[inv.command](inv)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latwalk", description="Exact lattice random walks and escape-of-mass checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output-dir", default=None)
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    p = sub.add_parser("constants", help="alpha, a_p, K and epsilon_p with enclosures")
    p.add_argument("--p", default="2")
    p.add_argument("--bits", type=int, default=64)
    common(p)

    p = sub.add_parser("sequences", help="recursive index sequences")
    p.add_argument("--variant", choices=["thm13", "thm14"], default="thm13")
    p.add_argument("--p", default=None, help="default (1 + 1/p')/2")
    p.add_argument("--p-prime", dest="p_prime", default="1/2")
    p.add_argument("--M", dest="M", default="1")
    p.add_argument("--M-prime", dest="M_prime", default="1")
    p.add_argument("--eps", default="1/20")
    p.add_argument("--j-max", dest="j_max", type=int, default=5)
    p.add_argument("--mode", default="toy")
    common(p)

    p = sub.add_parser("systole", help="exact systole of g.Z^d")
    p.add_argument("--matrix", required=True, help='JSON rows of rational strings, e.g. [["4","1/12"],["0","1/4"]]')
    common(p)

    p = sub.add_parser("walk", help="one seeded walk")
    p.add_argument("--engine", choices=["exact", "ledger"], default="exact")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=1024, help="exponent cap for the exact engine")
    p.add_argument("--budget-bits", dest="budget_bits", type=int, default=WALK_BUDGET_BITS,
                   help="per-entry bit budget of the exact engine")
    p.add_argument("--csv", default=None)
    common(p)

    p = sub.add_parser("experiment", help="run one configured experiment")
    p.add_argument("--name", default=None, choices=sorted(EXPERIMENT_DEFAULTS))
    p.add_argument("--config", dest="config_path", default=None)
    common(p)

    p = sub.add_parser("verify-all", help="run every experiment with default configs")
    p.add_argument("--scale", type=float, default=1.0, help="multiply default trial counts")
    common(p)
    return ap


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    inv = CliInvocation(
        command=command,
        config_path=args.pop("config_path", None),
        overrides=args.pop("overrides", []),
        output_dir=args.pop("output_dir", None),
        options=copy.deepcopy(args),
    )
    return run_command(inv)


if __name__ == "__main__":
    sys.exit(main())
