"""Command-line entry point: `modeheat run|schema|version`.

Exit codes: 0 success (verdict PASS), 2 configuration problem, 3 numerical
failure, 4 oracle FAIL (the run completed but a built-in tolerance check
did not pass).  Error messages go to stderr with a machine-parsable
`code=` prefix.  Every run directory gets a manifest (config hash, seed,
versions, RNG algorithm) sufficient to bit-reproduce the data rows.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

from .config import CONFIG_SCHEMA, load_config
from .constants import DEFAULT_SEED, RNG_ALGORITHM
from .errors import ConfigError, ModeheatError
from .experiments import experiment_strong_coupling_sweep, run_experiment

__all__ = ["main", "run", "experiment_strong_coupling_sweep"]


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("modeheat")
    except Exception:
        return "unknown"


def _csv_to_json(csv_path: Path) -> None:
    """Mirror a result table as JSON (list of row objects)."""
    with open(csv_path, newline="") as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    rows = []
    for row in reader:
        parsed = {}
        for k, v in row.items():
            try:
                parsed[k] = float(v)
            except (TypeError, ValueError):
                parsed[k] = v
        rows.append(parsed)
    csv_path.with_suffix(".json").write_text(json.dumps(rows, indent=2) + "\n")


def run(
    config_path: str | Path,
    seed: int | None = None,
    out: str | Path | None = None,
    threads: int = 1,
) -> int:
    """Execute the experiment named in the config; returns the exit code."""
    try:
        cfg = load_config(config_path)
        raw = Path(config_path).read_bytes()
        outdir = Path(out) if out else Path(cfg.output.get("directory", f"runs/{cfg.experiment}"))
        outdir.mkdir(parents=True, exist_ok=True)
        if not os.access(outdir, os.W_OK):
            raise ConfigError(f"output directory {outdir} is not writable")
    except ConfigError as exc:
        print(f"code=2 {exc}", file=sys.stderr)
        return 2

    resolved_seed = seed if seed is not None else cfg.sim.get("seed", DEFAULT_SEED)

    try:
        checks = run_experiment(cfg, outdir, resolved_seed, threads)
    except ConfigError as exc:
        print(f"code=2 {exc}", file=sys.stderr)
        return 2
    except ModeheatError as exc:
        print(f"code=3 {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    if "json" in cfg.output.get("formats", []):
        for table in sorted(outdir.glob("*.csv")):
            _csv_to_json(table)

    verdict = "PASS" if all(c.passed for c in checks) else "FAIL"
    (outdir / "verdict.json").write_text(
        json.dumps(
            {
                "experiment": cfg.experiment,
                "verdict": verdict,
                "checks": [
                    # numpy bool_ sneaks in through float comparisons; json
                    # refuses it.
                    {"name": c.name, "passed": bool(c.passed), "detail": c.detail}
                    for c in checks
                ],
            },
            indent=2,
        )
        + "\n"
    )

    import numpy
    import scipy

    manifest = {
        "experiment": cfg.experiment,
        "config_file": str(config_path),
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "seed": int(resolved_seed),
        "threads": int(threads),
        "versions": {
            "modeheat": _package_version(),
            "python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
        "rng": RNG_ALGORITHM,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": sorted(p.name for p in outdir.iterdir() if p.name != "manifest.json"),
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    n_fail = sum(not c.passed for c in checks)
    print(f"{cfg.experiment}: verdict {verdict} ({len(checks)} checks, {n_fail} failed)")
    for c in checks:
        if not c.passed:
            print(f"  FAIL {c.name}: {c.detail}")
    print(f"outputs in {outdir}")
    if verdict != "PASS":
        print(f"code=4 oracle FAIL in experiment {cfg.experiment}", file=sys.stderr)
        return 4
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="modeheat",
        description="Heat-flux and mode-temperature laboratory for coupled "
        "thermally driven oscillators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--threads", type=int, default=1, help="ensemble worker threads")

    sub.add_parser("schema", help="print the config JSON schema")
    sub.add_parser("version", help="print versions and the RNG algorithm")

    args = parser.parse_args(argv)
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return 0
    if args.command == "version":
        import numpy
        import scipy

        print(f"modeheat {_package_version()}")
        print(f"python {sys.version.split()[0]}, numpy {numpy.__version__}, "
              f"scipy {scipy.__version__}")
        print(f"rng: {RNG_ALGORITHM}")
        return 0
    return run(args.config, seed=args.seed, out=args.out, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
