"""Command-line front end.

    factmod <command> [--config FILE] [--key value ...]

Flags override entries of the config file. Each run writes its CSV/JSON
outputs into the output directory, then manifest.json (atomically, last).
Exit codes: 0 success, 2 config error, 3 budget/cap refusal,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, load, schema, SCHEMAS
from .errors import BudgetExceeded, CapExceeded, VerificationFailure
from .experiments import COLUMNS, Outputs, execute
from .factorials import WindowError
from .representations import dump_certificates

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_VERIFY = 0, 2, 3, 4

log = logging.getLogger("factmod")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs(cfg: ExperimentConfig, outputs: Outputs, workdir: Path) -> list[str]:
    names = []
    for name, header in COLUMNS[cfg.command].items():
        rows = outputs.tables.get(name)
        if rows is None:
            continue
        (workdir / name).write_text(render_csv(header, rows), newline="\n")
        names.append(name)
    if outputs.certificates:
        dump_certificates(outputs.certificates, workdir / "certificates.json")
        names.append("certificates.json")
    for name, text in outputs.extra.items():
        (workdir / name).write_text(text, newline="\n")
        names.append(name)
    return names


def run(cfg: ExperimentConfig) -> dict:
    """Execute one config; returns the manifest written next to the outputs."""
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    started = dt.datetime.now(dt.timezone.utc)
    t0 = time.perf_counter()
    workdir = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        outputs = execute(cfg)
        names = write_outputs(cfg, outputs, workdir)
        for name in names:
            os.replace(workdir / name, out_dir / name)
    finally:
        shutil.rmtree(workdir, ignore_errors=True)
    manifest = {
        "config": cfg.to_json(),
        "version": __version__,
        "seed": cfg.get("seed"),
        "outputs": [{"path": name, "sha256": sha256(out_dir / name)} for name in names],
        "started": started.isoformat(),
        "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
        "runtime_ms": int(round((time.perf_counter() - t0) * 1000)),
    }
    tmp = out_dir / ".manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    os.replace(tmp, out_dir / "manifest.json")
    return manifest


def _help_epilog(command: str) -> str:
    lines = ["parameters:"]
    for key, param in schema(command).items():
        extra = f" choices={','.join(param.choices)}" if param.choices else ""
        req = " (required)" if param.required else f" (default {param.default})"
        lines.append(f"  --{key} <{param.kind}>{req}{extra} {param.help}".rstrip())
    lines.append("outputs:")
    for name, cols in COLUMNS[command].items():
        lines.append(f"  {name}: {','.join(cols)}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factmod", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command in SCHEMAS:
        sp = sub.add_parser(command, epilog=_help_epilog(command),
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", help="flat key = value config file")
    return parser


def _overrides(extra: list[str]) -> dict[str, str]:
    out = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--"):
            raise ConfigError(token, "expected --key value")
        key, sep, value = token[2:].partition("=")
        if not sep:
            if i + 1 >= len(extra):
                raise ConfigError(key, "missing value")
            value = extra[i + 1]
            i += 1
        out[key.replace("-", "_")] = value
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(name)s: %(message)s")
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        cfg = load(args.config, _overrides(extra), command=args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(cfg)
    except (BudgetExceeded, CapExceeded) as exc:
        print(f"refused ({exc.parameter}): {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (WindowError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for item in manifest["outputs"]:
        print(Path(cfg["out"]) / item["path"])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
