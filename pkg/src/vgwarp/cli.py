"""Command-line interface.

Every subcommand reads a TOML run configuration and runs the pipeline up
to its stage; ``run`` executes all stages and ``report`` prints the score
table of a finished run.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 input/output error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .exceptions import ConfigError, DataError, PipelineError, VgwarpError
from .pipeline import run_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

SUBCOMMANDS = {
    "simulate": ("data", "simulate or ingest data, split and write the realization"),
    "fit-variograms": ("fit", "fit regional Matérn models and empirical variograms"),
    "register": ("register", "align regional variograms and export distance warps"),
    "embed": ("embed", "build warped distances and the deformed-space embedding"),
    "krige": ("krige", "fit deformed and stationary models and krige"),
    "score": ("score", "score both models on the test sites"),
    "run": ("score", "run the full pipeline"),
}


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vgwarp", description="Nonstationary kriging by variogram alignment.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, type=Path, help="TOML run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        p.add_argument("--verbose", "-v", action="store_true")
    p = sub.add_parser("report", help="print the score table of a finished run")
    p.add_argument("--out", required=True, type=Path, help="run directory holding manifest.json")
    p.add_argument("--config", type=Path, help="unused; accepted for symmetry")
    p.add_argument("--seed", type=_u64, help="unused; accepted for symmetry")
    p.add_argument("--verbose", "-v", action="store_true")
    return parser


def _report(out: Path) -> int:
    manifest = json.loads((out / "manifest.json").read_text())
    rows = []
    for art in manifest["artifacts"]:
        if art["path"].startswith("scores_") and art["path"].endswith(".json"):
            rows.append(json.loads((out / art["path"]).read_text()))
    if not rows:
        print("no score reports in this run")
        return EXIT_OK
    cols = ["model", "mspe", "mae", "crps", "logs", "n_test"]
    lines = [",".join(cols)]
    for r in sorted(rows, key=lambda r: r["model"]):
        lines.append(",".join(str(r[c]) if c in ("model", "n_test") else f"{r[c]:.6f}" for c in cols))
    text = "\n".join(lines) + "\n"
    (out / "score_table.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _exit_code(err) -> int:
    cause = err.cause if isinstance(err, PipelineError) else err
    if isinstance(cause, ConfigError):
        return EXIT_CONFIG
    if isinstance(cause, (OSError, DataError)):
        return EXIT_IO
    return EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("numba").setLevel(logging.WARNING)
    log = logging.getLogger("vgwarp")
    try:
        if args.command == "report":
            return _report(args.out)
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        manifest = run_pipeline(cfg, until=SUBCOMMANDS[args.command][0])
        print(f"wrote {len(manifest.artifacts)} artifact(s) to {cfg['out']}")
        return EXIT_OK
    except ConfigError as e:
        log.error("configuration error: %s", e)
        return EXIT_CONFIG
    except PipelineError as e:
        log.error("%s", e)
        return _exit_code(e)
    except (OSError, DataError) as e:
        log.error("I/O error: %s", e)
        return EXIT_IO
    except VgwarpError as e:
        log.error("%s", e)
        return _exit_code(e)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
