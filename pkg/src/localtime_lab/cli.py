"""Command-line experiment runner.

    python -m localtime_lab run --config exp.cfg [--out DIR] [--seed N]
    python -m localtime_lab list [FILTER]

Config files are flat ``key = value`` lines; values are Python literals
(numbers, quoted strings, tuples), ``#`` starts a comment.  Exit status is
0 when every check passes, 1 on a check failure and 2 on a config error.
"""
from __future__ import annotations

import argparse
import ast
import shutil
import sys
import tempfile
from pathlib import Path

from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, list_experiments
from .verify import write_reports_csv

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2
_STRING_KEYS = ("experiment", "drift", "diffusion", "out")


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; raises ``ConfigError`` naming the bad key or line."""
    known = set(ExperimentConfig.keys())
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in known:
            raise ConfigError(f"{key}: unknown key")
        if key in out:
            raise ConfigError(f"{key}: given twice")
        value = value.strip()
        try:
            out[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            if key in _STRING_KEYS and value and not value[0] in "'\"":
                out[key] = value  # bare words for names and paths
            else:
                raise ConfigError(f"{key}: cannot parse value {value!r}") from None
        if isinstance(out[key], list):
            out[key] = tuple(out[key])
    if "experiment" not in out:
        raise ConfigError("experiment: missing")
    return out


def load_config(file, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    try:
        text = Path(file).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {file}: {exc.strerror}") from None
    values = parse_config_text(text)
    if seed is not None:
        values["seed"] = seed
    if out is not None:
        values["out"] = out
    return ExperimentConfig(**values).resolved()


def run(cfg: ExperimentConfig, out_dir: Path) -> bool:
    """Run one experiment and publish its artifacts into ``out_dir``.

    Artifacts are staged in a sibling temporary directory and moved into
    place only when the experiment finishes; on an exception nothing is left
    behind.  Returns whether every check passed.
    """
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out_dir.parent))
    try:
        reports = EXPERIMENTS[cfg.experiment].run(cfg, stage)
        passed = all(r.passed for r in reports)
        (stage / "config.resolved").write_text(cfg.echo())
        write_reports_csv(reports, stage / "checks.csv")
        with open(stage / "summary", "a") as fh:
            fh.write(f"experiment={cfg.experiment}\n")
            fh.write(f"seed={cfg.seed}\n")
            for r in reports:
                fh.writelines(line + "\n" for line in r.lines())
            fh.write(f"pass={str(passed).lower()}\n")
        out_dir.mkdir(exist_ok=True)
        for f in sorted(stage.iterdir()):
            shutil.move(str(f), out_dir / f.name)
        return passed
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="localtime_lab", description="local-time experiment runner")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (overrides the config's out)")
    r.add_argument("--seed", type=int, default=None)
    ls = sub.add_parser("list", help="list registered experiments")
    ls.add_argument("filter", nargs="?", default="")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name, desc in list_experiments(args.filter):
            print(f"{name}\t{desc}")
        return EXIT_OK
    try:
        cfg = load_config(args.config, args.seed, args.out)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(cfg.out if cfg.out is not None else f"runs/{cfg.experiment}")
    passed = run(cfg, out_dir)
    print(f"{cfg.experiment}: {'pass' if passed else 'FAIL'} ({out_dir}/summary)")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
