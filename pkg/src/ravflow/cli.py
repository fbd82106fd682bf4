"""Command-line interface.

    ravflow run <config.toml> [--dt X] [--t-end X] [--out DIR]
    ravflow converge <config.toml>
    ravflow compare <config.toml>
    ravflow presets

Configs may name a shipped preset instead of a file path. Exit codes:
0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import (
    list_presets,
    load_compare_config,
    load_config,
    load_converge_config,
    preset_path,
)
from .errors import ConfigError, NumericalError, RavflowError, SnapshotFormatError
from .runner import cmd_compare, cmd_converge, cmd_run


def _resolve(config_arg: str) -> Path:
    p = Path(config_arg)
    if p.is_file():
        return p
    if not config_arg.endswith(".toml"):
        return preset_path(config_arg)
    raise ConfigError(f"config file not found: {config_arg}")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ravflow",
                                 description="energy-stable gradient-flow simulations")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single simulation from a config or preset")
    run.add_argument("config")
    run.add_argument("--dt", type=float, default=None)
    run.add_argument("--t-end", type=float, default=None)
    run.add_argument("--out", type=str, default=None)

    conv = sub.add_parser("converge", help="dt series against a reference run")
    conv.add_argument("config")
    conv.add_argument("--out", type=str, default=None)

    comp = sub.add_parser("compare", help="paired RAV/SAV runs")
    comp.add_argument("config")
    comp.add_argument("--out", type=str, default=None)

    sub.add_parser("presets", help="list shipped experiment presets")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            for name in list_presets():
                print(name)
            return 0

        path = _resolve(args.config)
        if args.command == "run":
            cfg = load_config(path)
            updates = {}
            if args.dt is not None:
                updates["dt"] = args.dt
            if args.t_end is not None:
                updates["t_end"] = args.t_end
            if args.out is not None:
                updates["output_dir"] = Path(args.out)
            if updates:
                cfg = replace(cfg, **updates).validate()
            return cmd_run(cfg)
        if args.command == "converge":
            ccfg = load_converge_config(path)
            if args.out is not None:
                ccfg.base = replace(ccfg.base, output_dir=Path(args.out))
            return cmd_converge(ccfg)
        if args.command == "compare":
            cfg, dt_list = load_compare_config(path)
            if args.out is not None:
                cfg = replace(cfg, output_dir=Path(args.out))
            return cmd_compare(cfg, dt_list)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, SnapshotFormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except RavflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
