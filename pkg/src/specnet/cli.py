"""Command line: ``specnet <subcommand> [--config FILE] [--key value ...]``.

Every configuration key is also a flag (``batch_size`` -> ``--batch-size``);
flags override the file. ``--set key=value`` is accepted as well. On failure
the last stderr line is ``error <category>: <message>`` and the exit code is
nonzero.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, SpecNetError
from .experiments import COMMANDS, KEYS, load_config

EXIT_CODES = {"config": 2, "io": 3}


def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="specnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run {name}")
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
        for key, (_, default, choices, text) in KEYS.items():
            extra = f" (one of {', '.join(choices)})" if choices else ""
            sp.add_argument(_flag(key), dest=key, default=None, metavar="V", help=f"{text}{extra}")
    return parser


def _overrides(args):
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (t.strip() for t in item.split("=", 1))
        out[key] = value
    for key in KEYS:
        value = getattr(args, key)
        if value is not None:
            out[key] = value
    return out


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, _overrides(args))
        sys.stdout.write(cfg.dump())
        result = COMMANDS[args.command](cfg)
    except SpecNetError as exc:
        print(f"error {exc.category}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(f"error io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]
    if isinstance(result, list):
        for path in result:
            print(f"wrote {path}")
    else:
        print(f"wrote {result}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
