"""Command-line entry point: ``kgc <stage> --config <path>``.

Exit codes: 0 success, 2 configuration error, 3 missing upstream artifact,
4 scorer transport failure, 1 other pipeline error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import apply_overrides, load_config
from .errors import ConfigError, KgclozeError, MissingArtifactError, TransportError
from .pipeline import STAGES, run_stage

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_TRANSPORT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgc",
        description="knowledge-graph completion pipeline: prompt mining, "
                    "support retrieval, scoring, and ranking evaluation")
    parser.add_argument("stage", choices=STAGES + ["all"],
                        help="pipeline stage to run")
    parser.add_argument("--config", required=True, type=Path,
                        help="TOML configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a config value (section.key=value)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap; results are identical at any setting")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        config = apply_overrides(config, args.overrides)
        if args.seed is not None:
            config.seed = args.seed
        run_stage(args.stage, config, args.config.parent.resolve(), args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except TransportError as exc:
        print(f"scorer transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except KgclozeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
