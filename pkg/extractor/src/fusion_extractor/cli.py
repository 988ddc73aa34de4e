"""Command-line entry point: turn an image manifest into a FUSB feature file.

Exit codes: 0 success, 1 usage error, 2 data error (malformed manifest,
unreadable output path, or a run where every row failed).

Extraction is deterministic for the model identities pinned in the lock
sidecar written next to the output file. Skipped rows are logged to stderr;
the summary on stdout is stable JSON.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .pipeline import build_feature_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Route argparse failures through our exit-code taxonomy.
    def error(self, message):
        raise _UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fusion-extract",
                     description="Extract OCR text and embeddings from an "
                                 "image manifest into a FUSB feature file.")
    parser.add_argument("--manifest", required=True,
                        help="JSONL manifest with id, path, label per row")
    parser.add_argument("--out", required=True, help="output FUSB path")
    parser.add_argument("--jobs", type=_positive_int, default=1,
                        help="parallel extraction workers, default 1")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
        summary = build_feature_file(args.manifest, args.out, jobs=args.jobs)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(summary.to_json_dict(), indent=2))
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
