"""Command-line entry points: ``export-images`` and ``export-texts``.

Exit codes: 0 success, 1 usage or validation failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from divexport import __version__, backends
from divexport.errors import ExportError
from divexport.export import ExportJob, export_image_features, export_text_embeddings

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2

_STUB_BANNER = "stub mode: deterministic random-projection features (no pretrained weights)"


class UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def cmd_export_images(args) -> int:
    if args.model == "stub":
        print(_STUB_BANNER)
    job = ExportJob(
        manifest=args.manifest,
        out=args.out,
        model=args.model,
        batch_size=args.batch_size,
        probs_out=args.probs,
        seed=args.seed,
        replicate_channels=args.replicate_channels,
    )
    features = export_image_features(job)
    print(f"wrote {features.shape[0]} x {features.shape[1]} image features -> {args.out}")
    if args.probs is not None:
        print(f"wrote {features.shape[0]} probability rows -> {args.probs}")
    return EXIT_OK


def cmd_export_texts(args) -> int:
    if args.model == "stub":
        print(_STUB_BANNER)
    job = ExportJob(
        manifest=args.manifest,
        out=args.out,
        model=args.model,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    vectors = export_text_embeddings(job)
    print(f"wrote {vectors.shape[0]} x {vectors.shape[1]} text embeddings -> {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="divexport", description=__doc__)
    parser.add_argument("--version", action="version", version=f"divexport {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", required=True, help="input manifest file")
    common.add_argument("--out", required=True, help="output DIVT path")
    common.add_argument("--batch-size", type=int, default=32)
    common.add_argument("--seed", type=int, default=0, help="stub backend seed")

    images = sub.add_parser(
        "export-images", parents=[common], help="image features (+ optional probabilities)"
    )
    images.add_argument("--model", choices=backends.IMAGE_MODELS, default="stub")
    images.add_argument("--probs", default=None, help="also write softmax rows here")
    images.add_argument(
        "--replicate-channels",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="feed grayscale images as 3 identical channels",
    )
    images.set_defaults(func=cmd_export_images)

    texts = sub.add_parser("export-texts", parents=[common], help="text embeddings")
    texts.add_argument("--model", choices=backends.TEXT_MODELS, default="stub")
    texts.set_defaults(func=cmd_export_texts)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"divexport: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ExportError, ValueError) as exc:
        print(f"divexport: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"divexport: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
