"""Command-line interface.

Subcommands: train, evaluate, route, sweep, report, export-cassette.
Exit codes: 0 success, 1 evaluation-level failure, 2 input/configuration
failure. The CONFCASCADE_ENDPOINT environment variable overrides the
backend endpoint from the manifest.
"""

from __future__ import annotations

import argparse
import sys

from . import experiment
from .manifest import ManifestError, load_manifest


def _add_manifest_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("manifest", help="path to the run manifest (TOML)")
    p.add_argument("--corpus", help="override data.corpus")
    p.add_argument("--embeddings", help="override data.embeddings")
    p.add_argument("--output-dir", help="override output.dir")
    p.add_argument("--k", type=int, help="override protocol.k")
    p.add_argument("--seed", type=int, help="override protocol.seed")
    p.add_argument("--threshold", type=float, help="fixed confidence threshold")
    p.add_argument("--timing", choices=["measured", "zero"], help="override output.timing")
    p.add_argument("--backend-kind", choices=["mock", "replay", "http"])
    p.add_argument("--endpoint", help="completion endpoint URL (http backend)")
    p.add_argument("--cassette", help="replay cassette path")
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.add_argument("--temperature", type=float)
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int, dest="max_retries")
    p.add_argument("--concurrency", type=int, dest="max_concurrent")


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("corpus", "embeddings", "output_dir", "k", "seed", "threshold", "timing",
            "backend_kind", "endpoint", "cassette", "max_tokens", "temperature",
            "timeout", "max_retries", "max_concurrent")
    return {k: getattr(args, k, None) for k in keys}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confcascade",
        description="Confidence-gated cascade between a calibrated classifier and an LLM backend",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and persist one model per fold")
    _add_manifest_arg(p)

    p = sub.add_parser("evaluate", help="run the full cross-validated protocol")
    _add_manifest_arg(p)

    p = sub.add_parser("route", help="route one corpus with a persisted model")
    _add_manifest_arg(p)
    p.add_argument("--model", required=True, help="persisted model file")

    p = sub.add_parser("sweep", help="threshold sensitivity series")
    _add_manifest_arg(p)

    p = sub.add_parser("report", help="regenerate tables and figures from a run directory")
    p.add_argument("run_dir", help="existing run directory")

    p = sub.add_parser("export-cassette", help="record a replay cassette for a corpus")
    _add_manifest_arg(p)
    p.add_argument("--out", required=True, help="cassette output path")
    p.add_argument("--from-labels", action="store_true",
                   help="oracle completions from gold labels instead of a live backend")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            experiment.run_report(args.run_dir)
            return 0
        manifest = load_manifest(args.manifest, overrides=_overrides(args))
        if args.command == "train":
            paths = experiment.run_train(manifest)
            print(f"wrote {len(paths)} fold models under {manifest.output_dir}")
        elif args.command == "evaluate":
            summary = experiment.run_evaluate(manifest)
            means = summary["macro_f1_mean"]
            print(f"evaluate done: "
                  + ", ".join(f"{m}={100 * v:.1f}" for m, v in sorted(means.items()))
                  + f"  (bundle: {manifest.output_dir})")
        elif args.command == "route":
            out = experiment.run_route(manifest, args.model)
            print(f"outcomes written to {out}")
        elif args.command == "sweep":
            rows = experiment.run_sweep(manifest)
            print(f"swept {len(rows)} thresholds (bundle: {manifest.output_dir})")
        elif args.command == "export-cassette":
            out = experiment.run_export_cassette(manifest, args.out,
                                                 from_labels=args.from_labels)
            print(f"cassette written to {out}")
        return 0
    except (ManifestError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
