import argparse
import sys
from pathlib import Path

from .cgem import CgemError
from .export import ExportError, ExportJob, export
from .verify import verify


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Export per-document CLS embeddings from an encoder checkpoint to CGEM",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="run the encoder and write a CGEM file")
    p.add_argument("--checkpoint", required=True, help="model checkpoint path or name")
    p.add_argument("--corpus", required=True, help="JSONL corpus (id, text per line)")
    p.add_argument("--out", required=True, help="output CGEM path")
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--batch", type=int, default=32)

    p = sub.add_parser("verify", help="check a CGEM file against its corpus")
    p.add_argument("cgem", help="CGEM file")
    p.add_argument("--corpus", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            job = ExportJob(checkpoint=args.checkpoint, corpus=Path(args.corpus),
                            output=Path(args.out), max_tokens=args.max_tokens,
                            batch_size=args.batch)
            out = export(job)
            print(f"wrote {out}")
            return 0
        report = verify(args.cgem, args.corpus)
        print(report.render())
        return 0 if report.ok else 1
    except (CgemError, ExportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
