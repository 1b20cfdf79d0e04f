"""Command line for embedding extraction and tokenizer parity checks.

Exit codes: 0 success, 1 job/input error, 2 unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ExtractionError
from .extract import ExtractionJob, extract, load_dataset


class _UsageError(ExtractionError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def cmd_extract(args) -> int:
    job = ExtractionJob(
        model_id=args.model,
        dataset_path=args.data,
        out_shard=args.out_shard,
        out_manifest=args.out_manifest,
        max_len=args.max_len,
        include_special=args.include_special,
        batch_size=args.batch_size,
        threads=args.threads,
        expect_dim=args.expect_dim,
    )
    result = extract(job)
    print(
        json.dumps(
            {
                "n_samples": result.n_samples,
                "dim": result.dim,
                "truncated": result.truncated,
                "mean_l2": result.mean_l2,
                "model": result.model_id,
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_parity(args) -> int:
    from transformers import AutoTokenizer

    from .parity import verify_tokenizer_parity

    samples = load_dataset(args.data)
    texts = [s.text for s in samples[: args.limit]] if args.limit else [
        s.text for s in samples
    ]
    tokenizer = AutoTokenizer.from_pretrained(args.model)
    report = verify_tokenizer_parity(args.vocab, texts, tokenizer)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="plm-embedder", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="embed a dataset with a checkpoint")
    p.add_argument("--model", required=True, help="checkpoint path or hub id")
    p.add_argument("--data", required=True, help="canonical JSON-lines dataset")
    p.add_argument("--out-shard", required=True)
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--max-len", type=int, default=512)
    p.add_argument(
        "--include-special", action=argparse.BooleanOptionalAction, default=True
    )
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--expect-dim", type=int, default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("parity", help="compare tokenizers on dataset texts")
    p.add_argument("--vocab", required=True, help="standalone vocab.txt")
    p.add_argument("--model", required=True, help="checkpoint path or hub id")
    p.add_argument("--data", required=True)
    p.add_argument("--limit", type=int, default=0, help="0 = all samples")
    p.set_defaults(func=cmd_parity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ExtractionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
