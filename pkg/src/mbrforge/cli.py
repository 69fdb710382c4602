"""Command-line surface: one binary, one subcommand per pipeline step.

The pipeline is invoked stepwise (candidates -> mbr -> build-st ->
retrain externally -> repeat), so each subcommand reads files, does one
thing, and writes files atomically; a nonzero exit never leaves a
truncated output behind.

Exit codes: 0 ok, 2 usage error, 3 alignment/data error, 4 bridge error,
5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor

from . import checkpoint, mbr, metrics, promptgen, selftrain
from .bridge import BridgeConfig
from .errors import (
    EXIT_BRIDGE,
    EXIT_IO,
    EXIT_OK,
    BridgeError,
    DataError,
    MbrforgeError,
    UsageError,
)
from .textio import atomic_write_text, read_segments, require_aligned, write_segments

log = logging.getLogger("mbrforge")

WORKERS_ENV = "MBRFORGE_WORKERS"


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_workers_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--workers",
        type=int,
        default=_default_workers(),
        help=f"worker count for per-segment scoring (env {WORKERS_ENV})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbrforge",
        description="MBR candidate selection and chat-translation pipeline tools",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="increase log verbosity (repeatable)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser(
        "mbr",
        help="select the minimum-risk candidate per segment",
        formatter_class=fmt,
    )
    p.add_argument("--src", required=True, help="source text file")
    p.add_argument(
        "--cand",
        action="append",
        required=True,
        metavar="FILE",
        help="candidate file, one per system (repeat; at least 2)",
    )
    p.add_argument(
        "--utility",
        choices=["bleu", "chrf", "external"],
        default="chrf",
        help="pairwise utility",
    )
    p.add_argument(
        "--external-cmd",
        default=None,
        help="scorer command line for --utility external",
    )
    p.add_argument(
        "--include-self",
        dest="include_self",
        action="store_true",
        default=True,
        help="keep each candidate in its own reference set (default)",
    )
    p.add_argument(
        "--exclude-self",
        dest="include_self",
        action="store_false",
        help="drop the diagonal from the row means",
    )
    p.add_argument("--out", required=True, help="output file for the selected lines")
    p.add_argument(
        "--matrix-out",
        default=None,
        help="optional TSV dump of all utility matrices",
    )
    p.add_argument("--bridge-batch-size", type=int, default=32)
    p.add_argument("--bridge-timeout", type=float, default=60.0)
    p.add_argument(
        "--no-bridge-restart",
        dest="bridge_restart",
        action="store_false",
        default=True,
        help="fail immediately if the scorer process crashes",
    )
    _add_workers_flag(p)
    p.set_defaults(func=cmd_mbr)

    p = sub.add_parser(
        "eval",
        help="score hypotheses against references with BLEU or chrF",
        formatter_class=fmt,
    )
    p.add_argument("--hyp", required=True, help="hypothesis file")
    p.add_argument("--ref", required=True, help="reference file")
    p.add_argument("--metric", choices=["bleu", "chrf"], default="chrf")
    p.add_argument(
        "--sentence-level",
        action="store_true",
        help="emit one score per line instead of the corpus score",
    )
    p.add_argument(
        "--smoothing",
        choices=["none", "add-k"],
        default=None,
        help="BLEU smoothing (default: none for corpus, add-k per sentence)",
    )
    p.add_argument(
        "--tokenize",
        choices=list(metrics.TOKENIZE_SCHEMES),
        default="punctuation-split",
        help="tokenization for BLEU",
    )
    _add_workers_flag(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "build-st",
        help="build a self-training corpus from sources and translations",
        formatter_class=fmt,
    )
    p.add_argument("--src", required=True, help="monolingual source file")
    p.add_argument("--mt", required=True, help="forward translations (e.g. mbr output)")
    p.add_argument("--out-prefix", required=True)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_build_st)

    p = sub.add_parser(
        "build-bt",
        help="build a back-translation corpus from targets and their back-translations",
        formatter_class=fmt,
    )
    p.add_argument("--tgt", required=True, help="monolingual target file")
    p.add_argument("--bt", required=True, help="back-translations of the target file")
    p.add_argument(
        "--tag",
        default=None,
        help="optional token prepended to every synthetic source (e.g. '<BT>')",
    )
    p.add_argument("--out-prefix", required=True)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_build_bt)

    p = sub.add_parser(
        "merge",
        help="concatenate corpora, optionally shuffling deterministically",
        formatter_class=fmt,
    )
    p.add_argument(
        "--inputs",
        nargs="+",
        required=True,
        metavar="PREFIX",
        help="corpus prefixes (reads PREFIX.src/.tgt and PREFIX.meta if present)",
    )
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--seed", type=int, default=None, help="shuffle seed")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser(
        "avg",
        help="average checkpoint tensors elementwise",
        formatter_class=fmt,
    )
    p.add_argument(
        "--inputs",
        nargs="+",
        required=True,
        metavar="TSF",
        help="checkpoint files (typically the 5 best on the dev set, "
        "or the last 5 epochs)",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_avg)

    p = sub.add_parser(
        "lora-merge",
        help="fold a low-rank adapter into base weights",
        formatter_class=fmt,
    )
    p.add_argument("--base", required=True, help="base checkpoint (TSF)")
    p.add_argument(
        "--adapter",
        required=True,
        help="adapter TSF holding <name>.lora_A / <name>.lora_B pairs",
    )
    p.add_argument("--alpha", type=float, required=True, help="adapter scaling alpha")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lora_merge)

    p = sub.add_parser(
        "prompts",
        help="render chat documents into prompt/completion records",
        formatter_class=fmt,
    )
    p.add_argument("--mode", choices=["stream", "context", "fewshot"], required=True)
    p.add_argument("--doc", required=True, help="chat document file (JSONL turns)")
    p.add_argument("--k", type=int, default=5, help="history turns (stream) or shots (fewshot)")
    p.add_argument("--before", type=int, default=2, help="context turns before the query")
    p.add_argument("--after", type=int, default=2, help="context turns after the query")
    p.add_argument(
        "--exclude-query-context",
        action="store_true",
        help="drop the query turn's own line from the context window",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["jsonl", "text"], default="jsonl")
    p.add_argument(
        "--separator",
        default="----",
        help="record separator line for --format text",
    )
    p.set_defaults(func=cmd_prompts)

    return parser


def _add_filter_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-ratio", type=float, default=9.0, help="token length ratio cap")
    parser.add_argument("--min-tokens", type=int, default=1)
    parser.add_argument("--max-tokens", type=int, default=250)
    parser.add_argument("--dedup", action="store_true", help="drop exact duplicate pairs")
    parser.add_argument(
        "--no-meta",
        dest="write_meta",
        action="store_false",
        default=True,
        help="skip the .meta provenance file",
    )


def _filter_config(args: argparse.Namespace) -> selftrain.FilterConfig:
    return selftrain.FilterConfig(
        max_length_ratio=args.max_ratio,
        min_tokens=args.min_tokens,
        max_tokens=args.max_tokens,
        dedup=args.dedup,
    )


def cmd_mbr(args: argparse.Namespace) -> int:
    if args.utility == "external":
        if not args.external_cmd:
            raise UsageError("--utility external requires --external-cmd")
        spec = mbr.UtilitySpec(
            kind="external",
            include_self=args.include_self,
            bridge=BridgeConfig(
                command=tuple(shlex.split(args.external_cmd)),
                batch_size=args.bridge_batch_size,
                timeout=args.bridge_timeout,
                restart_on_failure=args.bridge_restart,
            ),
        )
    else:
        spec = mbr.UtilitySpec(
            kind=f"native-{args.utility}", include_self=args.include_self
        )
    cset = mbr.load_candidates(args.cand, args.src)
    log.info(
        "selecting over %d segments x %d systems", cset.num_segments, cset.num_systems
    )
    matrices = mbr.segment_matrices(cset, spec, workers=args.workers)
    selection = mbr.selection_from_matrices(cset, matrices)
    write_segments(args.out, list(selection.chosen))
    if args.matrix_out:
        atomic_write_text(args.matrix_out, mbr.format_matrix_dump(matrices))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    hyps = read_segments(args.hyp)
    refs = read_segments(args.ref)
    require_aligned({args.hyp: len(hyps), args.ref: len(refs)})
    if not hyps:
        raise DataError("cannot score an empty corpus")
    if args.metric == "bleu":
        smoothing = args.smoothing or ("add-k" if args.sentence_level else "none")
        hyp_tokens = [metrics.tokenize(h, args.tokenize) for h in hyps]
        ref_tokens = [metrics.tokenize(r, args.tokenize) for r in refs]
        if args.sentence_level:
            def score_one(pair):
                hyp, ref = pair
                return metrics.sentence_bleu(hyp, [ref], smoothing=smoothing).value

            values = _map_segments(score_one, list(zip(hyp_tokens, ref_tokens)), args.workers)
            for value in values:
                print(f"{value:.2f}")
        else:
            print(f"{metrics.corpus_bleu(hyp_tokens, ref_tokens, smoothing=smoothing).value:.2f}")
    else:
        if args.sentence_level:
            values = _map_segments(
                lambda pair: metrics.sentence_chrf(pair[0], pair[1]).value,
                list(zip(hyps, refs)),
                args.workers,
            )
            for value in values:
                print(f"{value:.2f}")
        else:
            print(f"{metrics.corpus_chrf(hyps, refs).value:.2f}")
    return EXIT_OK


def _map_segments(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_build_st(args: argparse.Namespace) -> int:
    sources = read_segments(args.src)
    translations = read_segments(args.mt)
    corpus = selftrain.build_st_corpus(sources, translations, _filter_config(args))
    selftrain.write_corpus(corpus, args.out_prefix, write_meta=args.write_meta)
    log.info("kept %d of %d pairs", len(corpus), len(sources))
    return EXIT_OK


def cmd_build_bt(args: argparse.Namespace) -> int:
    targets = read_segments(args.tgt)
    back = read_segments(args.bt)
    corpus = selftrain.build_bt_corpus(targets, back, tag=args.tag, config=_filter_config(args))
    selftrain.write_corpus(corpus, args.out_prefix, write_meta=args.write_meta)
    log.info("kept %d of %d pairs", len(corpus), len(targets))
    return EXIT_OK


def cmd_merge(args: argparse.Namespace) -> int:
    corpora = [selftrain.read_corpus(prefix) for prefix in args.inputs]
    merged = selftrain.merge_corpora(corpora, shuffle_seed=args.seed)
    selftrain.write_corpus(merged, args.out_prefix, write_meta=True)
    return EXIT_OK


def cmd_avg(args: argparse.Namespace) -> int:
    stores = [checkpoint.TensorStore.load(path) for path in args.inputs]
    checkpoint.average_checkpoints(stores).save(args.out)
    return EXIT_OK


def cmd_lora_merge(args: argparse.Namespace) -> int:
    base = checkpoint.TensorStore.load(args.base)
    adapter = checkpoint.adapter_from_store(
        checkpoint.TensorStore.load(args.adapter), alpha=args.alpha
    )
    checkpoint.lora_merge(base, adapter).save(args.out)
    return EXIT_OK


def _fewshot_records(doc: promptgen.ChatDocument, k: int):
    for index, turn in enumerate(doc.turns):
        pool = [
            (other.source, other.reference)
            for pos, other in enumerate(doc.turns)
            if pos != index
            and other.reference is not None
            and (other.src_lang, other.tgt_lang) == (turn.src_lang, turn.tgt_lang)
        ]
        prompt = promptgen.render_fewshot(
            pool, turn.source, (turn.src_lang, turn.tgt_lang), k=k
        )
        if turn.reference is not None:
            prompt = promptgen.RenderedPrompt(prompt.text, turn.reference)
        yield index, prompt


def cmd_prompts(args: argparse.Namespace) -> int:
    documents = promptgen.read_chat_documents(args.doc)
    if not documents:
        raise DataError(f"no chat turns found in {args.doc}")
    records: list[tuple[str, int, promptgen.RenderedPrompt]] = []
    for doc in documents:
        if args.mode == "stream":
            rendered = (
                (i, promptgen.render_stream(doc, i, args.k))
                for i in range(len(doc.turns))
            )
        elif args.mode == "context":
            rendered = (
                (
                    i,
                    promptgen.render_context(
                        doc,
                        i,
                        args.before,
                        args.after,
                        include_query_context=not args.exclude_query_context,
                    ),
                )
                for i in range(len(doc.turns))
            )
        else:
            rendered = _fewshot_records(doc, args.k)
        for index, prompt in rendered:
            records.append((doc.doc_id, index, prompt))
    if args.format == "jsonl":
        lines = [
            json.dumps(
                {
                    "doc_id": doc_id,
                    "turn_index": index,
                    "text": prompt.text,
                    "completion": prompt.completion,
                },
                ensure_ascii=False,
            )
            for doc_id, index, prompt in records
        ]
        atomic_write_text(args.out, "".join(line + "\n" for line in lines))
    else:
        chunks = [
            prompt.text + prompt.completion + "\n" + args.separator + "\n"
            for _doc_id, _index, prompt in records
        ]
        atomic_write_text(args.out, "".join(chunks))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BridgeError as exc:
        print(f"mbrforge: bridge error: {exc}", file=sys.stderr)
        return EXIT_BRIDGE
    except MbrforgeError as exc:
        print(f"mbrforge: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"mbrforge: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
