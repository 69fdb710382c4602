#!/usr/bin/env python3
"""Reference external scorer for the bridge protocol.

Reads tab-separated (source, hypothesis, reference) requests on stdin
and answers one score per line.  Plug it into selection with:

    mbrforge mbr --utility external \
        --external-cmd "python3 scripts/chrf_scorer.py" ...

Swap --metric to bleu to score with tokenized BLEU instead.  The point
of this file is to be copied: replace `score` with any function of the
three fields and the pipeline picks it up unchanged.
"""

from __future__ import annotations

import argparse

from mbrforge.bridge import ScoreRequest, run_scorer_loop
from mbrforge.metrics import sentence_bleu, sentence_chrf, tokenize


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--metric", choices=("chrf", "bleu"), default="chrf")
    args = parser.parse_args()

    if args.metric == "chrf":
        def score(request: ScoreRequest) -> float:
            return sentence_chrf(request.mt, request.ref).value
    else:
        def score(request: ScoreRequest) -> float:
            return sentence_bleu(
                tokenize(request.mt), [tokenize(request.ref)], smoothing="add-k"
            ).value

    run_scorer_loop(score)


if __name__ == "__main__":
    main()
