#!/usr/bin/env python3
"""End-to-end walkthrough of the toolkit on toy data.

Builds a small working directory, then drives every stage through the
same CLI entry points a real experiment would use: candidate selection,
corpus evaluation, self-training and back-translation corpus
construction, corpus merging, checkpoint averaging, adapter merging and
prompt rendering.  Finishes by re-running selection through the
external scorer bridge and checking it reproduces the native result
byte for byte.

    python3 scripts/demo_pipeline.py --workdir /tmp/demo
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

import numpy as np

from mbrforge import cli
from mbrforge.checkpoint import TensorStore

SOURCES = [
    "the cat sat on the mat",
    "a dog ran home",
    "please confirm the order",
    "the train is late again",
]
CANDIDATES = {
    "beam": [
        "die Katze sass auf der Matte",
        "ein Hund lief nach Hause",
        "bitte bestaetigen Sie die Bestellung",
        "der Zug ist schon wieder zu spaet",
    ],
    "sample1": [
        "die Katze sass auf der Matte",
        "ein Hund rannte heim",
        "bitte die Bestellung bestaetigen",
        "der Zug ist wieder verspaetet",
    ],
    "sample2": [
        "eine Katze auf einer Matte",
        "ein Hund lief nach Hause",
        "bitte bestaetigen Sie die Bestellung",
        "der Zug ist schon wieder zu spaet",
    ],
}
REFERENCES = [
    "die Katze sass auf der Matte",
    "ein Hund lief nach Hause",
    "bitte bestaetigen Sie die Bestellung",
    "der Zug hat schon wieder Verspaetung",
]
CHAT_TURNS = [
    {
        "doc_id": "demo", "turn_index": 0, "speaker": "customer",
        "src_lang": "English", "tgt_lang": "German",
        "source": "My package has not arrived.",
        "mt": "Mein Paket ist nicht angekommen.",
        "reference": "Mein Paket ist noch nicht angekommen.",
    },
    {
        "doc_id": "demo", "turn_index": 1, "speaker": "agent",
        "src_lang": "German", "tgt_lang": "English",
        "source": "Ich schaue sofort nach.",
        "mt": "I look immediately.",
        "reference": "I will check right away.",
    },
    {
        "doc_id": "demo", "turn_index": 2, "speaker": "customer",
        "src_lang": "English", "tgt_lang": "German",
        "source": "Thank you, I will wait.",
        "mt": "Danke, ich werde warten.",
        "reference": "Danke, ich warte.",
    },
    {
        "doc_id": "demo", "turn_index": 3, "speaker": "agent",
        "src_lang": "German", "tgt_lang": "English",
        "source": "Es wird morgen zugestellt.",
        "mt": "It becomes delivered tomorrow.",
        "reference": "It will be delivered tomorrow.",
    },
    {
        "doc_id": "demo", "turn_index": 4, "speaker": "customer",
        "src_lang": "English", "tgt_lang": "German",
        "source": "That is great news.",
        "mt": "Das sind tolle Neuigkeiten.",
        "reference": "Das sind grossartige Neuigkeiten.",
    },
    {
        "doc_id": "demo", "turn_index": 5, "speaker": "agent",
        "src_lang": "German", "tgt_lang": "English",
        "source": "Gern geschehen, einen schoenen Tag.",
        "mt": "Gladly done, a nice day.",
        "reference": "You are welcome, have a nice day.",
    },
]


def run(argv: list[str]) -> None:
    print(f"$ mbrforge {shlex.join(argv)}")
    rc = cli.main(argv)
    if rc != 0:
        raise SystemExit(f"step failed with exit code {rc}")


def write_lines(path: Path, lines: list[str]) -> Path:
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", type=Path, default=Path("demo_out"))
    args = parser.parse_args()
    work = args.workdir
    work.mkdir(parents=True, exist_ok=True)

    src = write_lines(work / "test.src", SOURCES)
    ref = write_lines(work / "test.ref", REFERENCES)
    cand_paths = [
        write_lines(work / f"cand.{system}.txt", lines)
        for system, lines in CANDIDATES.items()
    ]

    # 1. pick one candidate per segment by pairwise chrF agreement
    selected = work / "selected.txt"
    argv = ["mbr", "--src", str(src)]
    for path in cand_paths:
        argv += ["--cand", str(path)]
    argv += ["--out", str(selected), "--matrix-out", str(work / "matrix.tsv")]
    run(argv)
    for line in selected.read_text().splitlines():
        print(f"  selected: {line}")

    # 2. score the selection against the references
    run(["eval", "--hyp", str(selected), "--ref", str(ref), "--metric", "chrf"])
    run(["eval", "--hyp", str(selected), "--ref", str(ref), "--metric", "bleu"])

    # 3. forward corpus from the selection, backward corpus with a tag
    run([
        "build-st", "--src", str(src), "--mt", str(selected),
        "--out-prefix", str(work / "st"),
    ])
    mono_tgt = write_lines(work / "mono.tgt", REFERENCES[:2])
    mono_bt = write_lines(work / "mono.bt", SOURCES[:2])
    run([
        "build-bt", "--tgt", str(mono_tgt), "--bt", str(mono_bt),
        "--out-prefix", str(work / "bt"),
    ])
    run([
        "merge", "--inputs", str(work / "st"), str(work / "bt"),
        "--out-prefix", str(work / "mix"), "--seed", "13",
    ])
    print(f"  merged {len((work / 'mix.src').read_text().splitlines())} pairs")

    # 4. average two checkpoints, then fold in a low-rank adapter
    rng = np.random.default_rng(0)
    for k in (1, 2):
        store = TensorStore()
        store.add("enc.w", rng.normal(size=(4, 4)).astype(np.float32))
        store.add("dec.w", rng.normal(size=(4, 2)).astype(np.float32))
        (work / f"ckpt{k}.tsf").write_bytes(store.serialize())
    run([
        "avg", "--inputs", str(work / "ckpt1.tsf"), str(work / "ckpt2.tsf"),
        "--out", str(work / "avg.tsf"),
    ])
    adapter = TensorStore()
    adapter.add("enc.w.lora_A", rng.normal(size=(2, 4)).astype(np.float32))
    adapter.add("enc.w.lora_B", rng.normal(size=(4, 2)).astype(np.float32))
    (work / "adapter.tsf").write_bytes(adapter.serialize())
    run([
        "lora-merge", "--base", str(work / "avg.tsf"),
        "--adapter", str(work / "adapter.tsf"), "--alpha", "4",
        "--out", str(work / "merged.tsf"),
    ])
    merged = TensorStore.parse((work / "merged.tsf").read_bytes())
    print(f"  merged checkpoint tensors: {', '.join(merged.names())}")

    # 5. prompts from a short support chat, one file per layout
    chat = work / "chat.jsonl"
    chat.write_text(
        "".join(json.dumps(turn, ensure_ascii=False) + "\n" for turn in CHAT_TURNS),
        encoding="utf-8",
    )
    for mode in ("stream", "context", "fewshot"):
        out = work / f"prompts.{mode}.jsonl"
        argv = ["prompts", "--mode", mode, "--doc", str(chat), "--out", str(out)]
        if mode == "fewshot":
            argv += ["--k", "2"]
        run(argv)

    # 6. same selection through a subprocess scorer must match exactly
    scorer = Path(__file__).with_name("chrf_scorer.py")
    external = work / "selected.external.txt"
    argv = ["mbr", "--src", str(src)]
    for path in cand_paths:
        argv += ["--cand", str(path)]
    argv += [
        "--utility", "external",
        "--external-cmd", f"{sys.executable} {scorer}",
        "--out", str(external),
    ]
    run(argv)
    if external.read_bytes() != selected.read_bytes():
        raise SystemExit("external scorer disagreed with native selection")
    print("  external bridge reproduced the native selection byte for byte")

    print(f"done, outputs in {work}/")


if __name__ == "__main__":
    main()
