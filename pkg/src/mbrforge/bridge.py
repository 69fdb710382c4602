"""Client for external scorer processes (e.g. a neural metric server).

Wire protocol, chosen for trivial scorer-side implementation: every
request is one line on the child's standard input with the fields
``src``, ``mt``, ``ref`` separated by a single TAB; tabs, newlines and
backslashes inside fields are escaped as ``\\t``, ``\\n``, ``\\\\``.  A blank
line flushes a batch.  The child replies one decimal number per line on
standard output, in request order.

One client owns one child process and must not be shared by concurrent
writers; run one client per worker instead.
"""

from __future__ import annotations

import queue
import subprocess
import sys
import threading
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

from .errors import (
    BridgeCrashError,
    BridgeTimeoutError,
    DataError,
    ProtocolError,
)

MAX_BATCH_SIZE = 4096

_EOF = object()


def escape_field(text: str) -> str:
    """Escape backslash, TAB and LF so a field fits on one line."""
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def unescape_field(text: str) -> str:
    """Inverse of escape_field; left-to-right, unknown escapes are literal."""
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "t":
                out.append("\t")
                i += 2
                continue
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


@dataclass(frozen=True)
class ScoreRequest:
    src: str
    mt: str
    ref: str

    def __post_init__(self) -> None:
        if self.mt == "":
            raise DataError("score request with empty mt field")

    def encode(self) -> str:
        return "\t".join(
            (escape_field(self.src), escape_field(self.mt), escape_field(self.ref))
        )


def decode_request(line: str) -> ScoreRequest:
    parts = line.split("\t")
    if len(parts) != 3:
        raise ProtocolError(f"expected 3 tab-separated fields, got {len(parts)}")
    src, mt, ref = (unescape_field(p) for p in parts)
    return ScoreRequest(src, mt, ref)


@dataclass(frozen=True)
class BridgeConfig:
    """How to spawn and talk to a scorer process."""

    command: tuple[str, ...]
    batch_size: int = 32
    timeout: float = 60.0  # seconds to wait for each reply line
    restart_on_failure: bool = True

    def __post_init__(self) -> None:
        if not self.command:
            raise DataError("bridge command must not be empty")
        if not 1 <= self.batch_size <= MAX_BATCH_SIZE:
            raise DataError(
                f"batch_size must be in 1..{MAX_BATCH_SIZE}, got {self.batch_size}"
            )
        if self.timeout <= 0:
            raise DataError("timeout must be positive")


class BridgeClient:
    """Owns one scorer process; replays unanswered requests after a crash.

    A reader thread drains the child's stdout into a queue so reply waits
    can time out without blocking forever on a pipe.
    """

    def __init__(self, config: BridgeConfig):
        self.config = config
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._spawn()

    def _spawn(self) -> None:
        try:
            self._proc = subprocess.Popen(
                list(self.config.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise BridgeCrashError(
                f"cannot spawn scorer {self.config.command[0]!r}: {exc}"
            ) from exc
        self._lines = queue.Queue()
        thread = threading.Thread(
            target=self._drain, args=(self._proc.stdout, self._lines), daemon=True
        )
        thread.start()

    @staticmethod
    def _drain(stream: TextIO, sink: queue.Queue) -> None:
        for line in stream:
            sink.put(line)
        sink.put(_EOF)

    def close(self) -> None:
        proc = self._proc
        if proc is None:
            return
        self._proc = None
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()

    def __enter__(self) -> "BridgeClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def score(self, requests: Sequence[ScoreRequest]) -> list[float]:
        """Score all requests, chunked by the configured batch size."""
        scores: list[float] = []
        for start in range(0, len(requests), self.config.batch_size):
            chunk = requests[start : start + self.config.batch_size]
            scores.extend(self._score_chunk(chunk, start))
        return scores

    def _score_chunk(
        self, chunk: Sequence[ScoreRequest], base_index: int
    ) -> list[float]:
        restarts_left = 1 if self.config.restart_on_failure else 0
        answered: list[float] = []
        while True:
            pending = list(chunk)[len(answered) :]
            try:
                self._send_and_collect(pending, base_index + len(answered), answered)
                return answered
            except BridgeCrashError:
                # Replies received before the crash are kept; only the
                # unanswered remainder is replayed after the restart.
                if restarts_left == 0:
                    raise BridgeCrashError(
                        f"scorer exited with {len(chunk) - len(answered)} of "
                        f"{len(chunk)} requests unanswered "
                        f"(batch starting at {base_index})"
                    ) from None
                restarts_left -= 1
                self.close()
                self._spawn()

    def _send_and_collect(
        self,
        requests: Sequence[ScoreRequest],
        first_index: int,
        sink: list[float],
    ) -> None:
        proc = self._proc
        assert proc is not None and proc.stdin is not None
        try:
            for req in requests:
                proc.stdin.write(req.encode() + "\n")
            proc.stdin.write("\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeCrashError(f"scorer pipe closed while writing: {exc}") from exc
        for offset in range(len(requests)):
            try:
                item = self._lines.get(timeout=self.config.timeout)
            except queue.Empty:
                raise BridgeTimeoutError(
                    f"scorer gave no reply for request {first_index + offset} "
                    f"within {self.config.timeout}s"
                ) from None
            if item is _EOF:
                raise BridgeCrashError("scorer closed its output mid-batch")
            line = item.rstrip("\n")
            try:
                value = float(line)
            except ValueError:
                raise ProtocolError(
                    f"scorer reply is not a number: {line!r}"
                ) from None
            sink.append(value)


def score_batch(
    requests: Sequence[ScoreRequest], config: BridgeConfig
) -> list[float]:
    """One-shot convenience: spawn, score, shut down."""
    with BridgeClient(config) as client:
        return client.score(requests)


def run_scorer_loop(
    score_fn: Callable[[ScoreRequest], float],
    stdin: TextIO | None = None,
    stdout: TextIO | None = None,
) -> None:
    """Serve the wire protocol; for scorer scripts and test doubles.

    Reads request lines until EOF, ignores blank flush lines, answers each
    request with ``score_fn(request)`` formatted with repr precision.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.rstrip("\n")
        if line == "":
            stdout.flush()
            continue
        request = decode_request(line)
        stdout.write(f"{score_fn(request)!r}\n")
        stdout.flush()
