"""Prompt construction and dispatch to a pluggable completion backend.

Three backends share one contract: `mock` (canned callable, for tests and
oracles), `replay` (JSONL cassette keyed by prompt SHA-256, for fully
offline deterministic runs), and `http` (a generic completions-style JSON
endpoint). The gateway reports facts only; what to do with an unparseable
completion is the router's policy decision.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import requests

PARSE_WINDOW = 32  # completion characters scanned for a class name

DEFAULT_INSTRUCTION = (
    "Classify the sentiment of the following text in the input tag as {classes}:"
)
DEFAULT_EXEMPLARS = (
    ("I love you.", "positive"),
    ("The product is bad.", "negative"),
)
DEFAULT_QUERY_SLOT = "<input> {text}\n<output>"


class GatewayError(ValueError):
    """Configuration/template errors."""


class BackendError(RuntimeError):
    """Transport-level failure from a completion backend."""


@dataclass(frozen=True)
class PromptTemplate:
    instruction: str = DEFAULT_INSTRUCTION
    exemplars: tuple[tuple[str, str], ...] = DEFAULT_EXEMPLARS
    query_slot: str = DEFAULT_QUERY_SLOT

    def __post_init__(self):
        if self.query_slot.count("{text}") != 1:
            raise GatewayError("query_slot must contain exactly one {text} marker")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    endpoint: str = ""
    model: str = ""
    max_tokens: int = 32
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 2
    max_concurrent: int = 4
    cassette: str = ""
    mock_completion: str = ""
    response_path: str = "choices[0].text"

    def __post_init__(self):
        if self.kind not in ("mock", "replay", "http"):
            raise GatewayError(f"unknown backend kind {self.kind!r}")
        if self.max_concurrent < 1:
            raise GatewayError("max_concurrent must be >= 1")
        if self.max_retries < 0:
            raise GatewayError("max_retries must be >= 0")
        if self.temperature < 0:
            raise GatewayError("temperature must be >= 0")


@dataclass(frozen=True)
class LlmVerdict:
    doc_id: str
    raw_completion: str
    parsed_label: int | None  # None = UNPARSED
    latency: float
    attempts: int
    error: str = ""


def render_prompt(template: PromptTemplate, classes: tuple[str, ...] | list[str],
                  text: str) -> str:
    """Render instruction, exemplar blocks, and the query block; byte-deterministic."""
    if not text.strip():
        raise GatewayError("cannot render a prompt for empty text")
    for _, ex_class in template.exemplars:
        if ex_class not in classes:
            raise GatewayError(f"exemplar class {ex_class!r} not in corpus classes")
    blocks = [template.instruction.replace("{classes}", " or ".join(classes))]
    for ex_text, ex_class in template.exemplars:
        blocks.append(f"<input> {ex_text}\n<output> {ex_class}.")
    blocks.append(template.query_slot.replace("{text}", text))
    return "\n".join(blocks)


def parse_completion(completion: str, classes: tuple[str, ...] | list[str]) -> int | None:
    """Earliest case-insensitive class name in the first PARSE_WINDOW chars.

    Position ties (one class name a prefix of another) break to the lowest
    class index. Returns None when no class name occurs.
    """
    window = completion[:PARSE_WINDOW].lower()
    best: tuple[int, int] | None = None
    for idx, name in enumerate(classes):
        pos = window.find(name.lower())
        if pos >= 0 and (best is None or (pos, idx) < best):
            best = (pos, idx)
    return best[1] if best else None


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class CompletionBackend:
    """Base: subclasses implement complete(prompt) -> completion text."""

    deterministic = False

    def __init__(self, config: BackendConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        raise NotImplementedError


class MockBackend(CompletionBackend):
    deterministic = True

    def __init__(self, completion: str | Callable[[str], str],
                 config: BackendConfig | None = None):
        super().__init__(config or BackendConfig(kind="mock"))
        self._fn = completion if callable(completion) else (lambda _prompt: completion)

    def complete(self, prompt: str) -> str:
        return self._fn(prompt)


class ReplayBackend(CompletionBackend):
    deterministic = True

    def __init__(self, cassette: dict[str, str] | str | Path,
                 config: BackendConfig | None = None):
        super().__init__(config or BackendConfig(kind="replay"))
        self._table = cassette if isinstance(cassette, dict) else load_cassette(cassette)

    def complete(self, prompt: str) -> str:
        digest = prompt_sha256(prompt)
        if digest not in self._table:
            raise BackendError(f"cassette has no completion for prompt hash {digest[:12]}")
        return self._table[digest]


class HttpBackend(CompletionBackend):
    def __init__(self, config: BackendConfig):
        super().__init__(config)
        if not config.endpoint:
            raise GatewayError("http backend requires an endpoint")
        self._path = _parse_response_path(config.response_path)

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.config.model,
            "prompt": prompt,
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
        }
        try:
            resp = requests.post(self.config.endpoint, json=payload,
                                 timeout=self.config.timeout)
            resp.raise_for_status()
            data = resp.json()
        except requests.RequestException as exc:
            raise BackendError(f"completion request failed: {exc}") from exc
        try:
            return str(_walk_response_path(data, self._path))
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(
                f"response missing field {self.config.response_path!r}"
            ) from exc


def _parse_response_path(path: str) -> list[str | int]:
    # "choices[0].text" -> ["choices", 0, "text"]
    steps: list[str | int] = []
    for part in path.split("."):
        while "[" in part:
            head, _, rest = part.partition("[")
            if head:
                steps.append(head)
            idx, _, part = rest.partition("]")
            steps.append(int(idx))
        if part:
            steps.append(part)
    return steps


def _walk_response_path(data, steps: list[str | int]):
    for step in steps:
        data = data[step]
    return data


def build_backend(config: BackendConfig) -> CompletionBackend:
    if config.kind == "mock":
        return MockBackend(config.mock_completion, config)
    if config.kind == "replay":
        if not config.cassette:
            raise GatewayError("replay backend requires a cassette path")
        return ReplayBackend(config.cassette, config)
    return HttpBackend(config)


def classify(backend: CompletionBackend, prompt: str,
             classes: tuple[str, ...] | list[str], doc_id: str = "") -> LlmVerdict:
    """One completion call with retries; never raises on transport failure."""
    max_attempts = backend.config.max_retries + 1
    last_error = ""
    for attempt in range(1, max_attempts + 1):
        start = time.monotonic()
        try:
            completion = backend.complete(prompt)
        except Exception as exc:  # any backend failure counts as one attempt
            last_error = str(exc)
            continue
        latency = 0.0 if backend.deterministic else time.monotonic() - start
        return LlmVerdict(doc_id=doc_id, raw_completion=completion,
                          parsed_label=parse_completion(completion, classes),
                          latency=latency, attempts=attempt)
    return LlmVerdict(doc_id=doc_id, raw_completion="", parsed_label=None,
                      latency=0.0, attempts=max_attempts, error=last_error)


def classify_batch(backend: CompletionBackend, prompts: list[str],
                   classes: tuple[str, ...] | list[str],
                   doc_ids: list[str] | None = None) -> list[LlmVerdict]:
    """Dispatch prompts with at most max_concurrent in flight; output in input order."""
    if not prompts:
        raise GatewayError("classify_batch requires a non-empty prompt list")
    ids = doc_ids if doc_ids is not None else [""] * len(prompts)
    if len(ids) != len(prompts):
        raise GatewayError("doc_ids must align with prompts")
    with ThreadPoolExecutor(max_workers=backend.config.max_concurrent) as pool:
        return list(pool.map(lambda i: classify(backend, prompts[i], classes, ids[i]),
                             range(len(prompts))))


def load_cassette(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise GatewayError(f"cassette not found: {path}")
    table: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                table[rec["prompt_sha256"]] = rec["completion"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise GatewayError(f"{path}:{lineno}: malformed cassette entry") from exc
    return table


def write_cassette(entries: dict[str, str], path: str | Path) -> None:
    """Entries map prompt SHA-256 -> completion; written sorted for stable bytes."""
    lines = [
        json.dumps({"prompt_sha256": k, "completion": v}, separators=(",", ":"))
        for k, v in sorted(entries.items())
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
