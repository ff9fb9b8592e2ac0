"""Gateway to the chat-completion endpoint.

Three call modes keep experiments reproducible:

- live: call the endpoint, return the response, store nothing;
- record: call the endpoint and append the exchange to a transcript
  cache keyed by a content hash of (stage, model, temperature, prompt);
- replay: serve responses from the cache only, never touching the
  network, and fail loudly on a miss.

The cache file is append-only JSON lines, safe for a single process with
many worker threads (writes are serialised through a lock; the last
record for a key wins on load).
"""

import hashlib
import json
import logging
import os
import re
import string
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import requests

from .llmtypes import StageKind
from .prompts import TEMPLATES
from .theory import ProofStep, StepKind, parse_proof_line

log = logging.getLogger(__name__)

MODES = ("live", "record", "replay")


class GatewayError(Exception):
    """Base class for gateway failures."""


class HttpError(GatewayError):
    """The endpoint kept failing after all retries (or failed hard)."""

    def __init__(self, detail: str, status: Optional[int] = None):
        self.status = status
        super().__init__(detail)


class _TransientHttpError(HttpError):
    """Retryable: transport trouble or a 429/5xx response."""


class CacheMiss(GatewayError):
    """Replay mode found no transcript for the requested key."""


class TemplateUnbound(GatewayError):
    """A template placeholder was missing from the bindings."""

    def __init__(self, stage: StageKind, names: Sequence[str]):
        self.stage = stage
        self.names = tuple(names)
        super().__init__(
            "stage %s is missing bindings: %s" % (stage.value, ", ".join(names))
        )


class MalformedStageOutput(GatewayError):
    """A stage response did not follow its output contract."""

    def __init__(self, stage: StageKind, reason: str):
        self.stage = stage
        self.reason = reason
        super().__init__("stage %s output malformed: %s" % (stage.value, reason))


@dataclass(frozen=True)
class LLMConfig:
    endpoint: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 2048
    per_stage_overrides: Mapping[StageKind, str] = field(default_factory=dict)
    retry_attempts: int = 3
    backoff_base_s: float = 1.0
    http_timeout_s: float = 120.0
    api_key_env: str = "VERIFINE_API_KEY"

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        object.__setattr__(
            self, "per_stage_overrides", dict(self.per_stage_overrides)
        )

    def model_for(self, stage: StageKind) -> str:
        return self.per_stage_overrides.get(stage, self.model_name)


@dataclass(frozen=True)
class Transcript:
    key: str
    prompt: str
    response: str
    timestamp: str


class TranscriptCache:
    """Append-only JSONL store of prompt/response exchanges."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._entries: Dict[str, Transcript] = {}
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    entry = Transcript(
                        record["key"],
                        record["prompt"],
                        record["response"],
                        record["timestamp"],
                    )
                    self._entries[entry.key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[Transcript]:
        return self._entries.get(key)

    def put(self, entry: Transcript):
        with self._lock:
            self._entries[entry.key] = entry
            directory = os.path.dirname(self.path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {
                            "key": entry.key,
                            "prompt": entry.prompt,
                            "response": entry.response,
                            "timestamp": entry.timestamp,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )


def transcript_key(
    stage: StageKind, prompt: str, model: str, temperature: float
) -> str:
    payload = "\x1f".join([stage.value, model, "%.6f" % temperature, prompt])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def render_prompt(stage: StageKind, bindings: Mapping[str, str]) -> str:
    """Fill the stage template; unbound placeholders raise TemplateUnbound."""
    template = TEMPLATES[stage]
    needed = {
        name
        for _, name, _, _ in string.Formatter().parse(template)
        if name is not None
    }
    missing = sorted(name for name in needed if name not in bindings)
    if missing:
        raise TemplateUnbound(stage, missing)
    return template.format(**{name: bindings[name] for name in needed})


# ---------------------------------------------------------------------------
# Transport

Transport = Callable[[dict], str]


def http_transport(request: dict) -> str:
    """POST a chat-completion request; returns the message content."""
    headers = {"Content-Type": "application/json"}
    if request.get("api_key"):
        headers["Authorization"] = "Bearer %s" % request["api_key"]
    body = {
        "model": request["model"],
        "messages": [{"role": "user", "content": request["prompt"]}],
        "temperature": request["temperature"],
        "max_tokens": request["max_tokens"],
    }
    try:
        response = requests.post(
            request["endpoint"],
            json=body,
            headers=headers,
            timeout=request["http_timeout"],
        )
    except requests.RequestException as exc:
        raise _TransientHttpError("transport failure: %s" % exc)
    if response.status_code == 429 or response.status_code >= 500:
        raise _TransientHttpError(
            "endpoint returned %d" % response.status_code, response.status_code
        )
    if response.status_code != 200:
        raise HttpError(
            "endpoint returned %d: %s" % (response.status_code, response.text[:200]),
            response.status_code,
        )
    try:
        payload = response.json()
        return payload["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise HttpError("unexpected response shape: %s" % exc)


def _call_with_retries(transport: Transport, request: dict, cfg: LLMConfig) -> str:
    """One initial call plus up to cfg.retry_attempts retries with backoff."""
    delay = cfg.backoff_base_s
    last: Optional[HttpError] = None
    for attempt in range(cfg.retry_attempts + 1):
        try:
            return transport(request)
        except _TransientHttpError as exc:
            last = exc
            if attempt == cfg.retry_attempts:
                break
            log.warning(
                "stage %s attempt %d failed (%s); backing off %.2fs",
                request.get("stage"),
                attempt + 1,
                exc,
                delay,
            )
            time.sleep(delay)
            delay *= 2
    raise HttpError(
        "gave up after %d attempts: %s" % (cfg.retry_attempts + 1, last),
        getattr(last, "status", None),
    )


def complete(
    stage: StageKind,
    bindings: Mapping[str, str],
    cfg: LLMConfig,
    mode: str = "live",
    cache: Optional[TranscriptCache] = None,
    transport: Optional[Transport] = None,
) -> str:
    """Run one prompt stage and return the raw model response."""
    if mode not in MODES:
        raise ValueError("mode must be one of %s" % (MODES,))
    prompt = render_prompt(stage, bindings)
    model = cfg.model_for(stage)
    key = transcript_key(stage, prompt, model, cfg.temperature)
    if mode == "replay":
        if cache is None:
            raise CacheMiss("replay mode requires a transcript cache")
        entry = cache.get(key)
        if entry is None:
            raise CacheMiss(
                "no transcript for stage %s (key %s)" % (stage.value, key[:12])
            )
        return entry.response
    request = {
        "stage": stage.value,
        "endpoint": cfg.endpoint,
        "model": model,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
        "prompt": prompt,
        "http_timeout": cfg.http_timeout_s,
        "api_key": os.environ.get(cfg.api_key_env, ""),
    }
    response = _call_with_retries(transport or http_transport, request, cfg)
    if mode == "record":
        if cache is None:
            raise ValueError("record mode requires a transcript cache")
        cache.put(
            Transcript(
                key,
                prompt,
                response,
                datetime.now(timezone.utc).isoformat(),
            )
        )
    return response


# ---------------------------------------------------------------------------
# Stage output extraction

def last_fenced_block(raw: str) -> Optional[str]:
    """Content of the last ``` fenced block, or None when there is none."""
    lines = raw.split("\n")
    blocks: List[Tuple[int, int]] = []
    open_at: Optional[int] = None
    for idx, line in enumerate(lines):
        if line.strip().startswith("```"):
            if open_at is None:
                open_at = idx
            else:
                blocks.append((open_at, idx))
                open_at = None
    if not blocks:
        return None
    start, end = blocks[-1]
    return "\n".join(lines[start + 1 : end])


def _split_ids(text: str) -> List[str]:
    tokens = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    for token in tokens:
        if not re.fullmatch(r"[A-Za-z0-9_]+", token):
            raise ValueError("not an id: %r" % token)
    return tokens


def _strip_bullet(line: str) -> str:
    return re.sub(r"^\s*(?:[-*•]|\d+[.)])\s*", "", line).strip()


def extract_stage_output(stage: StageKind, raw: str):
    """Parse a raw model response into the stage's typed payload.

    Total over arbitrary text: the only exception this ever raises is
    MalformedStageOutput.
    """
    try:
        block = last_fenced_block(raw)
        if block is None:
            raise ValueError("no fenced code block in response")
        return _parse_block(stage, block)
    except MalformedStageOutput:
        raise
    except Exception as exc:
        raise MalformedStageOutput(stage, str(exc))


def _parse_block(stage: StageKind, block: str):
    text = block.strip()
    if stage is StageKind.DETECT_EVENTS:
        result: List[Tuple[str, List[str]]] = []
        for line in text.split("\n"):
            line = line.strip()
            if not line:
                continue
            head, sep, rest = line.partition(":")
            if not sep or not head.strip().split():
                raise ValueError("expected `<id>: verbs` lines, got %r" % line)
            sentence_id = head.strip()
            verbs = [v for v in rest.replace(",", " ").split() if v]
            result.append((sentence_id, verbs))
        return result
    if stage is StageKind.SENTENCE_TO_LOGIC:
        if not text:
            raise ValueError("empty formula")
        return " ".join(text.split("\n")).strip()
    if stage in (
        StageKind.LOGIC_TO_AXIOMS,
        StageKind.BUILD_THEOREM_CODE,
        StageKind.REFINE_SYNTAX,
    ):
        if not text:
            raise ValueError("empty theory fragment")
        return text
    if stage is StageKind.ROUGH_INFERENCE:
        narrative_lines: List[str] = []
        relevant: List[str] = []
        redundant: List[str] = []
        for line in text.split("\n"):
            stripped = line.strip()
            lowered = stripped.lower()
            if lowered.startswith("relevant:"):
                relevant = _split_ids(stripped.partition(":")[2])
            elif lowered.startswith("redundant:"):
                redundant = _split_ids(stripped.partition(":")[2])
            elif stripped:
                narrative_lines.append(stripped)
        return {
            "narrative": "\n".join(narrative_lines),
            "relevant": relevant,
            "redundant": redundant,
        }
    if stage is StageKind.CONSTRUCT_PROOF:
        steps: List[ProofStep] = []
        for line in text.split("\n"):
            stripped = line.strip()
            if not stripped or stripped in ("proof -", "proof-", "qed"):
                continue
            step = parse_proof_line(stripped)
            if step is None:
                raise ValueError("unrecognised proof line: %r" % stripped)
            steps.append(step)
        if not steps:
            raise ValueError("no proof steps")
        if steps[-1].kind is not StepKind.THEN_SHOW_THESIS:
            raise ValueError("final step must be `then show ?thesis`")
        return steps
    if stage is StageKind.FILTER_FACTS:
        if not text:
            return []
        return _split_ids(text)
    if stage is StageKind.REFINE_EXPLANATION:
        sentences = [
            _strip_bullet(line) for line in text.split("\n") if _strip_bullet(line)
        ]
        if not sentences:
            raise ValueError("no sentences in response")
        return sentences
    raise ValueError("unknown stage %r" % stage)
