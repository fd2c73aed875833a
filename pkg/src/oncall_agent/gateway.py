"""Single abstraction over model calls: structured chat completion, text
embedding and candidate reranking.

Two backends:

* ``ScriptedBackend`` — fully deterministic, offline.  Replies come from an
  ordered rule table (first match wins) with documented heuristic defaults
  per task, so replay runs are reproducible byte for byte.
* ``RemoteBackend`` — OpenAI-compatible HTTP contract (``/chat/completions``
  and ``/embeddings`` under a configurable base URL, bearer auth from the
  ``ONCALL_AGENT_API_KEY`` environment variable).

The gateway validates every structured reply against the request's JSON
schema; free text never leaks through where a schema was requested.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np

REFUSAL_TEXT = "Unable to answer"

# Markers the scripted backend keys on.  Fixture corpora use these to pin
# deterministic behavior without per-message rules.
RESOLUTION_MARKERS = ("workaround:", "solution:", "answer:", "resolved", "you can", "try ")
CORRECTION_MARKER = "correction:"
OBSOLETE_MARKERS = ("obsolete:", "disregard")
OUT_OF_SCOPE_MARKERS = (
    "should we",
    "should our",
    "competitor",
    "recommend a vendor",
    "business decision",
    "migrate off",
    "your opinion",
)
PHATIC_MARKERS = ("thanks", "thank you", "got it", "ok,", "okay", "hello", "hi ", "great,")
QUESTION_WORDS = (
    "how",
    "what",
    "why",
    "where",
    "when",
    "which",
    "can",
    "could",
    "is",
    "are",
    "does",
    "do",
    "will",
)


class GatewayError(Exception):
    """Base class for gateway failures."""


class GatewayTimeout(GatewayError):
    """The per-call latency budget was exceeded; callers treat it as refusal."""


class SchemaViolation(GatewayError):
    """The model reply did not satisfy the requested response schema."""


class RemoteUnavailable(GatewayError):
    """The remote endpoint could not be reached."""


class EmptyText(GatewayError):
    """embed() requires non-empty text."""


class EmptyCandidates(GatewayError):
    """rerank() requires at least one candidate."""


@dataclass
class ProviderConfig:
    backend: str = "scripted"  # "scripted" | "remote"
    endpoint: str = ""
    model_name: str = "scripted-v1"
    timeout_ms: int = 10_000
    max_retries: int = 2
    embedding_dim: int = 64

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.embedding_dim <= 0:
            raise ValueError("embedding_dim must be positive")


@dataclass
class StructuredRequest:
    task: str  # "identify" | "answered" | "rewrite" | "generate" | "review" | "extract" | "judge"
    system_prompt: str
    dialogue: List[Tuple[str, str, List[str]]]  # (role, text, attachments)
    response_schema: Dict[str, Any]

    def haystack(self) -> str:
        parts = [self.system_prompt]
        for role, text, attachments in self.dialogue:
            parts.append(text)
            parts.extend(attachments)
        return "\n".join(parts)

    def last_text(self) -> str:
        return self.dialogue[-1][1] if self.dialogue else ""


# Reply schemas, shared by callers so prompts and validation stay in sync.
SCHEMAS: Dict[str, Dict[str, Any]] = {
    "identify": {
        "type": "object",
        "properties": {
            "class": {
                "type": "string",
                "enum": ["Within Scope", "Out of Scope", "No assistance needed"],
            }
        },
        "required": ["class"],
        "additionalProperties": False,
    },
    "answered": {
        "type": "object",
        "properties": {"answered": {"type": "boolean"}},
        "required": ["answered"],
        "additionalProperties": False,
    },
    "rewrite": {
        "type": "object",
        "properties": {
            "question": {"type": "string"},
            "sub_questions": {"type": "array", "items": {"type": "string"}},
        },
        "required": ["question"],
        "additionalProperties": False,
    },
    "generate": {
        "type": "object",
        "properties": {
            "answer": {"type": "string"},
            "citations": {"type": "array", "items": {"type": "integer"}},
        },
        "required": ["answer"],
        "additionalProperties": False,
    },
    "review": {
        "type": "object",
        "properties": {
            "action": {"type": "string", "enum": ["Keep", "Delete", "Update"]},
            "new_question": {"type": "string"},
            "new_content": {"type": "string"},
        },
        "required": ["action"],
        "additionalProperties": False,
    },
    "extract": {
        "type": "object",
        "properties": {
            "found": {"type": "boolean"},
            "question": {"type": "string"},
            "answer": {"type": "string"},
        },
        "required": ["found"],
        "additionalProperties": False,
    },
    "judge": {
        "type": "object",
        "properties": {"correct": {"type": "boolean"}},
        "required": ["correct"],
        "additionalProperties": False,
    },
}


_TOKEN_RE = re.compile(r"\w+")


def _tokens(text: str) -> set:
    return set(_TOKEN_RE.findall(text.lower()))


def _jaccard(a: str, b: str) -> float:
    ta, tb = _tokens(a), _tokens(b)
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


_DOC_RE = re.compile(r"<doc_(\d+)>(.*?)</doc_\1>", re.DOTALL)
_REQUIRES_RE = re.compile(r"requires:\s*([^\n]+)")


class ScriptedBackend:
    """Deterministic offline backend.

    Replies are resolved in two steps: an ordered rule table (first match
    wins), then heuristic defaults.  A rule is a dict with keys

    * ``task``: which request kind it applies to,
    * ``contains``: substrings that must all appear in the request haystack,
    * ``last_contains``: substrings that must appear in the last dialogue text,
    * ``reply``: the structured reply to return,
    * ``error``: "timeout" | "unavailable" instead of a reply,
    * ``invalid``: return a schema-violating reply (for failure-path tests),
    * ``stall_ms``: sleep before answering (for latency-budget tests).

    Embeddings are a fixed feature hash of character trigrams, so similar
    strings land close in cosine space and identical strings coincide.
    Reranking orders candidates by token overlap with the query, ties broken
    by original index.
    """

    def __init__(self, rules: Optional[Sequence[Dict[str, Any]]] = None) -> None:
        self.rules: List[Dict[str, Any]] = list(rules or [])

    @classmethod
    def from_file(cls, path: str) -> "ScriptedBackend":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(data.get("rules", []))

    # -- structured completion -------------------------------------------

    def complete(self, req: StructuredRequest) -> Dict[str, Any]:
        hay = req.haystack()
        last = req.last_text()
        for rule in self.rules:
            if rule.get("task") != req.task:
                continue
            if any(s not in hay for s in rule.get("contains", [])):
                continue
            if any(s not in last for s in rule.get("last_contains", [])):
                continue
            if rule.get("stall_ms"):
                time.sleep(rule["stall_ms"] / 1000.0)
            err = rule.get("error")
            if err == "timeout":
                raise GatewayTimeout("scripted rule forced timeout")
            if err == "unavailable":
                raise RemoteUnavailable("scripted rule forced unavailable")
            if rule.get("invalid"):
                return {"__invalid__": True}
            return dict(rule["reply"])
        return self._default(req)

    def _default(self, req: StructuredRequest) -> Dict[str, Any]:
        handler = {
            "identify": self._default_identify,
            "answered": lambda r: {"answered": self._answered(r)},
            "rewrite": self._default_rewrite,
            "generate": self._default_generate,
            "review": self._default_review,
            "extract": self._default_extract,
            "judge": self._default_judge,
        }.get(req.task)
        if handler is None:
            raise SchemaViolation(f"scripted backend has no rule for task {req.task!r}")
        return handler(req)

    def _default_identify(self, req: StructuredRequest) -> Dict[str, Any]:
        text = req.last_text()
        low = text.lower()
        if self._answered(req):
            return {"class": "No assistance needed"}
        if not self._looks_like_question(low):
            return {"class": "No assistance needed"}
        if any(m in low for m in OUT_OF_SCOPE_MARKERS):
            return {"class": "Out of Scope"}
        return {"class": "Within Scope"}

    @staticmethod
    def _looks_like_question(low: str) -> bool:
        if any(low.startswith(m) or m in low[:24] for m in PHATIC_MARKERS) and "?" not in low:
            return False
        if "?" in low:
            return True
        first = low.split()[0] if low.split() else ""
        return first in QUESTION_WORDS or "please help" in low or "how do" in low

    def _answered(self, req: StructuredRequest) -> bool:
        """True iff the last customer message repeats an earlier question that a
        later analyst message already resolved (acknowledgment alone does not
        count)."""
        last = req.last_text()
        prior = req.dialogue[:-1]
        for i, (role, text, _a) in enumerate(prior):
            if role != "Customer":
                continue
            if _jaccard(text, last) < 0.8:
                continue
            for role2, text2, _a2 in prior[i + 1 :]:
                if role2 == "Analyst" and any(
                    m in text2.lower() for m in RESOLUTION_MARKERS
                ):
                    return True
        return False

    def _default_rewrite(self, req: StructuredRequest) -> Dict[str, Any]:
        text = req.last_text().strip()
        subs: List[str] = []
        if text.count("?") >= 2:
            parts = [p.strip() for p in text.split("?") if p.strip()]
            subs = [p + "?" for p in parts]
        return {"question": text, "sub_questions": subs}

    def _default_generate(self, req: StructuredRequest) -> Dict[str, Any]:
        refs_text = ""
        question = ""
        convo_parts = []
        for role, text, _a in req.dialogue:
            if role == "references":
                refs_text = text
            else:
                convo_parts.append(text)
                if role == "question":
                    question = text
        convo = "\n".join([req.system_prompt] + convo_parts).lower()
        for num_s, content in _DOC_RE.findall(refs_text):
            content = content.strip()
            m = _REQUIRES_RE.search(content)
            if m and m.group(1).strip().lower() not in convo:
                continue  # pre-condition mismatch: reference unusable
            if not self._reference_relevant(question, content):
                continue
            num = int(num_s)
            # QA-pair references carry their indexing question inline; only
            # the answer half belongs in the reply.
            if content.startswith("Q: ") and "\nA: " in content:
                content = content.split("\nA: ", 1)[1].strip()
            return {"answer": f"{content} <doc_{num}>", "citations": [num]}
        return {"answer": REFUSAL_TEXT, "citations": []}

    @staticmethod
    def _reference_relevant(question: str, body: str) -> bool:
        """Crude relevance gate so off-topic references yield refusal rather
        than a confidently wrong answer."""
        if not question:
            return True
        if body.startswith("Q: "):
            ref_q = body[3:].split("\nA: ", 1)[0]
            return _jaccard(question, ref_q) >= 0.7
        q = {t for t in _tokens(question) if len(t) >= 4}
        if not q:
            return True
        return len(q & _tokens(body)) / len(q) >= 0.6

    def _default_review(self, req: StructuredRequest) -> Dict[str, Any]:
        question = ""
        follow_up: List[Tuple[str, str]] = []
        for role, text, _a in req.dialogue:
            if role == "question":
                question = text
            elif role in ("Customer", "Analyst", "Agent"):
                follow_up.append((role, text))
        for role, text in follow_up:
            if role != "Analyst":
                continue
            low = text.lower()
            if CORRECTION_MARKER in low:
                idx = low.index(CORRECTION_MARKER) + len(CORRECTION_MARKER)
                return {
                    "action": "Update",
                    "new_question": question,
                    "new_content": text[idx:].strip(),
                }
            if any(m in low for m in OBSOLETE_MARKERS):
                return {"action": "Delete"}
        return {"action": "Keep"}

    def _default_extract(self, req: StructuredRequest) -> Dict[str, Any]:
        question = ""
        for role, text, _a in req.dialogue:
            if role == "question":
                question = text
        for role, text, _a in req.dialogue:
            if role != "Analyst":
                continue
            low = text.lower()
            for marker in ("workaround:", "solution:", "answer:"):
                if marker in low:
                    idx = low.index(marker) + len(marker)
                    return {"found": True, "question": question, "answer": text[idx:].strip()}
        return {"found": False}

    def _default_judge(self, req: StructuredRequest) -> Dict[str, Any]:
        answer = ""
        for role, text, _a in req.dialogue:
            if role == "answer":
                answer = text
        return {"correct": bool(answer) and REFUSAL_TEXT not in answer}

    # -- embeddings and reranking ----------------------------------------

    def embed(self, text: str, dim: int) -> np.ndarray:
        body = text.strip().lower()
        if not body:
            raise EmptyText("cannot embed empty text")
        padded = f"  {body}  "
        vec = np.zeros(dim, dtype=np.float64)
        for i in range(len(padded) - 2):
            gram = padded[i : i + 3].encode("utf-8")
            h = int.from_bytes(
                hashlib.blake2b(gram, digest_size=8, person=b"embed-v1").digest(), "big"
            )
            bucket = h % dim
            sign = 1.0 if (h >> 32) & 1 else -1.0
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec[0] = 1.0
            norm = 1.0
        return vec / norm

    def rerank(self, query: str, candidates: Sequence[str]) -> List[int]:
        q = _tokens(query)
        scored = [(-len(q & _tokens(c)), i) for i, c in enumerate(candidates)]
        scored.sort()
        return [i for _s, i in scored]


class RemoteBackend:
    """OpenAI-compatible HTTP backend.

    Reranking is implemented by embedding the query and candidates and
    ordering by cosine, which keeps the wire contract to two endpoints.
    """

    def __init__(self, cfg: ProviderConfig) -> None:
        import httpx

        self.cfg = cfg
        headers = {}
        api_key = os.environ.get("ONCALL_AGENT_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=cfg.endpoint,
            headers=headers,
            timeout=cfg.timeout_ms / 1000.0,
        )

    def _post(self, path: str, payload: Dict[str, Any]) -> Dict[str, Any]:
        import httpx

        try:
            resp = self._client.post(path, json=payload)
        except httpx.TimeoutException as exc:
            raise GatewayTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise RemoteUnavailable(str(exc)) from exc
        if resp.status_code >= 500:
            raise RemoteUnavailable(f"{path} returned {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"{path} returned {resp.status_code}: {resp.text}")
        return resp.json()

    def complete(self, req: StructuredRequest) -> Dict[str, Any]:
        messages = [{"role": "system", "content": req.system_prompt}]
        for role, text, attachments in req.dialogue:
            content: Any = text
            if attachments:
                content = [{"type": "text", "text": text}] + [
                    {"type": "image_url", "image_url": {"url": a}} for a in attachments
                ]
            messages.append({"role": "user", "content": content, "name": role})
        data = self._post(
            "/chat/completions",
            {
                "model": self.cfg.model_name,
                "messages": messages,
                "response_format": {"type": "json_object"},
            },
        )
        try:
            return json.loads(data["choices"][0]["message"]["content"])
        except (KeyError, IndexError, json.JSONDecodeError) as exc:
            raise SchemaViolation(f"unparseable remote reply: {exc}") from exc

    def embed(self, text: str, dim: int) -> np.ndarray:
        body = text.strip()
        if not body:
            raise EmptyText("cannot embed empty text")
        data = self._post("/embeddings", {"model": self.cfg.model_name, "input": body})
        vec = np.asarray(data["data"][0]["embedding"], dtype=np.float64)
        if vec.shape[0] != dim:
            raise GatewayError(f"remote embedding dim {vec.shape[0]} != configured {dim}")
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise GatewayError("remote returned a zero embedding")
        return vec / norm

    def rerank(self, query: str, candidates: Sequence[str]) -> List[int]:
        qv = self.embed(query, self.cfg.embedding_dim)
        scored = []
        for i, c in enumerate(candidates):
            cv = self.embed(c, self.cfg.embedding_dim)
            scored.append((-float(qv @ cv), i))
        scored.sort()
        return [i for _s, i in scored]


@dataclass
class Gateway:
    """Validated front door for all model calls."""

    cfg: ProviderConfig = field(default_factory=ProviderConfig)
    backend: Any = None

    def __post_init__(self) -> None:
        if self.backend is None:
            if self.cfg.backend == "scripted":
                self.backend = ScriptedBackend()
            elif self.cfg.backend == "remote":
                self.backend = RemoteBackend(self.cfg)
            else:
                raise ValueError(f"unknown backend {self.cfg.backend!r}")

    def complete_structured(self, req: StructuredRequest) -> Dict[str, Any]:
        if not req.response_schema:
            raise ValueError("response_schema must be non-empty")
        deadline = time.monotonic() + self.cfg.timeout_ms / 1000.0
        attempts = 1 + (self.cfg.max_retries if self.cfg.backend == "remote" else 0)
        last_exc: Optional[Exception] = None
        for _ in range(attempts):
            try:
                reply = self.backend.complete(req)
            except SchemaViolation as exc:
                last_exc = exc
                continue
            if time.monotonic() > deadline:
                raise GatewayTimeout(
                    f"{req.task} exceeded budget of {self.cfg.timeout_ms} ms"
                )
            try:
                jsonschema.validate(reply, req.response_schema)
            except jsonschema.ValidationError as exc:
                last_exc = SchemaViolation(f"{req.task}: {exc.message}")
                continue
            return reply
        raise last_exc if last_exc else SchemaViolation(f"{req.task}: no valid reply")

    def embed(self, text: str) -> np.ndarray:
        return self.backend.embed(text, self.cfg.embedding_dim)

    def rerank(self, query: str, candidates: Sequence[str]) -> List[int]:
        if not candidates:
            raise EmptyCandidates("rerank requires at least one candidate")
        order = self.backend.rerank(query, candidates)
        if sorted(order) != list(range(len(candidates))):
            raise GatewayError("backend rerank did not return a permutation")
        return order


def scripted_gateway(
    rules: Optional[Sequence[Dict[str, Any]]] = None, **cfg_kwargs: Any
) -> Gateway:
    cfg = ProviderConfig(backend="scripted", **cfg_kwargs)
    return Gateway(cfg=cfg, backend=ScriptedBackend(rules))
