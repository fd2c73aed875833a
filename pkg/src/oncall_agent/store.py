"""Versioned knowledge store with exact vector search over two paths.

Durability model: every applied mutation is appended (and flushed) to a
JSON-Lines log before the snapshot file is rewritten.  Replaying the log
from empty reproduces the snapshot bit-exactly, because mutation payloads
carry the full entry including its embedding.  A truncated or corrupt
snapshot is recovered by full log replay.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .gateway import Gateway, GatewayError
from .model import EntryKind, EntryStatus, InvariantError, KnowledgeEntry, ReviewDecision, Source

QA_PATH = "qa"
DOC_PATH = "doc"


class StoreError(Exception):
    pass


class EmptyDocument(StoreError):
    pass


class MissingEntry(StoreError):
    pass


class EmbeddingFailure(StoreError):
    pass


@dataclass
class MutationRecord:
    version: int
    op: str  # "Insert" | "Delete" | "Update" | "Validate"
    entry_id: str
    payload: Dict[str, Any]
    cause: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "op": self.op,
            "entry_id": self.entry_id,
            "payload": self.payload,
            "cause": self.cause,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "MutationRecord":
        return cls(d["version"], d["op"], d["entry_id"], d["payload"], d["cause"])


class KnowledgeStore:
    """Exact-scan vector store over QA pairs and document chunks.

    When ``dirpath`` is None the store is purely in-memory (replay and unit
    tests); otherwise ``dirpath`` holds ``log.jsonl`` and ``snapshot.json``.
    """

    def __init__(
        self,
        embedding_dim: int,
        gateway: Gateway,
        dirpath: Optional[str] = None,
        snapshot_every: int = 20,
    ) -> None:
        self.embedding_dim = embedding_dim
        self.gateway = gateway
        self.dirpath = dirpath
        self.snapshot_every = snapshot_every
        self.entries: Dict[str, KnowledgeEntry] = {}
        self.version = 0
        self._id_counter = 0
        self._log: List[MutationRecord] = []
        self._log_fh = None
        # Test hook: called between log append and snapshot write.
        self.crash_hook: Optional[Callable[[MutationRecord], None]] = None
        if dirpath is not None:
            os.makedirs(dirpath, exist_ok=True)
            self._log_fh = open(self._log_path, "a", encoding="utf-8")

    # -- paths ------------------------------------------------------------

    @property
    def _log_path(self) -> str:
        assert self.dirpath is not None
        return os.path.join(self.dirpath, "log.jsonl")

    @property
    def _snapshot_path(self) -> str:
        assert self.dirpath is not None
        return os.path.join(self.dirpath, "snapshot.json")

    # -- mutation machinery -----------------------------------------------

    def _apply(self, rec: MutationRecord) -> None:
        """Apply one mutation to in-memory state. Pure function of the record,
        shared by live mutation and log replay."""
        if rec.op == "Insert":
            entry = KnowledgeEntry.from_dict(rec.payload)
            self.entries[entry.id] = entry
            num = _id_number(entry.id)
            if num is not None:
                self._id_counter = max(self._id_counter, num)
        elif rec.op == "Delete":
            self.entries.pop(rec.entry_id, None)
        elif rec.op == "Update":
            entry = KnowledgeEntry.from_dict(rec.payload)
            self.entries[entry.id] = entry
        elif rec.op == "Validate":
            entry = self.entries[rec.entry_id]
            entry.status = EntryStatus.VALIDATED
            entry.updated_seq = rec.version
        else:
            raise StoreError(f"unknown mutation op {rec.op!r}")
        self.version = rec.version

    def _commit(self, op: str, entry_id: str, payload: Dict[str, Any], cause: Dict[str, Any]) -> MutationRecord:
        rec = MutationRecord(self.version + 1, op, entry_id, payload, cause)
        self._apply(rec)
        self._log.append(rec)
        if self._log_fh is not None:
            self._log_fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
            self._log_fh.flush()
            os.fsync(self._log_fh.fileno())
        if self.crash_hook is not None:
            self.crash_hook(rec)
        if self.dirpath is not None and self.version % self.snapshot_every == 0:
            self.persist()
        return rec

    def _next_id(self) -> str:
        self._id_counter += 1
        return f"e{self._id_counter:06d}"

    def _embed(self, text: str) -> np.ndarray:
        try:
            return self.gateway.embed(text)
        except GatewayError as exc:
            raise EmbeddingFailure(str(exc)) from exc

    # -- public operations -------------------------------------------------

    def insert_qa(
        self,
        question: str,
        content: str,
        source: Source,
        status: EntryStatus = EntryStatus.PROVISIONAL,
        cause: Optional[Dict[str, Any]] = None,
    ) -> str:
        if not question.strip() or not content.strip():
            raise InvariantError("QA pairs require non-empty question and content")
        embedding = self._embed(question)  # QA path key is the question
        entry = KnowledgeEntry(
            id=self._next_id(),
            kind=EntryKind.QA_PAIR,
            question=question,
            content=content,
            source=source,
            status=status,
            embedding=embedding,
            created_seq=self.version + 1,
            updated_seq=self.version + 1,
        )
        self._commit("Insert", entry.id, entry.to_dict(), cause or {"kind": "ManualSeed"})
        return entry.id

    def ingest_document(
        self,
        url: str,
        fetched_text: str,
        chunk_size: int = 1200,
        overlap: int = 200,
        cause: Optional[Dict[str, Any]] = None,
    ) -> List[str]:
        """Split a fetched document into overlapping chunks; re-ingesting the
        same url replaces its previous chunks (upsert by url)."""
        if not fetched_text.strip():
            raise EmptyDocument(url)
        if not (chunk_size > overlap >= 0):
            raise ValueError("require chunk_size > overlap >= 0")
        cause = cause or {"kind": "DocIngestion", "url": url}
        stale = [
            e.id
            for e in self.entries.values()
            if e.kind == EntryKind.DOC_CHUNK and e.source.kind == "url" and e.source.ref == url
        ]
        for eid in sorted(stale):
            self._commit("Delete", eid, {}, cause)
        ids: List[str] = []
        step = chunk_size - overlap
        pos = 0
        while True:
            chunk = fetched_text[pos : pos + chunk_size]
            if not chunk.strip():
                break
            embedding = self._embed(chunk)
            entry = KnowledgeEntry(
                id=self._next_id(),
                kind=EntryKind.DOC_CHUNK,
                question="",
                content=chunk,
                source=Source.url(url),
                status=EntryStatus.PROVISIONAL,
                embedding=embedding,
                created_seq=self.version + 1,
                updated_seq=self.version + 1,
            )
            self._commit("Insert", entry.id, entry.to_dict(), cause)
            ids.append(entry.id)
            if pos + chunk_size >= len(fetched_text):
                break
            pos += step
        return ids

    def validate_entry(self, entry_id: str, cause: Optional[Dict[str, Any]] = None) -> None:
        if entry_id not in self.entries:
            raise MissingEntry(entry_id)
        if self.entries[entry_id].status == EntryStatus.VALIDATED:
            return
        self._commit("Validate", entry_id, {"status": "Validated"}, cause or {})

    def apply_review(
        self, decision: ReviewDecision, cause: Optional[Dict[str, Any]] = None
    ) -> List[MutationRecord]:
        """Apply a Keep/Delete/Update decision. A decision referencing a
        missing entry is dropped whole; the store is untouched."""
        cause = cause or {"kind": "ReviewDecision"}
        if decision.action == "Keep":
            return []
        missing = [eid for eid in decision.entry_ids if eid not in self.entries]
        if missing:
            raise MissingEntry(", ".join(missing))
        if decision.action == "Delete":
            return [self._commit("Delete", eid, {}, cause) for eid in decision.entry_ids]
        # Update: same id, new question/content, embedding recomputed,
        # promoted to Validated.
        eid = decision.entry_ids[0]
        old = self.entries[eid]
        if old.kind == EntryKind.QA_PAIR:
            embedding = self._embed(decision.new_question)
            question = decision.new_question
        else:
            embedding = self._embed(decision.new_content)
            question = ""
        entry = KnowledgeEntry(
            id=eid,
            kind=old.kind,
            question=question,
            content=decision.new_content,
            source=old.source,
            status=EntryStatus.VALIDATED,
            embedding=embedding,
            created_seq=old.created_seq,
            updated_seq=self.version + 1,
        )
        return [self._commit("Update", eid, entry.to_dict(), cause)]

    # -- search ------------------------------------------------------------

    def search(
        self, query_text: str, path: Optional[str] = None, k: int = 5
    ) -> List[Tuple[KnowledgeEntry, float]]:
        return self.search_embedding(self._embed(query_text), path=path, k=k)

    def search_embedding(
        self, query: np.ndarray, path: Optional[str] = None, k: int = 5
    ) -> List[Tuple[KnowledgeEntry, float]]:
        """Exact top-k by cosine within the filtered path; ties break by id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        kind = {QA_PATH: EntryKind.QA_PAIR, DOC_PATH: EntryKind.DOC_CHUNK}.get(path)
        pool = [
            e
            for e in self.entries.values()
            if kind is None or e.kind == kind
        ]
        if not pool:
            return []
        scored = sorted(
            ((float(query @ e.embedding), e) for e in pool),
            key=lambda t: (-t[0], t[1].id),
        )
        return [(e, s) for s, e in scored[:k]]

    # -- persistence --------------------------------------------------------

    def to_snapshot_dict(self) -> Dict[str, Any]:
        return {
            "embedding_dim": self.embedding_dim,
            "version": self.version,
            "id_counter": self._id_counter,
            "entries": {eid: e.to_dict() for eid, e in sorted(self.entries.items())},
        }

    @classmethod
    def from_snapshot_dict(
        cls,
        snap: Dict[str, Any],
        gateway: Gateway,
        dirpath: Optional[str] = None,
        snapshot_every: int = 20,
    ) -> "KnowledgeStore":
        store = cls(snap["embedding_dim"], gateway, dirpath=dirpath, snapshot_every=snapshot_every)
        store.version = snap["version"]
        store._id_counter = snap["id_counter"]
        store.entries = {
            eid: KnowledgeEntry.from_dict(d) for eid, d in snap["entries"].items()
        }
        return store

    def snapshot_hash(self) -> str:
        blob = json.dumps(self.to_snapshot_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def persist(self) -> None:
        if self.dirpath is None:
            return
        tmp = self._snapshot_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.to_snapshot_dict(), fh, sort_keys=True)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self._snapshot_path)

    def close(self) -> None:
        if self._log_fh is not None:
            self.persist()
            self._log_fh.close()
            self._log_fh = None

    @property
    def mutation_log(self) -> List[MutationRecord]:
        return list(self._log)

    def read_log(self) -> List[MutationRecord]:
        if self.dirpath is None:
            return list(self._log)
        records = []
        if os.path.exists(self._log_path):
            with open(self._log_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        records.append(MutationRecord.from_dict(json.loads(line)))
        return records

    @classmethod
    def load(
        cls,
        dirpath: str,
        gateway: Gateway,
        embedding_dim: Optional[int] = None,
        snapshot_every: int = 20,
    ) -> "KnowledgeStore":
        """Recover a store from disk: snapshot if intact, then log replay for
        the tail; full log replay when the snapshot is corrupt or missing."""
        snap: Optional[Dict[str, Any]] = None
        snap_path = os.path.join(dirpath, "snapshot.json")
        if os.path.exists(snap_path):
            try:
                with open(snap_path, "r", encoding="utf-8") as fh:
                    snap = json.load(fh)
            except (json.JSONDecodeError, OSError):
                snap = None  # corrupt snapshot: fall back to log replay
        dim = embedding_dim or (snap or {}).get("embedding_dim", 64)
        store = cls(dim, gateway, dirpath=None, snapshot_every=snapshot_every)
        if snap is not None:
            store.embedding_dim = snap["embedding_dim"]
            store.version = snap["version"]
            store._id_counter = snap["id_counter"]
            store.entries = {
                eid: KnowledgeEntry.from_dict(d) for eid, d in snap["entries"].items()
            }
        log_path = os.path.join(dirpath, "log.jsonl")
        tail: List[MutationRecord] = []
        if os.path.exists(log_path):
            with open(log_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = MutationRecord.from_dict(json.loads(line))
                    tail.append(rec)
                    if rec.version > store.version:
                        store._apply(rec)
        store._log = tail
        store.dirpath = dirpath
        store.snapshot_every = snapshot_every
        store._log_fh = open(log_path, "a", encoding="utf-8")
        return store

    @classmethod
    def replay(cls, records: List[MutationRecord], embedding_dim: int, gateway: Gateway) -> "KnowledgeStore":
        """Fold a mutation log from the empty store (the durability oracle)."""
        store = cls(embedding_dim, gateway, dirpath=None)
        for rec in records:
            store._apply(rec)
        store._log = list(records)
        return store


def _id_number(entry_id: str) -> Optional[int]:
    if entry_id.startswith("e") and entry_id[1:].isdigit():
        return int(entry_id[1:])
    return None
