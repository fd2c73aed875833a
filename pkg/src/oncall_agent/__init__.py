"""Proactive support agent for on-call chat: watches escalated sessions,
answers customer questions from a self-updating knowledge store, suppresses
redundant answers, and learns from analyst feedback at session closure."""

from .dedup import DedupConfig, SimilarityReport, check_duplicate, cosine
from .gateway import (
    Gateway,
    GatewayError,
    GatewayTimeout,
    ProviderConfig,
    REFUSAL_TEXT,
    RemoteBackend,
    ScriptedBackend,
    StructuredRequest,
    scripted_gateway,
)
from .metrics import ClassStats, MetricsReport, compute_metrics
from .model import (
    AnswerCard,
    AuthorRole,
    CardStatus,
    EntryKind,
    EntryStatus,
    InvariantError,
    KnowledgeEntry,
    Message,
    ReviewDecision,
    ScopeClass,
    Session,
    SessionState,
    Source,
)
from .orchestrator import Orchestrator, OrchestratorConfig, SessionEvent, replay_events
from .pipeline import Answer, Refusal, answer_question
from .store import KnowledgeStore

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "AnswerCard",
    "AuthorRole",
    "CardStatus",
    "ClassStats",
    "DedupConfig",
    "EntryKind",
    "EntryStatus",
    "Gateway",
    "GatewayError",
    "GatewayTimeout",
    "InvariantError",
    "KnowledgeEntry",
    "KnowledgeStore",
    "Message",
    "MetricsReport",
    "Orchestrator",
    "OrchestratorConfig",
    "ProviderConfig",
    "REFUSAL_TEXT",
    "Refusal",
    "RemoteBackend",
    "ReviewDecision",
    "ScopeClass",
    "ScriptedBackend",
    "Session",
    "SessionEvent",
    "SessionState",
    "SimilarityReport",
    "Source",
    "StructuredRequest",
    "answer_question",
    "check_duplicate",
    "compute_metrics",
    "cosine",
    "replay_events",
    "scripted_gateway",
    "__version__",
]
