"""Answer deduplication by cosine similarity against answers already sent
in the same session.

Suppression is strict exceedance (``sim > theta``), so theta=1.0 disables
deduplication entirely and theta=0.0 suppresses every later answer with
positive (clamped) similarity.  Suppressed cards never join the comparison
set; only Sent and Accepted cards count as "sent".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import AnswerCard, CardStatus, DedupConfig, Session


class DimensionMismatch(ValueError):
    pass


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors; raises on dimension mismatch."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return float(a @ b)


@dataclass
class SimilarityReport:
    max_similarity: float
    nearest_card_id: Optional[str]
    is_duplicate: bool


def _sent_cards(session: Session):
    return [c for c in session.cards if c.status in (CardStatus.SENT, CardStatus.ACCEPTED)]


def check_duplicate(
    answer_embedding: np.ndarray, session: Session, cfg: DedupConfig
) -> SimilarityReport:
    """Compare a new answer against all previously sent answers in the session."""
    best_sim = 0.0
    best_id: Optional[str] = None
    for card in _sent_cards(session):
        sim = cosine(answer_embedding, card.embedding)
        if cfg.clamp_negative:
            sim = max(0.0, min(1.0, sim))
        if best_id is None or sim > best_sim:
            best_sim = sim
            best_id = card.id
    if best_id is None:
        return SimilarityReport(0.0, None, False)
    return SimilarityReport(best_sim, best_id, best_sim > cfg.theta)
