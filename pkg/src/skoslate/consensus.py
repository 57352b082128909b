from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import EmptyCandidates
from .providers import TranslationCandidate
from .utils import canonical


class ConsensusRoute(str, Enum):
    ACCEPTED_BY_FREQUENCY = "accepted_by_frequency"
    NEEDS_REFINEMENT = "needs_refinement"


@dataclass(frozen=True)
class ConsensusResult:
    best: str                 # canonical text of the winning group
    confidence: float
    group_size: int
    total: int
    route: ConsensusRoute
    provider_id: str = ""     # highest-priority provider in the winning group


@dataclass(frozen=True)
class CandidateGroup:
    text: str
    members: Tuple[TranslationCandidate, ...]
    best_rank: int

    @property
    def size(self) -> int:
        return len(self.members)

    def representative(self, priority: Sequence[str]) -> TranslationCandidate:
        """Member from the highest-priority provider (then smallest text)."""
        return min(self.members, key=lambda c: (provider_rank(c.provider_id, priority), c.text))


def provider_rank(provider_id: str, priority: Sequence[str]) -> int:
    try:
        return list(priority).index(provider_id)
    except ValueError:
        return len(priority)


def group_candidates(candidates: Sequence[TranslationCandidate],
                     priority: Sequence[str] = ()) -> List[CandidateGroup]:
    """Group by exact text after NFC + trim, ranked: size desc, provider rank, text.

    Case and diacritics are significant here.
    """
    buckets: Dict[str, List[TranslationCandidate]] = {}
    for c in candidates:
        buckets.setdefault(canonical(c.text), []).append(c)
    groups = [
        CandidateGroup(text, tuple(members), min(provider_rank(m.provider_id, priority) for m in members))
        for text, members in buckets.items()
    ]
    groups.sort(key=lambda g: (-g.size, g.best_rank, g.text))
    return groups


def score(candidates: Sequence[TranslationCandidate], threshold: float,
          priority: Sequence[str] = ()) -> ConsensusResult:
    """
    Frequency confidence of the most common candidate.

    confidence = size of the winning group / number of candidates; the result
    is accepted iff confidence >= threshold.
    """
    if not candidates:
        raise EmptyCandidates("no translation candidates to score")
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    top = group_candidates(candidates, priority)[0]
    total = len(candidates)
    confidence = top.size / total
    route = (ConsensusRoute.ACCEPTED_BY_FREQUENCY if confidence >= threshold
             else ConsensusRoute.NEEDS_REFINEMENT)
    return ConsensusResult(top.text, confidence, top.size, total, route,
                           top.representative(priority).provider_id)


def fallback_pick(candidates: Sequence[TranslationCandidate], priority: Sequence[str] = ()) -> str:
    """Winner of `score` regardless of threshold, in the same canonical form as `ConsensusResult.best`."""
    if not candidates:
        raise EmptyCandidates("no translation candidates to pick from")
    return group_candidates(candidates, priority)[0].text


def largest_group_for(texts: Sequence[str], candidates: Sequence[TranslationCandidate],
                      priority: Sequence[str] = ()) -> Optional[CandidateGroup]:
    """Highest-ranked group whose canonical text is in `texts`."""
    wanted = {canonical(t) for t in texts}
    for g in group_candidates(candidates, priority):
        if g.text in wanted:
            return g
    return None
