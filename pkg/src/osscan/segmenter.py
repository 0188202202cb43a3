"""Code segmentation: prime-component detection and application-code
extraction.

A component is prime when no other project in the database passes the
birth-time-filtered similarity score phi.  Non-prime components have the
entries matched against any possible member subtracted, leaving only the
code original to the project; detection later scores targets against that
application subset alone.  Segmentation is a single pass: members come
from one prime check and the subtraction uses each member's full entry
set, with every project segmented against the original, unsegmented
signatures of the others.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple

from . import signature_store
from .fingerprint import DEFAULT_CUTOFF, FuncHash, HashIndex, match_hashes
from .signature_store import ComponentDb, OssSignature, SignatureEntry

logger = logging.getLogger(__name__)

DEFAULT_THETA = Fraction(1, 10)


def coerce_theta(theta: object) -> Fraction:
    """Accept float/str/Fraction thresholds without binary-float surprises
    ("0.1" compares as exactly 1/10)."""
    if isinstance(theta, Fraction):
        return theta
    if isinstance(theta, float):
        return Fraction(str(theta))
    if isinstance(theta, (int, str)):
        return Fraction(theta)
    raise TypeError(f"cannot interpret theta {theta!r}")


def check_theta(theta: object) -> Fraction:
    value = coerce_theta(theta)
    if not 0 < value < 1:
        raise ValueError(f"theta must be in (0, 1), got {value}")
    return value


class MatchedPair(NamedTuple):
    s_entry: SignatureEntry
    x_entry: SignatureEntry
    distance: int


@dataclass(frozen=True)
class PhiScore:
    s_id: str
    x_id: str
    g_size: int
    x_size: int

    @property
    def phi(self) -> Fraction:
        return Fraction(self.g_size, self.x_size)


@dataclass
class SegmentationResult:
    oss_id: str
    is_prime: bool
    members: frozenset[str]
    app_entry_hashes: frozenset[str]  # digests


def _index_for(sig: OssSignature, cache: dict[str, HashIndex] | None) -> HashIndex:
    if cache is None:
        return HashIndex(sig.entries.keys())
    index = cache.get(sig.oss_id)
    if index is None:
        index = HashIndex(sig.entries.keys())
        cache[sig.oss_id] = index
    return index


def _common(
    s: OssSignature,
    x: OssSignature,
    cutoff: int,
    cache: dict[str, HashIndex] | None = None,
) -> list[MatchedPair]:
    index = _index_for(x, cache)
    matched = match_hashes(s.entries.keys(), index, cutoff)
    return [
        MatchedPair(s.entries[sh], x.entries[xh], d) for sh, (xh, d) in matched.items()
    ]


def common_functions(
    s: OssSignature, x: OssSignature, cutoff: int = DEFAULT_CUTOFF
) -> list[MatchedPair]:
    """Identical-or-similar entry pairs between two signatures.

    Each entry of `s` pairs with at most one entry of `x`: digest equality
    first, then the minimum-distance similar candidate (ties to the
    lexicographically smaller `x` digest).  Ordered by `s` digest.
    """
    return _common(s, x, cutoff)


def _phi_from_pairs(
    pairs: Iterable[MatchedPair], s: OssSignature, x: OssSignature
) -> PhiScore:
    g = sum(
        1
        for pair in pairs
        if signature_store.birth(pair.x_entry, x) <= signature_store.birth(pair.s_entry, s)
    )
    return PhiScore(s_id=s.oss_id, x_id=x.oss_id, g_size=g, x_size=len(x.entries))


def compute_phi(
    s: OssSignature, x: OssSignature, cutoff: int = DEFAULT_CUTOFF
) -> PhiScore:
    """Share of x's entries that are common with s and born no later in x.

    Equal birth dates count: at day resolution a tie is treated as
    x-originated, which errs toward keeping s's application code clean.
    """
    return _phi_from_pairs(_common(s, x, cutoff), s, x)


def check_prime(
    s: OssSignature,
    db: ComponentDb,
    theta: object = DEFAULT_THETA,
    cutoff: int = DEFAULT_CUTOFF,
) -> tuple[bool, frozenset[str]]:
    """Possible members of s (projects with phi >= theta) and primality."""
    result = _segment_one(s, db, check_theta(theta), cutoff, cache=None)
    return result.is_prime, result.members


def _segment_one(
    s: OssSignature,
    db: ComponentDb,
    theta: Fraction,
    cutoff: int,
    cache: dict[str, HashIndex] | None,
) -> SegmentationResult:
    members: set[str] = set()
    removed: set[FuncHash] = set()
    for x in db.sorted_signatures():
        if x.oss_id == s.oss_id:
            continue
        pairs = _common(s, x, cutoff, cache)
        if not pairs:
            continue
        score = _phi_from_pairs(pairs, s, x)
        if score.phi >= theta:
            members.add(x.oss_id)
            removed.update(pair.s_entry.hash for pair in pairs)
    if members:
        app = {h for h in s.entries if h not in removed}
        is_prime = False
    else:
        app = set(s.entries)
        is_prime = True
    return SegmentationResult(
        oss_id=s.oss_id,
        is_prime=is_prime,
        members=frozenset(members),
        app_entry_hashes=frozenset(h.digest for h in app),
    )


def segment(
    s: OssSignature,
    db: ComponentDb,
    theta: object = DEFAULT_THETA,
    cutoff: int = DEFAULT_CUTOFF,
) -> SegmentationResult:
    """Application code of s: all entries when prime, otherwise the
    entries minus everything matched to any possible member."""
    return _segment_one(s, db, check_theta(theta), cutoff, cache=None)


def segment_all(
    db: ComponentDb,
    theta: object = DEFAULT_THETA,
    cutoff: int = DEFAULT_CUTOFF,
) -> dict[str, SegmentationResult]:
    """Segment every signature against the unsegmented originals."""
    theta_f = check_theta(theta)
    cache: dict[str, HashIndex] = {}
    return {
        sig.oss_id: _segment_one(sig, db, theta_f, cutoff, cache)
        for sig in db.sorted_signatures()
    }


def apply_segmentation(db: ComponentDb, results: dict[str, SegmentationResult]) -> None:
    """Record segmentation results on the in-memory signatures."""
    for oss_id, result in results.items():
        sig = db.signatures[oss_id]
        by_digest = {h.digest: h for h in sig.entries}
        sig.app_entries = {by_digest[d] for d in result.app_entry_hashes}
        sig.is_prime = result.is_prime
