"""Function hashing and the distance/cutoff relation decision.

Normalized function bodies map to a similarity digest when they are long
enough for the locality-sensitive scheme, and to an exact SHA-256 digest
otherwise.  Exact-scheme hashes can only ever be identical or different,
never similar, and any cross-scheme comparison is "different" -- both
rules are conservative against false similarity.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import tlsh
from .extractor import RawFunction, normalize

DEFAULT_CUTOFF = 30

# Scheme identifiers recorded in the DB header so stored digests are
# self-describing.
LSH_SCHEME_ID = "TLSH/128b-1cs-70h-min50"
EXACT_SCHEME_ID = "SHA256/64h"

_EXACT_DIGEST_LEN = 64


class HashScheme(enum.Enum):
    LSH = "lsh"
    EXACT = "exact"


_DIGEST_LEN = {HashScheme.LSH: tlsh.DIGEST_HEX_LEN, HashScheme.EXACT: _EXACT_DIGEST_LEN}
_HEX_CHARS = frozenset("0123456789abcdef")


@dataclass(frozen=True, order=True)
class FuncHash:
    scheme: HashScheme
    digest: str

    def __post_init__(self) -> None:
        expected = _DIGEST_LEN[self.scheme]
        if len(self.digest) != expected or not set(self.digest) <= _HEX_CHARS:
            raise ValueError(
                f"bad {self.scheme.value} digest {self.digest!r}: "
                f"want {expected} lowercase hex chars"
            )

    def token(self) -> str:
        return f"{self.scheme.value}:{self.digest}"

    @classmethod
    def from_token(cls, token: str) -> "FuncHash":
        scheme_name, _, digest = token.partition(":")
        try:
            scheme = HashScheme(scheme_name)
        except ValueError:
            raise ValueError(f"unknown hash scheme in token {token!r}") from None
        return cls(scheme, digest)


class Relation(enum.Enum):
    IDENTICAL = "IDENTICAL"
    SIMILAR = "SIMILAR"
    DIFFERENT = "DIFFERENT"


@dataclass(frozen=True)
class RelationDecision:
    kind: Relation
    distance: int


def hash_function(text: bytes) -> FuncHash:
    """Hash a normalized function body.

    Bodies at or above the LSH minimum length get a similarity digest;
    shorter or degenerate (too-uniform) bodies fall back to the exact
    scheme so exact reuse of tiny functions is still found.
    """
    if not text:
        raise ValueError("empty function body")
    if len(text) >= tlsh.MIN_INPUT_LEN:
        digest = tlsh.digest(text)
        if digest is not None:
            return FuncHash(HashScheme.LSH, digest)
    return FuncHash(HashScheme.EXACT, hashlib.sha256(text).hexdigest())


def distance(a: FuncHash, b: FuncHash, cutoff: int = DEFAULT_CUTOFF) -> int:
    """Distance between two hashes; cross-scheme and unequal exact pairs
    score cutoff+1 so they can never classify as similar."""
    if a.scheme is HashScheme.LSH and b.scheme is HashScheme.LSH:
        return tlsh.diffxlen(a.digest, b.digest)
    if a.scheme is HashScheme.EXACT and b.scheme is HashScheme.EXACT:
        return 0 if a.digest == b.digest else cutoff + 1
    return cutoff + 1


def classify(a: FuncHash, b: FuncHash, cutoff: int = DEFAULT_CUTOFF) -> RelationDecision:
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    d = distance(a, b, cutoff)
    if d == 0:
        kind = Relation.IDENTICAL
    elif d <= cutoff:
        kind = Relation.SIMILAR
    else:
        kind = Relation.DIFFERENT
    return RelationDecision(kind=kind, distance=d)


def hash_raw_functions(functions: Iterable[RawFunction]) -> list[tuple[str, FuncHash]]:
    """Normalize and hash extracted functions, keeping their paths."""
    out = []
    for raw in functions:
        text = normalize(raw.body)
        if not text:
            continue
        out.append((raw.file_path, hash_function(text)))
    return out


# Above this many indexed hashes, similarity scans are restricted to
# entries sharing the query's quartile-header byte instead of a full scan.
DEFAULT_BUCKET_THRESHOLD = 100_000

_SCAN_CHUNK = 512


class HashIndex:
    """Digest lookup plus batched similarity scans over a hash set.

    Exact matches use a token dict.  Similarity candidates come from a
    vectorised distance scan over all LSH digests; for very large indexes
    the scan is limited to the bucket of hashes sharing the query's
    quartile-header byte, trading a little recall for speed.
    """

    def __init__(
        self,
        hashes: Iterable[FuncHash],
        bucket_threshold: int = DEFAULT_BUCKET_THRESHOLD,
    ) -> None:
        self._by_token: dict[str, FuncHash] = {}
        lsh: list[FuncHash] = []
        for h in hashes:
            if h.token() in self._by_token:
                continue
            self._by_token[h.token()] = h
            if h.scheme is HashScheme.LSH:
                lsh.append(h)
        lsh.sort(key=lambda h: h.digest)
        self._lsh = lsh
        self._pack = tlsh.pack_digests([h.digest for h in lsh])
        self._bucketed = len(lsh) > bucket_threshold
        self._buckets: dict[int, list[int]] = {}
        if self._bucketed:
            qbytes = (self._pack.q1_ratio.astype(np.int32) << 4) | self._pack.q2_ratio
            for i, q in enumerate(qbytes.tolist()):
                self._buckets.setdefault(q, []).append(i)

    def __len__(self) -> int:
        return len(self._by_token)

    def exact(self, h: FuncHash) -> FuncHash | None:
        return self._by_token.get(h.token())

    def _candidate_rows(self, query: tlsh._Parts) -> list[int]:
        qbyte = (query.q1_ratio << 4) | query.q2_ratio
        return self._buckets.get(qbyte, [])

    def scan_similar(
        self, queries: list[FuncHash], cutoff: int
    ) -> list[list[tuple[FuncHash, int]]]:
        """Per query: all indexed LSH hashes within `cutoff`, with distances."""
        results: list[list[tuple[FuncHash, int]]] = [[] for _ in queries]
        if not self._lsh:
            return results
        lsh_rows = [i for i, q in enumerate(queries) if q.scheme is HashScheme.LSH]
        if not lsh_rows:
            return results
        if self._bucketed:
            for qi in lsh_rows:
                parts = tlsh._decode(queries[qi].digest)
                rows = self._candidate_rows(parts)
                if not rows:
                    continue
                sub = tlsh.pack_digests([self._lsh[r].digest for r in rows])
                dists = tlsh.diffxlen_matrix(tlsh.pack_digests([queries[qi].digest]), sub)[0]
                for r, d in zip(rows, dists.tolist()):
                    if d <= cutoff:
                        results[qi].append((self._lsh[r], int(d)))
            return results
        col_chunk = max(1, (1 << 22) // max(1, _SCAN_CHUNK * 32))
        for start in range(0, len(lsh_rows), _SCAN_CHUNK):
            chunk = lsh_rows[start : start + _SCAN_CHUNK]
            qpack = tlsh.pack_digests([queries[qi].digest for qi in chunk])
            for col in range(0, len(self._lsh), col_chunk):
                sub = tlsh.DigestPack(
                    self._pack.checksum[col : col + col_chunk],
                    self._pack.q1_ratio[col : col + col_chunk],
                    self._pack.q2_ratio[col : col + col_chunk],
                    self._pack.code[col : col + col_chunk],
                )
                dists = tlsh.diffxlen_matrix(qpack, sub)
                hit_rows, hit_cols = np.nonzero(dists <= cutoff)
                for r, c in zip(hit_rows.tolist(), hit_cols.tolist()):
                    results[chunk[r]].append(
                        (self._lsh[col + c], int(dists[r, c]))
                    )
        return results


def match_hashes(
    left: Iterable[FuncHash], index: HashIndex, cutoff: int = DEFAULT_CUTOFF
) -> dict[FuncHash, tuple[FuncHash, int]]:
    """Pair each left hash with at most one indexed hash.

    Digest equality wins first; remaining left hashes take the
    minimum-distance similar candidate, ties broken by the smaller right
    digest.  Result insertion order follows sorted left digests.
    """
    ordered = sorted(set(left), key=lambda h: (h.digest, h.scheme.value))
    matched: dict[FuncHash, tuple[FuncHash, int]] = {}
    pending: list[FuncHash] = []
    for h in ordered:
        hit = index.exact(h)
        if hit is not None:
            matched[h] = (hit, 0)
        else:
            pending.append(h)
    candidates = index.scan_similar(pending, cutoff)
    for h, cands in zip(pending, candidates):
        if not cands:
            continue
        best = min(cands, key=lambda pair: (pair[1], pair[0].digest))
        matched[h] = (best[0], best[1])
    # Re-impose global ordering (exact and similar stages interleave).
    return {h: matched[h] for h in ordered if h in matched}
