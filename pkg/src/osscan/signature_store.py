"""Redundancy-eliminated component signatures and their on-disk database.

An OSS signature stores each distinct normalized function exactly once,
recording the set of version ordinals it appears in plus every path it
occupies per version; the number of versions an entry belongs to is its
conceptual bin.  This is lossless with respect to the naive per-version
table: expanding entries back to (version, hash, path) triples reproduces
the plain extraction exactly.

Database layout (UTF-8, LF line endings, one directory per component):

    <root>/db_meta.json        {"format":1,"hash":...,"exact":...,"cutoff":30}
    <root>/<oss_id>/meta.tsv   ordinal<TAB>version_id<TAB>YYYY-MM-DD
    <root>/<oss_id>/sig.jsonl  one entry per line, sorted by digest
    <root>/<oss_id>/app.txt    after segmentation: "prime:true|false",
                               then one application-entry digest per line

Entries are written sorted by digest, so identical inputs always produce
identical bytes and save -> load -> save is a fixpoint.
"""

from __future__ import annotations

import datetime
import json
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from . import fingerprint
from .extractor import RawFunction, extract_from_source, extract_functions
from .fingerprint import FuncHash

logger = logging.getLogger(__name__)

DB_FORMAT_VERSION = 1
EPOCH_DATE = datetime.date(1970, 1, 1)

_OSS_ID_RE = re.compile(r"[A-Za-z0-9._+-]+\Z")
_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}\Z")


class SignatureError(ValueError):
    """Raised for invalid signature-building inputs."""


class DbFormatError(ValueError):
    """Raised when a stored database cannot be read back."""


@dataclass(frozen=True)
class VersionMeta:
    version_id: str
    release_date: datetime.date
    ordinal: int


@dataclass
class SignatureEntry:
    hash: FuncHash
    versions: set[int]
    paths: dict[int, set[str]]

    @property
    def bin_index(self) -> int:
        return len(self.versions)


@dataclass
class OssSignature:
    oss_id: str
    version_meta: list[VersionMeta]
    entries: dict[FuncHash, SignatureEntry]
    app_entries: set[FuncHash] | None = None
    is_prime: bool | None = None

    @property
    def n_versions(self) -> int:
        return len(self.version_meta)

    @property
    def segmented(self) -> bool:
        return self.is_prime is not None

    def total_incidences(self) -> int:
        return sum(len(e.versions) for e in self.entries.values())

    def version_by_id(self, version_id: str) -> VersionMeta:
        for meta in self.version_meta:
            if meta.version_id == version_id:
                return meta
        raise KeyError(f"{self.oss_id} has no version {version_id!r}")


@dataclass
class DbMeta:
    format_version: int = DB_FORMAT_VERSION
    hash_scheme: str = fingerprint.LSH_SCHEME_ID
    exact_scheme: str = fingerprint.EXACT_SCHEME_ID
    cutoff: int = fingerprint.DEFAULT_CUTOFF


@dataclass
class ComponentDb:
    signatures: dict[str, OssSignature] = field(default_factory=dict)
    meta: DbMeta = field(default_factory=DbMeta)

    def sorted_signatures(self) -> list[OssSignature]:
        return [self.signatures[k] for k in sorted(self.signatures)]


def make_version_meta(pairs: Iterable[tuple[str, datetime.date]]) -> list[VersionMeta]:
    """Assign ordinals in release order, date ties broken by version id."""
    items = list(pairs)
    seen = set()
    for version_id, _ in items:
        if version_id in seen:
            raise SignatureError(f"duplicate version_id {version_id!r}")
        seen.add(version_id)
    items.sort(key=lambda p: (p[1], p[0]))
    return [
        VersionMeta(version_id=v, release_date=d, ordinal=i)
        for i, (v, d) in enumerate(items)
    ]


def _check_version_order(versions: Sequence[VersionMeta]) -> None:
    ids = set()
    for i, meta in enumerate(versions):
        if meta.ordinal != i:
            raise SignatureError(
                f"version ordinals must be 0..n-1 in order, got {meta.ordinal} at {i}"
            )
        if meta.version_id in ids:
            raise SignatureError(f"duplicate version_id {meta.version_id!r}")
        ids.add(meta.version_id)
    keys = [(m.release_date, m.version_id) for m in versions]
    if keys != sorted(keys):
        raise SignatureError("versions must be ordered by release date then version id")


def build_signature_from_sources(
    oss_id: str,
    versions: Sequence[tuple[VersionMeta, Sequence[tuple[str, bytes]]]],
) -> OssSignature:
    """Build a signature from in-memory (path, file bytes) version listings."""
    raw_versions = [
        (meta, [fn for path, data in files for fn in extract_from_source(path, data)])
        for meta, files in versions
    ]
    return _build_from_extracted(oss_id, raw_versions)


def build_signature(
    oss_id: str,
    versions: Sequence[tuple[VersionMeta, str | Path]],
    language_filter: set[str] | None = None,
) -> OssSignature:
    """Extract, normalize and hash every version tree, merging identical
    functions across versions into single entries."""
    raw_versions = [
        (meta, extract_functions(tree, language_filter)) for meta, tree in versions
    ]
    return _build_from_extracted(oss_id, raw_versions)


def _build_from_extracted(
    oss_id: str,
    versions: Sequence[tuple[VersionMeta, list[RawFunction]]],
) -> OssSignature:
    if not _OSS_ID_RE.match(oss_id):
        raise SignatureError(f"invalid oss_id {oss_id!r}")
    if not versions:
        raise SignatureError(f"empty OSS: {oss_id} has no versions")
    metas = [meta for meta, _ in versions]
    _check_version_order(metas)

    entries: dict[FuncHash, SignatureEntry] = {}
    total = 0
    for meta, functions in versions:
        for path, func_hash in fingerprint.hash_raw_functions(functions):
            total += 1
            entry = entries.get(func_hash)
            if entry is None:
                entry = SignatureEntry(hash=func_hash, versions=set(), paths={})
                entries[func_hash] = entry
            entry.versions.add(meta.ordinal)
            entry.paths.setdefault(meta.ordinal, set()).add(path)
    if total == 0:
        raise SignatureError(f"empty OSS: {oss_id} has no extractable functions")
    return OssSignature(oss_id=oss_id, version_meta=list(metas), entries=entries)


def birth(entry: SignatureEntry, sig: OssSignature) -> datetime.date:
    """Release date of the earliest version containing the entry."""
    return min(sig.version_meta[o].release_date for o in entry.versions)


def dedup_ratio(db: ComponentDb, oss_id: str | None = None) -> Fraction:
    """Distinct entries over total function-version incidences, exactly."""
    if oss_id is not None:
        sigs = [db.signatures[oss_id]]
    else:
        sigs = list(db.signatures.values())
    entries = sum(len(s.entries) for s in sigs)
    incidences = sum(s.total_incidences() for s in sigs)
    if incidences == 0:
        raise SignatureError("no incidences recorded")
    return Fraction(entries, incidences)


def _meta_json(meta: DbMeta) -> str:
    doc = {
        "format": meta.format_version,
        "hash": meta.hash_scheme,
        "exact": meta.exact_scheme,
        "cutoff": meta.cutoff,
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def _entry_line(entry: SignatureEntry) -> str:
    versions = [
        {"o": o, "p": sorted(entry.paths[o])} for o in sorted(entry.versions)
    ]
    return json.dumps({"h": entry.hash.token(), "v": versions}, separators=(",", ":"))


def write_app_file(root: str | Path, sig: OssSignature) -> None:
    """Persist segmentation output (app.txt) for one signature."""
    if sig.is_prime is None or sig.app_entries is None:
        raise SignatureError(f"{sig.oss_id} has no segmentation result to save")
    path = Path(root) / sig.oss_id / "app.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["prime:true" if sig.is_prime else "prime:false"]
    lines.extend(sorted(h.digest for h in sig.app_entries))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def save_db(db: ComponentDb, root: str | Path) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "db_meta.json").write_text(_meta_json(db.meta), encoding="utf-8", newline="\n")
    for sig in db.sorted_signatures():
        oss_dir = root / sig.oss_id
        oss_dir.mkdir(parents=True, exist_ok=True)
        meta_lines = [
            f"{m.ordinal}\t{m.version_id}\t{m.release_date.isoformat()}"
            for m in sig.version_meta
        ]
        (oss_dir / "meta.tsv").write_text(
            "\n".join(meta_lines) + "\n", encoding="utf-8", newline="\n"
        )
        entries = sorted(sig.entries.values(), key=lambda e: e.hash.digest)
        (oss_dir / "sig.jsonl").write_text(
            "".join(_entry_line(e) + "\n" for e in entries), encoding="utf-8", newline="\n"
        )
        if sig.is_prime is not None:
            write_app_file(root, sig)


def _load_meta(path: Path) -> DbMeta:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DbFormatError(f"{path}: unreadable db header: {exc}") from exc
    fmt = doc.get("format")
    if fmt != DB_FORMAT_VERSION:
        raise DbFormatError(
            f"{path}: db format version {fmt!r} unsupported, this build reads "
            f"version {DB_FORMAT_VERSION}"
        )
    meta = DbMeta(
        format_version=fmt,
        hash_scheme=doc.get("hash", ""),
        exact_scheme=doc.get("exact", ""),
        cutoff=doc.get("cutoff", fingerprint.DEFAULT_CUTOFF),
    )
    if meta.hash_scheme != fingerprint.LSH_SCHEME_ID:
        raise DbFormatError(
            f"{path}: db hash scheme {meta.hash_scheme!r} incompatible with "
            f"{fingerprint.LSH_SCHEME_ID!r}"
        )
    if meta.exact_scheme != fingerprint.EXACT_SCHEME_ID:
        raise DbFormatError(
            f"{path}: db exact scheme {meta.exact_scheme!r} incompatible with "
            f"{fingerprint.EXACT_SCHEME_ID!r}"
        )
    if not isinstance(meta.cutoff, int) or isinstance(meta.cutoff, bool) or meta.cutoff < 0:
        raise DbFormatError(f"{path}: bad cutoff {meta.cutoff!r}")
    return meta


def _load_versions(path: Path) -> list[VersionMeta]:
    versions: list[VersionMeta] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split("\t")
        if len(parts) != 3 or not parts[0].isdigit() or not _DATE_RE.match(parts[2]):
            raise DbFormatError(f"{path}:{lineno}: bad version line {line!r}")
        versions.append(
            VersionMeta(
                version_id=parts[1],
                release_date=datetime.date.fromisoformat(parts[2]),
                ordinal=int(parts[0]),
            )
        )
    try:
        _check_version_order(versions)
    except SignatureError as exc:
        raise DbFormatError(f"{path}: {exc}") from exc
    return versions


def _load_entries(path: Path, n_versions: int) -> dict[FuncHash, SignatureEntry]:
    entries: dict[FuncHash, SignatureEntry] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        try:
            doc = json.loads(line)
            func_hash = FuncHash.from_token(doc["h"])
            versions = {int(v["o"]) for v in doc["v"]}
            paths = {int(v["o"]): set(map(str, v["p"])) for v in doc["v"]}
        except (ValueError, KeyError, TypeError) as exc:
            raise DbFormatError(f"{path}:{lineno}: corrupted entry: {exc}") from exc
        if not versions or not all(0 <= o < n_versions for o in versions):
            raise DbFormatError(f"{path}:{lineno}: version ordinal out of range")
        if any(not p for p in paths.values()):
            raise DbFormatError(f"{path}:{lineno}: empty path set")
        if func_hash in entries:
            raise DbFormatError(f"{path}:{lineno}: duplicate entry {doc['h']}")
        entries[func_hash] = SignatureEntry(hash=func_hash, versions=versions, paths=paths)
    return entries


def _load_app(path: Path, entries: dict[FuncHash, SignatureEntry]) -> tuple[bool, set[FuncHash]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] not in ("prime:true", "prime:false"):
        raise DbFormatError(f"{path}:1: expected 'prime:true' or 'prime:false'")
    is_prime = lines[0] == "prime:true"
    by_digest = {e.hash.digest: e.hash for e in entries.values()}
    app: set[FuncHash] = set()
    for lineno, digest in enumerate(lines[1:], 2):
        func_hash = by_digest.get(digest)
        if func_hash is None:
            raise DbFormatError(f"{path}:{lineno}: digest not in signature: {digest}")
        app.add(func_hash)
    return is_prime, app


def load_db(root: str | Path) -> ComponentDb:
    root = Path(root)
    meta = _load_meta(root / "db_meta.json")
    db = ComponentDb(meta=meta)
    for oss_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        sig_path = oss_dir / "sig.jsonl"
        meta_path = oss_dir / "meta.tsv"
        if not sig_path.is_file() or not meta_path.is_file():
            continue
        versions = _load_versions(meta_path)
        entries = _load_entries(sig_path, len(versions))
        sig = OssSignature(oss_id=oss_dir.name, version_meta=versions, entries=entries)
        app_path = oss_dir / "app.txt"
        if app_path.is_file():
            sig.is_prime, sig.app_entries = _load_app(app_path, entries)
        db.signatures[sig.oss_id] = sig
    return db
