"""Exact and near deduplication against the accumulated corpus.

Exact duplicates are caught by a content hash of the clean text.  Everything
else gets a 128-permutation MinHash signature over word 3-gram shingles,
banded 8x16 into an LSH index; candidates coming out of a band bucket are
verified with exact Jaccard over the stored shingle sets before a verdict is
issued, so every near-duplicate outcome is brute-force reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime
from functools import lru_cache

import numpy as np

NUM_PERMUTATIONS = 128
BANDS = 8
ROWS_PER_BAND = 16
DEFAULT_JACCARD_THRESHOLD = 0.9
DEFAULT_SHINGLE_K = 3
_PERMUTE_PRIME = np.uint64((1 << 31) - 1)  # permutation universe (Mersenne)

VERDICT_EXACT = "exact_duplicate"
VERDICT_NEAR = "near_duplicate"
VERDICT_UNIQUE = "unique"


@dataclass(frozen=True)
class ShingleSet:
    """64-bit hashes of the lowercased k-word windows of a document."""

    k: int
    shingles: frozenset[int]

    def __len__(self) -> int:
        return len(self.shingles)


def shingle(text: str, k: int = DEFAULT_SHINGLE_K) -> ShingleSet:
    words = text.lower().split()
    hashes = set()
    for i in range(len(words) - k + 1):
        window = " ".join(words[i : i + k])
        digest = hashlib.blake2b(window.encode("utf-8"), digest_size=8).digest()
        hashes.add(int.from_bytes(digest, "little"))
    return ShingleSet(k=k, shingles=frozenset(hashes))


def exact_jaccard(a: frozenset[int] | set[int], b: frozenset[int] | set[int]) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def _jaccard_sorted(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.intersect1d(a, b, assume_unique=True).size
    union = a.size + b.size - inter
    return inter / union if union else 0.0


@lru_cache(maxsize=8)
def _permutation_params(seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    a = rng.integers(1, int(_PERMUTE_PRIME), size=NUM_PERMUTATIONS, dtype=np.uint64)
    b = rng.integers(0, int(_PERMUTE_PRIME), size=NUM_PERMUTATIONS, dtype=np.uint64)
    return a, b


@dataclass(frozen=True)
class MinHashSignature:
    values: tuple[int, ...]
    seed: int

    def __post_init__(self) -> None:
        if len(self.values) != NUM_PERMUTATIONS:
            raise ValueError(f"signature must have {NUM_PERMUTATIONS} values")


def _signature_matrix(shingle_arrays: list[np.ndarray], seed: int) -> np.ndarray:
    """(n_docs, 128) column minima of the permuted shingle values.

    Documents are concatenated and reduced in chunks so the permuted matrix
    stays small; every array must be non-empty.
    """
    a, b = _permutation_params(seed)
    out = np.empty((len(shingle_arrays), NUM_PERMUTATIONS), dtype=np.uint64)
    chunk_budget = 200_000
    i = 0
    while i < len(shingle_arrays):
        j = i
        total = 0
        while j < len(shingle_arrays) and (total == 0 or total + shingle_arrays[j].size <= chunk_budget):
            total += shingle_arrays[j].size
            j += 1
        concat = np.concatenate(shingle_arrays[i:j]).astype(np.uint64) % _PERMUTE_PRIME
        permuted = (concat[:, None] * a[None, :] + b[None, :]) % _PERMUTE_PRIME
        offsets = np.zeros(j - i, dtype=np.intp)
        np.cumsum([arr.size for arr in shingle_arrays[i : j - 1]], out=offsets[1:])
        out[i:j] = np.minimum.reduceat(permuted, offsets, axis=0)
        i = j
    return out


def minhash_signature(shingles: ShingleSet | set[int] | frozenset[int], seed: int = 0) -> MinHashSignature:
    values = shingles.shingles if isinstance(shingles, ShingleSet) else shingles
    if not values:
        raise ValueError("cannot sign an empty shingle set")
    arr = np.fromiter(values, dtype=np.uint64, count=len(values))
    row = _signature_matrix([arr], seed)[0]
    return MinHashSignature(values=tuple(int(v) for v in row), seed=seed)


def estimate_jaccard(sig_a: MinHashSignature, sig_b: MinHashSignature) -> float:
    matches = sum(1 for x, y in zip(sig_a.values, sig_b.values) if x == y)
    return matches / NUM_PERMUTATIONS


class LshIndex:
    """8 bands x 16 rows; a pair agreeing on all rows of any band collides."""

    def __init__(self, bands: int = BANDS, rows_per_band: int = ROWS_PER_BAND):
        if bands * rows_per_band != NUM_PERMUTATIONS:
            raise ValueError("bands * rows_per_band must equal the signature length")
        self.bands = bands
        self.rows_per_band = rows_per_band
        self.tables: list[dict[bytes, set]] = [{} for _ in range(bands)]
        self._band_keys: dict[object, list[bytes]] = {}

    @staticmethod
    def _as_array(signature) -> np.ndarray:
        if isinstance(signature, MinHashSignature):
            return np.asarray(signature.values, dtype=np.uint64)
        return np.asarray(signature, dtype=np.uint64)

    def _keys_for(self, signature) -> list[bytes]:
        row = self._as_array(signature)
        r = self.rows_per_band
        return [row[band * r : (band + 1) * r].tobytes() for band in range(self.bands)]

    def insert(self, doc_id, signature) -> None:
        keys = self._keys_for(signature)
        self._band_keys[doc_id] = keys
        for table, key in zip(self.tables, keys):
            table.setdefault(key, set()).add(doc_id)

    def remove(self, doc_id) -> None:
        keys = self._band_keys.pop(doc_id, None)
        if keys is None:
            return
        for table, key in zip(self.tables, keys):
            bucket = table.get(key)
            if bucket is not None:
                bucket.discard(doc_id)
                if not bucket:
                    del table[key]

    def candidates(self, signature) -> set:
        found: set = set()
        for table, key in zip(self.tables, self._keys_for(signature)):
            bucket = table.get(key)
            if bucket:
                found |= bucket
        return found

    def __len__(self) -> int:
        return len(self._band_keys)


@dataclass
class DedupDocument:
    """Input row for a dedup batch: id plus clean text (and tiebreak time)."""

    doc_id: str
    clean_text: str
    downloaded_at: datetime | None = None


@dataclass
class DedupOutcome:
    doc_id: str
    verdict: str
    representative: str
    jaccard: float | None = None


@dataclass
class _Group:
    gid: int
    rep_id: str
    rep_len: int
    rep_downloaded_at: datetime | None
    members: list[str]
    shingles: np.ndarray | None  # sorted uint64, None for degenerate groups
    signature: np.ndarray | None
    degenerate: bool = False


class CorpusState:
    """Accumulated dedup state carried from day to day."""

    def __init__(self, seed: int = 0, k: int = DEFAULT_SHINGLE_K,
                 threshold: float = DEFAULT_JACCARD_THRESHOLD):
        self.seed = seed
        self.k = k
        self.threshold = threshold
        self.hashes: dict[str, int] = {}  # content hash hex -> gid
        self.groups: dict[int, _Group] = {}
        self.doc_group: dict[str, int] = {}
        self.lsh = LshIndex()
        self.next_gid = 0

    # -- queries -------------------------------------------------------------

    def representative_count(self) -> int:
        return len(self.groups)

    def document_count(self) -> int:
        return len(self.doc_group)

    def group_members(self) -> dict[str, list[str]]:
        """rep doc id -> all member doc ids (rep included)."""
        return {g.rep_id: list(g.members) for g in self.groups.values()}

    def representative_of(self, doc_id: str) -> str:
        return self.groups[self.doc_group[doc_id]].rep_id

    # -- mutation ------------------------------------------------------------

    def _new_group(self, doc: DedupDocument, content_hash: str,
                   shingles: np.ndarray | None, signature: np.ndarray | None,
                   degenerate: bool) -> _Group:
        group = _Group(
            gid=self.next_gid,
            rep_id=doc.doc_id,
            rep_len=len(doc.clean_text),
            rep_downloaded_at=doc.downloaded_at,
            members=[doc.doc_id],
            shingles=shingles,
            signature=signature,
            degenerate=degenerate,
        )
        self.next_gid += 1
        self.groups[group.gid] = group
        self.hashes[content_hash] = group.gid
        self.doc_group[doc.doc_id] = group.gid
        if signature is not None:
            self.lsh.insert(group.gid, signature)
        return group

    def _add_member(self, group: _Group, doc: DedupDocument, content_hash: str,
                    shingles: np.ndarray | None, signature: np.ndarray | None) -> None:
        group.members.append(doc.doc_id)
        self.doc_group[doc.doc_id] = group.gid
        if content_hash not in self.hashes:
            self.hashes[content_hash] = group.gid
        if shingles is None:
            return
        longer = len(doc.clean_text) > group.rep_len
        tie_earlier = (
            len(doc.clean_text) == group.rep_len
            and doc.downloaded_at is not None
            and group.rep_downloaded_at is not None
            and doc.downloaded_at < group.rep_downloaded_at
        )
        if longer or tie_earlier:
            # the group is now represented by this member; verdicts already
            # issued are not rewritten
            group.rep_id = doc.doc_id
            group.rep_len = len(doc.clean_text)
            group.rep_downloaded_at = doc.downloaded_at
            group.shingles = shingles
            if signature is not None:
                self.lsh.remove(group.gid)
                group.signature = signature
                self.lsh.insert(group.gid, signature)


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def dedup_batch(docs: list[DedupDocument], state: CorpusState) -> list[DedupOutcome]:
    """Classify a batch in order against (and into) the corpus state."""
    # precompute shingles and signatures for docs that cannot be resolved by
    # a hash already known before the batch
    precomputed: dict[int, tuple[str, np.ndarray | None]] = {}
    sign_indexes: list[int] = []
    sign_arrays: list[np.ndarray] = []
    hashes = [content_hash(d.clean_text) for d in docs]
    for i, doc in enumerate(docs):
        if hashes[i] in state.hashes:
            continue
        shingle_set = shingle(doc.clean_text, state.k)
        if len(shingle_set) == 0:
            precomputed[i] = (hashes[i], None)
            continue
        arr = np.sort(np.fromiter(shingle_set.shingles, dtype=np.uint64, count=len(shingle_set)))
        precomputed[i] = (hashes[i], arr)
        sign_indexes.append(i)
        sign_arrays.append(arr)
    signatures: dict[int, np.ndarray] = {}
    if sign_arrays:
        matrix = _signature_matrix(sign_arrays, state.seed)
        for row, i in enumerate(sign_indexes):
            signatures[i] = matrix[row]

    outcomes: list[DedupOutcome] = []
    for i, doc in enumerate(docs):
        h = hashes[i]
        gid = state.hashes.get(h)
        if gid is not None:
            group = state.groups[gid]
            state._add_member(group, doc, h, None, None)
            outcomes.append(DedupOutcome(doc.doc_id, VERDICT_EXACT, group.rep_id))
            continue
        _, arr = precomputed[i]
        if arr is None:
            # too short to shingle: content-hash dedup only, degenerate group
            group = state._new_group(doc, h, None, None, degenerate=True)
            outcomes.append(DedupOutcome(doc.doc_id, VERDICT_UNIQUE, doc.doc_id))
            continue
        signature = signatures[i]
        best_gid = -1
        best_j = 0.0
        for cand_gid in state.lsh.candidates(signature):
            cand = state.groups[cand_gid]
            if cand.shingles is None:
                continue
            j = _jaccard_sorted(arr, cand.shingles)
            if j > best_j or (j == best_j and 0 <= best_gid and cand_gid < best_gid):
                best_j = j
                best_gid = cand_gid
        if best_gid >= 0 and best_j >= state.threshold:
            group = state.groups[best_gid]
            state._add_member(group, doc, h, arr, signature)
            outcomes.append(
                DedupOutcome(doc.doc_id, VERDICT_NEAR, group.rep_id, jaccard=best_j)
            )
        else:
            state._new_group(doc, h, arr, signature, degenerate=False)
            outcomes.append(DedupOutcome(doc.doc_id, VERDICT_UNIQUE, doc.doc_id))
    return outcomes


def seed_corpus(docs: list[DedupDocument], state: CorpusState) -> None:
    """Bulk-load documents that are known distinct as unique groups.

    Used to (re)build a large index quickly; duplicate content hashes are
    still collapsed, but no near-duplicate verification is performed.
    """
    arrays = []
    kept: list[tuple[DedupDocument, str]] = []
    for doc in docs:
        h = content_hash(doc.clean_text)
        if h in state.hashes:
            gid = state.hashes[h]
            state._add_member(state.groups[gid], doc, h, None, None)
            continue
        shingle_set = shingle(doc.clean_text, state.k)
        if len(shingle_set) == 0:
            state._new_group(doc, h, None, None, degenerate=True)
            continue
        arr = np.sort(np.fromiter(shingle_set.shingles, dtype=np.uint64, count=len(shingle_set)))
        arrays.append(arr)
        kept.append((doc, h))
    if not arrays:
        return
    matrix = _signature_matrix(arrays, state.seed)
    for (doc, h), arr, signature in zip(kept, arrays, matrix):
        state._new_group(doc, h, arr, signature, degenerate=False)


# -- persistence ---------------------------------------------------------------


def state_to_json(state: CorpusState) -> bytes:
    groups = []
    for gid in sorted(state.groups):
        g = state.groups[gid]
        groups.append(
            {
                "gid": g.gid,
                "rep": g.rep_id,
                "rep_len": g.rep_len,
                "rep_ts": g.rep_downloaded_at.strftime("%Y-%m-%dT%H:%M:%SZ")
                if g.rep_downloaded_at
                else None,
                "members": g.members,
                "shingles": [int(x) for x in g.shingles] if g.shingles is not None else None,
                "signature": [int(x) for x in g.signature] if g.signature is not None else None,
                "degenerate": g.degenerate,
            }
        )
    payload = {
        "seed": state.seed,
        "k": state.k,
        "threshold": state.threshold,
        "next_gid": state.next_gid,
        "groups": groups,
        "hashes": {h: gid for h, gid in sorted(state.hashes.items())},
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def state_from_json(blob: bytes) -> CorpusState:
    payload = json.loads(blob.decode("utf-8"))
    state = CorpusState(seed=payload["seed"], k=payload["k"], threshold=payload["threshold"])
    state.next_gid = payload["next_gid"]
    state.hashes = dict(payload["hashes"])
    from datetime import timezone

    for g in payload["groups"]:
        shingles = (
            np.asarray(g["shingles"], dtype=np.uint64) if g["shingles"] is not None else None
        )
        signature = (
            np.asarray(g["signature"], dtype=np.uint64) if g["signature"] is not None else None
        )
        rep_ts = (
            datetime.strptime(g["rep_ts"], "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
            if g["rep_ts"]
            else None
        )
        group = _Group(
            gid=g["gid"],
            rep_id=g["rep"],
            rep_len=g["rep_len"],
            rep_downloaded_at=rep_ts,
            members=list(g["members"]),
            shingles=shingles,
            signature=signature,
            degenerate=g["degenerate"],
        )
        state.groups[group.gid] = group
        for member in group.members:
            state.doc_group[member] = group.gid
        if signature is not None:
            state.lsh.insert(group.gid, signature)
    return state
