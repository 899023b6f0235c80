"""Id-aligned vector embeddings: providers, normalization, similarity, cache.

Two provider roles are configured throughout the pipeline: one instance for
document texts and a second for cluster summaries.  The hash provider is the
offline stand-in; the remote provider speaks a small JSON protocol and is
configured through EMBED_ENDPOINT / EMBED_API_KEY.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class EmbeddingError(ValueError):
    """Zero rows, dimension mismatches, misalignment, transport failures."""


@dataclass(frozen=True)
class VectorSet:
    ids: tuple[str, ...]
    matrix: np.ndarray  # (n, d) float64
    provider_fingerprint: str = ""

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2:
            raise EmbeddingError("matrix must be 2-D")
        if mat.shape[0] != len(self.ids):
            raise EmbeddingError(
                f"row count {mat.shape[0]} != id count {len(self.ids)}"
            )
        # Provider dims are >= 2 (checked at the provider boundary); reduced
        # sets may legitimately be 1-D, e.g. PCA to a single component.
        if mat.shape[1] < 1:
            raise EmbeddingError("vector dimension must be >= 1")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, doc_id: str) -> np.ndarray:
        return self.matrix[self.ids.index(doc_id)]

    def subset(self, keep_ids: Sequence[str]) -> "VectorSet":
        index = {i: n for n, i in enumerate(self.ids)}
        rows = [index[i] for i in keep_ids]
        return VectorSet(tuple(keep_ids), self.matrix[rows],
                         self.provider_fingerprint)


def l2_normalize(v: VectorSet) -> VectorSet:
    norms = np.linalg.norm(v.matrix, axis=1)
    zero = np.where(norms == 0)[0]
    if zero.size:
        raise EmbeddingError(f"zero row for id {v.ids[zero[0]]!r}")
    return VectorSet(v.ids, v.matrix / norms[:, None], v.provider_fingerprint)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise EmbeddingError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise EmbeddingError("cosine undefined for zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


class HashEmbeddingProvider:
    """Deterministic offline provider: token-hash bag projected to d dims.

    Each lowercase token lands on a sha256-derived coordinate with a
    sha256-derived sign, so overlapping token sets get meaningful cosine
    similarity and identical strings embed identically across processes.
    """

    def __init__(self, dim: int = 384, name: str = "hash-bag"):
        if dim < 2:
            raise EmbeddingError("dim must be >= 2")
        self.dim = dim
        self.name = name
        self.max_batch = 1024

    @property
    def fingerprint(self) -> str:
        return f"{self.name}:d{self.dim}"

    @staticmethod
    def _tokens(text: str) -> list[str]:
        out, cur = [], []
        for ch in text.lower():
            if ch.isalnum():
                cur.append(ch)
            elif cur:
                out.append("".join(cur))
                cur = []
        if cur:
            out.append("".join(cur))
        return out

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        mat = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            tokens = self._tokens(text) or [text]
            for tok in tokens:
                digest = hashlib.sha256(tok.encode("utf-8")).digest()
                idx = int.from_bytes(digest[:8], "little") % self.dim
                sign = 1.0 if digest[8] % 2 == 0 else -1.0
                mat[i, idx] += sign
            norm = np.linalg.norm(mat[i])
            if norm == 0:  # all token signs cancelled; fall back to text hash
                digest = hashlib.sha256(text.encode("utf-8")).digest()
                mat[i, int.from_bytes(digest[:8], "little") % self.dim] = 1.0
                norm = 1.0
            mat[i] /= norm
        return mat


class RemoteEmbeddingProvider:
    """JSON-over-HTTP provider: POST {"texts": [...]} -> {"vectors": [[...]]}.

    Bounded retries with exponential backoff (3 attempts, base 500 ms).
    """

    def __init__(self, dim: int, name: str = "remote",
                 endpoint: Optional[str] = None, api_key: Optional[str] = None,
                 max_batch: int = 64, retries: int = 3,
                 backoff_base: float = 0.5, timeout: float = 30.0):
        if dim < 2:
            raise EmbeddingError("dim must be >= 2")
        self.dim = dim
        self.name = name
        self.endpoint = endpoint or os.environ.get("EMBED_ENDPOINT", "")
        self.api_key = api_key if api_key is not None else os.environ.get(
            "EMBED_API_KEY", "")
        if not self.endpoint:
            raise EmbeddingError("remote provider needs EMBED_ENDPOINT")
        self.max_batch = max_batch
        self.retries = retries
        self.backoff_base = backoff_base
        self.timeout = timeout

    @property
    def fingerprint(self) -> str:
        return f"{self.name}:d{self.dim}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        payload = json.dumps({"texts": list(texts)}).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint, data=payload,
            headers={"Content-Type": "application/json",
                     "Authorization": f"Bearer {self.api_key}"})
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    body = json.loads(resp.read().decode("utf-8"))
                vectors = np.asarray(body["vectors"], dtype=np.float64)
                if vectors.ndim != 2 or vectors.shape != (len(texts), self.dim):
                    raise EmbeddingError(
                        f"provider returned shape {vectors.shape}, "
                        f"expected ({len(texts)}, {self.dim})")
                return vectors
            except EmbeddingError:
                raise
            except Exception as exc:  # transport / decode failure: retry
                last_exc = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff_base * (2 ** attempt))
        raise EmbeddingError(f"remote embedding failed after "
                             f"{self.retries} attempts: {last_exc}")


class VectorCache:
    """Disk cache keyed by (provider fingerprint, content hash).

    One binary file per provider fingerprint.  Record layout per row:
    key length (u16 LE), key bytes (utf-8), dim (u32 LE), then dim
    little-endian float32 values.  Reads are lock-free after load; writes
    are serialized.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._mem: dict[str, dict[str, np.ndarray]] = {}

    def _path(self, fingerprint: str) -> Path:
        safe = hashlib.sha256(fingerprint.encode("utf-8")).hexdigest()[:24]
        return self.directory / f"vectors_{safe}.bin"

    @staticmethod
    def content_key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def _load(self, fingerprint: str) -> dict[str, np.ndarray]:
        if fingerprint in self._mem:
            return self._mem[fingerprint]
        table: dict[str, np.ndarray] = {}
        path = self._path(fingerprint)
        if path.exists():
            blob = path.read_bytes()
            off = 0
            while off < len(blob):
                (klen,) = struct.unpack_from("<H", blob, off)
                off += 2
                key = blob[off:off + klen].decode("utf-8")
                off += klen
                (dim,) = struct.unpack_from("<I", blob, off)
                off += 4
                vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=off)
                off += 4 * dim
                table[key] = vec.astype(np.float64)
        self._mem[fingerprint] = table
        return table

    def get(self, fingerprint: str, text: str) -> Optional[np.ndarray]:
        return self._load(fingerprint).get(self.content_key(text))

    def put_many(self, fingerprint: str, texts: Sequence[str],
                 vectors: np.ndarray) -> None:
        with self._lock:
            table = self._load(fingerprint)
            chunks = []
            for text, vec in zip(texts, vectors):
                key = self.content_key(text)
                if key in table:
                    continue
                table[key] = np.asarray(vec, dtype=np.float64)
                kb = key.encode("utf-8")
                chunks.append(struct.pack("<H", len(kb)) + kb
                              + struct.pack("<I", len(vec))
                              + np.asarray(vec, dtype="<f4").tobytes())
            if chunks:
                with self._path(fingerprint).open("ab") as fh:
                    fh.write(b"".join(chunks))


def embed_batch(provider, texts: Sequence[str],
                ids: Optional[Sequence[str]] = None,
                cache: Optional[VectorCache] = None) -> VectorSet:
    """Embed texts through a provider, splitting to respect max_batch.

    Row i corresponds to texts[i]; ids default to the row index as a string.
    """
    if ids is None:
        ids = [str(i) for i in range(len(texts))]
    if len(ids) != len(texts):
        raise EmbeddingError("ids and texts length mismatch")
    fp = provider.fingerprint
    rows: list[Optional[np.ndarray]] = [None] * len(texts)
    missing: list[int] = []
    if cache is not None:
        for i, text in enumerate(texts):
            hit = cache.get(fp, text)
            if hit is not None and hit.shape == (provider.dim,):
                rows[i] = hit
            else:
                missing.append(i)
    else:
        missing = list(range(len(texts)))
    for start in range(0, len(missing), provider.max_batch):
        chunk = missing[start:start + provider.max_batch]
        try:
            mat = provider.embed([texts[i] for i in chunk])
        except EmbeddingError as exc:
            raise EmbeddingError(
                f"batch starting at input index {chunk[0]}: {exc}") from None
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape != (len(chunk), provider.dim):
            raise EmbeddingError(
                f"batch starting at input index {chunk[0]}: provider "
                f"returned shape {mat.shape}, expected "
                f"({len(chunk)}, {provider.dim})")
        for row_i, i in enumerate(chunk):
            rows[i] = mat[row_i]
        if cache is not None:
            cache.put_many(fp, [texts[i] for i in chunk], mat)
    matrix = (np.vstack([r[None, :] for r in rows])
              if rows else np.zeros((0, provider.dim)))
    return VectorSet(tuple(ids), matrix, provider_fingerprint=fp)
