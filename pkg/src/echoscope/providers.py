"""Embedding and stance providers.

Two implementations share one interface: a fully deterministic in-process mock
(hash-seeded embeddings, marker-based stances) and a client for a remote HTTP
service.  Both are referentially transparent: the same text always yields the
same vector, the same (post, parent, comment) triple the same stance.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx
import numpy as np

from .errors import ConfigurationError, ProviderError, ProviderTransportError

log = logging.getLogger(__name__)


class Stance(enum.Enum):
    """Stance of a comment toward its reply target."""

    FAVOR = 1
    AGAINST = -1
    NONE = 0

    @property
    def sigma(self) -> int:
        """Signed multiplier: +1 favor, -1 against, 0 neutral/unknown."""
        return self.value

    @property
    def label(self) -> str:
        return self.name.lower()


_LABEL_RE = re.compile(r"\b(favor|against|none|unsure)", re.IGNORECASE)
_LABEL_MAP = {
    "favor": Stance.FAVOR,
    "against": Stance.AGAINST,
    "none": Stance.NONE,
    "unsure": Stance.NONE,
}


@dataclass
class ParseCounters:
    """Tally of free-text stance outputs that carried no recognizable label."""

    fallbacks: int = 0


def parse_stance_label(raw: str, counters: ParseCounters | None = None) -> Stance:
    """Map a free-text stance output onto a :class:`Stance`.

    Case-insensitive scan for the first of ``favor``, ``against``, ``none`` or
    ``unsure`` starting at a word boundary (so "favorable" counts as favor but
    "unfavorable" does not).  ``unsure`` folds into NONE.  Text with no
    recognizable label maps to NONE and is counted as a fallback; this function
    never raises.
    """
    m = _LABEL_RE.search(raw or "")
    if m is None:
        if counters is not None:
            counters.fallbacks += 1
        return Stance.NONE
    return _LABEL_MAP[m.group(1).lower()]


@dataclass(frozen=True)
class StanceItem:
    """One stance query: the comment, its reply target, and the root post title."""

    post: str
    parent: str
    comment: str


def hash_unit_vector(text: str, dim: int) -> np.ndarray:
    """Deterministic unit vector derived from the text alone.

    BLAKE2b condenses the UTF-8 text to an 8-byte seed; BLAKE2b digests of
    seed||counter then supply a stream of 64-bit words.  Each word becomes a
    uniform in [0, 1) by keeping its top 53 bits (w >> 11, scaled by 2**-53);
    consecutive uniform pairs feed the Box-Muller transform.  The first ``dim``
    normal deviates are divided by sqrt(sum of squares).  No library RNG is
    involved, so the output is stable across platforms and library versions.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    seed = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    n_pairs = (dim + 1) // 2
    words = np.empty(2 * n_pairs, dtype=np.uint64)
    filled = 0
    counter = 0
    while filled < words.size:
        digest = hashlib.blake2b(seed + counter.to_bytes(4, "little"), digest_size=64).digest()
        chunk = np.frombuffer(digest, dtype="<u8")
        take = min(chunk.size, words.size - filled)
        words[filled : filled + take] = chunk[:take]
        filled += take
        counter += 1
    uniforms = (words >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u1 = np.maximum(uniforms[0::2], 2.0**-53)
    u2 = uniforms[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = (2.0 * np.pi) * u2
    normals = np.empty(2 * n_pairs, dtype=np.float64)
    normals[0::2] = radius * np.cos(angle)
    normals[1::2] = radius * np.sin(angle)
    vec = normals[:dim]
    return vec / np.sqrt(np.sum(vec * vec))


_AGREE_PREFIX = "AGREE:"
_DISAGREE_PREFIX = "DISAGREE:"


class MockProvider:
    """In-process provider for tests and offline runs.

    Embeddings come from :func:`hash_unit_vector`.  Stances are read off
    explicit markers: a comment starting with ``AGREE:`` is favor, with
    ``DISAGREE:`` is against, anything else is none.
    """

    name = "mock"

    def __init__(self, dim: int = 768, workers: int = 1):
        if dim < 1:
            raise ConfigurationError(f"embedding dim must be positive, got {dim}")
        self.dim = dim
        self.workers = max(1, int(workers))

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        for i, t in enumerate(texts):
            if not isinstance(t, str) or not t:
                raise ProviderError(f"embedding input {i} is empty or not a string")
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        if self.workers == 1 or len(texts) < 2:
            rows = [hash_unit_vector(t, self.dim) for t in texts]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(lambda t: hash_unit_vector(t, self.dim), texts))
        return np.stack(rows)

    def detect_stances(self, items: list[StanceItem]) -> list[Stance]:
        return [self._stance_of(item) for item in items]

    @staticmethod
    def _stance_of(item: StanceItem) -> Stance:
        body = item.comment.lstrip()
        if body.startswith(_AGREE_PREFIX):
            return Stance.FAVOR
        if body.startswith(_DISAGREE_PREFIX):
            return Stance.AGAINST
        return Stance.NONE

    def health(self) -> dict:
        return {
            "status": "ok",
            "dim": self.dim,
            "models": {"embedding": "hash-v1", "stance": "marker-v1"},
        }


class RemoteProvider:
    """Client for an embedding/stance HTTP service.

    Requests are batched, at most ``max_in_flight`` batches run concurrently,
    and results are reassembled in input order.  Transient transport failures
    and 5xx responses are retried with exponential backoff; exhausting the
    retries raises :class:`ProviderTransportError`.  A service whose advertised
    dimension disagrees with the configured one is a configuration error, not
    a retry case.
    """

    name = "remote"

    def __init__(
        self,
        base_url: str,
        dim: int,
        *,
        timeout: float = 30.0,
        retries: int = 2,
        batch_size: int = 64,
        max_in_flight: int = 8,
        backoff: float = 0.25,
    ):
        if not base_url:
            raise ConfigurationError("remote provider requires a base URL")
        self.base_url = base_url.rstrip("/")
        self.dim = dim
        self.retries = max(0, int(retries))
        self.batch_size = max(1, int(batch_size))
        self.max_in_flight = max(1, int(max_in_flight))
        self.backoff = backoff
        self._client = httpx.Client(base_url=self.base_url, timeout=timeout)
        self._embed_memo: dict[str, np.ndarray] = {}
        self._stance_memo: dict[StanceItem, Stance] = {}
        self._counters = ParseCounters()

    def close(self):
        self._client.close()

    @property
    def stance_fallbacks(self) -> int:
        return self._counters.fallbacks

    def _request(self, method: str, path: str, payload=None) -> dict:
        import time

        attempt = 0
        while True:
            try:
                resp = self._client.request(method, path, json=payload)
            except httpx.HTTPError as exc:
                if attempt >= self.retries:
                    raise ProviderTransportError(
                        f"{method} {path} failed after {attempt + 1} attempts: {exc}"
                    ) from exc
                time.sleep(self.backoff * (2**attempt))
                attempt += 1
                continue
            if resp.status_code >= 500:
                if attempt >= self.retries:
                    raise ProviderTransportError(
                        f"{method} {path} returned {resp.status_code} after {attempt + 1} attempts"
                    )
                time.sleep(self.backoff * (2**attempt))
                attempt += 1
                continue
            if resp.status_code != 200:
                raise ProviderError(f"{method} {path} returned {resp.status_code}: {resp.text[:200]}")
            return resp.json()

    def _embed_batch(self, batch: list[str]) -> list[np.ndarray]:
        data = self._request("POST", "/embed", {"texts": batch})
        vectors = data.get("embeddings")
        if not isinstance(vectors, list) or len(vectors) != len(batch):
            raise ProviderError("embed response length does not match request")
        got_dim = data.get("dim")
        if got_dim != self.dim:
            raise ConfigurationError(
                f"service embeds at dim {got_dim} but the run is configured for dim {self.dim}"
            )
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise ConfigurationError(
                    f"service returned a vector of shape {arr.shape}, expected ({self.dim},)"
                )
            out.append(arr)
        return out

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        for i, t in enumerate(texts):
            if not isinstance(t, str) or not t:
                raise ProviderError(f"embedding input {i} is empty or not a string")
        pending = []
        for t in texts:
            if t not in self._embed_memo and t not in pending:
                pending.append(t)
        if pending:
            batches = [pending[i : i + self.batch_size] for i in range(0, len(pending), self.batch_size)]
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                results = list(pool.map(self._embed_batch, batches))
            for batch, rows in zip(batches, results):
                for text, row in zip(batch, rows):
                    self._embed_memo[text] = row
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([self._embed_memo[t] for t in texts])

    def _stance_batch(self, batch: list[StanceItem]) -> list[Stance]:
        payload = {"items": [{"post": i.post, "parent": i.parent, "comment": i.comment} for i in batch]}
        data = self._request("POST", "/stance", payload)
        labels = data.get("stances")
        if not isinstance(labels, list) or len(labels) != len(batch):
            raise ProviderError("stance response length does not match request")
        return [parse_stance_label(str(lbl), self._counters) for lbl in labels]

    def detect_stances(self, items: list[StanceItem]) -> list[Stance]:
        pending = []
        for item in items:
            if item not in self._stance_memo and item not in pending:
                pending.append(item)
        if pending:
            batches = [pending[i : i + self.batch_size] for i in range(0, len(pending), self.batch_size)]
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                results = list(pool.map(self._stance_batch, batches))
            for batch, stances in zip(batches, results):
                for item, stance in zip(batch, stances):
                    self._stance_memo[item] = stance
        return [self._stance_memo[item] for item in items]

    def health(self) -> dict:
        data = self._request("GET", "/health")
        got_dim = data.get("dim")
        if got_dim != self.dim:
            raise ConfigurationError(
                f"service embeds at dim {got_dim} but the run is configured for dim {self.dim}"
            )
        return data


def make_provider(kind: str, dim: int, *, workers: int = 1, remote_url: str | None = None, **remote_kwargs):
    """Instantiate a provider by name ("mock" or "remote")."""
    if kind == "mock":
        return MockProvider(dim=dim, workers=workers)
    if kind == "remote":
        if not remote_url:
            raise ConfigurationError("provider 'remote' requires a base URL (config or ECHOSCOPE_REMOTE_URL)")
        return RemoteProvider(remote_url, dim, **remote_kwargs)
    raise ConfigurationError(f"unknown provider kind: {kind!r}")
