"""Text encoders served over the embedding endpoint.

Two encoders with one duck-typed interface (``dim``, ``name``,
``encode(texts) -> list[list[float]]``):

* :class:`HashEncoder` derives vectors from BLAKE2b digests of the text, so it
  needs no model weights and is bit-stable across machines.  Clients that ship
  a compatible hash embedder can interoperate with it exactly.
* :class:`SbertEncoder` wraps a sentence-transformers model, loaded lazily on
  first use so the process can start (and report health) before the weights
  are available on disk.
"""

from __future__ import annotations

import hashlib
import threading

import numpy as np


class ModelNotLoadedError(RuntimeError):
    """A model-backed component was asked to run before its weights loaded."""


class HashEncoder:
    """Deterministic hash-derived unit vectors, no model weights involved.

    The text's UTF-8 bytes are condensed to an 8-byte seed with BLAKE2b, and
    64-byte BLAKE2b digests of seed||counter (counter as 4 little-endian
    bytes) are concatenated into a stream of little-endian 64-bit words.  The
    top 53 bits of each word give a uniform in [0, 1); pairs of uniforms run
    through Box-Muller (the first of each pair floored to 2**-53 to keep the
    log finite) to yield normal deviates, cosine then sine.  The first ``dim``
    deviates, divided by the square root of their sum of squares, form the
    output.  Every step is integer or IEEE-754 double arithmetic with a fixed
    evaluation order, so equal text always yields equal bytes.
    """

    def __init__(self, dim: int = 768):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.name = "hash-v1"

    def encode(self, texts: list[str]) -> list[list[float]]:
        return [self._vector(t).tolist() for t in texts]

    def _vector(self, text: str) -> np.ndarray:
        seed = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
        n_pairs = (self.dim + 1) // 2
        n_blocks = -(-2 * n_pairs // 8)  # 8 words per 64-byte digest
        stream = b"".join(
            hashlib.blake2b(seed + c.to_bytes(4, "little"), digest_size=64).digest()
            for c in range(n_blocks)
        )
        words = np.frombuffer(stream, dtype="<u8")[: 2 * n_pairs]
        uniforms = (words >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u1 = np.maximum(uniforms[0::2], 2.0**-53)
        u2 = uniforms[1::2]
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = (2.0 * np.pi) * u2
        normals = np.empty(2 * n_pairs, dtype=np.float64)
        normals[0::2] = radius * np.cos(angle)
        normals[1::2] = radius * np.sin(angle)
        vec = normals[: self.dim]
        return vec / np.sqrt(np.sum(vec * vec))


class SbertEncoder:
    """sentence-transformers encoder, loaded lazily and cached for the process.

    ``dim`` is None until the model has loaded; callers that need it should
    call :meth:`ensure_loaded` first and be prepared for
    :class:`ModelNotLoadedError` when the weights cannot be fetched.
    """

    def __init__(self, model_name: str):
        self.model_name = model_name
        self.name = model_name
        self.dim: int | None = None
        self._model = None
        self._lock = threading.Lock()

    def ensure_loaded(self) -> None:
        if self._model is not None:
            return
        with self._lock:
            if self._model is not None:
                return
            try:
                from sentence_transformers import SentenceTransformer

                model = SentenceTransformer(self.model_name)
            except Exception as exc:
                raise ModelNotLoadedError(
                    f"encoder model {self.model_name!r} is not loaded: {exc}"
                ) from exc
            self.dim = int(model.get_sentence_embedding_dimension())
            self._model = model

    def encode(self, texts: list[str]) -> list[list[float]]:
        self.ensure_loaded()
        if not texts:
            return []
        vecs = self._model.encode(
            list(texts), convert_to_numpy=True, show_progress_bar=False
        )
        return np.asarray(vecs, dtype=np.float64).tolist()
