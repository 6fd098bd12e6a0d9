"""In-memory embedding model with word2vec-format IO and exact neighbor search.

The on-disk conventions are the two classic word2vec formats:

* text: first line ``"<vocab_count> <dim>"``, then one line per token with
  ``dim`` space-separated decimals. Written decimals use the shortest
  representation that round-trips the stored float exactly.
* binary: ASCII header ``"<vocab_count> <dim>\\n"``, then per entry the token
  bytes, a single space, ``dim`` little-endian float32 values, and a
  trailing newline. The float payload round-trips bit-exactly.

Frequencies are not part of either word2vec format; they travel in an
optional tab-separated sidecar (``token<TAB>count``).

Models are treated as immutable once constructed; the trainer owns and
mutates only states it created itself.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

TEXT = "text"
BINARY = "binary"

_FLOAT32_BYTES = 4


def _format_value(x: float) -> str:
    # shortest decimal string that uniquely identifies the stored float
    return np.format_float_positional(x, unique=True, trim="-")


@dataclass
class EmbeddingModel:
    """Token vocabulary with one dense vector and one frequency per token.

    ``vectors`` is row-major ``(len(tokens), dim)``; row i belongs to
    ``tokens[i]``. Token order is significant and survives save/load
    round-trips.
    """

    tokens: list[str]
    vectors: np.ndarray
    freqs: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D matrix")
        if self.vectors.shape[0] != len(self.tokens):
            raise ValueError(
                f"vector rows ({self.vectors.shape[0]}) != vocabulary size ({len(self.tokens)})"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("vectors contain non-finite values")
        self.freqs = np.asarray(self.freqs, dtype=np.int64)
        if self.freqs.shape != (len(self.tokens),):
            raise ValueError("freqs must have one entry per token")
        if np.any(self.freqs < 0):
            raise ValueError("freqs must be non-negative")
        self._index = {}
        for i, tok in enumerate(self.tokens):
            if tok in self._index:
                raise ValueError(f"duplicate token in vocabulary: {tok!r}")
            self._index[tok] = i

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingModel):
            return NotImplemented
        return (
            self.tokens == other.tokens
            and self.vectors.shape == other.vectors.shape
            and bool(np.all(self.vectors == other.vectors))
            and bool(np.all(self.freqs == other.freqs))
        )

    def index(self, token: str) -> int:
        """Row index of ``token``; KeyError if absent."""
        return self._index[token]

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self._index[token]]

    def freq(self, token: str) -> int:
        return int(self.freqs[self._index[token]])


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two same-dimension vectors.

    Raises ValueError for a zero-norm input (the similarity is undefined).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine is undefined for zero-norm vectors")
    return float(np.dot(u, v) / (nu * nv))


def nearest_neighbors(
    model: EmbeddingModel,
    query: np.ndarray,
    k: int,
    exclude: set[str] | frozenset[str] = frozenset(),
) -> list[tuple[str, float]]:
    """Exact top-k vocabulary tokens by cosine similarity to ``query``.

    Full scan over the vocabulary; ties broken by ascending vocabulary
    index, so results are deterministic. Tokens in ``exclude`` (and any
    zero-norm rows, whose similarity is undefined) never appear. Returns
    fewer than k entries only when the candidate pool is smaller than k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (model.dim,):
        raise ValueError(f"query dimension {query.shape} != model dim {model.dim}")
    qnorm = np.linalg.norm(query)
    if qnorm == 0.0:
        raise ValueError("cosine is undefined for a zero-norm query")

    vecs = model.vectors.astype(np.float64, copy=False)
    norms = np.linalg.norm(vecs, axis=1)
    scores = vecs @ (query / qnorm)
    valid = norms > 0.0
    scores[valid] /= norms[valid]
    scores[~valid] = -np.inf
    for tok in exclude:
        i = model._index.get(tok)
        if i is not None:
            scores[i] = -np.inf

    n_candidates = int(np.count_nonzero(scores > -np.inf))
    k_eff = min(k, n_candidates)
    if k_eff == 0:
        return []
    # stable sort on descending score keeps ascending-index tie order
    order = np.argsort(-scores, kind="stable")[:k_eff]
    return [(model.tokens[int(i)], float(scores[int(i)])) for i in order]


# ---------------------------------------------------------------------------
# word2vec text format


def _save_text(model: EmbeddingModel, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{len(model)} {model.dim}\n")
        for i, tok in enumerate(model.tokens):
            row = " ".join(_format_value(x) for x in model.vectors[i])
            f.write(f"{tok} {row}\n" if model.dim else f"{tok}\n")


def _parse_header(fields: list[str]) -> tuple[int, int] | None:
    if len(fields) != 2:
        return None
    try:
        count, dim = int(fields[0]), int(fields[1])
    except ValueError:
        return None
    if count < 0 or dim < 0:
        return None
    return count, dim


def _load_text(path: str) -> EmbeddingModel:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise FormatError("empty file", path=path, line=1)

    header = _parse_header(lines[0].split())
    if header is not None:
        count, dim = header
        body = lines[1:]
        body_start = 2
    else:
        body = lines
        body_start = 1
        count = len(body)
        dim = max(len(body[0].split()) - 1, 0) if body else 0

    if len(body) != count:
        raise FormatError(
            f"header declares {count} tokens but file has {len(body)} rows",
            path=path, line=1,
        )

    tokens: list[str] = []
    vectors = np.empty((count, dim), dtype=np.float32)
    for i, line in enumerate(body):
        fields = line.split()
        if len(fields) != dim + 1:
            raise FormatError(
                f"expected token + {dim} values, got {len(fields)} fields",
                path=path, line=body_start + i,
            )
        tokens.append(fields[0])
        try:
            row = np.array([float(x) for x in fields[1:]], dtype=np.float32)
        except ValueError as exc:
            raise FormatError(f"unparseable value: {exc}", path=path,
                              line=body_start + i) from None
        if not np.all(np.isfinite(row)):
            raise FormatError("non-finite vector component", path=path,
                              line=body_start + i)
        vectors[i] = row

    return EmbeddingModel(tokens, vectors, np.zeros(count, dtype=np.int64))


# ---------------------------------------------------------------------------
# word2vec binary format


def _save_binary(model: EmbeddingModel, path: str) -> None:
    with open(path, "wb") as f:
        f.write(f"{len(model)} {model.dim}\n".encode("ascii"))
        for i, tok in enumerate(model.tokens):
            f.write(tok.encode("utf-8") + b" ")
            f.write(np.ascontiguousarray(model.vectors[i], dtype="<f4").tobytes())
            f.write(b"\n")


def _read_until(f: io.BufferedReader, stop: bytes, path: str) -> bytes:
    chunks = []
    while True:
        b = f.read(1)
        if not b:
            raise FormatError("unexpected end of file", path=path, offset=f.tell())
        if b == stop:
            return b"".join(chunks)
        chunks.append(b)


def _load_binary(path: str) -> EmbeddingModel:
    with open(path, "rb") as f:
        header_raw = _read_until(f, b"\n", path)
        try:
            header = _parse_header(header_raw.decode("ascii").split())
        except UnicodeDecodeError:
            header = None
        if header is None:
            raise FormatError("malformed binary header", path=path, offset=0)
        count, dim = header

        tokens: list[str] = []
        vectors = np.empty((count, dim), dtype=np.float32)
        for i in range(count):
            raw = _read_until(f, b" ", path)
            # a writer may have terminated the previous vector with a newline
            raw = raw.lstrip(b"\n")
            try:
                token = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise FormatError("token is not valid UTF-8", path=path,
                                  offset=f.tell()) from None
            payload = f.read(dim * _FLOAT32_BYTES)
            if len(payload) != dim * _FLOAT32_BYTES:
                raise FormatError(
                    f"truncated vector for token {token!r}", path=path,
                    offset=f.tell(),
                )
            row = np.frombuffer(payload, dtype="<f4")
            if not np.all(np.isfinite(row)):
                raise FormatError(f"non-finite vector component for token {token!r}",
                                  path=path, offset=f.tell())
            tokens.append(token)
            vectors[i] = row

        trailing = f.read()
        if trailing.strip(b"\n"):
            raise FormatError(
                f"{len(trailing)} unexpected trailing bytes after last entry",
                path=path, offset=f.tell(),
            )

    return EmbeddingModel(tokens, vectors, np.zeros(count, dtype=np.int64))


# ---------------------------------------------------------------------------
# public IO entry points


def save_model(model: EmbeddingModel, path: str, format: str = BINARY) -> None:
    """Write ``model`` to ``path`` in the requested word2vec format."""
    if any(ch.isspace() for tok in model.tokens for ch in tok):
        raise ValueError("tokens may not contain whitespace")
    if format == TEXT:
        _save_text(model, str(path))
    elif format == BINARY:
        _save_binary(model, str(path))
    else:
        raise ValueError(f"unknown format {format!r}")


def load_model(path: str, format: str = BINARY) -> EmbeddingModel:
    """Read a word2vec-format file. Frequencies are zeroed; see load_freqs."""
    if format == TEXT:
        return _load_text(str(path))
    if format == BINARY:
        return _load_binary(str(path))
    raise ValueError(f"unknown format {format!r}")


def save_freqs(model: EmbeddingModel, path: str) -> None:
    """Write the token frequency sidecar (token<TAB>count, file order)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for tok, count in zip(model.tokens, model.freqs):
            f.write(f"{tok}\t{int(count)}\n")


def load_freqs(path: str) -> dict[str, int]:
    """Read a frequency sidecar into a token -> count mapping."""
    freqs: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError("expected token<TAB>count", path=str(path),
                                  line=lineno)
            try:
                freqs[parts[0]] = int(parts[1])
            except ValueError:
                raise FormatError(f"unparseable count {parts[1]!r}",
                                  path=str(path), line=lineno) from None
    return freqs


def attach_freqs(model: EmbeddingModel, freqs: dict[str, int]) -> EmbeddingModel:
    """Return a model equal to ``model`` but with frequencies from ``freqs``.

    Tokens missing from ``freqs`` keep count 0.
    """
    counts = np.array([freqs.get(t, 0) for t in model.tokens], dtype=np.int64)
    return EmbeddingModel(list(model.tokens), model.vectors, counts)
