"""User/item embedding matrix, dot-product scoring and the on-disk model format."""

from __future__ import annotations

import os
import struct
from collections.abc import Collection, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"SKEWREC1"
_HEADER = struct.Struct("<QQQ")
_LEN = struct.Struct("<Q")
_F64 = np.dtype("<f8")


class ModelFormatError(ValueError):
    pass


@dataclass(eq=False)
class EmbeddingModel:
    """Rows of ``user_vecs`` and ``item_vecs`` are the user and item embeddings.

    Both matrices are C-contiguous float64 so the trainer can update them
    in place from several threads.
    """

    user_vecs: np.ndarray
    item_vecs: np.ndarray
    user_keys: tuple[str, ...] = field(default=())
    item_keys: tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.user_vecs = np.ascontiguousarray(self.user_vecs, dtype=np.float64)
        self.item_vecs = np.ascontiguousarray(self.item_vecs, dtype=np.float64)
        if self.user_vecs.ndim != 2 or self.item_vecs.ndim != 2:
            raise ValueError("embedding matrices must be 2-d")
        if self.user_vecs.shape[1] != self.item_vecs.shape[1] or self.user_vecs.shape[1] < 1:
            raise ValueError("user and item embeddings need the same dimension d >= 1")
        if not self.user_keys:
            self.user_keys = tuple(str(u) for u in range(self.n_users))
        if not self.item_keys:
            self.item_keys = tuple(str(i) for i in range(self.n_items))
        self.user_keys, self.item_keys = tuple(self.user_keys), tuple(self.item_keys)
        if len(self.user_keys) != self.n_users or len(self.item_keys) != self.n_items:
            raise ValueError("ID maps do not match the embedding row counts")

    @property
    def d(self) -> int:
        return self.user_vecs.shape[1]

    @property
    def n_users(self) -> int:
        return self.user_vecs.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_vecs.shape[0]

    def copy(self) -> EmbeddingModel:
        return EmbeddingModel(
            self.user_vecs.copy(), self.item_vecs.copy(), self.user_keys, self.item_keys
        )

    def same_as(self, other: EmbeddingModel) -> bool:
        """Bit-exact equality of parameters and maps."""
        return (
            self.user_keys == other.user_keys
            and self.item_keys == other.item_keys
            and self.user_vecs.shape == other.user_vecs.shape
            and self.item_vecs.shape == other.item_vecs.shape
            and self.user_vecs.tobytes() == other.user_vecs.tobytes()
            and self.item_vecs.tobytes() == other.item_vecs.tobytes()
        )

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.user_vecs).all() and np.isfinite(self.item_vecs).all())

    def sq_norm(self) -> float:
        return float(np.sum(self.user_vecs**2) + np.sum(self.item_vecs**2))

    def _check(self, u: int, *items: int) -> None:
        if not 0 <= u < self.n_users:
            raise IndexError(f"user ID {u} out of range [0, {self.n_users})")
        for i in items:
            if not 0 <= i < self.n_items:
                raise IndexError(f"item ID {i} out of range [0, {self.n_items})")

    def score(self, u: int, i: int) -> float:
        self._check(u, i)
        return float(self.user_vecs[u] @ self.item_vecs[i])

    def score_pair(self, u: int, i: int, j: int) -> float:
        self._check(u, i, j)
        return float(self.user_vecs[u] @ self.item_vecs[i] - self.user_vecs[u] @ self.item_vecs[j])

    def user_scores(self, u: int) -> np.ndarray:
        self._check(u)
        return self.item_vecs @ self.user_vecs[u]

    def top_n(self, u: int, n: int, exclude: Collection[int] = ()) -> list[int]:
        """Highest-scoring ``n`` items not in ``exclude``; ties go to the lower ID."""
        if n < 1:
            raise ValueError("n must be >= 1")
        scores = self.user_scores(u)
        mask = np.ones(self.n_items, dtype=bool)
        if len(exclude):
            mask[np.fromiter(exclude, dtype=np.int64)] = False
        return rank_top_n(scores, n, mask).tolist()


def rank_top_n(scores: np.ndarray, n: int, mask: np.ndarray | None = None) -> np.ndarray:
    """Indices of the ``n`` largest entries of ``scores`` among ``mask``.

    Ordered by descending score then ascending index.
    """
    cand = np.flatnonzero(mask) if mask is not None else np.arange(len(scores))
    if len(cand) == 0:
        return cand
    s = scores[cand]
    if len(cand) > n:
        # keep everything tied with the n-th value so the ID tie-break stays exact
        kth = np.partition(s, len(s) - n)[len(s) - n]
        keep = s >= kth
        cand, s = cand[keep], s[keep]
    order = np.lexsort((cand, -s))
    return cand[order[:n]]


def init(
    n_users: int,
    n_items: int,
    d: int,
    seed: int = 0,
    user_keys: Sequence[str] = (),
    item_keys: Sequence[str] = (),
) -> EmbeddingModel:
    """Uniform initialization on ``[-0.5/sqrt(d), 0.5/sqrt(d)]``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if n_users < 1 or n_items < 1:
        raise ValueError("need at least one user and one item")
    rng = np.random.default_rng(seed)
    half = 0.5 / np.sqrt(d)
    users = rng.uniform(-half, half, size=(n_users, d))
    items = rng.uniform(-half, half, size=(n_items, d))
    return EmbeddingModel(users, items, tuple(user_keys), tuple(item_keys))


def _pack_keys(keys: Sequence[str]) -> bytes:
    out = bytearray()
    for k in keys:
        raw = k.encode("utf-8")
        out += _LEN.pack(len(raw))
        out += raw
    return bytes(out)


def save(model: EmbeddingModel, path: str | os.PathLike) -> None:
    """Write the model atomically (temp file + rename)."""
    path = Path(path)
    payload = b"".join(
        [
            MAGIC,
            _HEADER.pack(model.d, model.n_users, model.n_items),
            _pack_keys(model.user_keys),
            _pack_keys(model.item_keys),
            model.user_vecs.astype(_F64, copy=False).tobytes(order="C"),
            model.item_vecs.astype(_F64, copy=False).tobytes(order="C"),
        ]
    )
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ModelFormatError(f"truncated model file at byte {self.pos}")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def keys(self, count: int) -> tuple[str, ...]:
        out = []
        for _ in range(count):
            (n,) = _LEN.unpack(self.take(_LEN.size))
            try:
                out.append(self.take(n).decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise ModelFormatError(f"bad key encoding: {exc}") from None
        return tuple(out)


def load(path: str | os.PathLike) -> EmbeddingModel:
    r = _Reader(Path(path).read_bytes())
    magic = r.take(len(MAGIC))
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    d, n_users, n_items = _HEADER.unpack(r.take(_HEADER.size))
    if d < 1:
        raise ModelFormatError("header declares d = 0")
    user_keys = r.keys(n_users)
    item_keys = r.keys(n_items)
    expected = (n_users + n_items) * d * _F64.itemsize
    remaining = len(r.buf) - r.pos
    if remaining != expected:
        raise ModelFormatError(
            f"payload holds {remaining} bytes, header (d={d}, {n_users} users, "
            f"{n_items} items) implies {expected}"
        )
    users = np.frombuffer(r.take(n_users * d * 8), dtype=_F64).reshape(n_users, d)
    items = np.frombuffer(r.take(n_items * d * 8), dtype=_F64).reshape(n_items, d)
    return EmbeddingModel(users.astype(np.float64), items.astype(np.float64), user_keys, item_keys)
