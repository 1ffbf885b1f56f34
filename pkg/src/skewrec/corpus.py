"""Interaction ingestion, implicit-feedback binarization and train/test splits."""

from __future__ import annotations

import math
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RATING_THRESHOLD = 3.5
COUNT_THRESHOLD = 3.0

USER_MAP_FILE = "users.txt"
ITEM_MAP_FILE = "items.txt"


class CorpusError(ValueError):
    """Raised for malformed or unusable interaction data."""


@dataclass(frozen=True)
class RawInteraction:
    user_key: str
    item_key: str
    value: float

    def __post_init__(self):
        if not self.user_key or not self.item_key:
            raise CorpusError("user and item keys must be non-empty")
        if not math.isfinite(self.value):
            raise CorpusError(f"non-finite value {self.value!r}")


@dataclass(frozen=True, eq=False)
class Interactions:
    """Binarized positives in CSR form.

    ``indices[indptr[u]:indptr[u + 1]]`` is the strictly increasing list of
    positive item IDs of user ``u``. ``user_keys[u]`` / ``item_keys[i]`` map
    contiguous IDs back to the original keys.
    """

    indptr: np.ndarray
    indices: np.ndarray
    user_keys: tuple[str, ...]
    item_keys: tuple[str, ...]

    @property
    def n_users(self) -> int:
        return len(self.user_keys)

    @property
    def n_items(self) -> int:
        return len(self.item_keys)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def pos(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def counts(self) -> np.ndarray:
        return np.diff(self.indptr)

    def pairs(self) -> np.ndarray:
        """All (user, item) ID pairs as an ``(nnz, 2)`` array, user-major."""
        users = np.repeat(np.arange(self.n_users, dtype=np.int64), self.counts())
        return np.column_stack([users, self.indices])

    def key_pairs(self) -> list[tuple[str, str]]:
        return [(self.user_keys[u], self.item_keys[i]) for u, i in self.pairs()]

    def user_index(self) -> dict[str, int]:
        return {k: n for n, k in enumerate(self.user_keys)}

    def item_index(self) -> dict[str, int]:
        return {k: n for n, k in enumerate(self.item_keys)}

    def same_as(self, other: Interactions) -> bool:
        return (
            self.user_keys == other.user_keys
            and self.item_keys == other.item_keys
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )


@dataclass(frozen=True)
class SplitPair:
    train: Interactions
    test: Interactions
    seed: int


def _parse_line(fields: list[str], lineno: int, path) -> RawInteraction:
    if len(fields) < 3:
        raise CorpusError(f"{path}:{lineno}: expected at least 3 fields, got {len(fields)}")
    try:
        value = float(fields[2])
    except ValueError:
        raise CorpusError(f"{path}:{lineno}: cannot parse value {fields[2]!r}") from None
    try:
        return RawInteraction(fields[0], fields[1], value)
    except CorpusError as exc:
        raise CorpusError(f"{path}:{lineno}: {exc}") from None


def load_tsv(
    path: str | os.PathLike, delimiter: str | None = "\t", has_header: bool = False
) -> list[RawInteraction]:
    """Read ``user, item, value`` rows; ``delimiter=None`` splits on any whitespace."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1 and has_header:
                continue
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split(delimiter) if delimiter is not None else line.split()
            rows.append(_parse_line([f.strip() for f in fields], lineno, path))
    if not rows:
        raise CorpusError(f"{path}: no interactions")
    return rows


def binarize(
    raw: Iterable[RawInteraction], mode: str = "rating", threshold: float | None = None
) -> list[tuple[str, str]]:
    """Keep positive interactions.

    ``rating`` keeps ``value >= threshold`` (default 3.5), ``count`` keeps
    ``value > threshold`` (default 3) and ``binary`` keeps everything.
    """
    if mode == "rating":
        t = RATING_THRESHOLD if threshold is None else threshold
        keep = lambda v: v >= t  # noqa: E731
    elif mode == "count":
        t = COUNT_THRESHOLD if threshold is None else threshold
        keep = lambda v: v > t  # noqa: E731
    elif mode == "binary":
        t = 0.0
        keep = lambda v: True  # noqa: E731
    else:
        raise CorpusError(f"unknown binarization mode {mode!r}")
    if not math.isfinite(t):
        raise CorpusError(f"threshold must be finite, got {t}")
    return [(r.user_key, r.item_key) for r in raw if keep(r.value)]


def build_interactions(
    pairs: Iterable[tuple[str, str]],
    user_keys: Sequence[str] | None = None,
    item_keys: Sequence[str] | None = None,
) -> Interactions:
    """Deduplicate and ID-map key pairs.

    IDs are assigned in order of first appearance unless fixed maps are
    given, in which case every key must already be present in them.
    """
    fixed = user_keys is not None and item_keys is not None
    umap: dict[str, int] = {k: n for n, k in enumerate(user_keys)} if fixed else {}
    imap: dict[str, int] = {k: n for n, k in enumerate(item_keys)} if fixed else {}
    us, its = [], []
    for uk, ik in pairs:
        if fixed:
            try:
                u, i = umap[uk], imap[ik]
            except KeyError as exc:
                raise CorpusError(f"key {exc.args[0]!r} missing from ID map") from None
        else:
            u = umap.setdefault(uk, len(umap))
            i = imap.setdefault(ik, len(imap))
        us.append(u)
        its.append(i)
    if not us and not fixed:
        raise CorpusError("cannot build interactions from an empty pair list")
    return _from_ids(
        np.asarray(us, dtype=np.int64),
        np.asarray(its, dtype=np.int64),
        tuple(umap),
        tuple(imap),
    )


def _from_ids(users: np.ndarray, items: np.ndarray, user_keys, item_keys) -> Interactions:
    n_users, n_items = len(user_keys), len(item_keys)
    code = np.unique(users * n_items + items)
    users, items = np.divmod(code, n_items)
    indptr = np.zeros(n_users + 1, dtype=np.int64)
    np.cumsum(np.bincount(users, minlength=n_users), out=indptr[1:])
    return Interactions(indptr, items.astype(np.int64), tuple(user_keys), tuple(item_keys))


def split(data: Interactions, test_fraction: float = 0.2, seed: int = 0) -> SplitPair:
    """Per-pair Bernoulli train/test split.

    Each positive goes to test with probability ``test_fraction``. A user
    whose every positive was drawn for test keeps them all in train.
    """
    if not 0.0 < test_fraction < 1.0:
        raise CorpusError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    to_test = rng.random(data.nnz) < test_fraction
    counts = data.counts()
    users = np.repeat(np.arange(data.n_users, dtype=np.int64), counts)
    n_test = np.bincount(users, weights=to_test, minlength=data.n_users)
    starved = (n_test == counts) & (counts > 0)
    to_test &= ~starved[users]

    def part(mask):
        return _from_ids(users[mask], data.indices[mask], data.user_keys, data.item_keys)

    return SplitPair(part(~to_test), part(to_test), seed)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_interactions(data: Interactions, path: str | os.PathLike) -> None:
    """Write positives as ``user<TAB>item<TAB>1`` lines, user-major in ID order."""
    lines = [f"{u}\t{i}\t1\n" for u, i in data.key_pairs()]
    _atomic_write_text(Path(path), "".join(lines))


def write_maps(data: Interactions, out_dir: str | os.PathLike) -> None:
    out_dir = Path(out_dir)
    _atomic_write_text(out_dir / USER_MAP_FILE, "".join(k + "\n" for k in data.user_keys))
    _atomic_write_text(out_dir / ITEM_MAP_FILE, "".join(k + "\n" for k in data.item_keys))


def read_maps(directory: str | os.PathLike) -> tuple[list[str], list[str]] | None:
    directory = Path(directory)
    upath, ipath = directory / USER_MAP_FILE, directory / ITEM_MAP_FILE
    if not (upath.exists() and ipath.exists()):
        return None
    return (
        upath.read_text(encoding="utf-8").splitlines(),
        ipath.read_text(encoding="utf-8").splitlines(),
    )


def load_interactions(path: str | os.PathLike) -> Interactions:
    """Load a positives file, reusing ID maps stored next to it when present."""
    maps = read_maps(Path(path).parent)
    if maps is not None and os.path.getsize(path) == 0:
        return build_interactions([], *maps)
    pairs = [(r.user_key, r.item_key) for r in load_tsv(path)]
    if maps is None:
        return build_interactions(pairs)
    return build_interactions(pairs, *maps)


def save_split(sp: SplitPair, out_dir: str | os.PathLike) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_maps(sp.train, out_dir)
    write_interactions(sp.train, out_dir / "train.tsv")
    write_interactions(sp.test, out_dir / "test.tsv")


def load_split(directory: str | os.PathLike, seed: int = -1) -> SplitPair:
    directory = Path(directory)
    return SplitPair(
        load_interactions(directory / "train.tsv"),
        load_interactions(directory / "test.tsv"),
        seed,
    )
