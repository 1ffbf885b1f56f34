"""Uniform sampling of (user, positive item, unobserved item) training triples."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .corpus import Interactions


class SamplerError(ValueError):
    pass


def eligible_users(train: Interactions) -> np.ndarray:
    """Users with at least one positive and at least one unobserved item."""
    counts = train.counts()
    return np.flatnonzero((counts > 0) & (counts < train.n_items)).astype(np.int64)


def epoch_size(train: Interactions) -> int:
    """Number of triples in one epoch: the total count of positive pairs."""
    n = train.nnz
    if n == 0:
        raise SamplerError("training set has no positive pairs")
    return n


class TripleSampler:
    """Draws ``u`` uniformly over eligible users, ``i`` uniformly from the
    user's positives and ``j`` by rejection from the remaining items.

    Worker ``k`` of a parallel run uses ``seed + k``.
    """

    def __init__(self, train: Interactions, seed: int = 0, thread_index: int = 0):
        if train.nnz == 0:
            raise SamplerError("training set has no positive pairs")
        self.train = train
        self.seed = seed
        self.thread_index = thread_index
        self.eligible = eligible_users(train)
        if len(self.eligible) == 0:
            raise SamplerError("every user with positives has no unobserved item to contrast")
        self.rng = np.random.default_rng(seed + thread_index)

    def _args(self):
        t = self.train
        return t.indptr, t.indices, self.eligible, t.n_items

    def sample(self) -> tuple[int, int, int]:
        u, i, j = _kernels.draw_triple(self.rng, *self._args())
        return int(u), int(i), int(j)

    def sample_many(self, n: int) -> np.ndarray:
        """``n`` triples as an ``(n, 3)`` int64 array; same stream as repeated :meth:`sample`."""
        return _kernels.draw_many(self.rng, *self._args(), n)
