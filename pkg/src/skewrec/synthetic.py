"""Small synthetic corpora with planted preference structure."""

from __future__ import annotations

import numpy as np

from .corpus import Interactions, build_interactions


def block_corpus(
    n_users: int = 50, n_items: int = 40, blocks: int = 2, density: float = 0.5, seed: int = 0
) -> Interactions:
    """Users and items fall into ``blocks`` contiguous groups; each user likes
    each item of its own group independently with probability ``density``.
    Every user gets at least one positive.
    """
    rng = np.random.default_rng(seed)
    ublock = np.arange(n_users) * blocks // n_users
    iblock = np.arange(n_items) * blocks // n_items
    pairs = []
    for u in range(n_users):
        own = np.flatnonzero(iblock == ublock[u])
        liked = own[rng.random(len(own)) < density]
        if len(liked) == 0:
            liked = own[rng.integers(0, len(own), size=1)]
        pairs += [(f"u{u}", f"i{i}") for i in liked]
    data = build_interactions(pairs)
    # re-map so IDs follow the numeric order of the planted structure
    return build_interactions(
        data.key_pairs(), [f"u{u}" for u in range(n_users)], [f"i{i}" for i in range(n_items)]
    )


def balanced_random_corpus(
    n_users: int = 200, n_items: int = 100, per_user: int = 10, seed: int = 0
) -> Interactions:
    """Every user has exactly ``per_user`` positives chosen uniformly at random."""
    rng = np.random.default_rng(seed)
    pairs = [
        (f"u{u}", f"i{i}")
        for u in range(n_users)
        for i in rng.choice(n_items, size=per_user, replace=False)
    ]
    return build_interactions(
        pairs, [f"u{u}" for u in range(n_users)], [f"i{i}" for i in range(n_items)]
    )
