"""Top-N retrieval metrics and per-user (macro) / pooled (micro) AUC."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import Interactions, SplitPair
from .embed import EmbeddingModel, rank_top_n

EXACT_ITEM_BOUND = 20_000
SAMPLED_NEGATIVES = 1_000


class EvaluationError(ValueError):
    pass


@dataclass
class EvalReport:
    n: int
    recall: float
    map: float
    auc_macro: float
    auc_micro: float
    users_evaluated: int
    auc_users: int
    auc_negatives: int | None = None  # per-user sample size, None when exact

    def to_tsv(self, extra: dict | None = None) -> str:
        rows = [
            (f"recall@{self.n}", self.recall),
            (f"map@{self.n}", self.map),
            ("auc_macro", self.auc_macro),
            ("auc_micro", self.auc_micro),
            ("users_evaluated", self.users_evaluated),
            ("auc_users", self.auc_users),
            ("auc_negatives", "exact" if self.auc_negatives is None else self.auc_negatives),
        ]
        rows += sorted((extra or {}).items())
        return "".join(f"{k}\t{v}\n" for k, v in rows)

    def to_json(self, extra: dict | None = None) -> str:
        return json.dumps({**asdict(self), **(extra or {})}, sort_keys=True)


def _test_users(split: SplitPair) -> np.ndarray:
    users = np.flatnonzero(split.test.counts() > 0)
    if len(users) == 0:
        raise EvaluationError("test set has no users with held-out items")
    return users


def _candidate_mask(split: SplitPair, u: int) -> np.ndarray:
    mask = np.ones(split.train.n_items, dtype=bool)
    mask[split.train.pos(u)] = False
    return mask


def rank_metrics(model: EmbeddingModel, split: SplitPair, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-test-user recall@n and AP@n; training positives are never ranked."""
    if n < 1:
        raise ValueError("n must be >= 1")
    users = _test_users(split)
    recall = np.empty(len(users))
    ap = np.empty(len(users))
    for k, u in enumerate(users):
        test_u = split.test.pos(u)
        top = rank_top_n(model.user_scores(u), n, _candidate_mask(split, u))
        hit = np.isin(top, test_u)
        denom = min(n, len(test_u))
        recall[k] = hit.sum() / denom
        ranks = np.flatnonzero(hit) + 1
        ap[k] = math.fsum((np.arange(1, len(ranks) + 1) / ranks).tolist()) / denom
    return recall, ap


def _mean(values: np.ndarray) -> float:
    return math.fsum(values.tolist()) / len(values)


def recall_at_n(model: EmbeddingModel, split: SplitPair, n: int = 10) -> float:
    return _mean(rank_metrics(model, split, n)[0])


def map_at_n(model: EmbeddingModel, split: SplitPair, n: int = 10) -> float:
    return _mean(rank_metrics(model, split, n)[1])


@dataclass
class AucCounts:
    """Per-user positive/negative pair statistics.

    ``hits[k] / pairs[k]`` is user ``users[k]``'s AUC (estimated from
    ``sampled`` negatives when not None); ``full_pairs`` is the exact pair
    count used to pool users for the micro average.
    """

    users: np.ndarray
    hits: np.ndarray
    pairs: np.ndarray
    full_pairs: np.ndarray
    sampled: int | None

    @property
    def macro(self) -> float:
        return float(np.mean(self.hits / self.pairs))

    @property
    def micro(self) -> float:
        est_hits = self.hits / self.pairs * self.full_pairs
        return float(est_hits.sum() / self.full_pairs.sum())


def auc_counts(
    model: EmbeddingModel,
    split: SplitPair,
    exact_bound: int = EXACT_ITEM_BOUND,
    n_negatives: int = SAMPLED_NEGATIVES,
    seed: int = 0,
) -> AucCounts:
    """Count ``x_uij > 0`` over test positives ``i`` and items ``j`` unseen in train and test.

    Enumerates all negatives when the catalogue has at most ``exact_bound``
    items, otherwise draws ``n_negatives`` per user uniformly with replacement.
    """
    exact = split.train.n_items <= exact_bound
    rng = None if exact else np.random.default_rng(seed)
    users, hits, pairs, full = [], [], [], []
    for u in _test_users(split):
        scores = model.user_scores(u)
        test_u = split.test.pos(u)
        neg_mask = _candidate_mask(split, u)
        neg_mask[test_u] = False
        negatives = np.flatnonzero(neg_mask)
        if len(negatives) == 0:
            continue
        if not exact:
            negatives = negatives[rng.integers(0, len(negatives), size=n_negatives)]
        neg = np.sort(scores[negatives])
        # negatives strictly below each positive; ties are misses
        h = np.searchsorted(neg, scores[test_u], side="left").sum()
        users.append(u)
        hits.append(h)
        pairs.append(len(test_u) * len(neg))
        full.append(len(test_u) * int(neg_mask.sum()))
    if not users:
        raise EvaluationError("no test user has an unobserved item to compare against")
    return AucCounts(
        np.asarray(users),
        np.asarray(hits, dtype=np.float64),
        np.asarray(pairs, dtype=np.float64),
        np.asarray(full, dtype=np.float64),
        None if exact else n_negatives,
    )


def auc_macro(model: EmbeddingModel, split: SplitPair, **kwargs) -> float:
    return auc_counts(model, split, **kwargs).macro


def auc_micro(model: EmbeddingModel, split: SplitPair, **kwargs) -> float:
    return auc_counts(model, split, **kwargs).micro


def evaluate(
    model: EmbeddingModel,
    split: SplitPair,
    n: int = 10,
    exact_bound: int = EXACT_ITEM_BOUND,
    n_negatives: int = SAMPLED_NEGATIVES,
    seed: int = 0,
) -> EvalReport:
    recall, ap = rank_metrics(model, split, n)
    auc = auc_counts(model, split, exact_bound, n_negatives, seed)
    return EvalReport(
        n=n,
        recall=_mean(recall),
        map=_mean(ap),
        auc_macro=auc.macro,
        auc_micro=auc.micro,
        users_evaluated=len(recall),
        auc_users=len(auc.users),
        auc_negatives=auc.sampled,
    )


def training_auc_micro(model: EmbeddingModel, train: Interactions) -> float:
    """Pooled AUC of training positives against all unobserved items."""
    empty = Interactions(
        np.zeros(train.n_users + 1, dtype=np.int64),
        np.zeros(0, dtype=np.int64),
        train.user_keys,
        train.item_keys,
    )
    return auc_counts(model, SplitPair(empty, train, -1)).micro
