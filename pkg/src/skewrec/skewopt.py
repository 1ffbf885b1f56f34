"""Skew-OPT objective, per-triple gradient and the asynchronous SGA trainer.

The per-triple likelihood is ``sigmoid(((xhat - xi) / omega) ** eta)`` with
``xhat = <u, i> - <u, j>``; ``(xi, omega, eta) = (0, 1, 1)`` is exactly BPR.
"""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Callable, Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import _kernels
from .corpus import Interactions
from .embed import EmbeddingModel, init
from .sampler import TripleSampler, epoch_size

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class DivergenceError(FloatingPointError):
    """Raised when an update produces non-finite parameters."""


@dataclass(frozen=True)
class SkewOptConfig:
    xi: float = 0.0
    omega: float = 1.0
    eta: int = 1
    beta: float = 0.05
    lam: float = 0.0025
    epochs: int = 200
    seed: int = 0
    threads: int = 1
    # BPR's own gradient never exceeds 1; larger caps let eta > 1 runs blow up at beta=0.05
    clip: float = 1.0
    dim: int = 32

    def __post_init__(self):
        if isinstance(self.eta, bool) or int(self.eta) != self.eta:
            raise ConfigError(f"eta must be an integer, got {self.eta!r}")
        object.__setattr__(self, "eta", int(self.eta))
        for name in ("xi", "omega", "beta", "lam", "clip"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigError(f"{name} must be finite, got {v}")
        if self.eta < 1 or self.eta % 2 == 0:
            raise ConfigError(f"eta must be a positive odd integer, got {self.eta}")
        if self.xi < 0:
            raise ConfigError(f"xi must be >= 0, got {self.xi}")
        if self.omega <= 0:
            raise ConfigError(f"omega must be > 0, got {self.omega}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.clip <= 0:
            raise ConfigError(f"clip must be > 0, got {self.clip}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, overrides: Mapping[str, object]) -> SkewOptConfig:
        return replace(self, **_coerce(overrides))

    @classmethod
    def from_file(cls, path: str | os.PathLike, overrides: Mapping[str, object] = ()) -> SkewOptConfig:
        """Parse ``key = value`` lines (``#`` starts a comment); ``overrides`` win."""
        values: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (p.strip() for p in line.split("=", 1))
                values[key] = value
        values.update(overrides or {})
        return cls(**_coerce(values))


_ALIASES = {"lambda": "lam", "d": "dim"}


def _coerce(values: Mapping[str, object]) -> dict:
    types = {f.name: f.type for f in fields(SkewOptConfig)}
    out = {}
    for key, raw in values.items():
        name = _ALIASES.get(key, key)
        if name not in types:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            if types[name] in ("int", int):
                f = float(raw)
                if f != int(f):
                    raise ValueError
                out[name] = int(f)
            else:
                out[name] = float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value {raw!r} for {key}") from None
    return out


def log_likelihood(xhat: float, cfg: SkewOptConfig) -> float:
    """``ln sigmoid(((xhat - xi) / omega) ** eta)``, overflow-free."""
    if not math.isfinite(xhat):
        raise ValueError(f"xhat must be finite, got {xhat}")
    return _kernels.loglik_and_grad(float(xhat), cfg.xi, cfg.omega, cfg.eta, math.inf)[0]


def grad_pair(xhat: float, cfg: SkewOptConfig) -> float:
    """Derivative of :func:`log_likelihood` in ``xhat``, clamped to ``[0, cfg.clip]``."""
    if not math.isfinite(xhat):
        raise ValueError(f"xhat must be finite, got {xhat}")
    return _kernels.loglik_and_grad(float(xhat), cfg.xi, cfg.omega, cfg.eta, cfg.clip)[1]


def apply_update(model: EmbeddingModel, triple, g: float, beta: float, lam: float) -> None:
    """Move ``(u, i, j)`` along a given scalar pair-gradient ``g``."""
    u, i, j = triple
    if not _kernels.apply_update(model.user_vecs, model.item_vecs, u, i, j, g, beta, lam):
        raise DivergenceError(f"non-finite parameters after update on triple {tuple(triple)}")


def sgd_step(model: EmbeddingModel, triple, cfg: SkewOptConfig) -> float:
    """One ascent step; returns the triple's log-likelihood before the step."""
    u, i, j = triple
    ll, ok = _kernels.sgd_step(
        model.user_vecs, model.item_vecs, u, i, j,
        cfg.xi, cfg.omega, cfg.eta, cfg.beta, cfg.lam, cfg.clip,
    )
    if not ok:
        raise DivergenceError(f"non-finite parameters after update on triple {tuple(triple)}")
    return ll


def objective(model: EmbeddingModel, triples: Iterable, cfg: SkewOptConfig) -> float:
    """Summed log-likelihood over ``triples`` minus ``lam * ||Theta||^2``."""
    arr = np.asarray(list(triples), dtype=np.int64).reshape(-1, 3)
    total = 0.0
    if arr.size:
        xs = _kernels.pair_scores_batch(model.user_vecs, model.item_vecs, arr)
        total = math.fsum(log_likelihood(x, cfg) for x in xs)
    return total - cfg.lam * model.sq_norm()


def _split_evenly(n: int, parts: int) -> list[int]:
    q, r = divmod(n, parts)
    return [q + (k < r) for k in range(parts)]


EpochCallback = Callable[[int, float], None]


def train(
    data: Interactions,
    cfg: SkewOptConfig,
    on_epoch: EpochCallback | None = None,
    model: EmbeddingModel | None = None,
) -> EmbeddingModel:
    """Fit embeddings by asynchronous stochastic gradient ascent.

    Each epoch draws ``epoch_size(data)`` triples split across ``cfg.threads``
    workers that update the shared matrices without locks. With one thread
    the result is a deterministic function of ``cfg.seed``.

    ``on_epoch(epoch, mean_loglik)`` receives the mean pre-update
    log-likelihood of the triples sampled during that epoch.
    """
    if model is None:
        model = init(data.n_users, data.n_items, cfg.dim, cfg.seed, data.user_keys, data.item_keys)
    elif (model.n_users, model.n_items) != (data.n_users, data.n_items):
        raise ValueError("model shape does not match the interaction data")
    if cfg.epochs == 0:
        return model
    n = epoch_size(data)
    # sampler streams are offset by one so they never replay the init stream
    samplers = [TripleSampler(data, cfg.seed + 1, k) for k in range(cfg.threads)]
    quotas = _split_evenly(n, cfg.threads)
    U, V = model.user_vecs, model.item_vecs
    outs = [np.zeros(6) for _ in samplers]

    def work(k: int) -> None:
        s = samplers[k]
        _kernels.run_steps(
            U, V, *s._args(), quotas[k], s.rng,
            cfg.xi, cfg.omega, cfg.eta, cfg.beta, cfg.lam, cfg.clip, outs[k],
        )

    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for epoch in range(cfg.epochs):
            if pool is None:
                work(0)
            else:
                list(pool.map(work, range(cfg.threads)))
            for out in outs:
                if out[0] != _kernels.OK:
                    u, i, j = (int(v) for v in out[3:6])
                    raise DivergenceError(
                        f"non-finite parameters at epoch {epoch}, triple ({u}, {i}, {j}); "
                        f"try a smaller beta or clip (cfg: {cfg})"
                    )
            mean_ll = float(sum(out[2] for out in outs)) / n
            logger.debug("epoch %d mean log-likelihood %.6f", epoch, mean_ll)
            if on_epoch is not None:
                on_epoch(epoch, mean_ll)
    finally:
        if pool is not None:
            pool.shutdown()
    return model
