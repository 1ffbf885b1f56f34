"""Compiled inner loops.

Everything here is ``nogil`` so the trainer can run several workers as
plain threads over the same embedding arrays (Hogwild). The Python-level
sampler and single-step update call the same functions, so one code path
produces the triple stream and the parameter updates.
"""

import math

import numpy as np
from numba import njit

OK = 0
DIVERGED = 1


@njit(nogil=True, cache=True)
def log_sigmoid(t):
    # -softplus(-t) without overflow
    if t >= 0.0:
        return -math.log1p(math.exp(-t))
    return t - math.log1p(math.exp(t))


@njit(nogil=True, cache=True)
def sigmoid(t):
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@njit(nogil=True, cache=True)
def loglik_and_grad(xhat, xi, omega, eta, clip):
    """ln sigma(z**eta) and its clipped derivative in xhat, z = (xhat - xi) / omega."""
    z = (xhat - xi) / omega
    t = z**eta
    g = sigmoid(-t) * eta * z ** (eta - 1) / omega
    if g > clip:
        g = clip
    return log_sigmoid(t), g


@njit(nogil=True, cache=True)
def is_positive(indices, lo, hi, j):
    k = lo + np.searchsorted(indices[lo:hi], j)
    return k < hi and indices[k] == j


@njit(nogil=True, cache=True)
def draw_triple(rng, indptr, indices, eligible, n_items):
    u = eligible[rng.integers(0, eligible.shape[0])]
    lo = indptr[u]
    hi = indptr[u + 1]
    i = indices[lo + rng.integers(0, hi - lo)]
    j = rng.integers(0, n_items)
    while is_positive(indices, lo, hi, j):
        j = rng.integers(0, n_items)
    return u, i, j


@njit(nogil=True, cache=True)
def pair_score(U, V, u, i, j):
    xui = 0.0
    xuj = 0.0
    for k in range(U.shape[1]):
        xui += U[u, k] * V[i, k]
        xuj += U[u, k] * V[j, k]
    return xui - xuj


@njit(nogil=True, cache=True)
def apply_update(U, V, u, i, j, g, beta, lam):
    """Ascent step on one triple; right-hand sides use pre-step values.

    Returns False if any touched coordinate became non-finite.
    """
    ok = True
    for k in range(U.shape[1]):
        tu = U[u, k]
        ti = V[i, k]
        tj = V[j, k]
        nu = tu + beta * (g * (ti - tj) - lam * tu)
        ni = ti + beta * (g * tu - lam * ti)
        nj = tj + beta * (-g * tu - lam * tj)
        U[u, k] = nu
        V[i, k] = ni
        V[j, k] = nj
        if not (math.isfinite(nu) and math.isfinite(ni) and math.isfinite(nj)):
            ok = False
    return ok


@njit(nogil=True, cache=True)
def sgd_step(U, V, u, i, j, xi, omega, eta, beta, lam, clip):
    x = pair_score(U, V, u, i, j)
    ll, g = loglik_and_grad(x, xi, omega, eta, clip)
    return ll, apply_update(U, V, u, i, j, g, beta, lam)


@njit(nogil=True, cache=True)
def run_steps(U, V, indptr, indices, eligible, n_items, n_steps, rng,
              xi, omega, eta, beta, lam, clip, out):
    """Sample-and-update ``n_steps`` times.

    ``out`` receives (status, steps done, summed pre-update log-likelihood,
    u, i, j of the last triple).
    """
    total = 0.0
    for s in range(n_steps):
        u, i, j = draw_triple(rng, indptr, indices, eligible, n_items)
        ll, ok = sgd_step(U, V, u, i, j, xi, omega, eta, beta, lam, clip)
        total += ll
        if not ok:
            out[0] = DIVERGED
            out[1] = s + 1
            out[2] = total
            out[3] = u
            out[4] = i
            out[5] = j
            return
    out[0] = OK
    out[1] = n_steps
    out[2] = total


@njit(nogil=True, cache=True)
def pair_scores_batch(U, V, triples):
    out = np.empty(triples.shape[0])
    for n in range(triples.shape[0]):
        out[n] = pair_score(U, V, triples[n, 0], triples[n, 1], triples[n, 2])
    return out


@njit(nogil=True, cache=True)
def draw_many(rng, indptr, indices, eligible, n_items, n):
    out = np.empty((n, 3), dtype=np.int64)
    for s in range(n):
        u, i, j = draw_triple(rng, indptr, indices, eligible, n_items)
        out[s, 0] = u
        out[s, 1] = i
        out[s, 2] = j
    return out
