"""Skew-normal distribution toolkit and estimator-distribution export.

Conventions: location ``xi``, scale ``omega > 0``, shape ``alpha``;
standardized variable ``z = (x - xi) / omega``. The density is
``2/omega * phi(z) * Phi(alpha * z)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .corpus import Interactions
from .embed import EmbeddingModel
from .sampler import TripleSampler
from . import _kernels

TRUNCATION = 12.0  # standard units; tail mass beyond is < 1e-30
HIST_BINS = 100

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SkewNormalParams:
    xi: float = 0.0
    omega: float = 1.0
    alpha: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.xi, self.omega, self.alpha)):
            raise ValueError(f"parameters must be finite: {self}")
        if self.omega <= 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")

    @property
    def delta(self) -> float:
        return delta_of_alpha(self.alpha)


def delta_of_alpha(alpha: float) -> float:
    return alpha / math.sqrt(1.0 + alpha * alpha) if math.isfinite(alpha) else math.copysign(1.0, alpha)


def phi(x):
    """Standard normal density."""
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def Phi(x):
    """Standard normal CDF via erfc (accurate in both tails)."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=np.float64) / _SQRT2)


def owen_t(h: float, a: float) -> float:
    """Owen's T function ``(1/2pi) * int_0^a exp(-h^2 (1+x^2)/2) / (1+x^2) dx``.

    Evaluated by adaptive quadrature after substituting ``x = tan(t)``, which
    maps the integrand onto the bounded interval ``[0, arctan a]``. Infinite
    ``a`` uses ``T(h, +-inf) = +-Phi(-|h|) / 2``.
    """
    h, a = float(h), float(a)
    if math.isnan(h) or math.isnan(a):
        raise ValueError("owen_t: NaN argument")
    if a == 0.0:
        return 0.0
    if math.isinf(a):
        return math.copysign(0.5 * float(Phi(-abs(h))), a)
    if math.isinf(h):
        return 0.0
    c = -0.5 * h * h

    def integrand(t):
        ct = math.cos(t)
        return math.exp(c / (ct * ct)) if ct > 0.0 else 0.0

    upper = math.atan(abs(a))
    val, _ = integrate.quad(integrand, 0.0, upper, epsabs=1e-15, epsrel=1e-13, limit=200)
    return math.copysign(val / (2.0 * math.pi), a)


def pdf(params: SkewNormalParams, x):
    z = (np.asarray(x, dtype=np.float64) - params.xi) / params.omega
    return 2.0 / params.omega * phi(z) * Phi(params.alpha * z)


def _owen_tail(h: float, a: float) -> float:
    """``Phi(-|h|) - 2 T(h, |a|)`` without cancellation.

    Same integrand as :func:`owen_t`, integrated over ``[arctan |a|, pi/2]``;
    stays accurate when the result is far below machine epsilon.
    """
    c = -0.5 * h * h

    def integrand(t):
        ct = math.cos(t)
        return math.exp(c / (ct * ct)) if ct > 0.0 else 0.0

    val, _ = integrate.quad(integrand, math.atan(abs(a)), 0.5 * math.pi, epsabs=0.0, epsrel=1e-12, limit=200)
    return val / math.pi


def _cdf_scalar(params: SkewNormalParams, x: float) -> float:
    z = (x - params.xi) / params.omega
    a = params.alpha
    # pick the algebraically equivalent form that never subtracts nearly equal terms
    if z <= 0.0:
        val = _owen_tail(z, a) if a >= 0.0 else float(Phi(z)) + 2.0 * owen_t(z, -a)
    else:
        val = 1.0 - (float(Phi(-z)) + 2.0 * owen_t(z, a) if a >= 0.0 else _owen_tail(z, a))
    return min(1.0, max(0.0, val))


def cdf(params: SkewNormalParams, x):
    """``Phi(z) - 2 T(z, alpha)`` clamped to [0, 1]; vectorized over ``x``."""
    if np.ndim(x) == 0:
        return _cdf_scalar(params, float(x))
    xs = np.asarray(x, dtype=np.float64)
    return np.fromiter((_cdf_scalar(params, v) for v in xs.ravel()), float, xs.size).reshape(xs.shape)


def gamma_of_alpha(alpha: float) -> float:
    """Skewness of the skew normal as a function of the shape parameter."""
    d = delta_of_alpha(alpha)
    mu = d * math.sqrt(2.0 / math.pi)
    return (4.0 - math.pi) / 2.0 * mu**3 / (1.0 - 2.0 * d * d / math.pi) ** 1.5


def mean_standardized(alpha: float) -> float:
    """``E[(X - xi) / omega] = delta * sqrt(2 / pi)``."""
    return delta_of_alpha(alpha) * math.sqrt(2.0 / math.pi)


def _x_integral(f, xi: float, omega: float) -> float:
    lo, hi = xi - TRUNCATION * omega, xi + TRUNCATION * omega
    val, _ = integrate.quad(f, lo, hi, points=[xi], epsabs=1e-13, epsrel=1e-10, limit=400)
    return val


def kappa_of_alpha(alpha: float, eta: int, xi: float = 0.0, omega: float = 1.0) -> float:
    """``E[((X - xi) / omega) ** eta]`` for ``X ~ SN(xi, omega, alpha)`` by quadrature in ``x``."""
    p = SkewNormalParams(xi, omega, alpha)

    def f(x):
        z = (x - xi) / omega
        return z**eta * float(pdf(p, x))

    return _x_integral(f, xi, omega)


def dkappa_dalpha(alpha: float, eta: int, xi: float = 0.0, omega: float = 1.0) -> float:
    """Derivative of :func:`kappa_of_alpha` in ``alpha``.

    Differentiating under the integral turns ``Phi(alpha z)`` into
    ``z * phi(alpha z)``, giving the integrand
    ``z**(eta+1) * (2/omega) * phi(z) * phi(alpha z)``, which is nonnegative
    whenever ``eta`` is odd.
    """
    SkewNormalParams(xi, omega, alpha)

    def f(x):
        z = (x - xi) / omega
        return z ** (eta + 1) * (2.0 / omega) * float(phi(z)) * float(phi(alpha * z))

    return _x_integral(f, xi, omega)


def auc_micro_closed(params: SkewNormalParams) -> float:
    """``P(X > 0) = 1 - Phi(-xi/omega) + 2 T(-xi/omega, alpha)``."""
    return 1.0 - _cdf_scalar(params, 0.0)


def sample_skew_normal(params: SkewNormalParams, n: int, seed: int = 0) -> np.ndarray:
    """Draws via ``xi + omega * (delta |z0| + sqrt(1 - delta^2) z1)``."""
    rng = np.random.default_rng(seed)
    d = params.delta
    z0 = np.abs(rng.standard_normal(n))
    z1 = rng.standard_normal(n)
    return params.xi + params.omega * (d * z0 + math.sqrt(1.0 - d * d) * z1)


def sample_skewness(values) -> float:
    """Third standardized central moment ``m3 / m2**1.5`` (biased moments)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("need at least two values")
    c = v - v.mean()
    m2 = np.mean(c * c)
    if m2 <= 0.0 or m2 <= (np.finfo(float).eps * np.max(np.abs(v))) ** 2:
        raise ValueError("sample variance is zero; skewness undefined")
    return float(np.mean(c**3) / m2**1.5)


@dataclass
class EstimatorSample:
    values: np.ndarray
    sample_skewness: float
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.values.mean())


def histogram(values, bins: int = HIST_BINS) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=np.float64)
    counts, edges = np.histogram(v, bins=bins, range=(v.min(), v.max()))
    return edges, counts


def collect_estimator(
    model: EmbeddingModel, train: Interactions, n_triples: int, seed: int = 0
) -> EstimatorSample:
    """Score ``n_triples`` sampled training triples and summarize ``x_ui - x_uj``."""
    triples = TripleSampler(train, seed).sample_many(n_triples)
    values = _kernels.pair_scores_batch(model.user_vecs, model.item_vecs, triples)
    edges, counts = histogram(values)
    return EstimatorSample(values, sample_skewness(values), edges, counts)


def _write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_histogram(sample: EstimatorSample, path: str | os.PathLike, meta: dict | None = None) -> None:
    """``bin_left<TAB>bin_right<TAB>count`` rows under ``# key=value`` comment lines."""
    header = {"n": len(sample.values), "skewness": repr(float(sample.sample_skewness)),
              "mean": repr(sample.mean), **(meta or {})}
    lines = [f"# {k}={v}\n" for k, v in header.items()]
    e = np.asarray(sample.bin_edges, dtype=np.float64).tolist()
    lines += [f"{e[k]!r}\t{e[k + 1]!r}\t{int(c)}\n" for k, c in enumerate(sample.counts)]
    _write(Path(path), "".join(lines))


def read_histogram(path: str | os.PathLike) -> tuple[dict, np.ndarray, np.ndarray]:
    meta, rows = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line.strip():
            left, right, count = line.split("\t")
            rows.append((float(left), float(right), int(count)))
    arr = np.asarray(rows)
    edges = np.append(arr[:, 0], arr[-1, 1])
    return meta, edges, arr[:, 2].astype(np.int64)


def reference_curve(params: SkewNormalParams, lo: float, hi: float, points: int = 400):
    x = np.linspace(lo, hi, points)
    return x, pdf(params, x)


def write_curve(params: SkewNormalParams, path: str | os.PathLike, lo: float, hi: float,
                points: int = 400) -> None:
    x, y = reference_curve(params, lo, hi, points)
    lines = [f"# xi={params.xi!r} omega={params.omega!r} alpha={params.alpha!r}\n"]
    lines += [f"{a!r}\t{b!r}\n" for a, b in zip(x.tolist(), y.tolist())]
    _write(Path(path), "".join(lines))
