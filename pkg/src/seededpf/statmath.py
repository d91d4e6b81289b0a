"""Statistical primitives used by the SPF model.

Gamma densities use the shape-rate parameterization throughout, so the mean
of ``Gamma(shape, rate)`` is ``shape / rate``.  All functions accept scalars
or numpy arrays and broadcast like ufuncs.
"""
import hashlib
import math
from dataclasses import dataclass

import numpy as np

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
EULER_GAMMA = 0.57721566490153286061

# below this argument the recurrence shifts x upward before the asymptotic series
_LGAMMA_SHIFT = 15.0
_DIGAMMA_SHIFT = 10.0

# B_2n / (2n (2n-1)) for the Stirling series of ln Gamma
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)
# B_2n / (2n) for the asymptotic series of digamma
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

TINY = np.finfo(np.float64).tiny


class DomainError(ValueError):
    """Raised when a special function is evaluated outside its domain."""


@dataclass(frozen=True)
class GammaParams:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError(f"gamma parameters must be positive, got {self}")

    @property
    def mean(self):
        return self.shape / self.rate


def _as_positive(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} requires x > 0")
    return arr


def _out(arr, like):
    return arr.item() if np.ndim(like) == 0 else arr


def _horner(coeffs, z):
    acc = np.zeros_like(z)
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def lgamma(x):
    """Natural log of the gamma function for ``x > 0``.

    Uses the recurrence ``lgamma(x) = lgamma(x + n) - ln(x (x+1) ... (x+n-1))``
    to move small arguments above 15, then the Stirling series.
    """
    z = np.array(_as_positive(x, "lgamma"), copy=True)
    prod = np.ones_like(z)
    small = z < _LGAMMA_SHIFT
    while np.any(small):
        prod = np.where(small, prod * z, prod)
        z = np.where(small, z + 1.0, z)
        small = z < _LGAMMA_SHIFT
    inv = 1.0 / z
    series = inv * _horner(_STIRLING, inv * inv)
    res = (z - 0.5) * np.log(z) - z + HALF_LOG_2PI + series - np.log(prod)
    return _out(res, x)


def digamma(x):
    """Derivative of :func:`lgamma`, via recurrence shift and asymptotic series."""
    z = np.array(_as_positive(x, "digamma"), copy=True)
    acc = np.zeros_like(z)
    small = z < _DIGAMMA_SHIFT
    while np.any(small):
        acc = np.where(small, acc - 1.0 / z, acc)
        z = np.where(small, z + 1.0, z)
        small = z < _DIGAMMA_SHIFT
    inv2 = 1.0 / (z * z)
    res = acc + np.log(z) - 0.5 / z - inv2 * _horner(_DIGAMMA_SERIES, inv2)
    return _out(res, x)


def gamma_logpdf(x, shape, rate):
    """Log density of ``Gamma(shape, rate)``; ``-inf`` where ``x <= 0``."""
    xa = np.asarray(x, dtype=np.float64)
    shape = np.asarray(shape, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        logx = np.log(np.where(xa > 0, xa, 1.0))
        res = shape * np.log(rate) - lgamma(shape) + (shape - 1.0) * logx - rate * xa
    res = np.where(xa > 0, res, -np.inf)
    return _out(res, res)


def gamma_score_grad(x, shape, rate):
    """Gradient of ``gamma_logpdf(x; shape, rate)`` w.r.t. ``(shape, rate)``.

    Returns
    -------
    d_shape, d_rate
        ``ln(rate) - digamma(shape) + ln(x)`` and ``shape / rate - x``.
    """
    xa = _as_positive(x, "gamma_score_grad")
    shape = np.asarray(shape, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    d_shape = np.log(rate) - digamma(shape) + np.log(xa)
    d_rate = shape / rate - xa
    d_shape, d_rate = np.broadcast_arrays(d_shape, d_rate)
    if d_shape.ndim == 0:
        return float(d_shape), float(d_rate)
    return np.array(d_shape), np.array(d_rate)


def poisson_logpmf(y, rate):
    """``y ln(rate) - rate - lgamma(y + 1)``."""
    rate_a = _as_positive(rate, "poisson_logpmf rate")
    ya = np.asarray(y, dtype=np.float64)
    if np.any(ya < 0) or np.any(ya != np.floor(ya)):
        raise DomainError("poisson_logpmf requires nonnegative integer counts")
    res = ya * np.log(rate_a) - rate_a - lgamma(ya + 1.0)
    return _out(res, res)


def make_rng(seed, *names):
    """PCG64 generator for ``seed``, optionally forked into a named sub-stream.

    The same ``(seed, names)`` pair always yields the same stream; distinct
    names yield statistically independent streams.
    """
    key = tuple(int.from_bytes(hashlib.sha256(n.encode()).digest()[:4], "little") for n in names)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def _standard_gamma_mt(shape, rng):
    """Marsaglia-Tsang squeeze sampler for ``Gamma(shape, 1)``, ``shape >= 1``."""
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty_like(shape)
    pending = np.arange(shape.size)
    while pending.size:
        dp, cp = d[pending], c[pending]
        x = rng.standard_normal(pending.size)
        u = rng.random(pending.size)
        v = (1.0 + cp * x) ** 3
        ok = v > 0
        x2 = x * x
        with np.errstate(divide="ignore", invalid="ignore"):
            logv = np.log(np.where(ok, v, 1.0))
            accept = ok & ((u < 1.0 - 0.0331 * x2 * x2) | (np.log(u) < 0.5 * x2 + dp * (1.0 - v + logv)))
        out[pending[accept]] = (dp * v)[accept]
        pending = pending[~accept]
    return out


def log_gamma_sample(shape, rate, rng):
    """Log of a ``Gamma(shape, rate)`` draw, computed without underflow.

    Shapes below one are boosted: ``G(a) = G(a + 1) * U ** (1 / a)``.
    """
    shape = np.asarray(shape, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    shape, rate = np.broadcast_arrays(shape, rate)
    flat = shape.ravel()
    boost = flat < 1.0
    g = _standard_gamma_mt(np.where(boost, flat + 1.0, flat), rng)
    logx = np.log(g)
    if np.any(boost):
        u = 1.0 - rng.random(int(boost.sum()))
        logx[boost] += np.log(u) / flat[boost]
    return logx.reshape(shape.shape) - np.log(rate)


def gamma_sample(shape, rate, rng):
    """Draw from ``Gamma(shape, rate)``.

    Draws that would underflow (possible for very small shapes) are floored at
    the smallest normal float so that every sample stays strictly positive.
    """
    res = np.maximum(np.exp(log_gamma_sample(shape, rate, rng)), TINY)
    return _out(res, res) if res.ndim == 0 else res
