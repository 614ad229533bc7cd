"""Standardized symmetric distribution models.

Each model describes a symmetric, mean-zero, variance-one random variable
through three coordinated views: L^p moments (closed form where possible,
quadrature otherwise), the tail exponent N(t) = -ln P(|X| > t), and a
sampler.  Membership tests for the moment-growth classes (alpha-regular
growth, speed-beta growth) operate on a finite p-grid and record the grid
in the verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy import special as sp

from .streams import RngStream

__all__ = [
    "DistributionModel",
    "RegularityWitness",
    "DEFAULT_P_GRID",
    "gaussian",
    "rademacher",
    "sym_exponential",
    "sym_weibull",
    "three_point",
    "log_concave_from_tail",
    "moment",
    "tail_value",
    "sample",
    "check_alpha_regular",
    "check_speed_beta",
    "model_from_descriptor",
    "model_descriptor",
]

# Log-spaced grid covering the dyadic moment levels used by the chaining
# functionals.  Configurable in every class check; recorded in verdicts.
DEFAULT_P_GRID = (2.0, 2.5, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0, 96.0, 128.0)

_LN2 = math.log(2.0)


def _gaussian_lp(p: float) -> float:
    # ||g||_p = sqrt(2) * (Gamma((p+1)/2)/sqrt(pi))^(1/p)
    return math.exp(0.5 * _LN2 + (math.lgamma((p + 1.0) / 2.0) - 0.5 * math.log(math.pi)) / p)


@dataclass(frozen=True)
class RegularityWitness:
    """Outcome of a grid-certified moment-growth class check.

    The verdict only speaks for the grid it was computed on; `grid` is
    carried so a "pass" never silently claims the continuum statement.
    """

    passed: bool
    kind: str                      # "alpha" or "beta"
    level: float                   # the alpha or beta that was tested
    witness_pair: tuple            # (q, p) of the extremal / violating pair
    ratio: float                   # ||X||_p / ||X||_q at the witness pair
    threshold: float               # the bound the ratio was compared against
    grid: tuple

    def __bool__(self) -> bool:
        return self.passed


class DistributionModel:
    """A standardized symmetric law: moments, tail exponent, sampler."""

    def __init__(self, family: str, params: dict,
                 moment_fn: Callable[[float], float],
                 tail_fn: Callable[[np.ndarray], np.ndarray],
                 sampler: Callable[[np.random.Generator, int], np.ndarray],
                 support_bound: float = math.inf):
        self.family = family
        self.params = dict(params)
        self._moment_fn = moment_fn
        self._tail_fn = tail_fn
        self._sampler = sampler
        self.support_bound = float(support_bound)
        self._even_moment_cache: dict[int, float] = {}

    def __repr__(self):
        ps = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"DistributionModel({self.family}{', ' + ps if ps else ''})"

    # -- moments ------------------------------------------------------

    def moment(self, p: float) -> float:
        """L^p norm ||X||_p, p >= 1."""
        if p < 1:
            raise ValueError(f"moment order must be >= 1, got {p}")
        return float(self._moment_fn(float(p)))

    def even_moment(self, k: int) -> float:
        """E X^(2k), cached (used by the product-moment functional)."""
        if k not in self._even_moment_cache:
            if k == 0:
                v = 1.0
            else:
                v = self.moment(2 * k) ** (2 * k)
            self._even_moment_cache[k] = v
        return self._even_moment_cache[k]

    # -- tails --------------------------------------------------------

    def tail_value(self, t):
        """N(t) = -ln P(|X| > t) as an extended real, t >= 0."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0):
            raise ValueError("tail_value requires t >= 0")
        out = np.asarray(self._tail_fn(arr), dtype=float)
        out = np.where(arr >= self.support_bound, np.inf, out)
        if np.isscalar(t) or arr.ndim == 0:
            return float(out)
        return out

    # -- sampling -----------------------------------------------------

    def sample_with(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError("count must be >= 0")
        return self._sampler(rng, int(count))

    def sample(self, stream: RngStream, count: int) -> np.ndarray:
        """i.i.d. draws, deterministic given (master seed, stream id)."""
        return self.sample_with(stream.generator(), count)


# ----------------------------------------------------------------------
# families
# ----------------------------------------------------------------------

def gaussian() -> DistributionModel:
    def tail(t):
        # P(|g| > t) = 2*sf(t); log_ndtr(-t) = log sf(t), stable far out
        return -(_LN2 + sp.log_ndtr(-t))

    return DistributionModel(
        "gaussian", {},
        moment_fn=_gaussian_lp,
        tail_fn=tail,
        sampler=lambda rng, n: rng.standard_normal(n),
    )


def rademacher() -> DistributionModel:
    def tail(t):
        return np.where(t < 1.0, 0.0, np.inf)

    return DistributionModel(
        "rademacher", {},
        moment_fn=lambda p: 1.0,
        tail_fn=tail,
        sampler=lambda rng, n: rng.integers(0, 2, size=n) * 2.0 - 1.0,
        support_bound=1.0,
    )


def sym_exponential() -> DistributionModel:
    # |X| ~ Exp(rate sqrt(2)) gives E X^2 = 1; N(t) = sqrt(2) t
    rt2 = math.sqrt(2.0)

    def sampler(rng, n):
        mag = rng.exponential(scale=1.0 / rt2, size=n)
        sgn = rng.integers(0, 2, size=n) * 2.0 - 1.0
        return mag * sgn

    return DistributionModel(
        "sym_exponential", {},
        moment_fn=lambda p: math.exp(math.lgamma(p + 1.0) / p) / rt2,
        tail_fn=lambda t: rt2 * t,
        sampler=sampler,
    )


def sym_weibull(shape: float) -> DistributionModel:
    """P(|X| > t) = exp(-(t/s)^shape) with s set so that Var = 1."""
    if shape <= 0:
        raise ValueError("weibull shape must be > 0")
    w = float(shape)
    s = math.exp(-0.5 * math.lgamma(1.0 + 2.0 / w))  # Gamma(1+2/w)^(-1/2)

    def sampler(rng, n):
        mag = s * rng.weibull(w, size=n)
        sgn = rng.integers(0, 2, size=n) * 2.0 - 1.0
        return mag * sgn

    return DistributionModel(
        "sym_weibull", {"shape": w},
        moment_fn=lambda p: s * math.exp(math.lgamma(1.0 + p / w) / p),
        tail_fn=lambda t: (t / s) ** w,
        sampler=sampler,
    )


def three_point(a: float) -> DistributionModel:
    """P(X = +-a) = 1/(2a^2), P(X = 0) = 1 - 1/a^2; a > 1.

    Deliberately outside the regular classes for moderate alpha; exists to
    exercise the failure paths of the class checks.
    """
    if a <= 1:
        raise ValueError("three_point requires atom a > 1")
    a = float(a)
    p_atom = 1.0 / (a * a)

    def tail(t):
        return np.where(t < a, 2.0 * math.log(a), np.inf)

    def sampler(rng, n):
        u = rng.random(n)
        return np.where(u < p_atom / 2.0, a, np.where(u < p_atom, -a, 0.0))

    return DistributionModel(
        "three_point", {"a": a},
        moment_fn=lambda p: a ** (1.0 - 2.0 / p),
        tail_fn=tail,
        sampler=sampler,
        support_bound=a,
    )


def _tail_quad_raw_moment(tail_fn, support_bound: float, p: float,
                          rel_tol: float = 1e-10) -> float:
    """E|X|^p = int_0^inf p t^(p-1) exp(-N(t)) dt by adaptive quadrature.

    The upper limit doubles until the last interval contributes less than
    1e-12 of the running total.
    """
    def integrand(t):
        n = np.asarray(tail_fn(np.asarray(t, dtype=float)), dtype=float)
        with np.errstate(over="ignore"):
            return p * np.asarray(t) ** (p - 1.0) * np.exp(-np.minimum(n, 745.0))

    if math.isfinite(support_bound):
        val, _ = integrate.quad(integrand, 0.0, support_bound, limit=300, epsrel=rel_tol)
        return val
    total = 0.0
    lo, hi = 0.0, 1.0
    while True:
        piece, _ = integrate.quad(integrand, lo, hi, limit=300, epsrel=rel_tol)
        total += piece
        if hi > 1.0 and abs(piece) < 1e-12 * max(total, 1e-300):
            return total
        lo, hi = hi, hi * 2.0


def log_concave_from_tail(tail, name: str = "log_concave_from_tail") -> DistributionModel:
    """Model defined by a tail exponent t -> N(t), rescaled to variance 1.

    `tail` is any object with an `evaluator` callable and a
    `support_bound` attribute (see tailkit.TailFunction), or a bare
    callable with unbounded support.
    """
    raw_fn = getattr(tail, "evaluator", tail)
    raw_support = float(getattr(tail, "support_bound", math.inf))

    raw_var = _tail_quad_raw_moment(raw_fn, raw_support, 2.0)
    if not (raw_var > 0 and math.isfinite(raw_var)):
        raise ValueError("tail function does not define a nondegenerate variance")
    sigma = math.sqrt(raw_var)
    support = raw_support / sigma

    def tail_fn(t):
        return np.asarray(raw_fn(np.asarray(t, dtype=float) * sigma), dtype=float)

    def moment_fn(p):
        return _tail_quad_raw_moment(tail_fn, support, p) ** (1.0 / p)

    # grid-backed inverse of N for inverse-CDF sampling
    hi = support if math.isfinite(support) else 1.0
    if not math.isfinite(support):
        while tail_fn(np.asarray([hi]))[0] < 746.0:
            hi *= 2.0
    ts = np.concatenate([[0.0], np.geomspace(hi * 1e-12, hi, 8192)])
    ns = tail_fn(ts)
    ns = np.maximum.accumulate(ns)  # guard tiny non-monotonicity from roundoff

    def sampler(rng, n):
        e = rng.exponential(size=n)
        mag = np.interp(e, ns, ts)
        sgn = rng.integers(0, 2, size=n) * 2.0 - 1.0
        return mag * sgn

    return DistributionModel(
        name, {"sigma": sigma},
        moment_fn=moment_fn,
        tail_fn=tail_fn,
        sampler=sampler,
        support_bound=support,
    )


# ----------------------------------------------------------------------
# operations (module-level views of the model methods)
# ----------------------------------------------------------------------

def moment(model: DistributionModel, p: float) -> float:
    return model.moment(p)


def tail_value(model: DistributionModel, t: float):
    return model.tail_value(t)


def sample(model: DistributionModel, stream: RngStream, count: int) -> np.ndarray:
    return model.sample(stream, count)


def moment_quadrature(model: DistributionModel, p: float) -> float:
    """Quadrature cross-check of ||X||_p against the tail exponent."""
    return _tail_quad_raw_moment(model.tail_value, model.support_bound, p) ** (1.0 / p)


def _validate_grid(p_grid) -> tuple:
    grid = tuple(sorted(float(p) for p in p_grid))
    if not grid:
        raise ValueError("p_grid must be nonempty")
    if grid[0] < 2.0:
        raise ValueError(f"p_grid must lie in [2, inf), got {grid[0]}")
    return grid


def check_alpha_regular(model: DistributionModel, alpha: float,
                        p_grid: Sequence[float] = DEFAULT_P_GRID) -> RegularityWitness:
    """Grid check of ||X||_p <= alpha*(p/q)*||X||_q for grid pairs p > q.

    Fails when the normalized ratio ||X||_p*q/(p*||X||_q) reaches alpha
    (equality counts as a violation; the defining inequality is required
    to hold with a strict margin on the grid).
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    grid = _validate_grid(p_grid)
    moments = {p: model.moment(p) for p in grid}
    best = None  # (normalized ratio, q, p)
    for i, q in enumerate(grid):
        for p in grid[i + 1:]:
            norm_ratio = moments[p] * q / (p * moments[q])
            if best is None or norm_ratio > best[0]:
                best = (norm_ratio, q, p)
    if best is None:  # single-point grid: nothing to compare
        p0 = grid[0]
        return RegularityWitness(True, "alpha", alpha, (p0, p0), 1.0, alpha, grid)
    norm_ratio, q, p = best
    return RegularityWitness(
        passed=norm_ratio < alpha,
        kind="alpha", level=alpha,
        witness_pair=(q, p),
        ratio=moments[p] / moments[q],
        threshold=alpha * p / q,
        grid=grid,
    )


def check_speed_beta(model: DistributionModel, beta: float,
                     p_grid: Sequence[float] = DEFAULT_P_GRID) -> RegularityWitness:
    """Grid check of ||X||_{beta*p} >= 2*||X||_p for all grid p."""
    if beta <= 1:
        raise ValueError("beta must be > 1")
    grid = _validate_grid(p_grid)
    worst = None  # (ratio, p)
    for p in grid:
        ratio = model.moment(beta * p) / model.moment(p)
        if worst is None or ratio < worst[0]:
            worst = (ratio, p)
    ratio, p = worst
    return RegularityWitness(
        passed=ratio >= 2.0,
        kind="beta", level=beta,
        witness_pair=(p, beta * p),
        ratio=ratio,
        threshold=2.0,
        grid=grid,
    )


# ----------------------------------------------------------------------
# descriptors (the serialized form used by configs and reports)
# ----------------------------------------------------------------------

_FACTORIES = {
    "gaussian": lambda params: gaussian(),
    "rademacher": lambda params: rademacher(),
    "sym_exponential": lambda params: sym_exponential(),
    "sym_weibull": lambda params: sym_weibull(params["shape"]),
    "three_point": lambda params: three_point(params["a"]),
}


def model_from_descriptor(desc: dict) -> DistributionModel:
    """Build a model from a {family, ...params} record."""
    family = desc.get("family")
    if family not in _FACTORIES:
        raise ValueError(f"unknown distribution family: {family!r}")
    params = {k: v for k, v in desc.items() if k != "family"}
    return _FACTORIES[family](params)


def model_descriptor(model: DistributionModel) -> dict:
    return {"family": model.family, **model.params}
