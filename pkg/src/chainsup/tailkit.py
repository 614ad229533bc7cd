"""Tail-function transforms.

Turns the tail exponent N(t) = -ln P(|X| > t) of a regular variable into
a convex envelope with explicit constants, measures moderate growth of
tail exponents, and builds the surrogate variables (truncated copy,
log-concave majorant, truncated-exponential filler and their mixture)
used by the lower-bound experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import dist
from .dist import DistributionModel

__all__ = [
    "TailFunction",
    "RegularityConstants",
    "SurrogateCoordinate",
    "SurrogateFamily",
    "SublinearityError",
    "convex_minorant",
    "regularity_constants",
    "log_concave_envelope",
    "growth_constant",
    "check_moderate_growth",
    "build_surrogates",
]

_E = math.e
_LN2 = math.log(2.0)

# grid density for the running-sup integration (points per decade)
_PTS_PER_DECADE = 4096


@dataclass
class TailFunction:
    """Nondecreasing map t -> N(t) in [0, inf], +inf beyond support_bound."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    support_bound: float = math.inf

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        out = np.asarray(self.evaluator(arr), dtype=float)
        out = np.where(arr >= self.support_bound, np.inf, out)
        if np.isscalar(t) or arr.ndim == 0:
            return float(out)
        return out

    def export_grid(self, ts: np.ndarray) -> np.ndarray:
        """Two-column (t, N(t)) array, CSV-ready."""
        return np.column_stack([ts, self(np.asarray(ts, dtype=float))])


class SublinearityError(ValueError):
    """The input tail failed f(c*lambda*t) >= lambda*f(t) on the check grid."""

    def __init__(self, lam, t, lhs, rhs):
        self.witness = (lam, t)
        super().__init__(
            f"sublinearity precondition failed at (lambda={lam}, t={t}): "
            f"f(c*lambda*t)={lhs} < lambda*f(t)={rhs}"
        )


class _RunningSupIntegral:
    """g(t) = int_start^t sup_{start <= y <= x} f(y/c)/y dx on a lazy log grid.

    The integrand is a running maximum, hence nondecreasing, so trapezoid
    integration on a monotone grid is both stable and measurable against
    doubled resolution.
    """

    def __init__(self, f, c: float, start: float, support_bound: float = math.inf):
        self.f = f
        self.c = c
        self.start = start
        self.support = support_bound  # of f itself (g blows up at c*support)
        anchor = start if start > 0 else 1e-8
        self.ts = np.array([start], dtype=float)
        self.h = np.array([self._integrand_limit(anchor)], dtype=float)
        self.G = np.array([0.0])
        self._extend(max(10.0 * anchor, 1.0))

    def _integrand(self, ys: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.f(ys / self.c), dtype=float)
        return vals / ys

    def _integrand_limit(self, y: float) -> float:
        return float(self._integrand(np.asarray([y]))[0])

    def _extend(self, hi: float) -> None:
        lo = self.ts[-1]
        if hi <= lo:
            return
        lo_pos = lo if lo > 0 else hi * 1e-9
        decades = math.log10(hi / lo_pos)
        npts = max(16, int(decades * _PTS_PER_DECADE))
        new_ts = np.geomspace(lo_pos, hi, npts + 1)[1:]
        new_h = self._integrand(new_ts)
        new_h = np.maximum.accumulate(np.concatenate([[self.h[-1]], new_h]))[1:]
        steps = np.diff(np.concatenate([[lo], new_ts]))
        heights = 0.5 * (np.concatenate([[self.h[-1]], new_h[:-1]]) + new_h)
        new_G = self.G[-1] + np.cumsum(steps * heights)
        self.ts = np.concatenate([self.ts, new_ts])
        self.h = np.concatenate([self.h, new_h])
        self.G = np.concatenate([self.G, new_G])

    def __call__(self, t):
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(arr)
        finite_sup = self.c * self.support
        live = arr > self.start
        if np.any(live):
            hi = float(arr[live].max())
            if hi > self.ts[-1]:
                self._extend(min(hi, finite_sup) if math.isfinite(finite_sup) else hi)
            idx = np.searchsorted(self.ts, arr[live], side="right") - 1
            idx = np.clip(idx, 0, len(self.ts) - 1)
            base_t = self.ts[idx]
            base_h = self.h[idx]
            with np.errstate(invalid="ignore", divide="ignore"):
                h_t = np.maximum(base_h, self._integrand(arr[live]))
            vals = self.G[idx] + 0.5 * (base_h + h_t) * (arr[live] - base_t)
            out[live] = vals
        out[arr >= finite_sup] = np.inf
        if np.isscalar(t) or np.asarray(t).ndim == 0:
            return float(out[0])
        return out


def _check_sublinear(f, c: float, t0: float, slack: float = 1e-9) -> None:
    t_lo = max(t0, 1e-6)
    ts = np.geomspace(t_lo, t_lo * 1e4, 200)
    if t0 == 0.0:
        ts = np.concatenate([np.geomspace(1e-9, t_lo, 50), ts])
    for lam in (1.0, 2.0, 4.0, 8.0):
        lhs = np.asarray(f(c * lam * ts), dtype=float)
        rhs = lam * np.asarray(f(ts), dtype=float)
        finite = np.isfinite(rhs)
        bad = finite & (lhs < rhs * (1.0 - slack) - slack)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SublinearityError(lam, float(ts[i]), float(lhs[i]), float(rhs[i]))


def convex_minorant(f, c: float, t0: float = 0.0,
                    check_precondition: bool = True) -> TailFunction:
    """Convex g with g(c*t0) = 0 and g(t) <= f(t) <= g(c^2 t) for t >= c*t0.

    Requires the sublinear growth f(c*lambda*t) >= lambda*f(t) for
    lambda >= 1, t >= t0 (verified on a lambda x t grid unless disabled).
    """
    if c < 2:
        raise ValueError("convex minorant requires c >= 2")
    if t0 < 0:
        raise ValueError("t0 must be >= 0")
    fn = getattr(f, "evaluator", None)
    eval_f = f if fn is None else f  # TailFunction is itself callable
    support = float(getattr(f, "support_bound", math.inf))
    if check_precondition:
        _check_sublinear(eval_f, c, t0)
    integral = _RunningSupIntegral(eval_f, c, start=c * t0, support_bound=support)
    return TailFunction(
        evaluator=lambda t: np.asarray(integral(t), dtype=float),
        support_bound=c * support,
    )


@dataclass(frozen=True)
class RegularityConstants:
    """Closed-form constants attached to the alpha-regular tail envelope."""

    alpha: float
    kappa_alpha: float
    b_alpha: float
    T_alpha: float
    L_alpha: float
    t0: float = 1.0 - 1.0 / _E


def regularity_constants(alpha: float) -> RegularityConstants:
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    kappa = 4.0 * _E * _E / (_E - 1.0) * alpha ** 3
    return RegularityConstants(
        alpha=float(alpha),
        kappa_alpha=kappa,
        b_alpha=math.log(_E * (2.0 * alpha) ** 2),
        T_alpha=4.0 * _E * alpha ** 3,
        L_alpha=kappa * kappa,
    )


def log_concave_envelope(model: DistributionModel, alpha: float,
                         p_grid=dist.DEFAULT_P_GRID) -> TailFunction:
    """Convex nondecreasing M with M(T_alpha) = 0 and M <= N <= M(L_alpha *)
    for t >= T_alpha, built from the model's tail exponent.
    """
    witness = dist.check_alpha_regular(model, alpha, p_grid)
    if not witness.passed:
        raise ValueError(
            f"model {model.family} is not alpha-regular at alpha={alpha}: "
            f"witness {witness.witness_pair}, ratio {witness.ratio}"
        )
    consts = regularity_constants(alpha)
    g = convex_minorant(
        TailFunction(lambda t: np.asarray(model.tail_value(np.maximum(t, 0.0))),
                     support_bound=model.support_bound),
        c=consts.kappa_alpha,
        t0=consts.t0,
        check_precondition=False,  # guaranteed by alpha-regularity
    )

    def evaluator(t):
        arr = np.asarray(t, dtype=float)
        return np.where(arr <= consts.T_alpha, 0.0,
                        np.asarray(g(np.maximum(arr, consts.T_alpha)), dtype=float))

    return TailFunction(evaluator=evaluator, support_bound=g.support_bound)


def growth_constant(alpha: float, beta: float, r: float) -> tuple[float, int]:
    """(C, k): k smallest with 2^(k-2) >= r; C = (ln 2 + 2 beta^k ln(2 alpha))/ln 2."""
    if r <= 1:
        raise ValueError("r must be > 1")
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if beta <= 1:
        raise ValueError("beta must be > 1")
    k = 2
    while 2.0 ** (k - 2) < r:
        k += 1
    c = (_LN2 + 2.0 * beta ** k * math.log(2.0 * alpha)) / _LN2
    return c, k


def check_moderate_growth(tail, r: float, C: float, t_min: float = 2.0,
                          n_points: int = 256, span: float = 1e3):
    """Check N(r*t) <= C*N(t) on a log grid of t >= t_min.

    Returns (passed, worst_ratio); a zero N(t) with positive N(r*t) counts
    as an infinite ratio.
    """
    if t_min < 2.0:
        raise ValueError("t_min must be >= 2")
    eval_t = tail if callable(tail) else tail.evaluator
    ts = np.geomspace(t_min, t_min * span, n_points)
    n_t = np.asarray(eval_t(ts), dtype=float)
    n_rt = np.asarray(eval_t(r * ts), dtype=float)
    finite = np.isfinite(n_t) & np.isfinite(n_rt)
    if not np.all(finite):
        return False, math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(n_t > 0, n_rt / n_t, np.where(n_rt > 0, np.inf, 1.0))
    worst = float(np.max(ratios))
    return worst <= C, worst


# ----------------------------------------------------------------------
# surrogate variables
# ----------------------------------------------------------------------

@dataclass
class SurrogateCoordinate:
    """Envelope and derived variables for one coordinate of a process.

    Variables, all symmetric and coupled through a shared uniform draw:
      base      X  with tail exponent N,
      truncated X~ = sgn(X) max(|X|, T_alpha),
      majorant  Y  with P(|Y| > t) = exp(-M(t)),
      filler    U  truncated-exponential on [0, t_alpha],
      mixture   Z  = Y 1{|Y| > t_alpha} + U 1{|Y| <= t_alpha}.
    """

    model: DistributionModel
    envelope: TailFunction
    constants: RegularityConstants
    t_alpha: float
    lambda_i: float
    p_i: float
    gamma_tilde: float
    _inv_grid_t: np.ndarray = None
    _inv_grid_m: np.ndarray = None

    def envelope_inverse(self, e: np.ndarray) -> np.ndarray:
        """Generalized inverse inf{t : M(t) >= e} on a cached grid."""
        e = np.asarray(e, dtype=float)
        need = float(np.max(e, initial=0.0))
        if need > self._inv_grid_m[-1]:
            self._grow_inverse_grid(need)
        return np.interp(e, self._inv_grid_m, self._inv_grid_t)

    def _grow_inverse_grid(self, need: float) -> None:
        hi = self._inv_grid_t[-1]
        while self._inv_grid_m[-1] < need:
            hi *= 2.0
            ts = np.geomspace(self.constants.T_alpha, hi, 16384)
            ms = np.maximum.accumulate(np.asarray(self.envelope(ts), dtype=float))
            finite = np.isfinite(ms)
            self._inv_grid_t, self._inv_grid_m = ts[finite], ms[finite]
            if not math.isfinite(self.envelope.support_bound) and not np.all(finite):
                break
            if math.isfinite(self.envelope.support_bound) and hi >= self.envelope.support_bound:
                break

    def m_tilde(self, t):
        """Repaired envelope: linear on [0, t_alpha], M beyond."""
        arr = np.asarray(t, dtype=float)
        out = np.where(arr <= self.t_alpha, self.lambda_i * arr,
                       np.asarray(self.envelope(np.maximum(arr, self.t_alpha)), dtype=float))
        if np.isscalar(t) or arr.ndim == 0:
            return float(out)
        return out

    def u_tail(self, t):
        """P(|U| > t) for the truncated-exponential filler."""
        arr = np.asarray(t, dtype=float)
        lam, p = self.lambda_i, self.p_i
        out = np.where(arr > self.t_alpha, 0.0,
                       (np.exp(-lam * arr) - p) / (1.0 - p))
        out = np.clip(out, 0.0, 1.0)
        if np.isscalar(t) or arr.ndim == 0:
            return float(out)
        return out

    def sample_coupled(self, rng: np.random.Generator, count: int) -> dict:
        """Pathwise-coupled draws of X, X~, Y, U, Z (shared uniforms/signs)."""
        e = rng.exponential(size=count)                 # shared: -ln U
        sgn = rng.integers(0, 2, size=count) * 2.0 - 1.0
        u_filler = rng.random(count)                    # filler's own uniform
        sgn_filler = rng.integers(0, 2, size=count) * 2.0 - 1.0

        x_abs = self._base_quantile(e)
        xt_abs = np.maximum(x_abs, self.constants.T_alpha)
        y_abs = self.envelope_inverse(e)
        u_abs = -np.log(u_filler * (1.0 - self.p_i) + self.p_i) / self.lambda_i
        big = y_abs > self.t_alpha
        z = np.where(big, sgn * y_abs, sgn_filler * u_abs)
        return {
            "X": sgn * x_abs,
            "X_tilde": sgn * xt_abs,
            "Y": sgn * y_abs,
            "U": sgn_filler * u_abs,
            "Z": z,
        }

    def _base_quantile(self, e: np.ndarray) -> np.ndarray:
        """inf{t : N(t) >= e} for the base model."""
        hi = self.model.support_bound
        if not math.isfinite(hi):
            hi = 1.0
            while self.model.tail_value(hi) < float(np.max(e, initial=1.0)) and hi < 1e9:
                hi *= 2.0
        ts = np.concatenate([[0.0], np.geomspace(hi * 1e-12, hi, 8192)])
        ns = np.maximum.accumulate(np.asarray(self.model.tail_value(ts), dtype=float))
        finite = np.isfinite(ns)
        return np.interp(e, ns[finite], ts[finite])


@dataclass
class SurrogateFamily:
    coordinates: list
    alpha: float
    beta: float
    gamma_tilde: float


def build_surrogates(proc, alpha: float, beta: float,
                     p_grid=dist.DEFAULT_P_GRID) -> SurrogateFamily:
    """Per-coordinate envelopes and surrogate variables for a process.

    Every coordinate model must pass both class checks at (alpha, beta);
    the first failing witness aborts the construction.
    """
    consts = regularity_constants(alpha)
    growth_c, _ = growth_constant(alpha, beta, 2.0 * consts.L_alpha)
    gamma_tilde = max(2.0, growth_c)
    t_alpha = consts.L_alpha * max(2.0, consts.T_alpha)

    coords = []
    for i, model in enumerate(proc.models):
        wa = dist.check_alpha_regular(model, alpha, p_grid)
        if not wa.passed:
            raise ValueError(f"coordinate {i} fails alpha-regularity: {wa}")
        wb = dist.check_speed_beta(model, beta, p_grid)
        if not wb.passed:
            raise ValueError(f"coordinate {i} fails speed-beta growth: {wb}")
        envelope = log_concave_envelope(model, alpha, p_grid)
        m_at = float(envelope(t_alpha))
        if not (m_at > 0):
            raise ValueError(f"degenerate envelope: M(t_alpha) = {m_at} at coordinate {i}")
        ts = np.geomspace(consts.T_alpha, max(2.0 * t_alpha, 10.0 * consts.T_alpha), 16384)
        ms = np.maximum.accumulate(np.asarray(envelope(ts), dtype=float))
        finite = np.isfinite(ms)
        coords.append(SurrogateCoordinate(
            model=model,
            envelope=envelope,
            constants=consts,
            t_alpha=t_alpha,
            lambda_i=m_at / t_alpha,
            p_i=math.exp(-m_at),
            gamma_tilde=gamma_tilde,
            _inv_grid_t=ts[finite],
            _inv_grid_m=ms[finite],
        ))
    return SurrogateFamily(coordinates=coords, alpha=float(alpha),
                           beta=float(beta), gamma_tilde=gamma_tilde)
