"""Sampling-based estimators and probabilistic-inequality harnesses.

Estimates E sup of canonical-process increments and order-statistic
means, and checks the Paley-Zygmund, contraction and symmetrization
facts.  All estimators draw from an RngStream in fixed chunk order, so a
(master seed, stream id) pair reproduces results bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import dist
from .dist import DistributionModel
from .metric import IndexSet, ProcessSpec, increment_norm
from .streams import RngStream

__all__ = [
    "SupremumEstimate",
    "RngStream",
    "estimate_sup",
    "order_stat_means",
    "paley_zygmund_check",
    "contraction_check",
    "symmetrization_check",
]

_CHUNK = 65_536
DEFAULT_SAMPLES = 100_000
ACCEPTANCE_SAMPLES = 1_000_000

TARGETS = ("sup_increments", "sup_abs", "max_only")


@dataclass(frozen=True)
class SupremumEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int
    stream_id: int
    target: str

    def within(self, value: float, n_sigma: float = 3.0) -> bool:
        return abs(self.mean - value) <= n_sigma * max(self.stderr, 1e-15)


def _accumulate(stream: RngStream, samples: int, draw_chunk,
                workers: int = 1) -> tuple[float, float, int]:
    """Chunked mean/variance accumulation.

    Each chunk draws from its own child stream and partial sums are merged
    in chunk order, so the result is bitwise identical for any worker
    count; workers > 1 only parallelizes the chunk computations.
    """
    sizes = [min(_CHUNK, samples - i * _CHUNK)
             for i in range((samples + _CHUNK - 1) // _CHUNK)]

    def work(i: int) -> tuple[float, float]:
        vals = draw_chunk(stream.child(i + 1).generator(), sizes[i])
        return float(vals.sum()), float((vals * vals).sum())

    if workers <= 1:
        parts = [work(i) for i in range(len(sizes))]
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(work, range(len(sizes))))
    total = 0.0
    total_sq = 0.0
    for s, s2 in parts:
        total += s
        total_sq += s2
    n = sum(sizes)
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n), n


def estimate_sup(proc: ProcessSpec, T: IndexSet, samples: int,
                 stream: RngStream, target: str = "sup_increments",
                 workers: int = 1) -> SupremumEstimate:
    """Monte-Carlo estimate of E sup_{s,t in T}(X_s - X_t) (or variants)."""
    if len(T) == 0:
        raise ValueError("index set is empty")
    if samples < 100:
        raise ValueError("at least 100 samples required")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    if T.dimension != proc.dimension:
        raise ValueError("index set dimension does not match the process")
    if len(T) == 1 and target == "sup_increments":
        return SupremumEstimate(0.0, 0.0, samples, stream.master_seed,
                                stream.stream_id, target)
    pts_T = T.points.T  # (dim, |T|)

    def draw(rng, chunk):
        x = proc.sample_matrix(rng, chunk)
        v = x @ pts_T
        if target == "sup_increments":
            return v.max(axis=1) - v.min(axis=1)
        if target == "sup_abs":
            return np.abs(v).max(axis=1)
        return v.max(axis=1)

    mean, stderr, n = _accumulate(stream, samples, draw, workers=workers)
    return SupremumEstimate(mean, stderr, n, stream.master_seed,
                            stream.stream_id, target)


def estimate_mean(proc: ProcessSpec, T: IndexSet, samples: int, stream: RngStream,
                  transform, workers: int = 1) -> tuple[float, float]:
    """Mean and stderr of transform(values matrix) per sample row.

    `transform` maps the (chunk, |T|) matrix of process values to one
    number per row; used for weak/strong-moment experiments.
    """
    pts_T = T.points.T

    def draw(rng, chunk):
        x = proc.sample_matrix(rng, chunk)
        return transform(x @ pts_T)

    mean, stderr, _ = _accumulate(stream, samples, draw, workers=workers)
    return mean, stderr


def order_stat_means(model: DistributionModel, n: int, ks: Sequence[int],
                     samples: int, stream: RngStream,
                     qs: Sequence[float] = (2.0,)) -> list:
    """MC means of the k-th largest |X_i| among n i.i.d. draws.

    Returns one record per k: the estimate, its stderr and the bound
    values 2 (n/k)^(1/q) ||X||_q for each requested q.
    """
    ks = [int(k) for k in ks]
    for k in ks:
        if not 1 <= k <= n:
            raise ValueError(f"order statistic k={k} out of range 1..{n}")
    rng = stream.generator()
    sums = {k: 0.0 for k in ks}
    sq = {k: 0.0 for k in ks}
    total = 0
    while total < samples:
        chunk = min(_CHUNK, samples - total)
        x = np.abs(model.sample_with(rng, chunk * n).reshape(chunk, n))
        x.sort(axis=1)
        for k in ks:
            vals = x[:, n - k]  # k-th largest
            sums[k] += float(vals.sum())
            sq[k] += float((vals * vals).sum())
        total += chunk
    out = []
    for k in ks:
        mean = sums[k] / total
        var = max(sq[k] / total - mean * mean, 0.0)
        out.append({
            "k": k,
            "estimate": mean,
            "stderr": math.sqrt(var / total),
            "bounds": {q: 2.0 * (n / k) ** (1.0 / q) * model.moment(q) for q in qs},
        })
    return out


def paley_zygmund_check(values=None, probs=None, samples=None,
                        lam: float = 0.5) -> dict:
    """P(S >= lam E S) >= (1-lam)^2 (E S)^2 / E S^2 for S >= 0.

    Give either a finite discrete law (values, probs) for an exact check
    or a sample array for an empirical one.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    if values is not None:
        vals = np.asarray(values, dtype=float)
        if np.any(vals < 0):
            raise ValueError("S must be nonnegative")
        if probs is None:
            probs = np.full(len(vals), 1.0 / len(vals))
        probs = np.asarray(probs, dtype=float)
        es = float(np.sum(vals * probs))
        es2 = float(np.sum(vals * vals * probs))
        lhs = float(np.sum(probs[vals >= lam * es - 1e-15]))
        exact = True
    elif samples is not None:
        s = np.asarray(samples, dtype=float)
        if np.any(s < 0):
            raise ValueError("S must be nonnegative")
        es = float(s.mean())
        es2 = float((s * s).mean())
        lhs = float(np.mean(s >= lam * es))
        exact = False
    else:
        raise ValueError("provide a discrete law or samples")
    rhs = (1.0 - lam) ** 2 * es * es / es2 if es2 > 0 else 0.0
    return {"lhs": lhs, "rhs": rhs, "passed": lhs >= rhs - (0.0 if exact else 1e-12),
            "lambda": lam, "exact": exact}


def contraction_check(a, b, p: float, T: Optional[IndexSet] = None,
                      samples: int = DEFAULT_SAMPLES,
                      stream: Optional[RngStream] = None) -> dict:
    """||sum a_i eps_i||_p <= ||sum b_i eps_i||_p for |a_i| <= |b_i|,
    plus the E sup comparison over T when given."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("coefficient vectors must share a shape")
    if np.any(np.abs(a) > np.abs(b) + 1e-12):
        raise ValueError("contraction requires |a_i| <= |b_i| coordinatewise")
    n = len(a)
    proc = ProcessSpec.homogeneous(dist.rademacher(), n)
    zero = np.zeros(n)
    na = increment_norm(proc, a, zero, p).value
    nb = increment_norm(proc, b, zero, p).value
    out = {"norm_a": na, "norm_b": nb, "passed": na <= nb + 1e-12}
    if T is not None:
        if stream is None:
            stream = RngStream(0, 0)
        Ta = IndexSet(T.points * a)
        Tb = IndexSet(T.points * b)
        ea = estimate_sup(proc, Ta, samples, stream.child(0), target="max_only")
        eb = estimate_sup(proc, Tb, samples, stream.child(1), target="max_only")
        slack = 3.0 * (ea.stderr + eb.stderr)
        out["esup_a"] = ea
        out["esup_b"] = eb
        out["passed"] = out["passed"] and ea.mean <= eb.mean + slack
    return out


def symmetrization_check(proc: ProcessSpec, T: IndexSet, p: float,
                         samples: int, stream: RngStream) -> dict:
    """Factor-2 moment bracket and E sup comparisons between X_t and its
    independently sign-randomized version."""
    n = proc.dimension
    pts_T = T.points.T

    sym_models = []
    for m in proc.models:
        base = m

        def sampler(rng, cnt, base=base):
            vals = base.sample_with(rng, cnt)
            sgn = rng.integers(0, 2, size=cnt) * 2.0 - 1.0
            return vals * sgn

        sym_models.append(DistributionModel(
            base.family + "_symmetrized", base.params,
            moment_fn=base._moment_fn, tail_fn=base._tail_fn,
            sampler=sampler, support_bound=base.support_bound))
    sproc = ProcessSpec(models=tuple(sym_models))

    # moment bracket at p over all pairs of a subsample of T
    ratios = []
    pts = T.points
    for i in range(len(T)):
        for j in range(i + 1, len(T)):
            dx = increment_norm(proc, pts[i], pts[j], p, samples=samples,
                                seed=stream.master_seed)
            dxs = increment_norm(sproc, pts[i], pts[j], p, samples=samples,
                                 seed=stream.master_seed + 1)
            if dx.value > 0:
                ratios.append((dxs.value, dx.value, dxs.error_bound + dx.error_bound))
    bracket_ok = all(
        0.5 * dx - err <= dxs <= 2.0 * dx + err for dxs, dx, err in ratios)

    e_x = estimate_sup(proc, T, samples, stream.child(0))
    e_sym = estimate_sup(sproc, T, samples, stream.child(1))
    e_sym_max = estimate_sup(sproc, T, samples, stream.child(2), target="max_only")
    slack = 3.0 * (e_x.stderr + e_sym.stderr + e_sym_max.stderr)
    esup_ok = (0.5 * e_x.mean - slack <= e_sym.mean <= 2.0 * e_x.mean + slack)
    identity_ok = abs(e_sym.mean - 2.0 * e_sym_max.mean) <= 3.0 * (
        e_sym.stderr + 2.0 * e_sym_max.stderr)
    return {
        "moment_bracket_ok": bracket_ok,
        "esup_bracket_ok": esup_ok,
        "esup_identity_ok": identity_ok,
        "passed": bracket_ok and esup_ok and identity_ok,
        "esup_base": e_x,
        "esup_sym": e_sym,
        "esup_sym_max": e_sym_max,
    }
