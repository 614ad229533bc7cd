"""Increment metrics of canonical processes.

d_p(s, t) = ||sum_i (s_i - t_i) X_i||_p, computed exactly where the
coordinate laws allow (gaussian closed form, rademacher sign enumeration)
and by chunked Monte Carlo with a CLT error bound otherwise.  Also hosts
the product-moment functional |||(a_i X_i)|||_r solved by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import dist
from .dist import DistributionModel
from .streams import RngStream, derived_stream

__all__ = [
    "ProcessSpec",
    "IndexSet",
    "IncrementNormResult",
    "increment_norm",
    "distance_matrix",
    "diameter",
    "latala_norm",
]

ENUMERATION_LIMIT = 20        # nonzero rademacher coords in auto mode
ENUMERATION_HARD_LIMIT = 24   # absolute cap even when enumeration is forced
MC_DEFAULT_SAMPLES = 100_000
MC_MAX_P = 128.0
_MC_CHUNK = 20_000


@dataclass(frozen=True)
class ProcessSpec:
    """A canonical process: one standardized model per coordinate."""

    models: tuple

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if len(self.models) < 1:
            raise ValueError("process needs at least one coordinate")

    @property
    def dimension(self) -> int:
        return len(self.models)

    @classmethod
    def homogeneous(cls, model: DistributionModel, n: int) -> "ProcessSpec":
        return cls(models=tuple([model] * n))

    @property
    def family(self) -> Optional[str]:
        """Common family name if all coordinates share one, else None."""
        fams = {m.family for m in self.models}
        return fams.pop() if len(fams) == 1 else None

    def sample_matrix(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """(count, dimension) matrix of coordinate draws, column order fixed."""
        cols = [m.sample_with(rng, count) for m in self.models]
        return np.column_stack(cols)

    def descriptors(self) -> list:
        return [dist.model_descriptor(m) for m in self.models]


@dataclass(frozen=True)
class IndexSet:
    """Finite set of coefficient vectors in R^n."""

    points: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if self.labels is not None and len(self.labels) != len(pts):
            raise ValueError("labels length must match point count")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @classmethod
    def basis(cls, n: int) -> "IndexSet":
        return cls(np.eye(n))

    @classmethod
    def with_origin(cls, points) -> "IndexSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(np.vstack([np.zeros((1, pts.shape[1])), pts]))


@dataclass(frozen=True)
class IncrementNormResult:
    value: float
    error_bound: float
    method: str  # closed_form | enumeration | quadrature | monte_carlo | bracket

    def __float__(self) -> float:
        return self.value


def _enumerate_signed_sums(coeffs: np.ndarray) -> np.ndarray:
    """All 2^k values of sum(c_i * sigma_i) over sign patterns."""
    vals = np.array([0.0])
    for c in coeffs:
        vals = np.concatenate([vals + c, vals - c])
    return vals


def _mc_norm(proc: ProcessSpec, d: np.ndarray, p: float,
             samples: int, seed: int) -> IncrementNormResult:
    if p > MC_MAX_P:
        raise ValueError(f"Monte-Carlo increment norms limited to p <= {MC_MAX_P}")
    stream = derived_stream(seed, "increment_norm", d.tobytes(), p, samples)
    rng = stream.generator()
    total = 0.0
    total_sq = 0.0
    n = 0
    while n < samples:
        chunk = min(_MC_CHUNK, samples - n)
        x = proc.sample_matrix(rng, chunk)
        vals = np.abs(x @ d) ** p
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        n += chunk
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    stderr = math.sqrt(var / n)
    value = mean ** (1.0 / p)
    # delta method on m -> m^(1/p)
    err = (stderr / (p * mean ** (1.0 - 1.0 / p))) if mean > 0 else stderr
    return IncrementNormResult(value=value, error_bound=3.0 * err, method="monte_carlo")


def increment_norm(proc: ProcessSpec, s, t, p: float, method: str = "auto",
                   samples: int = MC_DEFAULT_SAMPLES, seed: int = 0) -> IncrementNormResult:
    """||X_s - X_t||_p with the cheapest exact method available."""
    if p < 1:
        raise ValueError("increment norm requires p >= 1")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if s.shape != (proc.dimension,) or t.shape != (proc.dimension,):
        raise ValueError("index vectors must match the process dimension")
    d = s - t
    if not np.any(d):
        return IncrementNormResult(0.0, 0.0, "closed_form")
    fam = proc.family
    nnz = int(np.count_nonzero(d))
    if method == "auto":
        if fam == "gaussian":
            method = "closed_form"
        elif fam == "rademacher" and nnz <= ENUMERATION_LIMIT:
            method = "enumeration"
        else:
            method = "monte_carlo"
    if method == "closed_form":
        if fam != "gaussian":
            raise ValueError("closed form only available for all-gaussian processes")
        value = float(np.linalg.norm(d)) * dist.gaussian().moment(p)
        return IncrementNormResult(value, 0.0, "closed_form")
    if method == "enumeration":
        if fam != "rademacher":
            raise ValueError("sign enumeration only available for all-rademacher processes")
        if nnz > ENUMERATION_HARD_LIMIT:
            raise ValueError(
                f"enumeration over {nnz} nonzero coordinates exceeds the "
                f"{ENUMERATION_HARD_LIMIT}-coordinate cap"
            )
        vals = _enumerate_signed_sums(d[d != 0.0])
        value = float(np.mean(np.abs(vals) ** p) ** (1.0 / p))
        return IncrementNormResult(value, 0.0, "enumeration")
    if method == "monte_carlo":
        return _mc_norm(proc, d, p, samples, seed)
    raise ValueError(f"unknown method {method!r}")


def is_exact_metric(proc: ProcessSpec, max_nnz: int = ENUMERATION_LIMIT) -> bool:
    """Whether increment norms for this process avoid Monte-Carlo noise."""
    fam = proc.family
    return fam == "gaussian" or (fam == "rademacher" and proc.dimension <= max_nnz)


def distance_matrix(proc: ProcessSpec, T: IndexSet, p: float,
                    samples: int = MC_DEFAULT_SAMPLES, seed: int = 0) -> np.ndarray:
    """Symmetric matrix of pairwise d_p distances over T.

    Monte-Carlo processes share one sample pass across all pairs, which
    keeps the matrix symmetric and the run deterministic.
    """
    m = len(T)
    pts = T.points
    fam = proc.family
    out = np.zeros((m, m))
    if fam == "gaussian":
        mp = dist.gaussian().moment(p)
        diff = pts[:, None, :] - pts[None, :, :]
        return np.linalg.norm(diff, axis=2) * mp
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    if not pairs:
        return out
    if fam == "rademacher" and all(
            np.count_nonzero(pts[i] - pts[j]) <= ENUMERATION_LIMIT for i, j in pairs):
        for i, j in pairs:
            out[i, j] = out[j, i] = increment_norm(proc, pts[i], pts[j], p,
                                                   method="enumeration").value
        return out
    # shared-sample Monte Carlo
    if p > MC_MAX_P:
        raise ValueError(f"Monte-Carlo increment norms limited to p <= {MC_MAX_P}")
    diffs = np.array([pts[i] - pts[j] for i, j in pairs])  # (npairs, dim)
    stream = derived_stream(seed, "distance_matrix", diffs.tobytes(), p, samples)
    rng = stream.generator()
    totals = np.zeros(len(pairs))
    n = 0
    while n < samples:
        chunk = min(_MC_CHUNK, samples - n)
        x = proc.sample_matrix(rng, chunk)          # (chunk, dim)
        vals = np.abs(x @ diffs.T) ** p             # (chunk, npairs)
        totals += vals.sum(axis=0)
        n += chunk
    norms = (totals / n) ** (1.0 / p)
    for k, (i, j) in enumerate(pairs):
        out[i, j] = out[j, i] = norms[k]
    return out


def diameter(T: IndexSet, proc: ProcessSpec, p: float,
             samples: int = MC_DEFAULT_SAMPLES, seed: int = 0) -> float:
    """Delta_p(T): maximal pairwise d_p distance; 0 for singletons."""
    if len(T) == 0:
        raise ValueError("diameter of an empty index set is undefined")
    if len(T) == 1:
        return 0.0
    return float(distance_matrix(proc, T, p, samples=samples, seed=seed).max())


def latala_norm(coeffs, proc: ProcessSpec, r: int,
                rel_tol: float = 1e-10) -> float:
    """|||(a_i X_i)|||_r = inf{u > 0 : prod_i E|1 + a_i X_i / u|^r <= e^r}.

    For symmetric coordinates and even r the product expands into even
    moments and is strictly decreasing in u, so the threshold is a unique
    root found by bisection.
    """
    r = int(r)
    if r < 2 or r % 2 != 0:
        raise ValueError("the product-moment functional requires even r >= 2")
    a = np.asarray(coeffs, dtype=float)
    if a.shape != (proc.dimension,):
        raise ValueError("coefficient vector must match the process dimension")
    if not np.any(a):
        return 0.0
    half = r // 2
    binoms = [math.comb(r, 2 * k) for k in range(half + 1)]
    tables = []
    for ai, model in zip(a, proc.models):
        if ai != 0.0:
            tables.append((ai, [model.even_moment(k) for k in range(half + 1)]))

    def log_product(u: float) -> float:
        total = 0.0
        for ai, moms in tables:
            z = (ai / u) ** 2
            # Horner evaluation of sum_{k>=1} binom(r,2k) E X^(2k) z^k
            s = 0.0
            for k in range(half, 0, -1):
                s = s * z + binoms[k] * moms[k]
            total += math.log1p(s * z)
        return total

    target = float(r)
    lo, hi = None, None
    u = 1.0
    for _ in range(200):
        if log_product(u) > target:
            lo = u
            if hi is not None:
                break
            u *= 2.0
        else:
            hi = u
            if lo is not None:
                break
            u /= 2.0
    if lo is None or hi is None:
        raise RuntimeError("failed to bracket the product-moment root")
    while (hi - lo) > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if log_product(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
