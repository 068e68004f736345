"""Monte Carlo verification of the tail bounds.

Sampling is split into fixed-size chunks.  Chunk ``i`` draws from
``SeedSequence(seed, spawn_key=(i,))``, so results depend only on the
seed and the budget, never on how many worker threads ran the chunks.
Per-chunk tallies are merged in chunk order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import bounds as bd
from .distributions import DiscreteDistribution
from .errors import DomainError
from .logprob import LogProb

CHUNK = 1 << 16
DEFAULT_DELTA = 1e-3
DEFAULT_SAMPLES = 1_000_000
# log-space slack when comparing an exact tail with a bound
EXACT_RTOL = 1e-9


# ---------------------------------------------------------------------------
# chunked sampling
# ---------------------------------------------------------------------------


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _chunk_sizes(n: int) -> list[int]:
    full, rest = divmod(n, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def map_chunks(fn, n: int, seed: int, workers: int = 1) -> list:
    """Run ``fn(rng, size)`` on every chunk; results come back in chunk order."""
    if n < 1:
        raise DomainError("need at least one sample")
    sizes = _chunk_sizes(int(n))
    jobs = [(chunk_rng(seed, i), s) for i, s in enumerate(sizes)]
    if workers <= 1:
        return [fn(rng, s) for rng, s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


# ---------------------------------------------------------------------------
# tail estimates
# ---------------------------------------------------------------------------


def clopper_pearson(hits: int, n: int, delta: float) -> tuple[float, float]:
    """One-sided exact binomial bounds, each holding with probability >= 1 - delta."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    lo = 0.0 if hits == 0 else float(stats.beta.ppf(delta, hits, n - hits + 1))
    hi = 1.0 if hits == n else float(stats.beta.isf(delta, hits + 1, n - hits))
    return lo, hi


@dataclass(frozen=True)
class TailEstimate:
    x: float
    side: str
    n_samples: int
    hits: int
    point_estimate: float
    lower_conf: float
    upper_conf: float
    delta: float

    @classmethod
    def from_counts(cls, x, side, hits, n, delta):
        lo, hi = clopper_pearson(hits, n, delta)
        p = hits / n
        # beta quantiles can land an ulp off the point estimate
        return cls(float(x), side, int(n), int(hits), p, min(lo, p), max(hi, p), delta)

    @property
    def std_error(self) -> float:
        p = self.point_estimate
        return math.sqrt(p * (1 - p) / self.n_samples)

    def to_dict(self) -> dict:
        return {"x": self.x, "side": self.side, "n": self.n_samples, "hits": self.hits,
                "estimate": self.point_estimate, "lower_conf": self.lower_conf,
                "upper_conf": self.upper_conf, "delta": self.delta}


def _hits(samples, x, side):
    return int(np.count_nonzero(samples >= x if side == "upper" else samples <= x))


def estimate_tail(sampler, x: float, side: str, n: int, delta: float = DEFAULT_DELTA,
                  seed: int = 0, workers: int = 1) -> TailEstimate:
    """Estimate P(X >= x) (``side="upper"``) or P(X <= x) with exact confidence bounds.

    ``sampler(rng, size)`` must return an array of ``size`` draws.
    """
    if side not in ("upper", "lower"):
        raise DomainError("side must be 'upper' or 'lower'")
    if n < 1:
        raise DomainError("n must be at least 1")
    counts = map_chunks(lambda rng, s: _hits(np.asarray(sampler(rng, s)), x, side), n, seed, workers)
    return TailEstimate.from_counts(x, side, sum(counts), n, delta)


# ---------------------------------------------------------------------------
# balls in bins
# ---------------------------------------------------------------------------


def _check_bins(b, n):
    if int(b) != b or b < 0:
        raise DomainError("b must be a nonnegative integer")
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    return int(b), int(n)


def collisions_sample(b: int, n: int, rng: np.random.Generator, size=None):
    """Toss b balls into n bins; return b minus the number of occupied bins."""
    b, n = _check_bins(b, n)
    m = 1 if size is None else int(size)
    out = np.empty(m, dtype=np.int64)
    rows_per_block = max(1, (1 << 22) // max(b, 1))
    for start in range(0, m, rows_per_block):
        k = min(rows_per_block, m - start)
        occupied = np.zeros((k, n), dtype=bool)
        if b:
            bins = rng.integers(0, n, size=(k, b))
            occupied[np.arange(k)[:, None], bins] = True
        out[start:start + k] = b - occupied.sum(axis=1)
    return int(out[0]) if size is None else out.astype(float)


def collisions_mean(b: int, n: int) -> float:
    """E C(b, n) = b - n (1 - (1 - 1/n)^b)."""
    b, n = _check_bins(b, n)
    return b - n * -math.expm1(b * math.log1p(-1.0 / n)) if n > 1 else max(b - 1, 0)


def collisions_law(b: int, n: int) -> DiscreteDistribution:
    """Exact law of C(b, n) from the occupancy chain (occupied bins after each toss)."""
    b, n = _check_bins(b, n)
    occ = np.zeros(min(b, n) + 1)
    occ[0] = 1.0
    for _ in range(b):
        k = np.arange(occ.size)
        stay = occ * k / n
        move = occ * (n - k) / n
        occ = stay
        occ[1:] += move[:-1]
    k = np.arange(occ.size)
    keep = occ > 0
    vals = (b - k[keep]).astype(float)
    order = np.argsort(vals)
    return DiscreteDistribution(vals[order], occ[keep][order] / occ.sum(), name=f"collisions:b={b},n={n}")


# ---------------------------------------------------------------------------
# MGF check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MgfRow:
    beta: float
    log_mgf: float
    bound: float
    slack: float

    @property
    def ok(self) -> bool:
        return self.log_mgf <= self.bound + self.slack + 1e-12 * max(1.0, abs(self.bound))


def empirical_mgf_check(samples, betas, params: bd.BoundParams) -> list[MgfRow]:
    """Compare log of the empirical MGF with (a/c)(e^{beta c} - 1).

    The empirical mean of e^{beta X} is taken after shifting by the
    largest exponent.  ``slack`` is 4 standard errors of the log estimate
    (delta method).
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DomainError("samples must be nonempty")
    rows = []
    for beta in betas:
        z = beta * x
        top = z.max()
        w = np.exp(z - top)
        m = w.mean()
        log_m = float(top + math.log(m))
        se = float(w.std(ddof=1) / (math.sqrt(x.size) * m)) if x.size > 1 else math.inf
        rows.append(MgfRow(float(beta), log_m, bd.mgf_log_bound(beta, params), 4.0 * se))
    return rows


# ---------------------------------------------------------------------------
# bound verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    name: str
    log_bound: float
    mc_violation: bool
    exact_violation: bool

    @property
    def passed(self) -> bool:
        return not (self.mc_violation or self.exact_violation)


@dataclass(frozen=True)
class VerifyRow:
    estimate: TailEstimate
    exact: float | None
    checks: tuple
    best: str

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)


@dataclass
class VerificationReport:
    spec: str
    params: bd.BoundParams
    n: int
    delta: float
    seed: int
    rows: list
    sample_mean: float
    sample_variance: float
    exact_mean: float | None = None
    exact_variance: float | None = None
    truncation_bias: float | None = None
    runtime: float = field(default=0.0, compare=False)

    @property
    def violations(self) -> list:
        return [(row, ch) for row in self.rows for ch in row.checks if not ch.passed]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self, include_runtime: bool = False) -> dict:
        out = {
            "spec": self.spec, "a": self.params.a, "c": self.params.c, "n": self.n,
            "delta": self.delta, "seed": self.seed, "sample_mean": self.sample_mean,
            "sample_variance": self.sample_variance, "exact_mean": self.exact_mean,
            "exact_variance": self.exact_variance, "truncation_bias": self.truncation_bias,
            "passed": self.passed,
            "rows": [
                {**row.estimate.to_dict(), "exact": row.exact, "best": row.best,
                 "bounds": [{"name": ch.name, "log": ch.log_bound, "value": math.exp(ch.log_bound),
                             "mc_violation": ch.mc_violation, "exact_violation": ch.exact_violation}
                            for ch in row.checks]}
                for row in self.rows
            ],
        }
        if include_runtime:
            out["runtime"] = self.runtime
        return out

    def csv_rows(self) -> list[dict]:
        rows = []
        for row in self.rows:
            est = row.estimate
            for ch in row.checks:
                rows.append({"spec": self.spec, "x": est.x, "side": est.side, "bound": ch.name,
                             "log_bound": ch.log_bound, "bound_value": math.exp(ch.log_bound),
                             "estimate": est.point_estimate, "lower_conf": est.lower_conf,
                             "upper_conf": est.upper_conf, "exact": row.exact,
                             "best": ch.name == row.best, "pass": ch.passed})
        return rows


def _finite_or_str(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _finite_or_str(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_finite_or_str(x) for x in v]
    return v


def to_json(obj) -> str:
    """JSON with non-finite floats spelled as strings ("-inf" for a zero probability)."""
    return json.dumps(_finite_or_str(obj), indent=2, allow_nan=False)


def to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def default_xs(mean: float, c: float, support_min: float = 0.0) -> list[float]:
    """Check points at a + k sqrt(a c) for k = -3..5, clipped below at the support minimum."""
    sd = math.sqrt(mean * c)
    xs = []
    for k in (-3, -2, -1, 1, 2, 3, 4, 5):
        x = float(f"{max(mean + k * sd, support_min):.6g}")
        if x not in xs:
            xs.append(x)
    return xs


def _tally(sampler, xs):
    xs = np.asarray(xs, dtype=float)

    def fn(rng, size):
        s = np.sort(np.asarray(sampler(rng, size), dtype=float))
        upper = size - np.searchsorted(s, xs, side="left")
        lower = np.searchsorted(s, xs, side="right")
        return upper, lower, math.fsum(s), math.fsum(s * s)

    return fn


def _row_checks(report: bd.BoundReport, side, est: TailEstimate, exact):
    table = dict(report.upper if side == "upper" else report.lower)
    if side == "lower":
        j = report.best_chebyshev_j
        table[f"chebyshev_{j}"] = LogProb(report.chebyshev[j])
    checks = []
    log_lo = math.log(est.lower_conf) if est.lower_conf > 0 else -math.inf
    log_exact = None if exact is None else (math.log(exact) if exact > 0 else -math.inf)
    for name, lp in table.items():
        b = lp.log
        mc = log_lo > b + 1e-12
        ex = log_exact is not None and log_exact > b + EXACT_RTOL
        checks.append(BoundCheck(name, b, mc, ex))
    return tuple(checks)


def verify_bounds(dist_spec, xs=None, params: bd.BoundParams | None = None, n: int = DEFAULT_SAMPLES,
                  delta: float = DEFAULT_DELTA, seed: int = 0, workers: int = 1,
                  eps: float | None = None) -> VerificationReport:
    """Check every applicable bound at every x against sampled (and exact) tails.

    ``dist_spec`` is a spec string or a parsed :class:`~sizebias.specs.Model`.
    For each x at or above the mean the upper tail is checked, at or below
    it the lower tail.  A bound fails when the Clopper-Pearson lower
    confidence bound exceeds it, or when the exact tail (if known) does.
    """
    from .specs import parse_spec  # the spec parser imports this module

    t0 = time.perf_counter()
    model = parse_spec(dist_spec, eps=eps) if isinstance(dist_spec, str) else dist_spec
    params = params or bd.BoundParams(model.mean, model.c)
    if xs is None:
        xs = default_xs(params.a, params.c, model.support_min)
    xs = [float(x) for x in xs]
    if any(not math.isfinite(x) or x < 0 for x in xs):
        raise DomainError("check points must be finite and nonnegative")

    parts = map_chunks(_tally(model.sample, xs), n, seed, workers)
    upper = np.sum([p[0] for p in parts], axis=0)
    lower = np.sum([p[1] for p in parts], axis=0)
    s1 = math.fsum(p[2] for p in parts)
    s2 = math.fsum(p[3] for p in parts)
    mean = s1 / n
    var = (s2 - n * mean * mean) / (n - 1) if n > 1 else 0.0

    rows = []
    for i, x in enumerate(xs):
        report = bd.best_report(x, params, n=model.hoeffding_n)
        sides = []
        if x >= params.a:
            sides.append(("upper", int(upper[i]), report.best_upper_name))
        if x <= params.a:
            sides.append(("lower", int(lower[i]), report.best_lower_name))
        for side, hits, best in sides:
            est = TailEstimate.from_counts(x, side, hits, n, delta)
            exact = None
            if model.exact is not None:
                exact = model.exact.upper_tail(x) if side == "upper" else model.exact.lower_tail(x)
            rows.append(VerifyRow(est, exact, _row_checks(report, side, est, exact), best))

    return VerificationReport(
        spec=model.text, params=params, n=int(n), delta=delta, seed=seed, rows=rows,
        sample_mean=mean, sample_variance=var, exact_mean=model.exact_mean,
        exact_variance=model.variance, truncation_bias=model.truncation_bias,
        runtime=time.perf_counter() - t0)


# Acceptance suite: Poisson, fair coins, uniform sums, collisions, Dickman.
DEFAULT_SUITE = (
    "poisson:mean=5",
    "bernoulli-sum:p=0.5*20",
    "uniform-sum:b=4,m=10",
    "collisions:b=100,n=50",
    "dickman",
)


def run_suite(n: int = DEFAULT_SAMPLES, delta: float = DEFAULT_DELTA, seed: int = 0,
              workers: int = 1, specs=DEFAULT_SUITE) -> list[VerificationReport]:
    return [verify_bounds(s, n=n, delta=delta, seed=seed, workers=workers) for s in specs]
