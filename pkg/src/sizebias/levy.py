"""Levy([0, c]) laws: infinitely divisible, Levy measure on (0, c].

A law is fixed by its mean ``a``, the bound ``c`` and a probability measure
``alpha`` on [0, c].  The Levy measure is ``gamma(dy) = (a / y) alpha(dy)``
on (0, c] and there is a drift ``a * alpha({0})``.  Size biasing adds an
independent ``D ~ alpha``.  The Dickman distribution is a = c = 1 with
alpha uniform.

Sampling realizes X as the drift plus the sum of the points of a Poisson
process with intensity gamma, truncated to [eps, c].  Truncation removes
exactly ``a * alpha((0, eps))`` from the mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from . import distributions as dist_mod
from .bounds import BoundParams, product_upper
from .errors import DomainError
from .special_fn import DickmanTable, default_table

DEFAULT_EPS = 1e-8


@dataclass(frozen=True)
class Alpha:
    """Probability measure on [0, c] as a mixture.

    Weights: ``atom0`` at zero, ``weights[i]`` at ``points[i]``,
    ``uniform`` spread uniformly on (0, c], and ``table_weight`` with the
    tabulated density ``table = (ys, density)`` (linear interpolation,
    normalized internally).
    """

    atom0: float = 0.0
    points: tuple = ()
    weights: tuple = ()
    uniform: float = 0.0
    table: tuple | None = None
    table_weight: float = 0.0

    def __post_init__(self):
        if len(self.points) != len(self.weights):
            raise DomainError("alpha points and weights differ in length")
        ws = [self.atom0, self.uniform, self.table_weight, *self.weights]
        if any(w < 0 for w in ws):
            raise DomainError("alpha weights must be nonnegative")
        if abs(math.fsum(ws) - 1.0) > 1e-12:
            raise DomainError(f"alpha weights sum to {math.fsum(ws)!r}, not 1")
        if self.atom0 >= 1.0:
            raise DomainError("alpha must not be concentrated at 0")
        if any(p <= 0 for p in self.points):
            raise DomainError("alpha atoms other than atom0 must be positive")
        if self.table_weight > 0 and self.table is None:
            raise DomainError("table_weight given without a table")

    @classmethod
    def uniform_on(cls) -> "Alpha":
        return cls(uniform=1.0)

    @classmethod
    def point_mass(cls, v: float) -> "Alpha":
        return cls(points=(float(v),), weights=(1.0,))


@dataclass(frozen=True)
class LevySpec:
    a: float
    c: float
    alpha: Alpha = field(default_factory=Alpha.uniform_on)

    def __post_init__(self):
        BoundParams(self.a, self.c)
        if any(p > self.c * (1 + 1e-12) for p in self.alpha.points):
            raise DomainError("alpha has an atom beyond c")
        if self.alpha.table is not None:
            ys, dens = (np.asarray(v, dtype=float) for v in self.alpha.table)
            if ys.ndim != 1 or ys.shape != dens.shape or ys.size < 2:
                raise DomainError("alpha table must be two matching 1-d arrays")
            if ys[0] < 0 or ys[-1] > self.c * (1 + 1e-12) or np.any(np.diff(ys) <= 0) or np.any(dens < 0):
                raise DomainError("alpha table must be an ascending grid in [0, c] with nonnegative density")

    @property
    def params(self) -> BoundParams:
        return BoundParams(self.a, self.c)

    # -- the tabulated part -------------------------------------------------

    def _table(self):
        ys, dens = (np.asarray(v, dtype=float) for v in self.alpha.table)
        norm = np.trapezoid(dens, ys)
        if not norm > 0:
            raise DomainError("alpha table density integrates to zero")
        return ys, dens / norm

    def _table_mass(self, lo, hi, weight_fn=None):
        ys, dens = self._table()
        lo, hi = max(lo, ys[0]), min(hi, ys[-1])
        if hi <= lo:
            return 0.0

        def f(y):
            p = np.interp(y, ys, dens)
            return p if weight_fn is None else p * weight_fn(y)

        pts = ys[(ys > lo) & (ys < hi)]
        val, _ = integrate.quad(f, lo, hi, points=pts[:50] if pts.size else None, limit=500)
        return val

    # -- alpha and gamma masses ---------------------------------------------

    def alpha_mass(self, lo: float, hi: float, include_lo: bool = True) -> float:
        """alpha([lo, hi]) restricted to (0, c] (``include_lo=False`` for (lo, hi])."""
        al = self.alpha
        total = 0.0
        for v, w in zip(al.points, al.weights):
            if (v > lo or (include_lo and v == lo)) and v <= hi:
                total += w
        lo_c, hi_c = max(lo, 0.0), min(hi, self.c)
        if al.uniform and hi_c > lo_c:
            total += al.uniform * (hi_c - lo_c) / self.c
        if al.table_weight:
            total += al.table_weight * self._table_mass(lo_c, hi_c)
        return total

    def mass_below(self, eps: float) -> float:
        """alpha((0, eps)), the weight discarded by truncation at eps."""
        al = self.alpha
        total = sum(w for v, w in zip(al.points, al.weights) if v < eps)
        total += al.uniform * min(eps, self.c) / self.c
        if al.table_weight:
            total += al.table_weight * self._table_mass(0.0, eps)
        return total

    def _rates(self, lo: float, hi: float):
        """gamma mass of [lo, hi] split by mixture component: (points, uniform, table)."""
        al = self.alpha
        pts = np.array([self.a * w / v if lo <= v <= hi else 0.0 for v, w in zip(al.points, al.weights)])
        uni = 0.0
        if al.uniform and hi > lo:
            uni = self.a * al.uniform / self.c * math.log(hi / lo)
        tab = 0.0
        if al.table_weight:
            tab = self.a * al.table_weight * self._table_mass(lo, hi, lambda y: 1.0 / y)
        return pts, uni, tab

    def levy_mass(self, lo: float, hi: float) -> float:
        """gamma([lo, hi]) for 0 < lo <= hi <= c."""
        if not 0 < lo <= hi:
            raise DomainError("need 0 < lo <= hi")
        pts, uni, tab = self._rates(lo, min(hi, self.c))
        return float(pts.sum() + uni + tab)

    def intensity(self, eps: float) -> float:
        """lambda_eps = gamma([eps, c]), the expected number of retained arrivals."""
        _check_eps(self, eps)
        return self.levy_mass(eps, self.c)

    def truncated_mean(self, eps: float) -> float:
        return self.a * (1.0 - self.mass_below(eps))

    def truncation_bias(self, eps: float) -> float:
        """Mean lost to truncation: a * alpha((0, eps))."""
        return self.a * self.mass_below(eps)

    @property
    def variance(self) -> float:
        """Var X = int y^2 gamma(dy) = a E[D] with D ~ alpha."""
        al = self.alpha
        mean_d = sum(v * w for v, w in zip(al.points, al.weights)) + al.uniform * self.c / 2
        if al.table_weight:
            mean_d += al.table_weight * self._table_mass(0.0, self.c, lambda y: y)
        return self.a * mean_d

    def exact_law(self) -> dist_mod.DiscreteDistribution | None:
        """Exact law when alpha is atom0 plus one point mass v: a alpha0 + v Poisson(a(1-alpha0)/v)."""
        al = self.alpha
        if len(al.points) != 1 or al.uniform or al.table_weight:
            return None
        v = al.points[0]
        base = dist_mod.poisson(self.a * al.weights[0] / v)
        return dist_mod.DiscreteDistribution(self.a * al.atom0 + v * base.support, base.pmf,
                                             truncation=base.truncation, name=str(self))


def _check_eps(spec: LevySpec, eps: float):
    if not 0 < eps < spec.c:
        raise DomainError(f"truncation eps must satisfy 0 < eps < c (eps={eps!r}, c={spec.c!r})")


def dickman_spec() -> LevySpec:
    return LevySpec(1.0, 1.0, Alpha.uniform_on())


def _sample_table(spec: LevySpec, rng, count, lo, hi, log_uniform):
    """Draw from the tabulated density restricted to [lo, hi].

    With ``log_uniform`` the target is p(y)/y (the Levy measure) and the
    proposal is log-uniform; otherwise the target is p(y) with a uniform
    proposal.  Acceptance is p(y) / max p in both cases.
    """
    ys, dens = spec._table()
    lo, hi = max(lo, ys[0], 1e-300), min(hi, ys[-1])
    top = dens.max()
    out = np.empty(count)
    filled = 0
    while filled < count:
        m = max(2 * (count - filled), 64)
        u = rng.random(m)
        y = np.exp(math.log(lo) + u * math.log(hi / lo)) if log_uniform else lo + u * (hi - lo)
        ok = rng.random(m) * top <= np.interp(y, ys, dens)
        take = y[ok][: count - filled]
        out[filled:filled + take.size] = take
        filled += take.size
    return out


def sample_levy(spec: LevySpec, eps: float, rng: np.random.Generator, size=None):
    """Draw X_eps = a alpha0 + sum of Poisson-process points in [eps, c].

    ``E X_eps = a (1 - alpha((0, eps)))``.  Returns a float for
    ``size=None``, else an array.
    """
    _check_eps(spec, eps)
    n = 1 if size is None else int(size)
    pts, uni, tab = spec._rates(eps, spec.c)
    rates = np.concatenate((pts, [uni, tab]))
    lam = float(rates.sum())
    counts = rng.poisson(lam, n)
    total = int(counts.sum())
    values = np.empty(total)
    if total:
        comp = rng.choice(rates.size, size=total, p=rates / lam)
        npts = pts.size
        for i, v in enumerate(spec.alpha.points):
            values[comp == i] = v
        sel = comp == npts
        k = int(sel.sum())
        if k:
            values[sel] = np.exp(math.log(eps) + rng.random(k) * math.log(spec.c / eps))
        sel = comp == npts + 1
        k = int(sel.sum())
        if k:
            values[sel] = _sample_table(spec, rng, k, eps, spec.c, log_uniform=True)
    owner = np.repeat(np.arange(n), counts)
    x = spec.a * spec.alpha.atom0 + np.bincount(owner, weights=values, minlength=n)
    return float(x[0]) if size is None else x


def sample_alpha(spec: LevySpec, rng: np.random.Generator, size: int, eps: float | None = None):
    """Draw D ~ alpha, or alpha conditioned to avoid (0, eps) when eps is given."""
    al = spec.alpha
    lo = 0.0 if eps is None else eps
    w_pts = np.array([w if v >= lo else 0.0 for v, w in zip(al.points, al.weights)])
    w_uni = al.uniform * (spec.c - lo) / spec.c
    w_tab = al.table_weight * (spec._table_mass(lo, spec.c) if al.table_weight else 0.0)
    weights = np.concatenate(([al.atom0], w_pts, [w_uni, w_tab]))
    comp = rng.choice(weights.size, size=size, p=weights / weights.sum())
    out = np.zeros(size)
    for i, v in enumerate(al.points):
        out[comp == i + 1] = v
    sel = comp == w_pts.size + 1
    out[sel] = lo + rng.random(int(sel.sum())) * (spec.c - lo)
    sel = comp == w_pts.size + 2
    if sel.any():
        out[sel] = _sample_table(spec, rng, int(sel.sum()), lo, spec.c, log_uniform=False)
    return out


@dataclass(frozen=True)
class AdditiveCheck:
    """Distance between the law of X + D and the size-biased law of X."""

    n: int
    eps: float
    distance: float
    std_error: float
    truncation_bias: float
    exact_distance: float | None = None

    @property
    def within(self) -> bool:
        return self.distance <= 3.0 * self.std_error


def _ks_weighted(a_vals, b_vals, b_weights):
    """sup_t |ecdf(a)(t) - weighted ecdf(b)(t)|."""
    pts = np.union1d(a_vals, b_vals)
    fa = np.searchsorted(np.sort(a_vals), pts, side="right") / a_vals.size
    order = np.argsort(b_vals)
    cum = np.cumsum(b_weights[order])
    idx = np.searchsorted(b_vals[order], pts, side="right")
    fb = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    return float(np.max(np.abs(fa - fb)))


def size_bias_additive_check(spec: LevySpec, eps: float, n: int, rng: np.random.Generator) -> AdditiveCheck:
    """Compare X + D with the x-reweighted empirical law of X.

    X is the truncated sampler; D is drawn from alpha with (0, eps) removed,
    which is exactly the additive size-bias partner of the truncated law.
    The distance is a two-sample KS statistic and ``std_error`` its scale
    sqrt(1/n + sum w_i^2).  For a single point mass alpha the exact laws
    are compared as well (X + v against the size-biased scaled Poisson).
    """
    x = sample_levy(spec, eps, rng, n)
    d = sample_alpha(spec, rng, n, eps=eps)
    total = x.sum()
    if not total > 0:
        raise DomainError("all samples are zero; cannot size-bias the empirical law")
    w = x / total
    dist = _ks_weighted(x + d, x, w)
    se = math.sqrt(1.0 / n + float(np.sum(w * w)))
    exact = None
    law = spec.exact_law()
    if law is not None:
        v, a0 = spec.alpha.points[0], spec.alpha.atom0
        shifted = dist_mod.finite(np.concatenate((law.support, law.support + v)),
                                  np.concatenate((a0 * law.pmf, (1 - a0) * law.pmf)))
        biased = dist_mod.size_bias(law)
        pts = np.union1d(shifted.support, biased.support)
        exact = float(np.max(np.abs(shifted.cdf(pts) - biased.cdf(pts))))
    return AdditiveCheck(n, eps, dist, se, spec.truncation_bias(eps), exact)


def universal_tail_ratio(x: float, table: DickmanTable | None = None) -> float:
    """log G_D(x) / (x log x) for the Dickman law, from quadrature of exp(-gamma) rho."""
    table = table or default_table()
    if not 1.0 < x <= table.u_max:
        raise DomainError(f"x must lie in (1, {table.u_max}]")
    return float(table.log_tail(x)) / (x * math.log(x))


@dataclass(frozen=True)
class TailSandwich:
    """Finite-x bounds on log G(x) for a Levy([0, c]) law.

    ``lower`` is log P(Z >= k) for Z ~ Poisson(gamma([c - eps, c])) and
    k = ceil(x / (c - eps)); ``lower_elementary`` drops it further to
    log P(Z = k).  ``upper`` is the product bound.
    """

    x: float
    eps: float
    k: int
    rate: float
    lower: float
    lower_elementary: float
    upper: float


def poisson_log_sf(k: int, lam: float) -> float:
    """log P(Z >= k) for Z ~ Poisson(lam), accurate far below double range."""
    if k <= 0:
        return 0.0
    direct = float(stats.poisson.logsf(k - 1, lam))
    if direct > -700.0:
        return direct
    # k is far above lam here, so the terms fall off geometrically
    j = np.arange(k, k + 400)
    return float(special.logsumexp(stats.poisson.logpmf(j, lam)))


def tail_sandwich(spec: LevySpec, x: float, eps: float) -> TailSandwich:
    """Bracket log G(x): arrivals in [c - eps, c] alone force X >= (c - eps) Z."""
    if not 0 < eps < spec.c:
        raise DomainError("need 0 < eps < c")
    if x < spec.a:
        raise DomainError("tail_sandwich needs x >= a")
    lam = spec.levy_mass(spec.c - eps, spec.c)
    k = math.ceil(x / (spec.c - eps))
    if lam > 0:
        lower = poisson_log_sf(k, lam)
        elem = -lam + k * math.log(lam) - math.lgamma(k + 1)
    else:
        lower = elem = -math.inf
    upper = product_upper(x, spec.params).log_p
    return TailSandwich(x, eps, k, lam, lower, elem, upper)
