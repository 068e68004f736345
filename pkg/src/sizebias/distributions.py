"""Exact discrete laws, size biasing, and quantile couplings.

Couplings are always built through the quantile transform on one shared
uniform variable: X = Q_X(U), Y = Q_Y(U), with Q the generalized inverse
``Q(u) = inf{t : F(t) >= u}``.  Gap statistics of ``Q_Y - Q_X`` over u
decide which kinds of coupling exist.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from .errors import DomainError, PremiseError

CDF_TOL = 1e-10
POISSON_TAIL = 1e-14
DEFAULT_GRID = 4096


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite law on a strictly ascending nonnegative support.

    ``truncation`` records the last support point kept when an
    infinite-support law was cut off (None for genuinely finite laws).
    """

    support: np.ndarray
    pmf: np.ndarray
    truncation: float | None = None
    name: str = ""

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        p = np.asarray(self.pmf, dtype=float)
        if s.ndim != 1 or s.shape != p.shape or s.size == 0:
            raise DomainError("support and pmf must be matching nonempty 1-d arrays")
        if np.any(~np.isfinite(s)) or np.any(s < 0):
            raise DomainError("support must be finite and nonnegative")
        if np.any(np.diff(s) <= 0):
            raise DomainError("support must be strictly ascending")
        if np.any(~(p >= 0)):
            raise DomainError("probabilities must be nonnegative")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {math.fsum(p)!r}, not 1")
        s.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "pmf", p)

    @property
    def mean(self) -> float:
        return math.fsum(self.support * self.pmf)

    @property
    def second_moment(self) -> float:
        return math.fsum(self.support ** 2 * self.pmf)

    @property
    def variance(self) -> float:
        m = self.mean
        return math.fsum((self.support - m) ** 2 * self.pmf)

    @property
    def is_integer_valued(self) -> bool:
        return bool(np.all(self.support == np.round(self.support)))

    @property
    def levels(self) -> np.ndarray:
        """Cumulative probabilities F(s_k), i.e. where the quantile function jumps."""
        return np.cumsum(self.pmf)

    def cdf(self, t):
        """P(X <= t)."""
        idx = np.searchsorted(self.support, t, side="right")
        cum = np.concatenate(([0.0], np.cumsum(self.pmf)))
        return cum[idx]

    def lower_tail(self, x: float) -> float:
        """F(x) = P(X <= x)."""
        return math.fsum(self.pmf[self.support <= x])

    def upper_tail(self, x: float) -> float:
        """G(x) = P(X >= x), summed from the top for relative accuracy."""
        return math.fsum(self.pmf[self.support >= x])

    def quantile(self, u):
        """inf{t : F(t) >= u} for u in (0, 1]."""
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self.levels, u - 1e-13, side="left")
        out = self.support[np.minimum(idx, self.support.size - 1)]
        return out if out.ndim else float(out)

    def log_mgf(self, beta: float) -> float:
        """log E exp(beta X) by a max-shifted sum."""
        keep = self.pmf > 0
        z = beta * self.support[keep] + np.log(self.pmf[keep])
        top = z.max()
        return float(top + math.log(math.fsum(np.exp(z - top))))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.choice(self.support, size=size, p=self.pmf)

    def total_variation(self, other: "DiscreteDistribution") -> float:
        pts = np.union1d(self.support, other.support)
        p = np.zeros(pts.size)
        q = np.zeros(pts.size)
        p[np.searchsorted(pts, self.support)] = self.pmf
        q[np.searchsorted(pts, other.support)] = other.pmf
        return 0.5 * math.fsum(np.abs(p - q))


def finite(values: Sequence[float], weights: Sequence[float], name: str = "") -> DiscreteDistribution:
    """Finite law from (possibly repeated, unsorted) atoms; weights are normalized."""
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.shape != w.shape or v.size == 0:
        raise DomainError("values and weights must match and be nonempty")
    if np.any(w < 0) or w.sum() <= 0:
        raise DomainError("weights must be nonnegative with positive total")
    pts, inv = np.unique(v, return_inverse=True)
    mass = np.bincount(inv, weights=w, minlength=pts.size)
    keep = mass > 0
    return DiscreteDistribution(pts[keep], mass[keep] / mass.sum(), name=name)


def point(x: float) -> DiscreteDistribution:
    return DiscreteDistribution(np.array([float(x)]), np.array([1.0]), name=f"point:x={x}")


def poisson(mean: float, tail_mass: float = POISSON_TAIL) -> DiscreteDistribution:
    """Poisson law cut where the remaining upper tail is below tail_mass, renormalized."""
    if not mean > 0:
        raise DomainError("Poisson mean must be positive")
    if not 0 < tail_mass < 1:
        raise DomainError("tail_mass must lie in (0, 1)")
    # isf is NaN for very small masses; search on logsf instead
    target = math.log(tail_mass)
    top = int(mean + 10 * math.sqrt(mean) + 10)
    while stats.poisson.logsf(top, mean) > target:
        top *= 2
    lo = 0
    while lo < top:
        mid = (lo + top) // 2
        if stats.poisson.logsf(mid, mean) <= target:
            top = mid
        else:
            lo = mid + 1
    top += 1
    k = np.arange(top + 1)
    p = stats.poisson.pmf(k, mean)
    keep = p > 0
    return DiscreteDistribution(k[keep].astype(float), p[keep] / math.fsum(p[keep]),
                                truncation=float(k[keep][-1]), name=f"poisson:mean={mean}")


def binomial(n: int, p: float) -> DiscreteDistribution:
    if int(n) != n or n < 1 or not 0 <= p <= 1:
        raise DomainError("binomial needs integer n >= 1 and p in [0, 1]")
    k = np.arange(int(n) + 1)
    pm = stats.binom.pmf(k, int(n), p)
    keep = pm > 0
    return DiscreteDistribution(k[keep].astype(float), pm[keep] / math.fsum(pm[keep]),
                                name=f"binomial:n={n},p={p}")


def bernoulli_sum(ps: Sequence[float]) -> DiscreteDistribution:
    """Exact law of a sum of independent Bernoulli(p_i), by convolution."""
    ps = [float(p) for p in ps]
    if not ps or any(not 0 <= p <= 1 for p in ps):
        raise DomainError("bernoulli-sum needs at least one p in [0, 1]")
    pm = np.array([1.0])
    for p in ps:
        pm = np.convolve(pm, [1.0 - p, p])
    k = np.arange(pm.size, dtype=float)
    keep = pm > 0
    return DiscreteDistribution(k[keep], pm[keep] / math.fsum(pm[keep]),
                                name="bernoulli-sum:p=" + ",".join(repr(p) for p in ps))


def size_bias(dist: DiscreteDistribution) -> DiscreteDistribution:
    """Law reweighted by x / E X (support restricted to x > 0)."""
    a = dist.mean
    if not a > 0:
        raise DomainError("size biasing needs a positive mean")
    keep = dist.support > 0
    w = dist.support[keep] * dist.pmf[keep] / a
    keep2 = w > 0
    w = w[keep2]
    return DiscreteDistribution(dist.support[keep][keep2], w / math.fsum(w),
                                truncation=dist.truncation, name=f"sizebias({dist.name})")


def conditioned_positive(dist: DiscreteDistribution) -> DiscreteDistribution:
    """Law of X given X > 0."""
    keep = (dist.support > 0) & (dist.pmf > 0)
    mass = math.fsum(dist.pmf[keep])
    if mass <= 0:
        raise DomainError("P(X > 0) = 0; conditioning is undefined")
    return DiscreteDistribution(dist.support[keep], dist.pmf[keep] / mass,
                                truncation=dist.truncation, name=f"positive({dist.name})")


# ---------------------------------------------------------------------------
# CDFs and quantile couplings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CdfSpec:
    """A right-continuous CDF with its generalized inverse.

    ``atoms`` lists the jump locations (empty for continuous laws) and
    ``levels`` the CDF values there, where the quantile function jumps.
    ``lower``/``upper`` bound the support and set where test grids go.
    """

    cdf: Callable
    quantile: Callable
    lower: float
    upper: float
    atoms: np.ndarray = field(default_factory=lambda: np.empty(0))
    name: str = ""
    discrete: bool = False

    @property
    def levels(self) -> np.ndarray:
        if self.atoms.size == 0:
            return np.empty(0)
        return np.asarray(self.cdf(self.atoms), dtype=float)

    @classmethod
    def from_discrete(cls, dist: DiscreteDistribution) -> "CdfSpec":
        return cls(dist.cdf, dist.quantile, float(dist.support[0]), float(dist.support[-1]),
                   dist.support, dist.name, discrete=True)

    @classmethod
    def closed_form(cls, cdf, quantile, lower, upper, name="") -> "CdfSpec":
        return cls(cdf, quantile, float(lower), float(upper), np.empty(0), name)

    @classmethod
    def uniform(cls, b: float = 1.0) -> "CdfSpec":
        if not b > 0:
            raise DomainError("uniform needs b > 0")
        return cls.closed_form(lambda t: np.clip(np.asarray(t, dtype=float) / b, 0.0, 1.0),
                               lambda u: b * np.asarray(u, dtype=float), 0.0, b, f"uniform:b={b}")

    @classmethod
    def uniform_size_biased(cls, b: float = 1.0) -> "CdfSpec":
        """Size-biased uniform(0, b): density 2t/b^2, F(t) = (t/b)^2."""
        if not b > 0:
            raise DomainError("uniform needs b > 0")
        return cls.closed_form(lambda t: np.clip(np.asarray(t, dtype=float) / b, 0.0, 1.0) ** 2,
                               lambda u: b * np.sqrt(np.asarray(u, dtype=float)), 0.0, b,
                               f"sizebias(uniform:b={b})")


@dataclass(frozen=True)
class CouplingCertificate:
    """Outcome of a quantile-gap analysis between X and Y.

    ``c_lo`` is the smallest b and ``c_hi`` the smallest c with
    ``X - b <= Y <= X + c`` under the quantile coupling.  ``u`` and ``gaps``
    are the witness points and the value of ``Q_Y(u) - Q_X(u)`` there.
    """

    kind: str
    c_lo: float
    c_hi: float
    u: np.ndarray = field(repr=False)
    gaps: np.ndarray = field(repr=False)
    argmax_u: float = math.nan
    argmin_u: float = math.nan
    c: float | None = None

    @property
    def monotone(self) -> bool:
        return self.c_lo <= CDF_TOL

    @property
    def gap_values(self) -> np.ndarray:
        """Distinct gap values, rounded to 9 decimals."""
        return np.unique(np.round(self.gaps, 9)) + 0.0

    def within(self, b: float, c: float, tol: float = CDF_TOL) -> bool:
        """Whether X - b <= Y <= X + c on every witness point."""
        return self.c_lo <= b + tol and self.c_hi <= c + tol

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "c_lo": self.c_lo,
            "c_hi": self.c_hi,
            "argmax_u": self.argmax_u,
            "argmin_u": self.argmin_u,
            "c": self.c,
            "gap_values": [float(g) for g in self.gap_values[:64]],
            "n_witness": int(self.u.size),
        }


def _classify(c_lo, c_hi, c, tol=CDF_TOL):
    monotone = c_lo <= tol
    if c is None:
        return "c-bounded-monotone" if monotone else "c-bounded"
    if monotone and c_hi <= c + tol:
        return "c-bounded-monotone"
    if monotone:
        return "monotone"
    if max(c_lo, c_hi) <= c + tol:
        return "c-bounded"
    return "infeasible"


def _witness_points(F_X: CdfSpec, F_Y: CdfSpec, grid_size: int, tol: float) -> np.ndarray:
    """Midpoints of the pieces on which both quantile functions are constant or smooth."""
    edges = [np.linspace(0.0, 1.0, grid_size + 1), F_X.levels, F_Y.levels]
    cuts = np.unique(np.clip(np.concatenate(edges), 0.0, 1.0))
    # merge cut points closer than tol: rounding noise between equal levels
    kept = [cuts[0]]
    for v in cuts[1:]:
        if v - kept[-1] > tol:
            kept.append(v)
    kept = np.asarray(kept)
    if kept[-1] < 1.0:
        kept = np.append(kept, 1.0)
    mids = 0.5 * (kept[:-1] + kept[1:])
    if F_X.discrete or F_Y.discrete:
        # cut points are piece boundaries; a truncated law misplaces u = 1
        return mids
    return np.union1d(mids, kept)


def quantile_gap_analysis(F_X: CdfSpec, F_Y: CdfSpec, grid_size: int = DEFAULT_GRID,
                          c: float | None = None, tol: float = CDF_TOL) -> CouplingCertificate:
    """Sup and inf of ``Q_Y(u) - Q_X(u)`` over u in (0, 1).

    Step CDFs are handled exactly: the gap is constant between consecutive
    CDF levels, and one point per piece is evaluated.  For closed-form CDFs
    a uniform refinement of ``grid_size`` cells is used and the extreme
    cells are polished with a bounded scalar search; a gap that oscillates
    inside one cell can still be missed, so use a finer grid for such laws.
    """
    if grid_size < 2:
        raise DomainError("grid_size must be at least 2")
    for F in (F_X, F_Y):
        probe = np.asarray(F.cdf(np.array([F.lower - 1.0, F.upper])), dtype=float)
        if probe[0] > tol or abs(probe[1] - 1.0) > 1e-9:
            raise DomainError(f"{F.name or 'cdf'} is not a valid CDF on [{F.lower}, {F.upper}]")
    u = _witness_points(F_X, F_Y, grid_size, tol)
    gaps = np.asarray(F_Y.quantile(u), dtype=float) - np.asarray(F_X.quantile(u), dtype=float)
    if np.any(np.diff(np.asarray(F_X.quantile(u))) < -tol) or np.any(np.diff(np.asarray(F_Y.quantile(u))) < -tol):
        raise DomainError("quantile function is not nondecreasing; CDF is invalid")
    i_max, i_min = int(np.argmax(gaps)), int(np.argmin(gaps))
    g_max, g_min = float(gaps[i_max]), float(gaps[i_min])
    u_max, u_min = float(u[i_max]), float(u[i_min])
    if not (F_X.discrete and F_Y.discrete):
        g_max, u_max = _polish(F_X, F_Y, u, i_max, g_max, u_max, sign=-1.0)
        g_min, u_min = _polish(F_X, F_Y, u, i_min, g_min, u_min, sign=1.0)
    c_hi, c_lo = g_max + 0.0, -g_min + 0.0
    return CouplingCertificate(_classify(c_lo, c_hi, c, tol), c_lo, c_hi, u, gaps, u_max, u_min, c)


def _polish(F_X, F_Y, u, i, g, at, sign):
    lo = u[max(i - 1, 0)]
    hi = u[min(i + 1, u.size - 1)]
    if hi <= lo:
        return g, at

    def f(v):
        return sign * float(F_Y.quantile(v) - F_X.quantile(v))

    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    val = sign * res.fun
    if (sign < 0 and val > g) or (sign > 0 and val < g):
        return float(val), float(res.x)
    return g, at


def cdf_sandwich_holds(F_X: CdfSpec, F_Y: CdfSpec, b: float, c: float,
                       grid_size: int = DEFAULT_GRID, tol: float = CDF_TOL) -> bool:
    """Check F_Y(t - b) <= F_X(t) <= F_Y(t + c) for all t.

    For step CDFs both differences are right-continuous step functions that
    change only at atoms of X or shifted atoms of Y, so checking those
    points is exhaustive.  Closed-form CDFs add a uniform grid.
    """
    pts = [F_X.atoms, F_Y.atoms + b, F_Y.atoms - c]
    if not (F_X.discrete and F_Y.discrete):
        lo = min(F_X.lower, F_Y.lower) - abs(b) - abs(c)
        hi = max(F_X.upper, F_Y.upper) + abs(b) + abs(c)
        pts.append(np.linspace(lo, hi, 4 * grid_size + 1))
    t = np.unique(np.concatenate(pts))
    fx = np.asarray(F_X.cdf(t), dtype=float)
    left = np.asarray(F_Y.cdf(t - b), dtype=float) <= fx + tol
    right = fx <= np.asarray(F_Y.cdf(t + c), dtype=float) + tol
    return bool(np.all(left) and np.all(right))


def dominates(F_low: CdfSpec, F_high: CdfSpec, grid_size: int = DEFAULT_GRID,
              tol: float = CDF_TOL) -> tuple[bool, float]:
    """Whether F_low(t) >= F_high(t) for all t; returns (ok, worst violation point)."""
    pts = [F_low.atoms, F_high.atoms]
    if not (F_low.discrete and F_high.discrete):
        pts.append(np.linspace(min(F_low.lower, F_high.lower), max(F_low.upper, F_high.upper),
                               grid_size + 1))
    t = np.unique(np.concatenate(pts))
    diff = np.asarray(F_high.cdf(t), dtype=float) - np.asarray(F_low.cdf(t), dtype=float)
    i = int(np.argmax(diff))
    return bool(diff[i] <= tol), float(t[i])


def sandwich_coupling(F_X: CdfSpec, F_Y: CdfSpec, F_Z: CdfSpec, c: float,
                      grid_size: int = DEFAULT_GRID) -> CouplingCertificate:
    """If F_Z <= F_Y <= F_X and X, Z have a c-bounded coupling, certify X, Y.

    Raises :class:`PremiseError` naming the premise that fails.  The
    returned certificate is for the quantile coupling of X and Y.
    """
    if not c > 0:
        raise DomainError("c must be positive")
    ok, t = dominates(F_Y, F_Z, grid_size)
    if not ok:
        raise PremiseError("F_Z <= F_Y", f"violated at t={t!r}")
    ok, t = dominates(F_X, F_Y, grid_size)
    if not ok:
        raise PremiseError("F_Y <= F_X", f"violated at t={t!r}")
    xz = quantile_gap_analysis(F_X, F_Z, grid_size, c)
    if max(xz.c_lo, xz.c_hi) > c + CDF_TOL:
        raise PremiseError("c-bounded coupling of X and Z",
                           f"quantile gaps span [{-xz.c_lo}, {xz.c_hi}], outside [-{c}, {c}]")
    return quantile_gap_analysis(F_X, F_Y, grid_size, c)


def conditioned_nonzero_coupling(dist: DiscreteDistribution) -> CouplingCertificate:
    """Quantile coupling of X with X | X > 0 for integer-valued X.

    The 1-bounded size-bias premise is checked on the exact law first; the
    sandwich argument then gives ``Y - X`` in {0, 1}, which the returned
    certificate's ``gap_values`` exhibit.
    """
    if not dist.is_integer_valued:
        raise DomainError("conditioned_nonzero_coupling needs an integer-valued law")
    positive = conditioned_positive(dist)
    F_X = CdfSpec.from_discrete(dist)
    sb = quantile_gap_analysis(F_X, CdfSpec.from_discrete(size_bias(dist)), c=1.0)
    if sb.c_hi > 1.0 + CDF_TOL:
        raise PremiseError("1-bounded size-bias coupling", f"size-bias quantile gap reaches {sb.c_hi}")
    return sandwich_coupling(F_X, CdfSpec.from_discrete(positive),
                             CdfSpec.from_discrete(size_bias(dist)), 1.0)


# ---------------------------------------------------------------------------
# Sum coupling: Y = X - X_I + Y_I with I chosen proportionally to E X_i
# ---------------------------------------------------------------------------


class BernoulliComponent:
    """X ~ Bernoulli(p) paired with its size-biased version, which is always 1."""

    def __init__(self, p: float):
        if not 0 <= p <= 1:
            raise DomainError("p must lie in [0, 1]")
        self.p = float(p)
        self.mean = self.p

    def sample_pair(self, rng, size=None):
        x = np.asarray(rng.random(size) < self.p, dtype=float)
        return x, np.ones_like(x)

    def joint_law(self):
        return [((0.0, 1.0), 1.0 - self.p), ((1.0, 1.0), self.p)]


class UniformComponent:
    """X = b U paired with Y = b sqrt(U); Y - X <= b/4, so 1-bounded when b <= 4."""

    def __init__(self, b: float):
        if not 0 < b <= 4:
            raise DomainError("uniform component needs 0 < b <= 4")
        self.b = float(b)
        self.mean = self.b / 2

    def sample_pair(self, rng, size=None):
        u = rng.random(size)
        return self.b * u, self.b * np.sqrt(u)


class DiscreteComponent:
    """Quantile coupling of a finite law with its size-biased law."""

    def __init__(self, dist: DiscreteDistribution):
        self.dist = dist
        self.biased = size_bias(dist)
        self.mean = dist.mean
        cert = quantile_gap_analysis(CdfSpec.from_discrete(dist), CdfSpec.from_discrete(self.biased))
        if cert.c_hi > 1.0 + CDF_TOL:
            raise PremiseError("1-bounded size-bias coupling", f"quantile gap reaches {cert.c_hi}")

    def sample_pair(self, rng, size=None):
        u = 1.0 - rng.random(size)  # in (0, 1]
        return self.dist.quantile(u), self.biased.quantile(u)

    def joint_law(self):
        levels = np.unique(np.concatenate(([0.0], self.dist.levels, self.biased.levels)))
        levels = levels[levels <= 1.0]
        mids = 0.5 * (levels[:-1] + levels[1:])
        widths = np.diff(levels)
        xs, ys = self.dist.quantile(mids), self.biased.quantile(mids)
        return [((float(x), float(y)), float(w)) for x, y, w in zip(xs, ys, widths) if w > 0]


def _choose_index(means, rng, size):
    w = np.asarray(means, dtype=float)
    total = w.sum()
    if not total > 0:
        raise DomainError("sum coupling needs a positive total mean")
    return rng.choice(w.size, size=size, p=w / total)


def sum_coupling_sample(components: Sequence, rng: np.random.Generator, size=None):
    """One draw (or ``size`` draws) of (X, Y) with X = sum X_i, Y = X - X_I + Y_I.

    Each component must expose ``mean`` and ``sample_pair(rng, size)``
    returning a coupled (X_i, Y_i) with Y_i <= X_i + 1.
    """
    if not components:
        raise DomainError("need at least one component")
    pairs = [comp.sample_pair(rng, size) for comp in components]
    xs = np.array([np.asarray(p[0], dtype=float) for p in pairs])
    ys = np.array([np.asarray(p[1], dtype=float) for p in pairs])
    if np.any(ys > xs + 1.0 + 1e-12):
        raise PremiseError("Y_i <= X_i + 1", "a component produced a pair with Y_i > X_i + 1")
    idx = _choose_index([comp.mean for comp in components], rng, size)
    x = xs.sum(axis=0)
    if size is None:
        y = x - xs[idx] + ys[idx]
        return float(x), float(y)
    cols = np.arange(xs.shape[1])
    y = x - xs[idx, cols] + ys[idx, cols]
    return x, y


def sum_coupling_law(components: Sequence) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    """Exact laws of X and of the constructed Y, by enumerating every joint outcome.

    Components must provide ``joint_law()``: a list of ((x_i, y_i), prob).
    The cost is the product of the component outcome counts times their
    number, so this is for small systems only.
    """
    laws = [comp.joint_law() for comp in components]
    means = np.array([comp.mean for comp in components], dtype=float)
    total = means.sum()
    if not total > 0:
        raise DomainError("sum coupling needs a positive total mean")
    choose = means / total
    x_vals, x_w, y_vals, y_w = [], [], [], []
    for outcome in itertools.product(*laws):
        pr = math.prod(o[1] for o in outcome)
        if pr == 0.0:
            continue
        x = sum(o[0][0] for o in outcome)
        x_vals.append(x)
        x_w.append(pr)
        for i, o in enumerate(outcome):
            if choose[i] > 0:
                y_vals.append(x - o[0][0] + o[0][1])
                y_w.append(pr * choose[i])
    return finite(x_vals, x_w), finite(y_vals, y_w)
