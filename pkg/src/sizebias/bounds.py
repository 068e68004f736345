"""Tail bounds for variables with a c-bounded size-bias coupling.

Every bound is returned as a :class:`LogProb`; the raw (unclamped) log is
kept on the object so bounds can be compared against each other, while
``.log``/``.value`` clamp at probability one.

Notation: ``a = E X`` and ``c`` is the coupling bound, ``Y <= X + c`` with
``Y`` distributed as the size-biased ``X``.  ``G(x) = P(X >= x)`` for
``x >= a`` and ``F(x) = P(X <= x)`` for ``0 <= x <= a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .logprob import LogProb
from .special_fn import log_gamma

__all__ = [
    "BoundParams",
    "BoundReport",
    "LogProb",
    "best_report",
    "chebyshev_lower_all",
    "chebyshev_lower_j",
    "floor_k",
    "gamma_lower",
    "gamma_upper",
    "gamma_vs_mgf_log_factor",
    "gg_lower",
    "gg_upper",
    "hoeffding_classical_upper",
    "mgf_log_bound",
    "mgf_lower",
    "mgf_upper",
    "product_lower",
    "product_upper",
]

# relative tolerance deciding which side of the mean x is on
SIDE_RTOL = 1e-12
# products are summed in chunks of this many log-factors
_CHUNK = 1 << 20
MAX_FACTORS = 10 ** 7


@dataclass(frozen=True)
class BoundParams:
    """Mean ``a`` and coupling bound ``c``; both strictly positive."""

    a: float
    c: float

    def __post_init__(self):
        for name in ("a", "c"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a finite positive number, got {v!r}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "c", float(self.c))


def floor_k(x: float, params: BoundParams) -> int:
    """Number of whole coupling steps between ``x`` and the mean."""
    return int(math.floor(abs(x - params.a) / params.c))


def _upper_side(x, params, name):
    if not math.isfinite(x) or x < params.a * (1.0 - SIDE_RTOL):
        raise DomainError(f"{name} needs x >= a (x={x!r}, a={params.a!r})")


def _lower_side(x, params, name):
    if not math.isfinite(x) or x < 0.0 or x > params.a * (1.0 + SIDE_RTOL):
        raise DomainError(f"{name} needs 0 <= x <= a (x={x!r}, a={params.a!r})")


def _log_sum(start: float, step: float, count: int, first: int, log_scale: float, sign: float) -> float:
    """sign * sum_{i=first}^{first+count-1} [log(start + i*step) - log_scale].

    Chunks are summed with numpy's pairwise summation and combined with fsum.
    """
    if count <= 0:
        return 0.0
    if count > MAX_FACTORS:
        raise DomainError(f"product has {count} factors, more than the supported {MAX_FACTORS}")
    partial = []
    for lo in range(first, first + count, _CHUNK):
        hi = min(lo + _CHUNK, first + count)
        i = np.arange(lo, hi, dtype=float)
        partial.append(float(np.sum(np.log(start + i * step) - log_scale)))
    return sign * math.fsum(partial)


def product_upper(x: float, params: BoundParams) -> LogProb:
    """prod_{0<=i<=k} a / (x - i c), the iterated one-step upper-tail bound."""
    _upper_side(x, params, "product_upper")
    k = floor_k(x, params) if x >= params.a else 0
    return LogProb(_log_sum(x, -params.c, k + 1, 0, math.log(params.a), -1.0))


def product_lower(x: float, params: BoundParams) -> LogProb:
    """prod_{0<i<=k} (x + i c) / a; the empty product is 1."""
    _lower_side(x, params, "product_lower")
    k = floor_k(x, params) if x <= params.a else 0
    return LogProb(_log_sum(x, params.c, k, 1, math.log(params.a), 1.0))


def gamma_upper(x: float, params: BoundParams) -> LogProb:
    """a'^(x'-a') Gamma(a'+1) / Gamma(x'+1) with x' = x/c, a' = a/c."""
    _upper_side(x, params, "gamma_upper")
    xs, as_ = x / params.c, params.a / params.c
    return LogProb((xs - as_) * math.log(as_) + log_gamma(as_ + 1.0) - log_gamma(xs + 1.0))


def gamma_lower(x: float, params: BoundParams) -> LogProb:
    """Gamma(a'+1) / (a'^(a'-x') Gamma(x'+1)) with x' = x/c, a' = a/c."""
    _lower_side(x, params, "gamma_lower")
    xs, as_ = x / params.c, params.a / params.c
    return LogProb(log_gamma(as_ + 1.0) - (as_ - xs) * math.log(as_) - log_gamma(xs + 1.0))


def _mgf_log(x, params):
    if x == 0.0:
        # (a/x)^(x/c) -> 1 as x -> 0+
        return -params.a / params.c
    return (x / params.c) * math.log(params.a / x) + (x - params.a) / params.c


def mgf_upper(x: float, params: BoundParams) -> LogProb:
    """(a/x)^(x/c) e^((x-a)/c): the Chernoff bound at beta = log(x/a)/c."""
    _upper_side(x, params, "mgf_upper")
    return LogProb(_mgf_log(x, params))


def mgf_lower(x: float, params: BoundParams) -> LogProb:
    """Same closed form as :func:`mgf_upper`, valid for 0 <= x <= a; e^(-a/c) at x = 0."""
    _lower_side(x, params, "mgf_lower")
    return LogProb(_mgf_log(x, params))


def gg_upper(x: float, params: BoundParams) -> LogProb:
    """exp(-(x-a)^2 / (c (a+x)))."""
    _upper_side(x, params, "gg_upper")
    return LogProb(-((x - params.a) ** 2) / (params.c * (params.a + x)))


def gg_lower(x: float, params: BoundParams) -> LogProb:
    """exp(-(x-a)^2 / (2 c a))."""
    _lower_side(x, params, "gg_lower")
    return LogProb(-((x - params.a) ** 2) / (2.0 * params.c * params.a))


def chebyshev_lower_j(x: float, j: int, params: BoundParams) -> LogProb:
    """Iterate the lower one-step bound j times, then apply one-sided Chebyshev.

    Uses Var X <= a c.  Requires x + j c <= a.
    """
    _lower_side(x, params, "chebyshev_lower_j")
    if int(j) != j or j < 0:
        raise DomainError(f"j must be a nonnegative integer, got {j!r}")
    j = int(j)
    a, c = params.a, params.c
    if x + j * c > a * (1.0 + SIDE_RTOL):
        raise DomainError(f"j={j} too large: x + j c = {x + j * c} exceeds a = {a}")
    gap = max(a - x - j * c, 0.0)
    head = math.log(a * c) - math.log(a * c + gap * gap)
    return LogProb(head + _log_sum(x, c, j, 1, math.log(a), 1.0))


def chebyshev_lower_all(x: float, params: BoundParams) -> np.ndarray:
    """Raw log l_j(x) for every admissible j = 0..k, as one array."""
    _lower_side(x, params, "chebyshev_lower_all")
    a, c = params.a, params.c
    k = floor_k(x, params) if x <= a else 0
    if k > MAX_FACTORS:
        raise DomainError(f"k={k} exceeds the supported {MAX_FACTORS}")
    j = np.arange(k + 1, dtype=float)
    gap = np.maximum(a - x - j * c, 0.0)
    head = math.log(a * c) - np.log(a * c + gap * gap)
    steps = np.log(x + j[1:] * c) - math.log(a)
    return head + np.concatenate(([0.0], np.cumsum(steps)))


def mgf_log_bound(beta: float, params: BoundParams) -> float:
    """Upper bound (a/c)(e^(beta c) - 1) on log E e^(beta X)."""
    return params.a / params.c * math.expm1(beta * params.c)


def hoeffding_classical_upper(x: float, a: float, n: float) -> LogProb:
    """Hoeffding's bound for a sum of n independent [0,1] variables with mean a.

    (a/x)^x ((n-a)/(n-x))^(n-x) for a <= x < n, its limit (a/n)^n at x = n,
    and zero beyond n.
    """
    if not (a > 0 and n > a):
        raise DomainError(f"need 0 < a < n (a={a!r}, n={n!r})")
    if not math.isfinite(x) or x < a * (1.0 - SIDE_RTOL):
        raise DomainError(f"hoeffding_classical_upper needs x >= a (x={x!r}, a={a!r})")
    x = max(x, a)
    if x > n:
        return LogProb.zero()
    if x == n:
        return LogProb(n * math.log(a / n))
    return LogProb(x * math.log(a / x) + (n - x) * math.log((n - a) / (n - x)))


def gamma_vs_mgf_log_factor(x: float, params: BoundParams) -> float:
    """log sqrt((a + c/2) / (x + c/2)).

    On the upper tail the Gamma bound is below the MGF bound times this
    factor; on the lower tail it is above it.
    """
    c = params.c
    return 0.5 * (math.log(params.a + 0.5 * c) - math.log(x + 0.5 * c))


UPPER_BOUNDS = {
    "product": product_upper,
    "gamma": gamma_upper,
    "mgf": mgf_upper,
    "gg": gg_upper,
}
LOWER_BOUNDS = {
    "product": product_lower,
    "gamma": gamma_lower,
    "mgf": mgf_lower,
    "gg": gg_lower,
}


@dataclass(frozen=True)
class BoundReport:
    """All applicable bounds at one x, raw logs kept for ordering checks."""

    x: float
    params: BoundParams
    n: float | None = None
    upper: dict = field(default_factory=dict)
    lower: dict = field(default_factory=dict)
    chebyshev: tuple = ()
    best_upper: LogProb | None = None
    best_upper_name: str | None = None
    best_lower: LogProb | None = None
    best_lower_name: str | None = None

    @property
    def best_chebyshev_j(self) -> int | None:
        if not self.chebyshev:
            return None
        return int(np.argmin(self.chebyshev))

    def to_dict(self) -> dict:
        out = {
            "x": self.x,
            "a": self.params.a,
            "c": self.params.c,
            "n": self.n,
            "upper": {k: v.log_p for k, v in self.upper.items()},
            "lower": {k: v.log_p for k, v in self.lower.items()},
            "chebyshev": list(self.chebyshev),
            "best_upper": None if self.best_upper is None else self.best_upper.log,
            "best_upper_name": self.best_upper_name,
            "best_lower": None if self.best_lower is None else self.best_lower.log,
            "best_lower_name": self.best_lower_name,
        }
        return out


def _best(entries: dict):
    # ties (e.g. product == gamma at integer steps) go to the earlier entry
    low = min(v.log_p for v in entries.values())
    slack = 1e-12 * max(1.0, abs(low)) if math.isfinite(low) else 0.0
    name = next(k for k, v in entries.items() if v.log_p <= low + slack)
    return LogProb(min(entries[name].log_p, 0.0)), name


def best_report(x: float, params: BoundParams, n: float | None = None) -> BoundReport:
    """Evaluate every bound applicable at x and pick the smallest on each side.

    Both sides are evaluated when x equals a up to SIDE_RTOL.  The
    Chebyshev-product family enters the lower minimum under the name
    ``chebyshev_j`` for its best j.  ``n`` adds the classical Hoeffding
    bound (sums of n variables in [0,1]) to the upper side.
    """
    x = float(x)
    if not math.isfinite(x) or x < 0.0:
        raise DomainError(f"x must be finite and nonnegative, got {x!r}")
    a = params.a
    upper, lower = {}, {}
    cheb = ()
    best_u = best_l = None
    name_u = name_l = None
    if x >= a * (1.0 - SIDE_RTOL):
        upper = {name: fn(x, params) for name, fn in UPPER_BOUNDS.items()}
        if n is not None:
            upper["hoeffding"] = hoeffding_classical_upper(x, a, n)
        best_u, name_u = _best(upper)
    if x <= a * (1.0 + SIDE_RTOL):
        lower = {name: fn(x, params) for name, fn in LOWER_BOUNDS.items()}
        cheb_arr = chebyshev_lower_all(x, params)
        cheb = tuple(float(v) for v in cheb_arr)
        j = int(np.argmin(cheb_arr))
        candidates = dict(lower)
        candidates[f"chebyshev_{j}"] = LogProb(cheb[j])
        best_l, name_l = _best(candidates)
    return BoundReport(x, params, n, upper, lower, cheb, best_u, name_u, best_l, name_l)
