"""Parser for the distribution mini-language used by the CLI and the harness.

Grammar (``family:key=value,...``)::

    poisson:mean=A
    binomial:n=N,p=P
    bernoulli-sum:p=P1,P2,...        (``P*K`` repeats P K times; fractions allowed)
    uniform:b=B                      single uniform on [0, B], B <= 4
    uniform-sum:b=B,m=M              sum of M independent uniform[0, B]
    point:x=V
    mix:(w1,v1),(w2,v2),...          finite law with atoms v_i, weights w_i
    collisions:b=B,n=N               b balls in n bins, b - occupied bins
    levy:a=A,c=C,alpha=ALPHA
    dickman                          levy:a=1,c=1,alpha=uniform

    ALPHA := TERM | atom0:W+TERM
    TERM  := uniform | point:V | mix:(w1,v1),(w2,v2),...

With ``atom0:W`` the remaining term carries weight 1 - W.  Errors raise
:class:`SpecError` whose ``token`` is the offending piece of text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import distributions as dm
from . import levy as lv
from . import montecarlo as mc
from .errors import DomainError, SpecError


@dataclass(frozen=True)
class Model:
    """A parsed spec: a sampler plus whatever is known exactly.

    ``c`` is the default coupling bound used for the tail bounds and
    ``hoeffding_n`` is set when the law is a sum of that many variables in
    [0, 1].
    """

    text: str
    family: str
    mean: float
    c: float
    sampler: Callable
    exact: dm.DiscreteDistribution | None = None
    variance: float | None = None
    cdf: dm.CdfSpec | None = None
    biased_cdf: dm.CdfSpec | None = None
    hoeffding_n: int | None = None
    levy: lv.LevySpec | None = None
    eps: float | None = None
    support_min: float = 0.0

    def sample(self, rng: np.random.Generator, size=None):
        return self.sampler(rng, size)

    @property
    def exact_mean(self) -> float:
        """Mean of the law itself (a truncated Levy sampler falls short by ``truncation_bias``)."""
        return self.mean

    @property
    def truncation_bias(self) -> float | None:
        if self.levy is None or self.exact is not None:
            return None
        return self.levy.truncation_bias(self.eps)


# -- tokens -----------------------------------------------------------------


def _number(tok: str) -> float:
    tok = tok.strip()
    try:
        return float(tok)
    except ValueError:
        pass
    try:
        return float(Fraction(tok))
    except (ValueError, ZeroDivisionError):
        raise SpecError(f"not a number: {tok!r}", tok) from None


def _integer(tok: str) -> int:
    v = _number(tok)
    if v != int(v):
        raise SpecError(f"expected an integer: {tok!r}", tok)
    return int(v)


def _number_list(tok: str) -> list[float]:
    out = []
    for piece in tok.split(","):
        if "*" in piece:
            val, _, rep = piece.partition("*")
            out.extend([_number(val)] * _integer(rep))
        else:
            out.append(_number(piece))
    return out


def _split_top(body: str) -> list[str]:
    """Split on commas outside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise SpecError("unbalanced ')'", body)
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise SpecError("unbalanced '('", body)
    parts.append("".join(cur))
    return parts


def _keyvals(body: str, allowed: tuple[str, ...], required: tuple[str, ...]) -> dict[str, str]:
    """Parse ``k=v,...``; pieces without '=' continue the previous value (lists)."""
    out: dict[str, str] = {}
    last = None
    for piece in _split_top(body):
        if "=" in piece:
            key, _, val = piece.partition("=")
            key = key.strip()
            if key not in allowed:
                raise SpecError(f"unknown key {key!r} (expected one of {', '.join(allowed)})", key)
            if key in out:
                raise SpecError(f"duplicate key {key!r}", key)
            out[key] = val.strip()
            last = key
        elif last is not None and piece.strip():
            out[last] += "," + piece.strip()
        else:
            raise SpecError(f"expected key=value, got {piece!r}", piece)
    for key in required:
        if key not in out or out[key] == "":
            raise SpecError(f"missing key {key!r}", key)
    return out


_PAIR = re.compile(r"\(\s*([^(),]+?)\s*,\s*([^(),]+?)\s*\)")


def _pairs(body: str) -> tuple[list[float], list[float]]:
    pieces = [p.strip() for p in _split_top(body)]
    ws, vs = [], []
    for p in pieces:
        m = _PAIR.fullmatch(p)
        if not m:
            raise SpecError(f"expected (weight,value), got {p!r}", p)
        ws.append(_number(m.group(1)))
        vs.append(_number(m.group(2)))
    if any(w < 0 for w in ws) or not sum(ws) > 0:
        raise SpecError("mixture weights must be nonnegative with positive total", body)
    return ws, vs


# -- families ---------------------------------------------------------------


def _discrete_model(text, family, dist, c=1.0, hoeffding_n=None):
    return Model(text, family, dist.mean, c, dist.sample, exact=dist, variance=dist.variance,
                 cdf=dm.CdfSpec.from_discrete(dist),
                 biased_cdf=dm.CdfSpec.from_discrete(dm.size_bias(dist)) if dist.mean > 0 else None,
                 hoeffding_n=hoeffding_n, support_min=float(dist.support[0]))


def _poisson(text, body):
    kv = _keyvals(body, ("mean",), ("mean",))
    a = _number(kv["mean"])
    if not a > 0:
        raise SpecError("poisson mean must be positive", kv["mean"])
    return _discrete_model(text, "poisson", dm.poisson(a))


def _probs(tok):
    ps = _number_list(tok)
    bad = [p for p in ps if not 0 <= p <= 1]
    if bad:
        raise SpecError(f"probability outside [0, 1]: {bad[0]!r}", tok)
    return ps


def _bernoulli_sum(text, body):
    kv = _keyvals(body, ("p",), ("p",))
    ps = _probs(kv["p"])
    return _discrete_model(text, "bernoulli-sum", dm.bernoulli_sum(ps), hoeffding_n=len(ps))


def _binomial(text, body):
    kv = _keyvals(body, ("n", "p"), ("n", "p"))
    n = _integer(kv["n"])
    if n < 1:
        raise SpecError("binomial n must be at least 1", kv["n"])
    (p,) = _probs(kv["p"])
    return _discrete_model(text, "binomial", dm.binomial(n, p), hoeffding_n=n)


def _uniform_b(kv):
    b = _number(kv["b"])
    if not 0 < b <= 4:
        raise SpecError("uniform b must lie in (0, 4] for a 1-bounded coupling", kv["b"])
    return b


def _uniform(text, body):
    kv = _keyvals(body, ("b",), ("b",))
    b = _uniform_b(kv)
    return Model(text, "uniform", b / 2, b / 4, lambda rng, size=None: b * rng.random(size),
                 variance=b * b / 12, cdf=dm.CdfSpec.uniform(b), biased_cdf=dm.CdfSpec.uniform_size_biased(b),
                 hoeffding_n=1 if b <= 1 else None)


def _uniform_sum(text, body):
    kv = _keyvals(body, ("b", "m"), ("b", "m"))
    b = _uniform_b(kv)
    m = _integer(kv["m"])
    if m < 1:
        raise SpecError("uniform-sum m must be at least 1", kv["m"])

    def sampler(rng, size=None):
        shape = (m,) if size is None else (int(size), m)
        s = (b * rng.random(shape)).sum(axis=-1)
        return float(s) if size is None else s

    # each summand has the quantile coupling bU -> b sqrt(U), gap <= b/4
    return Model(text, "uniform-sum", m * b / 2, b / 4, sampler, variance=m * b * b / 12,
                 hoeffding_n=m if b <= 1 else None)


def _point(text, body):
    kv = _keyvals(body, ("x",), ("x",))
    v = _number(kv["x"])
    if not v > 0:
        raise SpecError("point mass must sit at a positive value", kv["x"])
    return _discrete_model(text, "point", dm.point(v))


def _finite_c(dist):
    cert = dm.quantile_gap_analysis(dm.CdfSpec.from_discrete(dist), dm.CdfSpec.from_discrete(dm.size_bias(dist)))
    return cert.c_hi if cert.c_hi > 0 else 1.0


def _mix(text, body):
    ws, vs = _pairs(body)
    if any(v < 0 for v in vs):
        raise SpecError("mixture atoms must be nonnegative", body)
    total = math.fsum(ws)
    dist = dm.finite(vs, [w / total for w in ws], name=text)
    if not dist.mean > 0:
        raise SpecError("mixture must have a positive mean", body)
    return _discrete_model(text, "mix", dist, c=_finite_c(dist))


def _collisions(text, body):
    kv = _keyvals(body, ("b", "n"), ("b", "n"))
    b, n = _integer(kv["b"]), _integer(kv["n"])
    if b < 0:
        raise SpecError("collisions b must be nonnegative", kv["b"])
    if n < 1:
        raise SpecError("collisions n must be positive", kv["n"])
    law = mc.collisions_law(b, n)
    if not law.mean > 0:
        raise SpecError("collisions with b < 2 are identically zero", kv["b"])
    # c = 1 comes from the cited coupling for C(b, n); the mean is exact
    return Model(text, "collisions", mc.collisions_mean(b, n), 1.0,
                 lambda rng, size=None: mc.collisions_sample(b, n, rng, size),
                 exact=law, variance=law.variance, cdf=dm.CdfSpec.from_discrete(law),
                 biased_cdf=dm.CdfSpec.from_discrete(dm.size_bias(law)))


def parse_alpha(tok: str) -> lv.Alpha:
    terms = [t.strip() for t in tok.split("+")]
    atom0 = 0.0
    rest = []
    for t in terms:
        if t.startswith("atom0:"):
            atom0 = _number(t[len("atom0:"):])
            if not 0 <= atom0 < 1:
                raise SpecError("atom0 weight must lie in [0, 1)", t)
        else:
            rest.append(t)
    if len(rest) != 1:
        raise SpecError("alpha needs exactly one of uniform, point:V, mix:(w,v),...", tok)
    (t,) = rest
    w = 1.0 - atom0
    if t == "uniform":
        return lv.Alpha(atom0=atom0, uniform=w)
    if t.startswith("point:"):
        v = _number(t[len("point:"):])
        if not v > 0:
            raise SpecError("alpha point must be positive", t)
        return lv.Alpha(atom0=atom0, points=(v,), weights=(w,))
    if t.startswith("mix:"):
        ws, vs = _pairs(t[len("mix:"):])
        total = math.fsum(ws)
        pts = tuple(v for v in vs)
        wts = [w * x / total for x in ws]
        extra0 = math.fsum(x for x, v in zip(wts, pts) if v == 0)
        keep = [(v, x) for v, x in zip(pts, wts) if v != 0]
        if any(v < 0 for v, _ in keep):
            raise SpecError("alpha atoms must be nonnegative", t)
        wsum = math.fsum([atom0 + extra0] + [x for _, x in keep])
        return lv.Alpha(atom0=(atom0 + extra0) / wsum, points=tuple(v for v, _ in keep),
                        weights=tuple(x / wsum for _, x in keep))
    raise SpecError(f"unknown alpha term {t!r}", t)


def _levy(text, body, eps):
    kv = _keyvals(body, ("a", "c", "alpha"), ("a", "c", "alpha"))
    a, c = _number(kv["a"]), _number(kv["c"])
    if not a > 0:
        raise SpecError("levy a must be positive", kv["a"])
    if not c > 0:
        raise SpecError("levy c must be positive", kv["c"])
    try:
        spec = lv.LevySpec(a, c, parse_alpha(kv["alpha"]))
    except DomainError as exc:
        raise SpecError(str(exc), kv["alpha"]) from None
    return levy_model(text, spec, eps)


def levy_model(text: str, spec: lv.LevySpec, eps: float | None = None) -> Model:
    eps = lv.DEFAULT_EPS if eps is None else float(eps)
    if not 0 < eps < spec.c:
        raise SpecError(f"eps must lie in (0, c), got {eps!r}", str(eps))
    law = spec.exact_law()
    kw = {}
    if law is not None:
        kw = dict(cdf=dm.CdfSpec.from_discrete(law), biased_cdf=dm.CdfSpec.from_discrete(dm.size_bias(law)))
    return Model(text, "levy", spec.a, spec.c, lambda rng, size=None: lv.sample_levy(spec, eps, rng, size),
                 exact=law, variance=spec.variance, levy=spec, eps=eps,
                 support_min=spec.a * spec.alpha.atom0, **kw)


_FAMILIES = {
    "poisson": _poisson,
    "bernoulli-sum": _bernoulli_sum,
    "binomial": _binomial,
    "uniform": _uniform,
    "uniform-sum": _uniform_sum,
    "point": _point,
    "mix": _mix,
    "collisions": _collisions,
}


def parse_spec(text: str, eps: float | None = None) -> Model:
    """Parse a spec string into a :class:`Model`.

    ``eps`` sets the truncation of Levy samplers (default 1e-8).
    """
    if not isinstance(text, str) or not text.strip():
        raise SpecError("empty spec", text)
    text = text.strip()
    if text == "dickman":
        return levy_model(text, lv.dickman_spec(), eps)
    family, sep, body = text.partition(":")
    if family == "levy":
        return _levy(text, body, eps)
    if family not in _FAMILIES:
        raise SpecError(f"unknown family {family!r}", family)
    if not sep or not body:
        raise SpecError(f"{family} needs parameters after ':'", text)
    try:
        return _FAMILIES[family](text, body)
    except DomainError as exc:
        raise SpecError(str(exc), body) from None
