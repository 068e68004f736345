"""Log-Gamma and the Dickman function.

The Dickman function rho is the continuous solution of

    u rho'(u) = -rho(u - 1)   for u > 1,      rho(u) = 1 on [0, 1].

It is tabulated on a uniform grid by marching the integral form
``u rho(u) = int_{u-1}^{u} rho(v) dv`` one grid point at a time.  Values are
stored as logs: rho(u) decays like u**-u and leaves double range for
moderately large u.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .logprob import LogProb

EULER_GAMMA = float(np.euler_gamma)
DEFAULT_GRID_STEP = 2.0 ** -8
DEFAULT_U_MAX = 64.0

# 4-point Gauss-Legendre nodes/weights on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for ``x > 0``."""
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"log_gamma requires a finite x > 0, got {x!r}")
    return math.lgamma(x)


@dataclass(frozen=True)
class DickmanTable:
    """Immutable table of log rho on the grid ``0, h, 2h, ..., u_max``.

    ``1/grid_step`` must be an integer so that every integer (where rho has
    derivative discontinuities) is a grid point.
    """

    grid_step: float
    u_max: float
    log_values: np.ndarray
    _dlog_right: np.ndarray = field(repr=False, compare=False)
    _dlog_left: np.ndarray = field(repr=False, compare=False)
    _log_tail: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def build(cls, grid_step: float = DEFAULT_GRID_STEP, u_max: float = DEFAULT_U_MAX) -> "DickmanTable":
        h = float(grid_step)
        if not h > 0:
            raise DomainError("grid_step must be positive")
        per_unit = int(round(1.0 / h))
        if per_unit < 4 or abs(per_unit * h - 1.0) > 1e-12:
            raise DomainError("1/grid_step must be an integer >= 4")
        n_steps = int(round(u_max / h))
        if u_max < 2.0 or abs(n_steps * h - u_max) > 1e-9 * u_max:
            raise DomainError("u_max must be a multiple of grid_step and at least 2")

        log_rho = _march(h, per_unit, n_steps)
        dlog_right, dlog_left = _log_derivatives(log_rho, h, per_unit)
        log_tail = _log_tail_integrals(log_rho, dlog_right, dlog_left, h) - EULER_GAMMA
        for arr in (log_rho, dlog_right, dlog_left, log_tail):
            arr.setflags(write=False)
        return cls(h, n_steps * h, log_rho, dlog_right, dlog_left, log_tail)

    @property
    def per_unit(self) -> int:
        return int(round(1.0 / self.grid_step))

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.log_values.size) * self.grid_step

    @property
    def truncation_bound(self) -> float:
        """Absolute bound on the error of any tail value from cutting at u_max.

        For u > 1 the integral form gives rho(u - 1) >= u rho(u), hence
        rho' <= -rho and int_U^inf rho <= rho(U).  The remainder estimate
        added to every tail is itself below that, so the error is at most
        exp(-gamma) rho(u_max).
        """
        return math.exp(self.log_values[-1] - EULER_GAMMA)

    def _check(self, u, name):
        u = np.asarray(u, dtype=float)
        if np.any(~(u >= 0.0)) or np.any(u > self.u_max * (1 + 1e-15)):
            raise DomainError(f"{name} must lie in [0, {self.u_max}]")
        return np.minimum(u, self.u_max)

    def log_rho(self, u):
        """log rho(u) by cubic Hermite interpolation of the log table.

        Slopes come from the delay equation itself, (log rho)' = -rho(u-1) /
        (u rho(u)), taken one-sided at u = 1.
        """
        u = self._check(u, "u")
        h = self.grid_step
        last = self.log_values.size - 1
        i = np.minimum((u / h).astype(np.int64), last - 1)
        t = u / h - i
        y0 = self.log_values[i]
        y1 = self.log_values[i + 1]
        m0 = self._dlog_right[i] * h
        m1 = self._dlog_left[i + 1] * h
        t2 = t * t
        t3 = t2 * t
        out = ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0
               + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1)
        out = np.where(u <= 1.0, 0.0, out)
        return out if out.ndim else float(out)

    def log_tail(self, x):
        """log of P(D >= x) for D with density exp(-gamma) rho."""
        x = self._check(x, "x")
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        h = self.grid_step
        last = self.log_values.size - 1
        j = np.minimum(np.floor(x / h).astype(np.int64), last)
        out = self._log_tail[j].copy()
        off = x - j * h
        partial = off > 0
        if np.any(partial):
            # int_x^{u_{j+1}} rho by Gauss-Legendre on the interpolant
            xs, js = x[partial], j[partial]
            right = (js + 1) * h
            width = right - xs
            nodes = xs[:, None] + width[:, None] * _GL_X[None, :]
            ref = self.log_values[js]
            vals = np.exp(self.log_rho(nodes) - ref[:, None])
            piece = np.log(width * (vals @ _GL_W)) + ref - EULER_GAMMA
            out[partial] = np.logaddexp(self._log_tail[js + 1], piece)
        return float(out[0]) if scalar else out

    def moment(self, k: int) -> float:
        """E[D**k] for the Dickman distribution, by corrected trapezoid on the table."""
        if k < 0:
            raise DomainError("moment order must be nonnegative")
        h = self.grid_step
        u = self.grid
        rho = np.exp(self.log_values)
        f = u ** k * rho
        dku = k * u ** (k - 1) if k > 0 else np.zeros_like(u)
        fr = dku * rho + u ** k * rho * self._dlog_right
        fl = dku * rho + u ** k * rho * self._dlog_left
        pieces = 0.5 * h * (f[:-1] + f[1:]) + h * h / 12.0 * (fr[:-1] - fl[1:])
        total = math.fsum(pieces)
        # remainder past u_max, same estimate as the tail
        if fl[-1] < 0:
            total += f[-1] / (-fl[-1] / f[-1])
        return total * math.exp(-EULER_GAMMA)


def _march(h: float, per_unit: int, n_steps: int) -> np.ndarray:
    """log rho on the grid via u rho(u) = int_{u-1}^u rho.

    The window integral uses the trapezoid rule with Euler-Maclaurin end
    corrections h^2/12 (f'(a) - f'(b)); f' is known exactly from the delay
    equation, and the jump of rho' at u = 1 is corrected explicitly.  The
    unknown rho(u) enters only through the trapezoid end weight h/2, so
    each step is solved in closed form.
    """
    N = per_unit
    log_rho = np.zeros(n_steps + 1)
    c2 = h * h / 12.0
    for i in range(N + 1, n_steps + 1):
        u = i * h
        ref = log_rho[i - 1]
        v = np.exp(log_rho[i - N:i] - ref)
        known = h * (0.5 * v[0] + v[1:].sum())
        d_right_end = -math.exp(log_rho[i - N] - ref) / u
        d_left_end = -math.exp(log_rho[i - 2 * N] - ref) / (u - 1.0) if i >= 2 * N else 0.0
        corr = c2 * (d_left_end - d_right_end)
        if i < 2 * N:
            # rho' jumps from 0 to -1 at u = 1 inside the window
            corr -= c2 * math.exp(-ref)
        log_rho[i] = ref + math.log((known + corr) / (u - 0.5 * h))
    return log_rho


def _log_derivatives(log_rho, h, per_unit):
    n = log_rho.size
    u = np.arange(n) * h
    d = np.zeros(n)
    idx = np.arange(per_unit, n)
    d[idx] = -np.exp(log_rho[idx - per_unit] - log_rho[idx]) / u[idx]
    right = d.copy()
    left = d.copy()
    left[per_unit] = 0.0  # rho'(1-) = 0, rho'(1+) = -1
    return right, left


def _log_tail_integrals(log_rho, dlog_right, dlog_left, h):
    """log int_{u_i}^inf rho for every grid point (remainder estimated past the end)."""
    s = np.exp(log_rho[1:] - log_rho[:-1])
    rel = 0.5 * h * (1.0 + s) + h * h / 12.0 * (dlog_right[:-1] - dlog_left[1:] * s)
    log_pieces = log_rho[:-1] + np.log(rel)
    # rho(U) / |(log rho)'(U)| estimates the remainder; it is below the
    # rigorous bound rho(U) because |(log rho)'| >= 1 there
    log_rem = log_rho[-1] - math.log(-dlog_left[-1])
    rev = np.concatenate(([log_rem], log_pieces[::-1]))
    return np.logaddexp.accumulate(rev)[::-1]


@functools.lru_cache(maxsize=8)
def default_table(u_max: float = DEFAULT_U_MAX, grid_step: float = DEFAULT_GRID_STEP) -> DickmanTable:
    return DickmanTable.build(grid_step=grid_step, u_max=u_max)


def dickman_rho(u: float, table: DickmanTable | None = None) -> LogProb:
    """rho(u) as a LogProb (log rho is exact 0 on [0, 1])."""
    table = table or default_table()
    return LogProb(float(table.log_rho(u)))


def dickman_tail(x: float, table: DickmanTable | None = None) -> LogProb:
    """Upper tail P(D >= x) of the Dickman distribution (density exp(-gamma) rho)."""
    table = table or default_table()
    return LogProb(float(table.log_tail(x)))
