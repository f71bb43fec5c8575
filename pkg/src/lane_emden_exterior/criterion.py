"""Integral test for positive exterior supersolutions with a general nonlinearity.

A positive solution of ``-div(|x|^theta grad u) >= |x|^ell f(u)`` outside
some ball exists exactly when ``int_0^delta f(t) t^{-gamma} dt`` is finite,
``gamma = (2(N'-1) + tau)/(N'-2)``.  Power nonlinearities are decided in
closed form; black-box ``f`` by integrating over dyadic pieces
``[delta 2^{-k}, delta 2^{-k+1}]`` and classifying how the piece integrals
behave as ``k`` grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad

from .params import EPS_CLASSIFY, DerivedParams, ParameterError
from .radial import RadialProfile, _pos_pow

INCONCLUSIVE = "inconclusive"


class NonlinearityError(ValueError):
    """``f`` failed to return a finite positive value."""

    def __init__(self, t, value):
        super().__init__(f"f({t!r}) = {value!r} is not a finite positive number")
        self.t = t
        self.value = value


@dataclass(frozen=True)
class Power:
    p: float

    def __call__(self, t):
        return t**self.p


@dataclass(frozen=True)
class Function:
    f: Callable[[float], float]
    name: str = "f"

    def __call__(self, t):
        return self.f(t)


Nonlinearity = Union[Power, Function]


@dataclass
class CriterionVerdict:
    converges: Union[bool, str]
    estimate: Optional[float]
    method: str
    delta: Optional[float] = None
    table: list = field(default_factory=list)
    admissible: list = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "converges": self.converges,
            "estimate": self.estimate,
            "method": self.method,
            "delta": self.delta,
            "admissible": list(self.admissible),
            "note": self.note,
            "table": [list(row) for row in self.table],
        }


def _check_derived(derived: DerivedParams):
    if not float(derived.n_prime) > 2:
        raise ParameterError("the integral criterion needs N' > 2")
    if not float(derived.tau) > -2:
        raise ParameterError("the integral criterion needs tau > -2")


def criterion_power(p: float, derived: DerivedParams, delta: float = 1.0, eps: float = EPS_CLASSIFY) -> CriterionVerdict:
    """Closed form for ``f(t) = t^p``: finite iff ``p > gamma - 1``."""
    _check_derived(derived)
    gamma = float(derived.gamma)
    expo = p - gamma + 1
    if expo <= eps * max(1.0, abs(gamma)):
        return CriterionVerdict(False, None, "closed-form", delta)
    return CriterionVerdict(True, delta**expo / expo, "closed-form", delta)


def _safe_eval(f, t):
    try:
        y = f(t)
    except Exception as exc:  # the caller's function; report where it broke
        raise NonlinearityError(t, exc) from exc
    if not (np.isfinite(y) and y > 0):
        raise NonlinearityError(t, y)
    return float(y)


def _piece(f, weight_exp: float, a: float, b: float) -> float:
    # substitute t = e^s so each dyadic piece becomes a smooth unit-length integral
    def g(s):
        t = math.exp(s)
        return _safe_eval(f, t) * math.exp((1.0 - weight_exp) * s)

    return quad(g, math.log(a), math.log(b), epsabs=0.0, epsrel=1e-13, limit=100)[0]


def _r2(x: np.ndarray, y: np.ndarray) -> float:
    coef = np.polyfit(x, y, 1)
    fit = np.polyval(coef, x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - fit) ** 2))
    if ss_tot == 0:
        return 1.0
    return 1.0 - ss_res / ss_tot


def levin_u(partial_sums: Sequence[float], terms: Sequence[float], first_index: int = 1) -> float:
    """Levin u-transform of a sequence of partial sums.

    ``terms[j]`` is the summand with global index ``first_index + j`` and
    ``partial_sums[j]`` includes it.  Handles both linear and logarithmic
    convergence.
    """
    s = np.asarray(partial_sums, dtype=float)
    a = np.asarray(terms, dtype=float)
    k = len(s) - 1
    n = first_index + np.arange(len(s), dtype=float)
    omega = n * a
    j = np.arange(k + 1)
    binom = np.array([math.comb(k, int(i)) for i in j], dtype=float)
    c = (-1.0) ** j * binom * (n / n[-1]) ** (k - 1)
    return float(np.sum(c * s / omega) / np.sum(c / omega))


def classify_increments(increments: Sequence[float], partial_sums: Sequence[float], tol_conv: float = 1e-8,
                        window: int = 5, fit_r2: float = 0.99):
    """Decide convergence of a positive series from its last terms.

    Returns ``(converges, estimate, note)`` with ``converges`` one of
    ``True``, ``False`` or ``INCONCLUSIVE``.
    """
    d = np.asarray(increments, dtype=float)
    s = np.asarray(partial_sums, dtype=float)
    if len(d) < window + 2:
        raise ValueError("not enough increments to classify")
    k = np.arange(1, len(d) + 1, dtype=float)
    last = slice(len(d) - window, len(d))
    dl, sl, kl = d[last], s[last], k[last]

    if dl[-1] <= tol_conv * abs(sl[-1]) and np.all(np.diff(dl) <= 0):
        ratio = dl[-1] / dl[-2]
        tail = dl[-1] * ratio / (1 - ratio) if ratio < 1 else 0.0
        return True, float(sl[-1] + tail), "cauchy"

    ratios = dl[1:] / dl[:-1]
    if np.all(ratios >= 1 - 1e-6):
        if _r2(kl, sl) > fit_r2 and np.ptp(ratios) < 1e-3:
            return False, None, "logarithmic growth"
        if _r2(kl, np.log(dl)) > fit_r2:
            return False, None, "power growth"
        return INCONCLUSIVE, None, "non-decaying increments without a growth model"

    # decaying increments: geometric if the ratio is constant, else algebraic k^-q
    if np.ptp(ratios) <= 1e-6 * max(1.0, ratios.max()) and ratios.max() < 1:
        ratio = float(ratios[-1])
        return True, float(sl[-1] + dl[-1] * ratio / (1 - ratio)), "geometric tail"
    q = -np.polyfit(np.log(kl), np.log(dl), 1)[0]
    if q <= 1.05:
        return INCONCLUSIVE, None, f"algebraic decay with exponent {q:.3f}"
    # the tail is re-indexed from 1; this keeps the transform well conditioned
    est = levin_u(s[-12:], d[-12:])
    prev = levin_u(s[-13:-1], d[-13:-1])
    if abs(est - prev) > 1e3 * tol_conv * abs(est):
        return INCONCLUSIVE, est, "extrapolation did not settle"
    return True, est, f"algebraic tail, exponent {q:.3f}"


def criterion_quadrature(f: Nonlinearity, derived: DerivedParams, delta: float = 1.0,
                         inner_cutoffs: Optional[Sequence[float]] = None, tol_conv: float = 1e-8) -> CriterionVerdict:
    """Black-box evaluation of ``int_0^delta f(t) t^{-gamma} dt``.

    ``inner_cutoffs`` is a decreasing sequence of lower limits (default
    ``delta 2^{-k}``, ``k = 1..40``).
    """
    _check_derived(derived)
    if not delta > 0:
        raise ParameterError("delta must be positive")
    gamma = float(derived.gamma)
    if inner_cutoffs is None:
        inner_cutoffs = delta * 2.0 ** -np.arange(1, 41)
    eps = np.asarray(inner_cutoffs, dtype=float)
    if np.any(np.diff(eps) >= 0) or eps[0] >= delta:
        raise ParameterError("inner cutoffs must decrease from below delta")
    uppers = np.concatenate([[delta], eps[:-1]])
    increments = np.array([_piece(f, gamma, lo, hi) for lo, hi in zip(eps, uppers)])
    sums = np.cumsum(increments)
    table = [(float(e), float(v)) for e, v in zip(eps, sums)]
    converges, estimate, note = classify_increments(increments, sums, tol_conv=tol_conv)
    return CriterionVerdict(converges, estimate if converges is True else None, "quadrature", delta, table, note=note)


def criterion_nprime2(f: Nonlinearity, a_grid: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0),
                      t_start: float = 1.0, pieces: int = 40, tol_conv: float = 1e-8) -> CriterionVerdict:
    """Two-dimensional test: is ``e^{a t} f(t)`` integrable at infinity for some ``a > 0``?

    Powers never are.  For callables each ``a`` is tested over unit pieces
    ``[t_start + j, t_start + j + 1]``.
    """
    if isinstance(f, Power):
        return CriterionVerdict(False, None, "closed-form", note="e^{at} t^p is never integrable")
    admissible = []
    table = []
    for a in a_grid:
        if not a > 0:
            raise ParameterError("a must be positive")

        def g(t, a=a):
            return math.exp(a * t) * _safe_eval(f, t)

        inc = np.array([quad(g, t_start + j, t_start + j + 1, epsabs=0.0, epsrel=1e-12)[0] for j in range(pieces)])
        sums = np.cumsum(inc)
        conv, est, note = classify_increments(inc, sums, tol_conv=tol_conv)
        table.append((float(a), conv if isinstance(conv, str) else bool(conv), est))
        if conv is True:
            admissible.append(float(a))
    if admissible:
        return CriterionVerdict(True, None, "quadrature", table=table, admissible=admissible)
    if all(row[1] is False for row in table):
        return CriterionVerdict(False, None, "quadrature", table=table)
    return CriterionVerdict(INCONCLUSIVE, None, "quadrature", table=table)


@dataclass(eq=False)
class WProfile:
    """``w(s) = u(r)`` with ``s = r^{2-N'}``, solving ``-w'' = a s^{-gamma} w^p``."""

    s_grid: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    a: float
    s0: float
    gamma: float
    p: float

    def terms(self) -> tuple[np.ndarray, np.ndarray]:
        """``(w'', a s^{-gamma} w^p)`` on the interior nodes."""
        s = self.s_grid
        hm = s[1:-1] - s[:-2]
        hp = s[2:] - s[1:-1]
        d2 = (hm**2 * self.dw[2:] - hp**2 * self.dw[:-2] + (hp**2 - hm**2) * self.dw[1:-1]) / (hm * hp * (hm + hp))
        src = self.a * s[1:-1] ** (-self.gamma) * _pos_pow(self.w[1:-1], self.p)
        return d2, src

    @property
    def pointwise_residual(self) -> np.ndarray:
        d2, src = self.terms()
        return d2 + src

    @property
    def residual(self) -> float:
        d2, src = self.terms()
        scale = max(np.abs(d2).max(), np.abs(src).max())
        return 0.0 if scale == 0 else float(np.abs(d2 + src).max() / scale)

    def second_differences(self) -> np.ndarray:
        """Divided second differences of ``w`` itself."""
        s, w = self.s_grid, self.w
        return 2 * ((w[2:] - w[1:-1]) / (s[2:] - s[1:-1]) - (w[1:-1] - w[:-2]) / (s[1:-1] - s[:-2])) / (s[2:] - s[:-2])


def w_transform(profile: RadialProfile) -> WProfile:
    """Change variables ``s = r^{2-N'}`` on an exterior profile; ``a = (N'-2)^{-2}``."""
    d = profile.params
    n_prime = float(d.n_prime)
    if not n_prime > 2:
        raise ParameterError("w-transform needs N' > 2")
    if profile.side != "exterior":
        raise ParameterError("w-transform applies to exterior profiles")
    r = profile.grid[::-1]
    s = r ** (2 - n_prime)
    w = profile.values[::-1]
    # dw/ds = r^{N'-1} u' / (2 - N')
    dw = r ** (n_prime - 1) * profile.derivs[::-1] / (2 - n_prime)
    return WProfile(s, w, dw, a=(n_prime - 2) ** -2, s0=float(s[-1]), gamma=float(d.gamma), p=float(d.p))
