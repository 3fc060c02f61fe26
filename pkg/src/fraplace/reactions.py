"""Reaction families, their antiderivatives, asymptotic weights and truncations.

A reaction is ``f(x, t) = rho(x) * g(t)`` for one of the scalar families below
and an optional positive spatial weight ``rho``. On ``t <= 0`` every reaction is
extended by its value at ``t = 0``. The truncation at level ``k`` is::

    f_k(x, t) = max(f(x, t+), -k (t+)^(p-1))
"""

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

__all__ = [
    "ExtendedReal",
    "Reaction",
    "HypothesisReport",
    "logistic",
    "exponential_paper",
    "power_combo",
    "custom_tabulated",
    "reaction_from_config",
    "eval_f",
    "eval_F",
    "asymptote_zero",
    "asymptote_infty",
    "truncate",
    "validate_hypotheses",
    "growth_constant",
]

KINDS = ("logistic", "exponential_paper", "power_combo", "custom_tabulated")


@dataclass(frozen=True)
class ExtendedReal:
    """A real number or one of the two infinities.

    Only comparisons and ``max`` against a finite value are defined.
    """

    tag: str
    value: float = 0.0

    def __post_init__(self):
        if self.tag not in ("finite", "plus_infinity", "minus_infinity"):
            raise ValueError(f"unknown tag {self.tag!r}")
        if self.tag == "finite" and not math.isfinite(self.value):
            raise ValueError("finite ExtendedReal needs a finite value")

    @classmethod
    def of(cls, x):
        if isinstance(x, ExtendedReal):
            return x
        x = float(x)
        if x == math.inf:
            return cls("plus_infinity")
        if x == -math.inf:
            return cls("minus_infinity")
        if math.isnan(x):
            raise ValueError("NaN is not an extended real")
        return cls("finite", x)

    @property
    def is_finite(self):
        return self.tag == "finite"

    def __float__(self):
        if self.tag == "plus_infinity":
            return math.inf
        if self.tag == "minus_infinity":
            return -math.inf
        return self.value

    def _key(self, other):
        return float(ExtendedReal.of(other))

    def __lt__(self, other):
        return float(self) < self._key(other)

    def __le__(self, other):
        return float(self) <= self._key(other)

    def __gt__(self, other):
        return float(self) > self._key(other)

    def __ge__(self, other):
        return float(self) >= self._key(other)

    def max(self, finite):
        if not math.isfinite(finite):
            raise TypeError("ExtendedReal.max is only defined against finite values")
        return ExtendedReal.of(max(float(self), finite))

    def to_json(self):
        if self.tag == "finite":
            return {"tag": "finite", "value": self.value}
        return {"tag": self.tag}

    def __str__(self):
        return {"plus_infinity": "+inf", "minus_infinity": "-inf"}.get(self.tag, repr(self.value))


def _pos_pow(t, e):
    # t**e for t >= 0 with 0**0 = 1
    return np.where(t > 0, np.power(np.maximum(t, 0.0), e), 1.0 if e == 0 else 0.0)


class _Family:
    """Scalar profile ``g(t)`` for ``t >= 0``."""

    def g(self, t):
        raise NotImplementedError

    def G(self, t):
        raise NotImplementedError

    def a0(self, p):
        raise NotImplementedError

    def ainf(self, p):
        raise NotImplementedError


class _PowerSum(_Family):
    """``g(t) = sum_j c_j t^e_j`` with exponents ``e_j >= 0``."""

    def __init__(self, terms):
        merged = {}
        for c, e in terms:
            if e < 0:
                raise ValueError(f"power exponents must be >= 0, got {e}")
            merged[float(e)] = merged.get(float(e), 0.0) + float(c)
        self.terms = sorted(((c, e) for e, c in merged.items() if c != 0.0), key=lambda ce: ce[1])

    def g(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, e in self.terms:
            out = out + c * _pos_pow(t, e)
        return out

    def G(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, e in self.terms:
            out = out + c * _pos_pow(t, e + 1.0) / (e + 1.0)
        return out

    def _limit(self, term, p):
        if term is None:
            return ExtendedReal.of(0.0)
        c, e = term
        if e == p - 1.0:
            return ExtendedReal.of(c)
        return ExtendedReal.of(math.copysign(math.inf, c))

    def a0(self, p):
        # lowest exponent dominates t^(e - p + 1) as t -> 0+
        low = self.terms[0] if self.terms else None
        if low is not None and low[1] > p - 1.0:
            return ExtendedReal.of(0.0)
        return self._limit(low, p)

    def ainf(self, p):
        high = self.terms[-1] if self.terms else None
        if high is not None and high[1] < p - 1.0:
            return ExtendedReal.of(0.0)
        return self._limit(high, p)


class _Exponential(_Family):
    """``lam t^(p-1) - t^(r-1)`` on ``[0, 1]``, ``lam t^(p-1) - exp(t^alpha - 1)`` beyond."""

    def __init__(self, lam, r, alpha, p):
        self.lam, self.r, self.alpha, self.p = float(lam), float(r), float(alpha), float(p)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        lam, r, alpha, p = self.lam, self.r, self.alpha, self.p
        tc = np.maximum(t, 0.0)
        low = lam * tc ** (p - 1) - tc ** (r - 1)
        with np.errstate(over="ignore"):
            high = lam * tc ** (p - 1) - np.exp(tc ** alpha - 1.0)
        return np.where(tc <= 1.0, low, high)

    def _tail(self, t):
        # int_1^t exp(tau^alpha - 1) d tau
        if self.alpha == 1.0:
            return math.expm1(t - 1.0)
        return integrate.quad(lambda x: math.exp(x ** self.alpha - 1.0), 1.0, t,
                              epsabs=0.0, epsrel=1e-13, limit=200)[0]

    def G(self, t):
        t = np.asarray(t, dtype=float)
        lam, r, p = self.lam, self.r, self.p
        tc = np.maximum(t, 0.0)
        low = lam * np.minimum(tc, 1.0) ** p / p - np.minimum(tc, 1.0) ** r / r
        tails = np.array([self._tail(v) if v > 1.0 else 0.0 for v in np.ravel(tc)]).reshape(tc.shape)
        high = lam * (np.maximum(tc, 1.0) ** p - 1.0) / p - tails
        return low + high

    def a0(self, p):
        return ExtendedReal.of(self.lam)

    def ainf(self, p):
        return ExtendedReal("minus_infinity")


class _Tabulated(_Family):
    """Piecewise-linear profile through ``(t_j, f_j)``, extended linearly past the table."""

    def __init__(self, t, f, a0, ainf):
        t = np.asarray(t, dtype=float)
        f = np.asarray(f, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or len(t) < 2:
            raise ValueError("tabulated reaction needs matching 1-D arrays of length >= 2")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("tabulated t must start at 0 and increase strictly")
        self.t, self.f = t, f
        self.slopes = np.diff(f) / np.diff(t)
        seg = 0.5 * (f[1:] + f[:-1]) * np.diff(t)
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._a0 = None if a0 is None else ExtendedReal.of(a0)
        self._ainf = None if ainf is None else ExtendedReal.of(ainf)

    def _seg(self, tc):
        return np.clip(np.searchsorted(self.t, tc, side="right") - 1, 0, len(self.t) - 2)

    def g(self, t):
        tc = np.maximum(np.asarray(t, dtype=float), 0.0)
        j = self._seg(tc)
        return self.f[j] + self.slopes[j] * (tc - self.t[j])

    def G(self, t):
        tc = np.maximum(np.asarray(t, dtype=float), 0.0)
        j = self._seg(tc)
        dt = tc - self.t[j]
        return self.cum[j] + self.f[j] * dt + 0.5 * self.slopes[j] * dt * dt

    def a0(self, p):
        if self._a0 is None:
            raise ValueError("custom_tabulated reaction does not declare a0")
        return self._a0

    def ainf(self, p):
        if self._ainf is None:
            raise ValueError("custom_tabulated reaction does not declare a_inf")
        return self._ainf


@dataclass(frozen=True)
class Reaction:
    """Reaction ``f(x, t) = rho(x) g(t)``, optionally truncated at level ``k``.

    ``rho`` is ``None`` (constant 1) or a callable returning positive values on
    node coordinates.
    """

    kind: str
    params: dict
    p: float
    k: int = None
    rho: object = field(default=None, compare=False, repr=False)
    family: _Family = field(default=None, compare=False, repr=False)

    def weight(self, x):
        x = np.asarray(x, dtype=float)
        if self.rho is None:
            return np.ones_like(x)
        w = np.broadcast_to(np.asarray(self.rho(x), dtype=float), x.shape)
        if np.any(w <= 0):
            raise ValueError("spatial weight rho must be positive")
        return w

    def describe(self):
        out = {"kind": self.kind, **self.params}
        if self.k is not None:
            out["k"] = self.k
        return out


def logistic(lam, q, r, p, rho=None):
    """``lam t^(q-1) - t^(r-1)``; requires ``1 < q <= p < r``."""
    if not 1.0 < q <= p < r:
        raise ValueError(f"logistic needs 1 < q <= p < r, got q={q}, p={p}, r={r}")
    fam = _PowerSum([(lam, q - 1.0), (-1.0, r - 1.0)])
    return Reaction("logistic", {"lambda": float(lam), "q": float(q), "r": float(r)},
                    float(p), None, rho, fam)


def exponential_paper(alpha, r, p, lam=1.0, rho=None):
    if not (alpha >= p - 1.0 and r > p):
        raise ValueError(f"exponential reaction needs alpha >= p-1 and r > p, got alpha={alpha}, r={r}")
    fam = _Exponential(lam, r, alpha, p)
    return Reaction("exponential_paper", {"alpha": float(alpha), "r": float(r), "lambda": float(lam)},
                    float(p), None, rho, fam)


def power_combo(terms, p, rho=None):
    """``sum c t^e`` over ``terms = [(c, e), ...]``; no structural constraint is imposed."""
    terms = [(float(c), float(e)) for c, e in terms]
    return Reaction("power_combo", {"terms": [list(t) for t in terms]}, float(p), None, rho,
                    _PowerSum(terms))


def custom_tabulated(t, f, p, a0=None, ainf=None, rho=None):
    fam = _Tabulated(t, f, a0, ainf)
    params = {"t": [float(v) for v in t], "f": [float(v) for v in f],
              "a0": None if a0 is None else float(ExtendedReal.of(a0)),
              "ainf": None if ainf is None else float(ExtendedReal.of(ainf))}
    return Reaction("custom_tabulated", params, float(p), None, rho, fam)


def bump_weight(amplitude, center, width):
    """``1 + amplitude * exp(-((x - center) / width)^2)``."""
    def rho(x):
        return 1.0 + amplitude * np.exp(-(((np.asarray(x) - center) / width) ** 2))
    return rho


def reaction_from_config(cfg, p):
    """Build a reaction from a tagged record such as ``{"kind": "logistic", "lambda": 1, ...}``."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    rho_cfg = cfg.pop("rho", None)
    rho = None
    if rho_cfg is not None:
        rho = bump_weight(float(rho_cfg["amplitude"]), float(rho_cfg["center"]), float(rho_cfg["width"]))
    k = cfg.pop("k", None)
    allowed = {
        "logistic": {"lambda", "q", "r"},
        "exponential_paper": {"alpha", "r", "lambda"},
        "power_combo": {"terms"},
        "custom_tabulated": {"t", "f", "a0", "ainf"},
    }
    if kind not in allowed:
        raise ValueError(f"reaction.kind: expected one of {KINDS}, got {kind!r}")
    extra = set(cfg) - allowed[kind]
    if extra:
        raise ValueError(f"reaction: unknown keys {sorted(extra)} for kind {kind!r}")
    if kind == "logistic":
        r = logistic(cfg["lambda"], cfg["q"], cfg["r"], p, rho)
    elif kind == "exponential_paper":
        r = exponential_paper(cfg["alpha"], cfg["r"], p, cfg.get("lambda", 1.0), rho)
    elif kind == "power_combo":
        r = power_combo(cfg["terms"], p, rho)
    else:
        r = custom_tabulated(cfg["t"], cfg["f"], p, cfg.get("a0"), cfg.get("ainf"), rho)
    if rho_cfg is not None:
        r = replace(r, params={**r.params, "rho": dict(rho_cfg)})
    return truncate(r, int(k)) if k is not None else r


@functools.lru_cache(maxsize=4096)
def _breakpoint(family, p, c):
    """Solve ``g(t) / t^(p-1) = -c`` for ``t > 0`` by bisection.

    The quotient is decreasing, so the clamp ``-c t^(p-1)`` is active exactly on
    ``t > t*``. Returns 0 when it is active everywhere and ``inf`` when never.
    """
    def excess(t):
        return float(family.g(t)) / t ** (p - 1.0) + c

    try:
        if float(family.a0(p)) <= -c:
            return 0.0
    except ValueError:
        pass
    lo = 1.0
    while excess(lo) <= 0:
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
    hi = lo
    while excess(hi) > 0:
        hi *= 2.0
        # the quotient may approach -c from above without crossing
        if hi > 1e300:
            return math.inf
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def clamp_breakpoints(reaction, x):
    """Per-node threshold above which the truncation clamp is active."""
    x = np.asarray(x, dtype=float)
    if reaction.k is None:
        return np.full(x.shape, math.inf)
    w = reaction.weight(x)
    flat = [_breakpoint(reaction.family, reaction.p, reaction.k / wi) for wi in np.ravel(w)]
    return np.asarray(flat).reshape(x.shape)


def eval_f(reaction, x, t):
    """Evaluate ``f(x, t)`` (or ``f_k``) with the extension ``f(x, t) = f(x, 0)`` for ``t <= 0``."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    tp = np.maximum(t, 0.0)
    val = reaction.weight(x) * reaction.family.g(tp)
    if reaction.k is not None:
        val = np.maximum(val, -reaction.k * tp ** (reaction.p - 1.0))
    return val if val.ndim else float(val)


def eval_F(reaction, x, t):
    """Antiderivative ``F(x, t) = int_0^t f(x, tau) d tau``."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    p = reaction.p
    w = reaction.weight(x)
    f0 = w * reaction.family.g(np.zeros_like(t))
    if reaction.k is None:
        pos = w * reaction.family.G(np.maximum(t, 0.0))
        neg = f0 * np.minimum(t, 0.0)
    else:
        tstar = clamp_breakpoints(reaction, x)
        tp = np.maximum(t, 0.0)
        below = np.minimum(tp, tstar)
        pos = w * reaction.family.G(below)
        clamped = tp > tstar
        if np.any(clamped):
            ts = np.where(clamped, tstar, 0.0)
            pos = pos - np.where(clamped, reaction.k * (tp ** p - ts ** p) / p, 0.0)
        neg = np.maximum(f0, 0.0) * np.minimum(t, 0.0)
    val = pos + neg
    return val if val.ndim else float(val)


def asymptote_zero(reaction, x):
    """``lim_{t -> 0+} f(x, t) / t^(p-1)``, exact per family."""
    a = reaction.family.a0(reaction.p)
    w = float(reaction.weight(np.asarray(float(x))))
    a = ExtendedReal.of(float(a) * w) if a.is_finite else a
    return a.max(-reaction.k) if reaction.k is not None else a


def asymptote_infty(reaction, x):
    """``lim_{t -> inf} f(x, t) / t^(p-1)``, exact per family."""
    a = reaction.family.ainf(reaction.p)
    w = float(reaction.weight(np.asarray(float(x))))
    a = ExtendedReal.of(float(a) * w) if a.is_finite else a
    return a.max(-reaction.k) if reaction.k is not None else a


def weights_array(reaction, x, which):
    """Asymptotic weight at every node as a float array with ``+-inf`` entries."""
    fn = asymptote_zero if which == "zero" else asymptote_infty
    return np.array([float(fn(reaction, xi)) for xi in np.ravel(x)])


def truncate(reaction, k):
    if reaction.k is not None:
        raise ValueError("reaction is already truncated")
    if int(k) != k or k < 1:
        raise ValueError(f"truncation level must be a positive integer, got {k}")
    return replace(reaction, k=int(k))


def growth_constant(reaction, x, t_samples):
    """Smallest ``c`` with ``|f_k(x, t)| <= c (1 + |t|^(p-1))`` on the samples."""
    X, T = np.meshgrid(np.asarray(x, dtype=float), np.asarray(t_samples, dtype=float), indexing="ij")
    vals = np.abs(eval_f(reaction, X, T)) / (1.0 + np.abs(T) ** (reaction.p - 1.0))
    return float(np.max(vals))


@dataclass
class HypothesisReport:
    h2_pass: bool
    c0: float
    h3_status: str  # strict | nonstrict | violated
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return self.h2_pass and self.h3_status != "violated"

    def to_json(self):
        return {"h2_pass": self.h2_pass, "c0": self.c0, "h3": self.h3_status,
                "violations": self.violations[:20]}


def validate_hypotheses(reaction, grid, t_samples):
    """Check upper growth and monotonicity of ``f(x, t) / t^(p-1)`` on samples.

    The growth fit flags a failure when the ratio ``f / (1 + t^(p-1))`` is still
    rising at the two largest samples, the only evidence a finite sample gives.
    """
    t = np.asarray(t_samples, dtype=float)
    if t.ndim != 1 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t_samples must be positive and strictly increasing")
    p = reaction.p
    X, T = np.meshgrid(np.asarray(grid.points)[:, 0], t, indexing="ij")
    F = eval_f(reaction, X, T)
    ratio = F / (1.0 + T ** (p - 1.0))
    c0 = max(float(np.max(ratio)), np.finfo(float).tiny)
    violations = []
    h2_pass = True
    if len(t) >= 2:
        rising = ratio[:, -1] > ratio[:, -2] * (1 + 1e-12) + 1e-300
        rising &= ratio[:, -1] > 0
        if np.any(rising):
            h2_pass = False
            for i in np.flatnonzero(rising)[:5]:
                violations.append({"hypothesis": "h2", "node": int(i), "t": float(t[-1])})
    Q = F / T ** (p - 1.0)
    dq = np.diff(Q, axis=1)
    scale = 1e-12 * np.maximum(1.0, np.abs(Q[:, 1:]))
    increasing = dq > scale
    flat = np.abs(dq) <= scale
    if np.any(increasing):
        status = "violated"
        for i, j in zip(*np.nonzero(increasing)):
            if len(violations) >= 50:
                break
            violations.append({"hypothesis": "h3", "node": int(i), "t": float(t[j]),
                               "t_next": float(t[j + 1]), "increase": float(dq[i, j])})
    elif np.any(flat):
        status = "nonstrict"
    else:
        status = "strict"
    return HypothesisReport(h2_pass, c0, status, violations)
