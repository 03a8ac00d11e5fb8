"""Model parameters, the weight of Y_s, the weighted sup-norm and a few test fields.

Functions on [0, inf) are carried around as vectorised point evaluators
(:class:`ScalarField`) rather than as samples, so transport and quadrature
compose exactly.  The natural coordinates are

    u = x**(1 - a)                 (the weight depends on x only through u)
    z = u / (nu * (1 - a))         (A = nu x^a d/dx becomes d/dz)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

# weighted quotients beyond this u are formed in log space
LOG_SPACE_U = 30.0


class ParameterError(ValueError):
    pass


class TruncationWarning(UserWarning):
    """The supremum may live beyond the truncated grid."""


@dataclass(frozen=True)
class ModelParams:
    a: float
    nu: float
    beta: float
    gamma: float
    s: float

    @property
    def c(self) -> float:
        """Characteristic speed nu(1-a) in the u coordinate."""
        return self.nu * (1.0 - self.a)

    @property
    def strip_width(self) -> float:
        return self.s * (1.0 - self.a) * self.nu

    def with_s(self, s: float) -> "ModelParams":
        return make_params(self.a, self.nu, self.beta, self.gamma, s)


def make_params(a: float, nu: float, beta: float, gamma: float, s: float) -> ModelParams:
    a, nu, beta, gamma, s = (float(v) for v in (a, nu, beta, gamma, s))
    if not all(math.isfinite(v) for v in (a, nu, beta, gamma, s)):
        raise ParameterError("parameters must be finite")
    if not 0.0 < a < 1.0:
        raise ParameterError(f"a out of range: need 0 < a < 1, got {a}")
    if nu <= 0.0:
        raise ParameterError(f"nu must be positive, got {nu}")
    if s < 0.0:
        raise ParameterError(f"s must be nonnegative, got {s}")
    return ModelParams(a, nu, beta, gamma, s)


# -- coordinates -------------------------------------------------------------

def to_u(params: ModelParams, x):
    return np.asarray(x, dtype=float) ** (1.0 - params.a)


def from_u(params: ModelParams, u):
    return np.asarray(u, dtype=float) ** (1.0 / (1.0 - params.a))


def to_z(params: ModelParams, x):
    """Flattening coordinate z = x^(1-a) / (nu (1-a))."""
    return to_u(params, x) / params.c


def from_z(params: ModelParams, z):
    return from_u(params, params.c * np.asarray(z, dtype=float))


# -- fields ------------------------------------------------------------------

def _as_complex(values, shape) -> np.ndarray:
    return np.broadcast_to(np.asarray(values, dtype=complex), shape)


@dataclass(frozen=True)
class ScalarField:
    """A complex-valued function on [0, inf).

    ``growth_rate`` r promises |f(x)| <= C exp(r x^(1-a)), so r < s places f
    in Y_s.  ``kinks`` lists x where f is not smooth and ``support`` an
    x-interval outside which f vanishes; both only steer grids and quadrature
    panels.  ``log_abs`` optionally gives log|f| without overflow.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    growth_rate: float = 0.0
    label: str = "f"
    log_abs: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kinks: tuple = ()
    support: Optional[tuple] = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return _as_complex(self.eval(x), x.shape)

    def logabs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.log_abs is not None:
            return np.broadcast_to(np.asarray(self.log_abs(x), dtype=float), x.shape)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            return np.log(np.abs(self(x)))

    def __mul__(self, c) -> "ScalarField":
        c = complex(c)
        log_abs = None
        if self.log_abs is not None and c != 0:
            base, lc = self.log_abs, math.log(abs(c))
            log_abs = lambda x: base(x) + lc  # noqa: E731
        ev = self.eval
        return replace(self, eval=lambda x: c * ev(x), label=f"{c:g}*{self.label}",
                       log_abs=log_abs)

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return self * -1.0

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if not isinstance(other, ScalarField):
            return NotImplemented
        f, g = self.eval, other.eval
        support = None
        if self.support is not None and other.support is not None:
            support = (min(self.support[0], other.support[0]),
                       max(self.support[1], other.support[1]))
        return ScalarField(
            eval=lambda x: np.asarray(f(x), dtype=complex) + g(x),
            growth_rate=max(self.growth_rate, other.growth_rate),
            label=f"({self.label}+{other.label})",
            kinks=tuple(sorted(set(self.kinks) | set(other.kinks))),
            support=support,
        )

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return self + (-other)


def constant(c: complex = 1.0) -> ScalarField:
    c = complex(c)
    la = math.log(abs(c)) if c != 0 else -math.inf
    return ScalarField(eval=lambda x: np.full(np.shape(x), c, dtype=complex),
                       growth_rate=0.0, label=f"const({c:g})",
                       log_abs=lambda x: np.full(np.shape(x), la),
                       support=(0.0, 0.0) if c == 0 else None)


def call_payoff(strike: float) -> ScalarField:
    # polynomial growth: below C_r exp(r u) for every r > 0, recorded as rate 0
    p = float(strike)
    if p < 0:
        raise ParameterError("strike must be nonnegative")

    def log_abs(x):
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(x - p, 0.0))

    return ScalarField(eval=lambda x: np.maximum(x - p, 0.0), growth_rate=0.0,
                       label=f"call({p:g})", log_abs=log_abs, kinks=(p,))


def bump(center: float, width: float) -> ScalarField:
    """C-infinity bump exp(1 - 1/(1 - r^2)), r = (x - center)/width, peak value 1."""
    if width <= 0:
        raise ParameterError(f"bump width must be positive, got {width}")
    c, w = float(center), float(width)
    lo, hi = max(0.0, c - w), c + w
    if hi <= 0:
        raise ParameterError("bump support lies entirely left of x = 0")

    def ev(x):
        r2 = ((x - c) / w) ** 2
        out = np.zeros(np.shape(x))
        inside = r2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    kinks = tuple(k for k in (c - w, c + w) if k > 0)
    return ScalarField(eval=ev, growth_rate=0.0, label=f"bump({c:g},{w:g})",
                       kinks=kinks, support=(lo, hi))


def eigen(params: ModelParams, lam: complex) -> ScalarField:
    """phi_lam(x) = exp(lam x^(1-a) / (nu(1-a))) = exp(lam z)."""
    lam = complex(lam)
    a, c = params.a, params.c
    rate = lam / c
    return ScalarField(eval=lambda x: np.exp(rate * x ** (1.0 - a)),
                       growth_rate=lam.real / c, label=f"phi({lam:g})",
                       log_abs=lambda x: rate.real * x ** (1.0 - a))


def gaussian_in_z(params: ModelParams, center: float, width: float) -> ScalarField:
    """exp(-(z - center)^2 / (2 width^2)) in the flattening coordinate."""
    if width <= 0:
        raise ParameterError(f"gaussian width must be positive, got {width}")
    zc, w = float(center), float(width)
    return ScalarField(
        eval=lambda x: np.exp(-0.5 * ((to_z(params, x) - zc) / w) ** 2),
        growth_rate=0.0, label=f"gauss_z({zc:g},{w:g})",
        log_abs=lambda x: -0.5 * ((to_z(params, x) - zc) / w) ** 2,
    )


FIELDS = {
    "constant": lambda params, c=1.0: constant(c),
    "call_payoff": lambda params, strike=1.0: call_payoff(strike),
    "bump": lambda params, center=2.0, width=1.0: bump(center, width),
    "eigen": lambda params, lam=0.3: eigen(params, lam),
    "gaussian_in_z": lambda params, center=6.0, width=1.0: gaussian_in_z(params, center, width),
}


def field_library(name: str, params: Optional[ModelParams] = None, **kwargs) -> ScalarField:
    try:
        factory = FIELDS[name]
    except KeyError:
        raise ParameterError(f"unknown field {name!r}; choose from {sorted(FIELDS)}") from None
    if name in ("eigen", "gaussian_in_z") and params is None:
        raise ParameterError(f"field {name!r} needs model parameters")
    if "lam" in kwargs:
        lam = kwargs["lam"]
        kwargs["lam"] = complex(*lam) if isinstance(lam, (list, tuple)) else complex(lam)
    return factory(params, **kwargs)


# -- weight and norm ---------------------------------------------------------

def weight(params: ModelParams, x):
    """(1 + e^u)(1 + e^-u) = 2 + 2 cosh(u), u = s x^(1-a); saturates to inf."""
    u = params.s * to_u(params, x)
    with np.errstate(over="ignore"):
        return 2.0 + 2.0 * np.cosh(u)


def log_weight(params: ModelParams, x):
    u = params.s * to_u(params, x)
    return u + 2.0 * np.log1p(np.exp(-u))


def weighted_quotient(params: ModelParams, f: ScalarField, x) -> np.ndarray:
    """|f(x)| / weight(x), in log space once s u exceeds LOG_SPACE_U."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    su = params.s * to_u(params, x)
    out = np.empty(x.shape)
    near = su <= LOG_SPACE_U
    if near.any():
        out[near] = np.abs(f(x[near])) / weight(params, x[near])
    far = ~near
    if far.any():
        with np.errstate(over="ignore", invalid="ignore"):
            out[far] = np.exp(f.logabs(x[far]) - log_weight(params, x[far]))
    return out


@dataclass(frozen=True)
class GridSpec:
    """Sup-norm grid, uniform in u on [0, u_max] (u_max=None picks one per field)."""

    n: int = 4096
    u_max: Optional[float] = None
    tail_tol: float = 1e-6
    refine: bool = True
    extra_u: tuple = ()
    u_cap: float = 400.0


class NormResult(NamedTuple):
    value: float
    argmax: float
    truncated: bool


def auto_u_max(params: ModelParams, f: ScalarField, grid: GridSpec) -> float:
    s, r = params.s, f.growth_rate
    if f.support is not None:
        return max(to_u(params, f.support[1]) * 1.001, 1e-3)
    gap = s - r
    if gap > 0:
        return min(grid.u_cap, max(8.0, 8.0 * max(1.0, s) / gap))
    return 64.0


def norm_grid(params: ModelParams, f: ScalarField, grid: GridSpec) -> np.ndarray:
    u_max = grid.u_max if grid.u_max is not None else auto_u_max(params, f, grid)
    pts = [np.linspace(0.0, u_max, grid.n)]
    special = [to_u(params, k) for k in f.kinks if k >= 0]
    if f.support is not None:
        lo, hi = (float(to_u(params, e)) for e in f.support)
        special += [lo, hi]
        # supports narrower than the grid spacing still get sampled
        pts.append(np.linspace(lo, min(hi, u_max), 257))
    special += list(grid.extra_u)
    special = np.asarray([v for v in special if 0.0 <= v <= u_max], dtype=float)
    if special.size:
        pts.append(special)
    return np.unique(np.concatenate(pts))


def norm_s(params: ModelParams, f: ScalarField, grid: GridSpec = GridSpec()) -> NormResult:
    """sup_x |f(x)| / weight(x), grid maximisation plus golden-section polish."""
    u = norm_grid(params, f, grid)
    x = from_u(params, u)
    q = weighted_quotient(params, f, x)
    if not np.all(np.isfinite(q)):
        raise FloatingPointError(f"non-finite weighted quotient for {f.label}")
    k = int(np.argmax(q))
    best, best_u = float(q[k]), float(u[k])
    if grid.refine and 0 < k < len(u) - 1 and q[k - 1] < q[k] > q[k + 1]:
        obj = lambda v: -float(weighted_quotient(params, f, from_u(params, v))[0])  # noqa: E731
        res = minimize_scalar(obj, bracket=(u[k - 1], u[k], u[k + 1]), method="golden",
                              options={"xtol": 1e-12})
        if u[k - 1] <= res.x <= u[k + 1] and -res.fun > best:
            best, best_u = float(-res.fun), float(res.x)
    truncated = len(q) > 1 and q[-1] > (1.0 + grid.tail_tol) * q[:-1].max()
    if truncated:
        warnings.warn(f"supremum of {f.label} may live beyond u_max={u[-1]:g}",
                      TruncationWarning, stacklevel=2)
    return NormResult(best, float(from_u(params, best_u)), bool(truncated))


@dataclass
class MembershipResult:
    ok: bool
    diagnostic: str
    u: np.ndarray = field(repr=False, default=None)
    quotients: np.ndarray = field(repr=False, default=None)

    def __bool__(self) -> bool:
        return self.ok


def membership_check(params: ModelParams, f: ScalarField, tol: float = 1e-8,
                     doublings: int = 16) -> MembershipResult:
    """Probe |f|/weight at u = 1, 2, 4, ... and ask for decay below tol.

    Passes when the last probe is below tol and the last three probes are
    non-increasing.
    """
    u = 2.0 ** np.arange(doublings + 1)
    x = from_u(params, u)
    with np.errstate(over="ignore", invalid="ignore"):
        logq = f.logabs(x) - log_weight(params, x)
        q = np.exp(logq)
    if np.any(np.isnan(logq)):
        return MembershipResult(False, "quotient undefined at some probe", u, q)
    # decide in log space so quotients that overflow still compare
    tail = logq[-3:]
    decreasing = bool(np.all(tail[1:] <= tail[:-1]))
    small = bool(logq[-1] < math.log(tol))
    if small and decreasing:
        return MembershipResult(True, f"quotient {q[-1]:.3g} < {tol:g} at u={u[-1]:g}", u, q)
    why = []
    if not small:
        why.append(f"quotient {q[-1]:.3g} >= tol {tol:g} at u={u[-1]:g}")
    if not decreasing:
        why.append("tail not decreasing: " + ", ".join(f"{v:.3g}" for v in q[-3:]))
    return MembershipResult(False, "; ".join(why), u, q)
