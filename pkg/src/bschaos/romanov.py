"""T(t) = exp(t p(A)) through Romanov's formula for exp(tA^2).

    exp(tA^2) f(x) = (4 pi t)^(-1/2) int_0^inf exp(-y^2/4t) [S(y)f(x) + S(-y)f(x)] dy

and exp(t p(A)) = exp(gamma t) S(beta t) exp(tA^2).  The integral is cut at a
radius where the Gaussian tail, weighted by the field's exponential envelope,
drops below ``eps``, and evaluated with composite Gauss-Legendre panels.  In
the z coordinate S(-y)f has a kink at y = z, so a panel edge is put there
for every evaluation point.
"""

from __future__ import annotations

import cmath
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfc

from .core import ModelParams, ScalarField, to_z
from .transport import omega, transport_point

DEFAULT_EPS = 1e-13
CHUNK_NODES = 1 << 20
# compact supports are cut into this many extra panels (in z)
SUPPORT_PIECES = 32


class NodeBudgetWarning(UserWarning):
    pass


def max_threads() -> int:
    """Worker cap from BSCHAOS_THREADS (0 or unset: one per CPU, at most 8)."""
    raw = os.environ.get("BSCHAOS_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("BSCHAOS_THREADS must be >= 0")
    return n if n > 0 else min(8, os.cpu_count() or 1)


def _effective_t(t) -> float:
    # |exp(-y^2/4t)| = exp(-y^2 Re(1/t)/4)
    t = complex(t)
    if t.real <= 0:
        raise ValueError(f"t must have positive real part, got {t}")
    return abs(t) ** 2 / t.real


@dataclass(frozen=True)
class QuadratureSpec:
    t: complex
    eps: float
    rho: float
    y_max: float
    panels: int
    nodes_per_panel: int

    @property
    def breaks(self) -> np.ndarray:
        return np.linspace(0.0, self.y_max, self.panels + 1)

    def n_nodes(self, extra_breaks: int = 1) -> int:
        return (self.panels + extra_breaks) * self.nodes_per_panel


def tail_radius(t: float, rho: float, eps: float) -> float:
    """Smallest y_max with exp(rho^2 t - (y_max - 2 rho t)^2 / 4t) <= eps."""
    return 2.0 * rho * t + 2.0 * math.sqrt(t * (math.log(1.0 / eps) + rho ** 2 * t))


def build_quadrature(params: ModelParams, t, growth_rate: float = 0.0,
                     eps: float = DEFAULT_EPS, nodes_per_panel: int = 16) -> QuadratureSpec:
    if not 0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    if nodes_per_panel < 8:
        raise ValueError("nodes_per_panel must be at least 8")
    if isinstance(t, complex):
        t_eff = _effective_t(t)
    else:
        t = float(t)
        if t <= 0:
            raise ValueError(f"t must be positive, got {t}")
        t_eff = t
    rho = max(omega(params), growth_rate * params.c, 0.0)
    y_max = tail_radius(t_eff, rho, eps)
    panels = max(1, math.ceil(y_max / math.sqrt(t_eff)))
    return QuadratureSpec(t, eps, rho, y_max, panels, nodes_per_panel)


def _panel_breaks(quad: QuadratureSpec, z: np.ndarray, kinks_z: Sequence[float]) -> np.ndarray:
    """Per-point panel edges: the uniform edges plus every y where the integrand kinks."""
    extra = [z]
    for k in kinks_z:
        extra += [k - z, z - k, k + z]
    extra = np.clip(np.stack(extra, axis=1), 0.0, quad.y_max)
    base = np.broadcast_to(quad.breaks, (z.size, quad.panels + 1))
    return np.sort(np.concatenate([base, extra], axis=1), axis=1)


def _romanov_chunk(params, f, quad, kinks_z, gl_x, gl_w, x):
    t = quad.t
    z = to_z(params, x)
    edges = _panel_breaks(quad, z, kinks_z)
    lo, hi = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (hi - lo)
    y = (lo + half)[..., None] + half[..., None] * gl_x
    w = half[..., None] * gl_w
    kernel = np.exp(-y * y / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)
    xb = x[:, None, None]
    plus = f(transport_point(params, xb, y)[0])
    minus = f(transport_point(params, xb, -y)[0])
    return np.sum(w * kernel * (plus + minus), axis=(1, 2))


def romanov_eval(params: ModelParams, f: ScalarField, quad: QuadratureSpec, x) -> np.ndarray:
    """Quadrature value of exp(tA^2) f at the points x."""
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    kinks_z = {float(to_z(params, k)) for k in f.kinks if k >= 0}
    if f.support is not None:
        lo, hi = (float(to_z(params, e)) for e in f.support)
        kinks_z.update(np.linspace(lo, hi, SUPPORT_PIECES + 1).tolist())
    kinks_z = sorted(kinks_z)
    gl_x, gl_w = np.polynomial.legendre.leggauss(quad.nodes_per_panel)
    per_point = (quad.panels + 1 + 3 * len(kinks_z)) * quad.nodes_per_panel * 2
    step = max(1, CHUNK_NODES // per_point)
    chunks = [flat[i:i + step] for i in range(0, flat.size, step)]
    work = lambda c: _romanov_chunk(params, f, quad, kinks_z, gl_x, gl_w, c)  # noqa: E731
    threads = min(max_threads(), len(chunks))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    out = np.concatenate(parts) if parts else np.zeros(0, dtype=complex)
    return out.reshape(x.shape)


@dataclass(frozen=True)
class EvolvedField:
    field: ScalarField
    t: complex
    quad: QuadratureSpec
    params: ModelParams

    def __call__(self, x):
        return self.field(x)


def apply_Asq(params: ModelParams, f: ScalarField, t, quad: QuadratureSpec = None,
              eps: float = DEFAULT_EPS) -> EvolvedField:
    """exp(tA^2) f; complex t with Re t > 0 is accepted."""
    if quad is None:
        quad = build_quadrature(params, t, f.growth_rate, eps)
    field = ScalarField(eval=lambda x: romanov_eval(params, f, quad, x),
                        growth_rate=f.growth_rate, label=f"exp({t:g}A^2){f.label}")
    return EvolvedField(field, t, quad, params)


def apply_B(params: ModelParams, f: ScalarField, t: float, quad: QuadratureSpec = None,
            eps: float = DEFAULT_EPS) -> EvolvedField:
    """T(t)f = exp(gamma t) S(beta t) exp(tA^2) f."""
    t = float(t)
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    inner = apply_Asq(params, f, t, quad, eps)
    scale = math.exp(params.gamma * t)
    shift = params.beta * t

    def ev(x):
        if shift != 0:
            x = transport_point(params, x, shift)[0]
        return scale * inner.field(x)

    field = ScalarField(eval=ev, growth_rate=f.growth_rate, label=f"T({t:g}){f.label}")
    return EvolvedField(field, t, inner.quad, params)


def solution(params: ModelParams, f: ScalarField, eps: float = DEFAULT_EPS,
             nodes_per_panel: int = 16) -> Callable:
    """u(x, t) = T(t)f(x), with the per-t quadrature cached."""
    cache = {}

    def u(x, t):
        t = float(t)
        if t == 0:
            return f(x)
        if t not in cache:
            quad = build_quadrature(params, t, f.growth_rate, eps, nodes_per_panel)
            cache[t] = apply_B(params, f, t, quad=quad)
        return cache[t](x)

    return u


def semigroup_defect(params: ModelParams, f: ScalarField, t1: float, t2: float,
                     probes, eps: float = DEFAULT_EPS, node_budget: float = 5e7) -> float:
    """max over probes of |T(t1)T(t2)f - T(t1+t2)f| / (1 + |T(t1+t2)f|)."""
    if t1 <= 0 or t2 <= 0:
        raise ValueError("t1 and t2 must be positive")
    probes = np.asarray(probes, dtype=float)
    inner = apply_B(params, f, t2, eps=eps)
    outer = apply_B(params, inner.field, t1, eps=eps)
    cost = probes.size * outer.quad.n_nodes() * 2 * inner.quad.n_nodes() * 2
    if cost > node_budget:
        warnings.warn(f"nested quadrature needs {cost:.3g} evaluations (budget {node_budget:.3g})",
                      NodeBudgetWarning, stacklevel=2)
    nested = outer(probes)
    direct = apply_B(params, f, t1 + t2, eps=eps)(probes)
    return float(np.max(np.abs(nested - direct) / (1.0 + np.abs(direct))))


def reflection_error_bound(params: ModelParams, lam: complex, t: float, x) -> np.ndarray:
    """Bound on |T(t)phi_lam - h_t(lam) phi_lam| / |h_t(lam) phi_lam|.

    The half-line integral differs from the full-line Gaussian convolution of
    exp(lam z) by the mass the kernel puts on the mirrored branch; with
    Z = z + beta t this is at most

        exp(-2 Re(lam) Z + Im(lam)^2 t) erfc((Z - 2 Re(lam) t) / (2 sqrt t)).
    """
    lam = complex(lam)
    zz = to_z(params, x) + params.beta * t
    lr, li = lam.real, lam.imag
    arg = (zz - 2.0 * lr * t) / (2.0 * math.sqrt(t))
    with np.errstate(over="ignore"):
        bound = np.exp(-2.0 * lr * zz + li * li * t) * erfc(arg)
    return np.where(zz > 0, bound, np.inf)


def h(params: ModelParams, lam: complex, t) -> complex:
    lam = complex(lam)
    return cmath.exp(t * (lam * lam + params.beta * lam + params.gamma))
