"""Independent checks: a Crank-Nicolson solver in z, a PDE residual in x, and kernel oracles.

In z = x^(1-a)/(nu(1-a)) the equation becomes w_t = w_zz + beta w_z + gamma w
with constant coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from scipy import integrate
from scipy.linalg import get_lapack_funcs
from scipy.special import erfc, erfcx

from .core import ModelParams, ScalarField, from_z, to_z, weighted_quotient
from .romanov import DEFAULT_EPS, apply_B, solution

__all__ = ["to_z", "from_z", "ZGrid", "make_zgrid", "GridSolution", "fd_solve",
           "pde_residual", "cross_compare", "image_heat", "neumann_heat_eigen",
           "fd_self_residual", "TruncationError", "ResidualLevel", "residual_study",
           "resolved_ratios"]

ACCURACY_DIFFUSION_NUMBER = 5.0


class TruncationError(ValueError):
    pass


@dataclass(frozen=True)
class ZGrid:
    z_max: float
    n_z: int
    dz: float
    dt: float
    n_t: int

    @property
    def t_final(self) -> float:
        return self.dt * self.n_t

    @property
    def diffusion_number(self) -> float:
        return self.dt / self.dz ** 2

    @property
    def accuracy_flag(self) -> bool:
        """CN stays stable, but above this diffusion number rough modes ring."""
        return self.diffusion_number > ACCURACY_DIFFUSION_NUMBER

    @property
    def z(self) -> np.ndarray:
        return self.dz * np.arange(self.n_z + 1)


def make_zgrid(z_max: float, n_z: int, t_final: float, n_t: Optional[int] = None) -> ZGrid:
    """Uniform grid on [0, z_max]; by default dt = dz / 8."""
    if n_z < 64:
        raise ValueError("n_z must be at least 64")
    if z_max <= 0 or t_final <= 0:
        raise ValueError("z_max and t_final must be positive")
    dz = z_max / n_z
    if n_t is None:
        n_t = max(16, math.ceil(8.0 * t_final / dz))
    return ZGrid(float(z_max), int(n_z), dz, t_final / n_t, int(n_t))


@dataclass
class GridSolution:
    grid: ZGrid
    values: np.ndarray
    t: float
    boundary: str

    @property
    def z(self) -> np.ndarray:
        return self.grid.z

    def at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return (np.interp(z, self.z, self.values.real)
                + 1j * np.interp(z, self.z, self.values.imag))

    def integral(self) -> complex:
        return complex(integrate.trapezoid(self.values, self.z))


def _operator(n_nodes: int, dz: float, beta: float, left: str):
    """Tridiagonal bands (sub, diag, sup) of w_zz + beta w_z.

    left='reflect' puts the even ghost w_-1 = w_1 at node 0 with a one-sided
    drift; left='free' is the w_zz = 0 outflow used at both ends of the
    mirrored domain.  The right end always uses w_zz = 0.
    """
    d2, d1 = 1.0 / dz ** 2, beta / (2.0 * dz)
    sub = np.full(n_nodes - 1, d2 - d1)
    sup = np.full(n_nodes - 1, d2 + d1)
    diag = np.full(n_nodes, -2.0 * d2)
    if left == "reflect":
        diag[0], sup[0] = -2.0 * d2 - beta / dz, 2.0 * d2 + beta / dz
    else:
        diag[0], sup[0] = -beta / dz, beta / dz
    diag[-1], sub[-1] = beta / dz, -beta / dz
    return sub, diag, sup


def _march(values: np.ndarray, dz: float, dt: float, n_t: int, beta: float, left: str):
    """Crank-Nicolson steps; yields the state after each step."""
    n = values.size
    sub, diag, sup = _operator(n, dz, beta, left)
    h = 0.5 * dt
    gttrf, gttrs = get_lapack_funcs(("gttrf", "gttrs"), dtype=np.complex128)
    dl, d, du, du2, ipiv, info = gttrf(-h * sub + 0j, 1.0 - h * diag + 0j, -h * sup + 0j)
    if info != 0:
        raise np.linalg.LinAlgError(f"tridiagonal factorisation failed (info={info})")
    w = values.astype(complex)
    for _ in range(n_t):
        rhs = (1.0 + h * diag) * w
        rhs[1:] += h * sub * w[:-1]
        rhs[:-1] += h * sup * w[1:]
        w, info = gttrs(dl, d, du, du2, ipiv, rhs)
        yield w


def _initial(params: ModelParams, f: ScalarField, grid: ZGrid, check: bool) -> np.ndarray:
    z = grid.z
    x = from_z(params, z)
    if check:
        far = z > 0.8 * grid.z_max
        q = weighted_quotient(params, f, x[far])
        if q.size and q.max() > 1e-10:
            raise TruncationError(
                f"initial data reaches truncation boundary: weighted value {q.max():.3g} "
                f"beyond z={0.8 * grid.z_max:g}")
    return f(x)


def _resolve_boundary(params: ModelParams, boundary: str) -> str:
    if boundary == "auto":
        return "reflect" if params.beta == 0 else "mirror"
    if boundary not in ("reflect", "mirror"):
        raise ValueError(f"unknown boundary treatment {boundary!r}")
    return boundary


def _levels(params, f, grid, boundary, check):
    if grid.dz * abs(params.beta) / 2.0 >= 1.0:
        raise ValueError(f"cell Peclet number {grid.dz * abs(params.beta) / 2:g} >= 1")
    w0 = _initial(params, f, grid, check)
    if boundary == "reflect":
        return _march(w0, grid.dz, grid.dt, grid.n_t, params.beta, "reflect"), 0
    full = np.concatenate([w0[:0:-1], w0])
    return _march(full, grid.dz, grid.dt, grid.n_t, params.beta, "free"), grid.n_z


def fd_solve(params: ModelParams, f: ScalarField, t_final: float, grid: ZGrid,
             boundary: str = "auto", check: bool = True) -> GridSolution:
    """Crank-Nicolson for w_t = w_zz + beta w_z, times exp(gamma t) at the end.

    boundary='reflect' solves on [0, z_max] with the even ghost node at z = 0.
    boundary='mirror' solves on [-z_max, z_max] from the even extension of
    the data, i.e. with no condition at z = 0, and returns the z >= 0 half.
    For beta = 0 the two agree; 'auto' uses 'reflect' exactly then.
    """
    if not math.isclose(grid.t_final, t_final, rel_tol=1e-12):
        raise ValueError(f"grid is built for t={grid.t_final}, asked for {t_final}")
    boundary = _resolve_boundary(params, boundary)
    levels, offset = _levels(params, f, grid, boundary, check)
    w = None
    for w in levels:
        pass
    values = w[offset:] * math.exp(params.gamma * t_final)
    return GridSolution(grid, values, t_final, boundary)


def fd_self_residual(params: ModelParams, f: ScalarField, grid: ZGrid,
                     boundary: str = "auto", check: bool = True) -> float:
    """Leapfrog-in-time, central-in-space residual of the CN solution on its own grid.

    Uses the last three time levels; interior nodes with z in (0.1, 0.8) z_max.
    The gamma term is omitted because the solver handles it exactly.
    """
    boundary = _resolve_boundary(params, boundary)
    levels, offset = _levels(params, f, grid, boundary, check)
    last = []
    for w in levels:
        last.append(w)
        if len(last) > 3:
            last.pop(0)
    prev, mid, nxt = (v[offset:] for v in last)
    dz, dt = grid.dz, grid.dt
    j = np.arange(1, grid.n_z)
    zj = j * dz
    j = j[(zj > 0.1 * grid.z_max) & (zj < 0.8 * grid.z_max)]
    w_t = (nxt[j] - prev[j]) / (2.0 * dt)
    w_zz = (mid[j + 1] - 2.0 * mid[j] + mid[j - 1]) / dz ** 2
    w_z = (mid[j + 1] - mid[j - 1]) / (2.0 * dz)
    return float(np.max(np.abs(w_t - w_zz - params.beta * w_z)))


def cross_compare(params: ModelParams, f: ScalarField, t_final: float, grid: ZGrid,
                  probes, boundary: str = "auto", eps: float = DEFAULT_EPS) -> float:
    """max |FD - T(t)f| / max |T(t)f| over the probes (FD interpolated linearly in z)."""
    probes = np.asarray(probes, dtype=float)
    z = to_z(params, probes)
    if np.any(z <= 0.1 * grid.z_max) or np.any(z >= 0.8 * grid.z_max):
        raise ValueError("probes must map into (0.1 z_max, 0.8 z_max)")
    sol = fd_solve(params, f, t_final, grid, boundary)
    ref = apply_B(params, f, t_final, eps=eps)(probes)
    return float(np.max(np.abs(sol.at(z) - ref)) / np.max(np.abs(ref)))


def pde_residual(params: ModelParams, u: Callable, x: float, t: float, h: float,
                 dtau: float) -> complex:
    """u_t - [nu^2 x^2a u_xx + nu^2 a x^(2a-1) u_x + beta nu x^a u_x + gamma u], central differences."""
    if x <= 2.0 * h:
        raise ValueError(f"stencil out of domain: need x > 2h, got x={x}, h={h}")
    if t <= dtau:
        raise ValueError(f"stencil out of domain: need t > dtau, got t={t}, dtau={dtau}")
    a, nu = params.a, params.nu
    xs = np.array([x - h, x, x + h])
    um, u0, up = np.asarray(u(xs, t), dtype=complex)
    u_t = (complex(u(np.array([x]), t + dtau)[0]) - complex(u(np.array([x]), t - dtau)[0])) / (2 * dtau)
    u_x = (up - um) / (2.0 * h)
    u_xx = (up - 2.0 * u0 + um) / h ** 2
    rhs = (nu ** 2 * x ** (2 * a) * u_xx + nu ** 2 * a * x ** (2 * a - 1) * u_x
           + params.beta * nu * x ** a * u_x + params.gamma * u0)
    return u_t - rhs


class ResidualLevel(NamedTuple):
    h: float
    residual: float
    ratio: float
    noise_floor: float
    resolved: bool


def residual_study(params: ModelParams, f: ScalarField, x, t: float, h0: float = 0.125,
                   levels: int = 7, eps: float = DEFAULT_EPS,
                   nodes_per_panel: int = 32) -> List[ResidualLevel]:
    """max over x of |pde_residual| of u = T(t)f for h = dtau = h0/2^k.

    The quadrature error delta of u is measured against an evaluation with
    twice the nodes per panel at the stencil points; the stencil amplifies it to at most
    delta (4 nu^2 x^2a / h^2 + 1/dtau + ...), which is the noise floor.  A
    level is resolved when its residual clears ten times that floor; ratios
    are only meaningful between resolved levels.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t <= h0:
        raise ValueError(f"need t > h0 for the time stencil, got t={t}, h0={h0}")
    u = solution(params, f, eps=eps, nodes_per_panel=nodes_per_panel)
    ref = solution(params, f, eps=eps, nodes_per_panel=2 * nodes_per_panel)
    pts = np.concatenate([x, x - h0, x + h0])
    delta = max(float(np.max(np.abs(u(pts, tt) - ref(pts, tt)))) for tt in (t - h0, t, t + h0))
    delta = max(delta, eps * float(np.max(np.abs(ref(pts, t)))))
    a, nu = params.a, params.nu
    xmax = float(np.max(x))
    out = []
    prev = None
    for k in range(levels):
        step = h0 / 2 ** k
        r = max(abs(pde_residual(params, u, float(xi), t, step, step)) for xi in x)
        amp = (4.0 * nu ** 2 * xmax ** (2 * a) / step ** 2
               + (nu ** 2 * a * xmax ** (2 * a - 1) + abs(params.beta) * nu * xmax ** a) / step
               + 1.0 / step + abs(params.gamma))
        floor = delta * amp
        ratio = math.nan if prev is None else prev / r
        out.append(ResidualLevel(step, r, ratio, floor, r > 10.0 * floor))
        prev = r
    return out


def resolved_ratios(levels: List[ResidualLevel]) -> List[float]:
    return [cur.ratio for old, cur in zip(levels, levels[1:]) if old.resolved and cur.resolved]


# -- kernel oracles ----------------------------------------------------------

def _gauss(d, t):
    return np.exp(-d * d / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


def image_heat(params: ModelParams, f: ScalarField, t: float, x, zeta_max: Optional[float] = None,
               epsabs: float = 1e-15, epsrel: float = 1e-13) -> np.ndarray:
    """Neumann half-line heat semigroup by images, int_0^inf [g(z-zeta) + g(z+zeta)] F(zeta) dzeta.

    F(zeta) = f(from_z(zeta)), integrated adaptively with QUADPACK.  Serves as
    the oracle for exp(tA^2) f; only bounded f are sensible here.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    F = lambda zeta: f(from_z(params, np.array([zeta])))[0]  # noqa: E731
    if f.support is not None:
        lo, hi = (float(to_z(params, e)) for e in f.support)
    else:
        lo, hi = 0.0, zeta_max
    breaks = [float(to_z(params, k)) for k in f.kinks]
    out = np.empty(x.size, dtype=complex)
    for i, xi in enumerate(x):
        z = float(to_z(params, xi))
        a, b = lo, hi if hi is not None else z + 40.0 * math.sqrt(t) + 40.0
        pts = sorted({p for p in breaks + [z] if a < p < b})
        re = lambda q: (F(q) * (_gauss(z - q, t) + _gauss(z + q, t))).real  # noqa: E731
        im = lambda q: (F(q) * (_gauss(z - q, t) + _gauss(z + q, t))).imag  # noqa: E731
        kw = dict(epsabs=epsabs, epsrel=epsrel, limit=400, points=pts or None)
        vr = integrate.quad(re, a, b, **kw)[0]
        vi = integrate.quad(im, a, b, **kw)[0]
        out[i] = vr + 1j * vi
    return out


def neumann_heat_eigen(lam: complex, t: float, z) -> np.ndarray:
    """Closed form of the half-line Neumann heat flow of exp(lam z) at time t.

    Equals exp(lam z + lam^2 t) exactly on the full line; on the half line the
    even extension exp(lam |z|) adds the mirrored term.  Written with erfcx to
    avoid overflow.
    """
    lam = complex(lam)
    z = np.asarray(z, dtype=float)
    rt = 2.0 * math.sqrt(t)
    w1 = -(z + 2.0 * lam * t) / rt
    w2 = (z - 2.0 * lam * t) / rt
    direct = 0.5 * _exp_erfc(lam * z + lam * lam * t, w1)
    mirror = 0.5 * _exp_erfc(-lam * z + lam * lam * t, w2)
    return direct + mirror


def _exp_erfc(expo, w):
    """exp(expo) * erfc(w) without intermediate overflow."""
    expo, w = np.broadcast_arrays(np.asarray(expo, dtype=complex), np.asarray(w, dtype=complex))
    out = np.empty(w.shape, dtype=complex)
    pos = w.real >= 0
    out[pos] = np.exp(expo[pos] - w[pos] ** 2) * erfcx(w[pos])
    out[~pos] = np.exp(expo[~pos]) * erfc(w[~pos])
    return out
