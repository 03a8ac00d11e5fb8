"""The transport group S(t)f(x) = f(|x^(1-a) + nu(1-a)t|^(1/(1-a))) and its certificates."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .core import GridSpec, ModelParams, ScalarField, from_u, norm_s, to_u


class TransportResult(NamedTuple):
    value: complex
    characteristic_point: float
    reflected: bool


def transport_point(params: ModelParams, x, t):
    """Characteristic foot |x^(1-a) + nu(1-a)t|^(1/(1-a)) and the sign-flip flag.

    t = 0 returns x untouched, so S(0) is the identity bit for bit.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    y = x ** (1.0 - params.a) + params.c * t
    point = np.abs(y) ** (1.0 / (1.0 - params.a))
    point = np.where(t == 0, x, point)
    return point, y < 0


def transport(params: ModelParams, f: ScalarField, x: float, t: float) -> TransportResult:
    point, refl = transport_point(params, x, t)
    return TransportResult(complex(f(point)), float(point), bool(refl))


def _moved_u(params: ModelParams, u_pts, t: float):
    """u where S(t)f sees f's special points, plus the reflection point itself."""
    ct = params.c * t
    out = []
    for v in u_pts:
        out += [v - ct, -v - ct]
    if ct < 0:
        out.append(-ct)
    return [v for v in out if v >= 0]


def apply_group(params: ModelParams, f: ScalarField, t: float) -> ScalarField:
    """S(t)f as a new evaluator.

    The growth rate in u is unchanged; S(t) only moves the constant of the
    envelope by at most exp(omega |t|).
    """
    t = float(t)
    if t == 0:
        return f
    ev = f.eval

    def moved(x):
        return ev(transport_point(params, x, t)[0])

    log_abs = None
    if f.log_abs is not None:
        la = f.log_abs
        log_abs = lambda x: la(transport_point(params, x, t)[0])  # noqa: E731

    kinks = tuple(float(from_u(params, v))
                  for v in _moved_u(params, [to_u(params, k) for k in f.kinks], t))
    support = None
    if f.support is not None:
        lo, hi = (float(to_u(params, e)) for e in f.support)
        ct = params.c * t
        # preimage of [lo, hi] under u -> |u + ct|, intersected with u >= 0
        pieces = [(lo - ct, hi - ct), (-hi - ct, -lo - ct)]
        pieces = [(max(p, 0.0), q) for p, q in pieces if q >= 0]
        if pieces:
            support = (float(from_u(params, min(p for p, _ in pieces))),
                       float(from_u(params, max(q for _, q in pieces))))
        else:
            support = (0.0, 0.0)
        kinks = kinks + tuple(float(from_u(params, v)) for v in _moved_u(params, [lo, hi], t))
    return ScalarField(eval=moved, growth_rate=f.growth_rate, label=f"S({t:g}){f.label}",
                       log_abs=log_abs, kinks=tuple(sorted(set(kinks))), support=support)


def omega(params: ModelParams) -> float:
    """Growth bound of the group: ||S(t)|| <= exp(omega |t|)."""
    return params.s * params.nu * (1.0 - params.a)


def quasicontraction_margin(params: ModelParams, f: ScalarField, t: float,
                            grid: GridSpec = GridSpec()) -> float:
    """exp(omega |t|) ||f||_s - ||S(t)f||_s, nonnegative up to sup-grid error."""
    if t == 0:
        return 0.0
    before = norm_s(params, f, grid).value
    after = norm_s(params, apply_group(params, f, t), grid).value
    return math.exp(omega(params) * abs(t)) * before - after


def continuity_profile(params: ModelParams, f: ScalarField, t_values: Sequence[float],
                       grid: GridSpec = GridSpec()) -> list:
    """||S(t)f - f||_s for each t."""
    out = []
    for t in t_values:
        if t == 0:
            out.append(0.0)
            continue
        out.append(norm_s(params, apply_group(params, f, t) - f, grid).value)
    return out
