"""Eigen-data of T(t) = h_t(A): the strip, the threshold s*, regions, orbits, witnesses.

phi_lam is an eigenfunction of A for every lam in the strip
0 < Re lam < s(1-a)nu, and T(t) phi_lam = h_t(lam) phi_lam with
h_t(z) = exp(t p(z)), p(z) = z^2 + beta z + gamma.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from .core import ModelParams, ParameterError, eigen, from_z, membership_check, to_z
from .romanov import DEFAULT_EPS, apply_B, reflection_error_bound

GUARD = 1e-12
RATIONAL_TOL = 1e-10
MAX_DENOMINATOR = 64


class Region(str, enum.Enum):
    OMEGA1 = "Omega1"
    OMEGA2 = "Omega2"
    OMEGA3 = "Omega3Candidate"
    BOUNDARY = "Boundary"
    OUTSIDE = "OutsideStrip"


class EmptyIntersection(ValueError):
    """The parabola Re p = 0 misses the strip (s <= s*)."""


class DegenerateRotation(ValueError):
    pass


def p_eval(params: ModelParams, lam: complex) -> complex:
    lam = complex(lam)
    return lam * lam + params.beta * lam + params.gamma


def h_eval(params: ModelParams, lam: complex, t) -> complex:
    return cmath.exp(t * p_eval(params, lam))


# -- threshold ---------------------------------------------------------------

@dataclass(frozen=True)
class ChaosThreshold:
    """s_star is the threshold the intersection argument yields.

    ``s_star_verbatim`` keeps the displayed closed form with its branch test
    sqrt(beta^2 - 4 gamma) >= beta.  The two differ only for beta < 0 < gamma
    < beta^2/4, where both parabola roots are positive and every s > 0
    already meets the strip near Re lam = 0.
    """

    s_star: float
    s_star_verbatim: float
    x_minus: Optional[float] = None
    x_plus: Optional[float] = None

    @property
    def verbatim_agrees(self) -> bool:
        return self.s_star == self.s_star_verbatim


def s_star(params: ModelParams) -> ChaosThreshold:
    b, g = params.beta, params.gamma
    scale = 2.0 * params.nu * (1.0 - params.a)
    disc = b * b - 4.0 * g
    x_minus = x_plus = None
    if disc > 0:
        r = math.sqrt(disc)
        x_minus, x_plus = (-b - r) / 2.0, (-b + r) / 2.0
    if g < b * b / 4.0 and math.sqrt(disc) >= b:
        verbatim = (-b + math.sqrt(disc)) / scale
    else:
        verbatim = 0.0
    # strip reaches the parabola iff gamma > 0 or (gamma <= 0 and W > x_plus)
    threshold = (-b + math.sqrt(disc)) / scale if g <= 0 else 0.0
    return ChaosThreshold(max(threshold, 0.0), verbatim, x_minus, x_plus)


def s_star_scan(params: ModelParams, n_uniform: int = 2048, n_geometric: int = 64,
                iters: int = 200) -> float:
    """Brute force: smallest s for which some x in (0, s(1-a)nu) has x^2 + beta x + gamma > 0.

    The x-scan puts a uniform grid over the open interval plus geometric
    clusters at both ends; s is then bisected.
    """
    frac = np.concatenate([
        np.arange(1, n_uniform) / n_uniform,
        2.0 ** -np.arange(1, n_geometric),
        1.0 - 2.0 ** -np.arange(1, n_geometric),
    ])
    frac = frac[(frac > 0) & (frac < 1)]
    b, g, k = params.beta, params.gamma, (1.0 - params.a) * params.nu

    def admits(s):
        x = frac * s * k
        return bool(np.any(x * x + b * x + g > 0))

    hi = 1.0
    while not admits(hi):
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("scan found no admissible s")
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if admits(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- classification ------------------------------------------------------------

@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    t: float
    p_val: complex
    h_val: complex
    region: Region
    rotation: Optional[Fraction] = None

    def to_dict(self) -> dict:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "t": self.t,
            "p": [self.p_val.real, self.p_val.imag],
            "h": [self.h_val.real, self.h_val.imag],
            "region": self.region.value,
            "rotation": None if self.rotation is None else str(self.rotation),
        }


def in_strip(params: ModelParams, lam: complex, guard: float = GUARD) -> bool:
    return guard < complex(lam).real < params.strip_width - guard


def rational_rotation(turns: float, tol: float = RATIONAL_TOL,
                      max_denominator: int = MAX_DENOMINATOR) -> Optional[Fraction]:
    """Continued-fraction approximant of ``turns`` if it is within tol."""
    frac = Fraction(turns).limit_denominator(max_denominator)
    return frac if abs(float(frac) - turns) <= tol else None


def classify(params: ModelParams, t: float, lam: complex, rational_tol: float = RATIONAL_TOL,
             max_denominator: int = MAX_DENOMINATOR) -> SpectralPoint:
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    lam = complex(lam)
    pv = p_eval(params, lam)
    hv = cmath.exp(t * pv)
    re = lam.real
    width = params.strip_width
    if re <= 0 or re >= width:
        near = min(abs(re), abs(re - width)) <= GUARD
        return SpectralPoint(lam, t, pv, hv, Region.BOUNDARY if near else Region.OUTSIDE)
    if not in_strip(params, lam):
        return SpectralPoint(lam, t, pv, hv, Region.BOUNDARY)
    if abs(pv.real) <= rational_tol:
        rot = rational_rotation(t * pv.imag / (2.0 * math.pi), rational_tol, max_denominator)
        if rot is not None:
            return SpectralPoint(lam, t, pv, hv, Region.OMEGA3, rot)
    if pv.real > GUARD:
        region = Region.OMEGA1
    elif pv.real < -GUARD:
        region = Region.OMEGA2
    else:
        region = Region.BOUNDARY
    return SpectralPoint(lam, t, pv, hv, region)


# -- the parabola Re p = 0 ---------------------------------------------------

def admissible_intervals(params: ModelParams, s: float) -> List[tuple]:
    """Open x-intervals inside (0, s(1-a)nu) on which x^2 + beta x + gamma > 0."""
    width = s * (1.0 - params.a) * params.nu
    b, g = params.beta, params.gamma
    disc = b * b - 4.0 * g
    if disc < 0:
        raw = [(0.0, width)]
    else:
        # cancellation-free roots: the small one comes from the product g
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        roots = sorted((q, g / q)) if q != 0 else [0.0, 0.0]
        xm, xp = roots
        raw = [(0.0, min(xm, width)), (max(xp, 0.0), width)]
    return [(lo, hi) for lo, hi in raw if hi > lo]


def _on_parabola(params: ModelParams, x: float, upper: bool = True) -> complex:
    rad = x * x + params.beta * x + params.gamma
    if rad <= 0:
        raise EmptyIntersection(f"x={x} gives nonpositive radicand {rad}")
    y = math.sqrt(rad)
    return complex(x, y if upper else -y)


def parabola_section(params: ModelParams, s: float, n: int, t: float = 1.0) -> List[SpectralPoint]:
    """n strip points with Re p = 0, evenly spread over the longest admissible interval."""
    thr = s_star(params).s_star
    if s <= thr:
        raise EmptyIntersection(f"s={s} must exceed s*={thr}")
    intervals = admissible_intervals(params, s)
    if not intervals:
        raise EmptyIntersection(f"no admissible x for s={s}")
    lo, hi = max(intervals, key=lambda iv: iv[1] - iv[0])
    xs = lo + (hi - lo) * np.arange(1, n + 1) / (n + 1)
    sp = params.with_s(s)
    return [classify(sp, t, _on_parabola(params, float(x))) for x in xs]


# -- periodic orbits ---------------------------------------------------------

@dataclass(frozen=True)
class PeriodicOrbit:
    point: SpectralPoint
    t0: float
    m: int
    rotation: Fraction

    def scalar_defect(self) -> float:
        """|h_t0(lam)^m - 1| computed as exp(m t0 p) - 1."""
        return abs(cmath.exp(self.m * self.t0 * self.point.p_val) - 1.0)

    def to_dict(self) -> dict:
        return {"point": self.point.to_dict(), "t0": self.t0, "m": self.m,
                "rotation": str(self.rotation), "scalar_defect": self.scalar_defect()}


def find_periodic(params: ModelParams, s: float, x_seed: float, rotation) -> PeriodicOrbit:
    """phi_lam with h_t0(lam) = exp(2 pi i n/m), lam on the parabola above x_seed."""
    rotation = Fraction(rotation)
    if rotation <= 0:
        raise ValueError("rotation must be a positive rational n/m")
    thr = s_star(params).s_star
    if s <= thr:
        raise EmptyIntersection(f"s={s} must exceed s*={thr}")
    width = s * (1.0 - params.a) * params.nu
    if not 0 < x_seed < width:
        raise ValueError(f"x_seed={x_seed} outside the strip (0, {width})")
    lam = _on_parabola(params, x_seed)
    im_p = p_eval(params, lam).imag
    if im_p == 0:
        raise DegenerateRotation(f"Im p(lambda) = 0 at lambda={lam}")
    if im_p < 0:
        lam = lam.conjugate()
        im_p = -im_p
    t0 = 2.0 * math.pi * float(rotation) / im_p
    sp = params.with_s(s)
    return PeriodicOrbit(classify(sp, t0, lam), t0, rotation.denominator, rotation)


def exclusion_zone(params: ModelParams, lam: complex, horizon: float, tol: float) -> float:
    """Smallest z (on a 1e-3 grid) past which the mirrored-branch error is <= tol."""
    z = np.arange(0.0, 400.0, 1e-3)
    b = reflection_error_bound(params, lam, horizon, from_z(params, z))
    ok = np.flatnonzero(b > tol)
    return float(z[ok[-1] + 1]) if ok.size else 0.0


@dataclass
class PeriodicityCheck:
    deviation: float
    z_min: float
    probes_used: int
    probes_dropped: int


MAX_NESTED_STEPS = 2


def verify_periodicity(params: ModelParams, orbit: PeriodicOrbit, probes, periods: int = 1,
                       eps: float = DEFAULT_EPS, tol: float = 1e-4, f=None) -> PeriodicityCheck:
    """Evolve phi_lam through m*periods steps of T(t0) and compare with phi_lam.

    Probes with z below the zone where the mirrored branch of the half-line
    integral can exceed tol/10 are dropped.  Each step is evaluated through
    the previous one, so m*periods is limited to MAX_NESTED_STEPS.
    """
    lam = orbit.point.lam
    f0 = eigen(params, lam) if f is None else f
    steps = orbit.m * periods
    if steps > MAX_NESTED_STEPS:
        # each step quadratures the previous one: cost ~ probes * nodes^steps
        raise ValueError(f"m*periods = {steps} nested steps of T(t0); at most "
                         f"{MAX_NESTED_STEPS} are affordable")
    probes = np.asarray(probes, dtype=float)
    z_min = exclusion_zone(params, lam, orbit.t0 * steps, tol / 10.0) if f is None else 0.0
    keep = probes[to_z(params, probes) >= z_min]
    if keep.size == 0:
        return PeriodicityCheck(math.inf, z_min, 0, probes.size)
    g = f0
    for _ in range(steps):
        g = apply_B(params, g, orbit.t0, eps=eps).field
    ref = f0(keep)
    got = g(keep)
    dev = float(np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1e-300)))
    return PeriodicityCheck(dev, z_min, int(keep.size), int(probes.size - keep.size))


# -- Godefroy-Shapiro witnesses ----------------------------------------------

def certificate_sequence(hv: complex, n_iter: int, direction: str) -> np.ndarray:
    """|h|^-n for the right inverse Z, |h|^n for L, n = 1..n_iter."""
    n = np.arange(1, n_iter + 1)
    sign = -1.0 if direction == "Z" else 1.0
    return np.exp(sign * n * math.log(abs(hv)))


@dataclass
class Witness:
    point: SpectralPoint
    direction: str
    certificate: np.ndarray = field(repr=False)
    decay_index: Optional[int]
    monotone: bool
    lz_defect: float
    member: bool

    def to_dict(self) -> dict:
        return {"point": self.point.to_dict(), "direction": self.direction,
                "final": float(self.certificate[-1]), "decay_index": self.decay_index,
                "monotone": self.monotone, "lz_defect": self.lz_defect,
                "in_Y_s": self.member}


@dataclass
class WitnessReport:
    s: float
    t: float
    n_iter: int
    decay_tol: float
    omega1: List[Witness]
    omega2: List[Witness]
    attempts: int
    failures: List[str]

    @property
    def all_decay(self) -> bool:
        ws = self.omega1 + self.omega2
        return bool(ws) and all(w.decay_index is not None and w.monotone for w in ws)

    @property
    def max_lz_defect(self) -> float:
        return max((w.lz_defect for w in self.omega1 + self.omega2), default=0.0)

    def summary(self) -> dict:
        return {"s": self.s, "t": self.t, "n_iter": self.n_iter, "decay_tol": self.decay_tol,
                "n_omega1": len(self.omega1), "n_omega2": len(self.omega2),
                "all_decay": self.all_decay, "max_lz_defect": self.max_lz_defect,
                "attempts": self.attempts, "failures": list(self.failures)}

    def to_dict(self) -> dict:
        d = self.summary()
        d["omega1"] = [w.to_dict() for w in self.omega1]
        d["omega2"] = [w.to_dict() for w in self.omega2]
        return d


def _monotone(cert: np.ndarray) -> bool:
    # strictly decreasing until the sequence underflows to zero
    return bool(np.all((np.diff(cert) < 0) | (cert[1:] == 0.0)))


def _witness(params, pt: SpectralPoint, n_iter: int, decay_tol: float) -> Witness:
    direction = "Z" if pt.region is Region.OMEGA1 else "L"
    cert = certificate_sequence(pt.h_val, n_iter, direction)
    below = np.flatnonzero(cert < decay_tol)
    lz = abs(pt.h_val * (1.0 / pt.h_val) - 1.0)
    member = bool(membership_check(params, eigen(params, pt.lam)))
    return Witness(pt, direction, cert, int(below[0]) + 1 if below.size else None,
                   _monotone(cert), lz, member)


def gsc_witness_bundle(params: ModelParams, s: float, t: float, n_points: int = 8,
                       n_iter: int = 200, seed: int = 0, decay_tol: float = 1e-8,
                       max_attempts: int = 200_000) -> WitnessReport:
    """Rejection-sample n_points eigenvalues in each of Omega1 and Omega2.

    Only points whose certificate can reach decay_tol within n_iter steps are
    kept, i.e. t |Re p(lam)| >= ln(1/decay_tol) / n_iter.
    """
    thr = s_star(params).s_star
    if s <= thr:
        raise EmptyIntersection(f"s={s} must exceed s*={thr}")
    sp = params.with_s(s)
    width = sp.strip_width
    ymax = 2.0 * (1.0 + max(abs(sp.beta), math.sqrt(1.0 + abs(sp.gamma)))) * (1.0 + width)
    margin = math.log(1.0 / decay_tol) / n_iter
    rng = np.random.default_rng(seed)
    picked = {Region.OMEGA1: [], Region.OMEGA2: []}
    attempts = 0
    while attempts < max_attempts and min(len(v) for v in picked.values()) < n_points:
        batch = min(256, max_attempts - attempts)
        re = rng.uniform(0.0, width, batch)
        im = rng.uniform(-ymax, ymax, batch)
        for lam in re + 1j * im:
            attempts += 1
            pt = classify(sp, t, lam)
            bucket = picked.get(pt.region)
            if bucket is None or len(bucket) >= n_points:
                continue
            if t * abs(pt.p_val.real) < margin:
                continue
            bucket.append(pt)
    failures = [f"{r.value}: found {len(v)} of {n_points} in {attempts} attempts"
                for r, v in picked.items() if len(v) < n_points]
    w1 = [_witness(sp, pt, n_iter, decay_tol) for pt in picked[Region.OMEGA1]]
    w2 = [_witness(sp, pt, n_iter, decay_tol) for pt in picked[Region.OMEGA2]]
    return WitnessReport(s, t, n_iter, decay_tol, w1, w2, attempts, failures)


def span_iterate(params: ModelParams, t: float, coefficients: Sequence[complex],
                 lambdas: Sequence[complex], n: int, direction: str,
                 check: bool = True) -> List[complex]:
    """Coefficients of L^n (direction 'L') or Z^n ('Z') applied to sum_j alpha_j phi_lam_j.

    With ``check`` the eigenvalues must sit in the region where the chosen
    iteration decays (Omega1 for Z, Omega2 for L).
    """
    if direction not in ("L", "Z"):
        raise ValueError("direction must be 'L' or 'Z'")
    if len(coefficients) != len(lambdas):
        raise ValueError("coefficients and lambdas differ in length")
    want = Region.OMEGA1 if direction == "Z" else Region.OMEGA2
    sign = -1.0 if direction == "Z" else 1.0
    out = []
    for alpha, lam in zip(coefficients, lambdas):
        pt = classify(params, t, lam)
        if check and n > 0 and pt.region is not want:
            raise ParameterError(f"lambda={lam} is {pt.region.value}, direction {direction} "
                                 f"needs {want.value}")
        out.append(complex(alpha) * cmath.exp(sign * n * t * pt.p_val))
    return out
