"""Spreading speeds from the tilted eigenvalue curve.

The right spreading speed is the minimum over lambda > 0 of k(lambda)/lambda
(mirrored for the left one); with k convex and k(0) > 0 that quotient is
unimodal, so a golden-section search finds the minimizer.  The module also
evaluates the analytic speed bounds, the three equivalent persistence
indicators behind the hair-trigger effect, and the speed of the homogenized
medium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .coefficients import CoefficientSet, HomogenizedSet
from .eigen import GridSpec, dirichlet_eigenvalue, k_of_lambda
from .errors import NumericalError, PreconditionError
from .ode import HomParams, lambda_A

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LAMBDA_TOL = 1e-6
SIGN_BAND = 1e-4            # indeterminacy band for sign decisions near zero
MAX_BRACKET_EXPANSIONS = 40


def golden_min(f: Callable[[float], float], a: float, b: float,
               tol: float = LAMBDA_TOL) -> Tuple[float, float]:
    """Minimize a unimodal function on [a, b]; returns (argmin, min)."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, min(fc, fd)


@dataclass
class SpeedReport:
    """Right/left spreading speeds, their minimizers, and analytic envelopes."""

    c_right: float
    c_left: float
    argmin_lambda_right: float
    argmin_lambda_left: float
    k_min: float
    bound_low: Optional[float]
    bound_high: float
    hair_trigger: Optional[bool]

    def to_dict(self) -> dict:
        return {
            "c_right": self.c_right,
            "c_left": self.c_left,
            "argmin_lambda_right": self.argmin_lambda_right,
            "argmin_lambda_left": self.argmin_lambda_left,
            "k_min": self.k_min,
            "bound_low": self.bound_low,
            "bound_high": self.bound_high,
            "hair_trigger": self.hair_trigger,
        }


class _KCache:
    """Memoized k(lambda) evaluations with eigenvector warm starting."""

    def __init__(self, cs: CoefficientSet, grid: Optional[GridSpec], tol: float):
        self.cs = cs
        self.grid = grid
        self.tol = tol
        self.warm = None
        self.values = {}

    def __call__(self, lam: float) -> float:
        key = repr(lam)
        if key not in self.values:
            res = k_of_lambda(self.cs, lam, self.grid, self.tol, warm=self.warm)
            self.warm = (res.phi, res.psi)
            self.values[key] = res.value
        return self.values[key]


def speed_bounds(cs: CoefficientSet) -> Tuple[Optional[float], float]:
    """(2 sqrt(sigma_min r_min) if r_min > 0 else None, 2 sqrt(sigma_max r_max))."""
    high = 2.0 * math.sqrt(cs.sigma_max * cs.r_max)
    low = 2.0 * math.sqrt(cs.sigma_min * cs.r_min) if cs.r_min > 0 else None
    return low, high


def _one_sided_speed(k: Callable[[float], float], lam_hi: float,
                     tol: float) -> Tuple[float, float]:
    """min of k(lam)/lam over (0, lam_hi], expanding the bracket if the edge wins."""
    g = lambda lam: k(lam) / lam
    for _ in range(MAX_BRACKET_EXPANSIONS):
        lam_star, c = golden_min(g, 1e-4, lam_hi, tol)
        if lam_star < lam_hi - 10.0 * tol:
            return lam_star, c
        lam_hi *= 2.0
    raise NumericalError("speed bracket expansion cap reached; "
                         "k(lambda)/lambda keeps decreasing")


def _k_minimum(k: _KCache, cs: CoefficientSet, tol: float) -> Tuple[float, float]:
    """Global minimum of the convex curve k over an interior-guaranteed bracket."""
    lam_hi = 2.0 * math.sqrt(max(cs.r_max - cs.r_min, 1.0) / cs.sigma_min) + 1.0
    for _ in range(MAX_BRACKET_EXPANSIONS):
        lam_star, k_min = golden_min(k, -lam_hi, lam_hi, tol)
        if abs(lam_star) < lam_hi - 10.0 * tol:
            return lam_star, k_min
        lam_hi *= 2.0
    raise NumericalError("k-minimum bracket expansion cap reached")


def spreading_speeds(cs: CoefficientSet, grid: Optional[GridSpec] = None,
                     lam_tol: float = LAMBDA_TOL, k_tol: float = 1e-7) -> SpeedReport:
    """Right and left spreading speeds of the propagation problem.

    Requires the periodic principal eigenvalue k(0) to be positive (otherwise
    front-like data does not spread and the quotient formula degenerates).
    """
    k = _KCache(cs, grid, k_tol)
    k0 = k(0.0)
    if k0 <= 0:
        raise PreconditionError(
            f"spreading-speed formula needs a positive periodic principal "
            f"eigenvalue; got k(0) = {k0:.6g}")
    lam_hi = 2.0 * math.sqrt(cs.r_max / cs.sigma_min) + 1.0

    lam_right, c_right = _one_sided_speed(k, lam_hi, lam_tol)
    k_neg = _KCache(cs, grid, k_tol)
    lam_left_pos, c_left = _one_sided_speed(lambda lam: k_neg(-lam), lam_hi, lam_tol)

    _, k_min = _k_minimum(k, cs, lam_tol)
    low, high = speed_bounds(cs)
    hair: Optional[bool] = None
    if abs(k_min) > SIGN_BAND:
        hair = k_min > 0
    return SpeedReport(c_right=float(c_right), c_left=float(c_left),
                       argmin_lambda_right=float(lam_right),
                       argmin_lambda_left=float(-lam_left_pos),
                       k_min=float(k_min), bound_low=low, bound_high=high,
                       hair_trigger=hair)


@dataclass
class HairTriggerReport:
    """The three persistence indicators; None marks an indeterminate one."""

    via_dirichlet: Optional[bool]
    via_k_min: Optional[bool]
    via_speeds: Optional[bool]
    dirichlet_max: float
    k_min: float
    c_right: Optional[float]
    c_left: Optional[float]

    def consistent(self) -> bool:
        decided = {b for b in (self.via_dirichlet, self.via_k_min, self.via_speeds)
                   if b is not None}
        return len(decided) <= 1


def _sign_or_none(x: float) -> Optional[bool]:
    if x > SIGN_BAND:
        return True
    if x < -SIGN_BAND:
        return False
    return None


def hair_trigger_check(cs: CoefficientSet, grid: Optional[GridSpec] = None,
                       k_tol: float = 1e-7) -> HairTriggerReport:
    """Evaluate the three equivalent hair-trigger conditions independently.

    (a) some Dirichlet eigenvalue over the geometric sweep {L, 2L, ..., 64L}
    is positive, (b) min over lambda of k(lambda) is positive, (c) both
    spreading speeds are positive.  Outside a +/-1e-4 band around zero the
    three answers must agree; inside it they are reported as indeterminate.
    """
    L = cs.period
    radii = [L * 2 ** j for j in range(7)]          # L .. 64 L
    best = -math.inf
    warm = None
    for R in radii:
        res = dirichlet_eigenvalue(cs, R, grid, tol=k_tol, warm=warm)
        warm = (res.phi, res.psi)
        best = max(best, res.value)
    via_a = _sign_or_none(best)

    k = _KCache(cs, grid, k_tol)
    _, k_min = _k_minimum(k, cs, LAMBDA_TOL)
    via_b = _sign_or_none(k_min)

    c_right = c_left = None
    via_c: Optional[bool] = None
    if k(0.0) > SIGN_BAND:
        report = spreading_speeds(cs, grid, k_tol=k_tol)
        c_right, c_left = report.c_right, report.c_left
        via_c = _sign_or_none(min(c_right, c_left))
    # k(0) <= 0 fails the spreading-speed hypothesis: indicator not available
    return HairTriggerReport(via_dirichlet=via_a, via_k_min=via_b, via_speeds=via_c,
                             dirichlet_max=float(best), k_min=float(k_min),
                             c_right=c_right, c_left=c_left)


def homogenized_speed(h: HomogenizedSet) -> float:
    """Spreading speed 2 sqrt(sigma_H lambda_A) of the averaged medium."""
    p = HomParams(sigma=h.sigma_H, r_u=h.mean_r_u, r_v=h.mean_r_v,
                  kappa_u=h.mean_kappa_u, kappa_v=h.mean_kappa_v,
                  mu_u=h.mean_mu_u, mu_v=h.mean_mu_v)
    lam = lambda_A(p)
    if lam <= 0:
        raise PreconditionError(f"homogenized medium does not spread: lambda_A = {lam:.6g}")
    return 2.0 * math.sqrt(h.sigma_H * lam)
