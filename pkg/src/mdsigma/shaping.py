"""Noise-shaping filter design and spectral analysis.

The design problem is a quadratic program over monic FIR filters
c(z) = 1 + c_1 z^-1 + ... + c_p z^-p: minimize a weighted combination of
the in-band power P_dc = (1/2pi) int_{|w|<=pi/2} |c|^2 dw and the total
power P_ds = (1/2pi) int_{|w|<=pi} |c|^2 dw = sum c_i^2.  Stationarity
gives the normal equations

    (G + 2 lambda I) c_tail = -g,   G_ij = sinc((i-j)/2),  g_i = sinc(i/2),

which are standard autocorrelation (Yule-Walker) equations and therefore
have a unique minimum-phase solution.  The Gram matrix is the
autocorrelation of a strictly band-limited spectrum, so its conditioning
collapses rapidly with the order; the solver runs a Levinson-Durbin
recursion in extended precision so that small-lambda, large-p designs
remain well defined.

The multiband generalization replaces the half-band Gram matrix by the
autocorrelation of an arbitrary nonnegative piecewise-constant weight
function, which is still Toeplitz and handled by the same recursion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import mpmath as mp
import numpy as np

from .dsp import spectrum_power

__all__ = [
    "ShapingFilter",
    "YuleWalkerSystem",
    "BrickWallSpec",
    "MinPhaseReport",
    "design_yule_walker",
    "design_multiband",
    "pdc_closed",
    "pds_closed",
    "band_power",
    "filter_powers",
    "min_phase_check",
    "approx_error_vs_brickwall",
    "truncated_fourier_brickwall_error",
    "brickwall_autocorrelation",
    "find_lambda_for_ratio",
    "quadrature_grid",
]

QUADRATURE_POINTS = 8192


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShapingFilter:
    """Monic noise-shaping filter c_0..c_p with c_0 = 1.

    Designed filters carry their in-band/total powers (``pdc``/``pds``)
    computed in extended precision by the designer; for degenerate
    small-lambda designs the float64 double sum loses all significant
    digits to cancellation, so the carried values are authoritative.
    """

    coeffs: tuple
    pdc: float | None = None
    pds: float | None = None

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if len(c) == 0:
            raise ValueError("filter needs at least the leading coefficient")
        if c[0] != 1.0:
            raise ValueError("filter must be monic (c_0 = 1)")
        if not all(math.isfinite(v) for v in c):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=np.float64)


@dataclass(frozen=True)
class YuleWalkerSystem:
    """Normal-equation data for the half-band design problem."""

    order: int
    lambda_ratio: float

    @property
    def gram(self) -> np.ndarray:
        i = np.arange(1, self.order + 1)
        return np.sinc((i[:, None] - i[None, :]) / 2.0)

    @property
    def gram_regularized(self) -> np.ndarray:
        return self.gram + 2.0 * self.lambda_ratio * np.eye(self.order)

    @property
    def cross(self) -> np.ndarray:
        return np.sinc(np.arange(1, self.order + 1) / 2.0)


@dataclass(frozen=True)
class BrickWallSpec:
    """Two-step target spectrum: 1/delta in-band (|w| <= pi/2), delta beyond."""

    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.delta < 1.0:
            warnings.warn(
                "delta < 1 trades distortion the wrong way round; "
                "delta >= 1 performs better",
                stacklevel=2,
            )

    @property
    def pdc(self) -> float:
        return 0.5 / self.delta

    @property
    def pds(self) -> float:
        return 0.5 * (self.delta + 1.0 / self.delta)

    def power(self, omega) -> np.ndarray:
        w = np.abs(np.asarray(omega, dtype=np.float64))
        return np.where(w <= np.pi / 2, 1.0 / self.delta, self.delta)


@dataclass(frozen=True)
class MinPhaseReport:
    is_min_phase: bool
    max_root_magnitude: float
    log_spectrum_integral: float  # bits


# ---------------------------------------------------------------------------
# Extended-precision Levinson-Durbin core
# ---------------------------------------------------------------------------


def _sinc_half_mp(m: int) -> mp.mpf:
    if m == 0:
        return mp.mpf(1)
    x = mp.mpf(m) / 2
    return mp.sin(mp.pi * x) / (mp.pi * x)


def _levinson_mp(r: list, p: int):
    """Solve the autocorrelation normal equations at current mp precision.

    ``r`` holds r_0..r_p.  Returns (monic coefficient list, final
    prediction error r_0 * prod(1 - k_i^2)).
    """
    a = [mp.mpf(0)] * (p + 1)
    a[0] = mp.mpf(1)
    energy = r[0]
    for i in range(1, p + 1):
        if energy <= 0:
            raise ValueError("normal equations not positive definite")
        acc = r[i]
        for j in range(1, i):
            acc += a[j] * r[i - j]
        k = -acc / energy
        nxt = a[:]
        for j in range(1, i):
            nxt[j] = a[j] + k * a[i - j]
        nxt[i] = k
        a = nxt
        energy = energy * (1 - k * k)
    return a, energy


def _design_dps(p: int) -> int:
    # conditioning of the band-limited Gram matrix collapses roughly
    # exponentially in p; this leaves a wide precision margin up to p ~ 128
    return max(60, 3 * p + 20)


def design_yule_walker(p: int, lambda_ratio: float) -> ShapingFilter:
    """Order-p minimizer of P_dc + lambda_ratio * P_ds over monic filters,
    i.e. the unique solution of (G + 2*lambda_ratio*I) c_tail = -g.

    Returns the filter with its exact P_dc/P_ds attached.
    """
    if p < 1:
        raise ValueError("order must be >= 1")
    if lambda_ratio < 0:
        raise ValueError("lambda ratio must be >= 0")
    with mp.workdps(_design_dps(p)):
        lam = mp.mpf(repr(float(lambda_ratio)))
        r = [_sinc_half_mp(m) for m in range(p + 1)]
        r[0] = r[0] + 2 * lam
        coeffs, energy = _levinson_mp(r, p)
        pds = mp.fsum(c * c for c in coeffs)
        # energy = c^T R c = 2*Pdc + 2*lambda*Pds
        pdc = (energy - 2 * lam * pds) / 2
        return ShapingFilter(
            tuple(float(c) for c in coeffs), pdc=float(pdc), pds=float(pds)
        )


def design_multiband(p: int, band_edges: Sequence[float], band_weights: Sequence[float]) -> ShapingFilter:
    """Minimize a weighted sum of band powers of |c|^2 over monic filters.

    Bands are (previous_edge, edge] starting from 0, with edges strictly
    increasing in (0, pi].  Weights must be nonnegative with at least one
    strictly positive (a zero weight leaves that band unconstrained).
    """
    if p < 1:
        raise ValueError("order must be >= 1")
    edges = [float(e) for e in band_edges]
    weights = [float(w) for w in band_weights]
    if len(edges) != len(weights) or not edges:
        raise ValueError("need one weight per band edge")
    if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
        raise ValueError("weights must be nonnegative with at least one positive")
    lo = 0.0
    for e in edges:
        if not (lo < e <= np.pi + 1e-12):
            raise ValueError("band edges must be strictly increasing in (0, pi]")
        lo = e

    with mp.workdps(_design_dps(p)):
        # autocorrelation of the piecewise-constant weight function:
        # m_d = sum_b w_b * (sin(hi*d) - sin(lo*d)) / (pi*d), m_0 = sum_b w_b*(hi-lo)/pi
        pi = mp.pi
        r = []
        for d in range(p + 1):
            acc = mp.mpf(0)
            lo_e = mp.mpf(0)
            for e, w in zip(edges, weights):
                hi_e = mp.mpf(repr(e))
                if d == 0:
                    acc += mp.mpf(repr(w)) * (hi_e - lo_e) / pi
                else:
                    acc += mp.mpf(repr(w)) * (mp.sin(hi_e * d) - mp.sin(lo_e * d)) / (pi * d)
                lo_e = hi_e
            r.append(acc)
        try:
            coeffs, _ = _levinson_mp(r, p)
        except ValueError as exc:
            raise ValueError(f"singular system: {exc}") from None
        pds = mp.fsum(c * c for c in coeffs)
        pdc = mp.mpf(0)
        for i in range(p + 1):
            for j in range(p + 1):
                pdc += _sinc_half_mp(abs(i - j)) * coeffs[i] * coeffs[j]
        pdc = pdc / 2
        return ShapingFilter(
            tuple(float(c) for c in coeffs), pdc=float(pdc), pds=float(pds)
        )


# ---------------------------------------------------------------------------
# Closed-form powers
# ---------------------------------------------------------------------------


def pdc_closed(filt: ShapingFilter) -> float:
    """In-band power: (1/2) sum_ij sinc((i-j)/2) c_i c_j."""
    c = filt.as_array()
    i = np.arange(c.shape[0])
    s = np.sinc((i[:, None] - i[None, :]) / 2.0)
    return float(0.5 * c @ s @ c)


def pds_closed(filt: ShapingFilter) -> float:
    """Total power: sum_i c_i^2."""
    c = filt.as_array()
    return float(np.sum(c * c))


def band_power(filt: ShapingFilter, lo: float, hi: float) -> float:
    """(1/2pi) int over lo <= |w| <= hi of |c(e^{jw})|^2 dw, closed form."""
    if not (0.0 <= lo < hi <= np.pi + 1e-12):
        raise ValueError("band must satisfy 0 <= lo < hi <= pi")
    c = filt.as_array()
    i = np.arange(c.shape[0])
    d = i[:, None] - i[None, :]
    gram = np.empty_like(d, dtype=np.float64)
    nz = d != 0
    gram[nz] = (np.sin(hi * d[nz]) - np.sin(lo * d[nz])) / (np.pi * d[nz])
    gram[~nz] = (hi - lo) / np.pi
    return float(c @ gram @ c)


def filter_powers(filt: ShapingFilter) -> tuple:
    """(P_dc, P_ds), preferring the designer-carried extended-precision values."""
    pdc = filt.pdc if filt.pdc is not None else pdc_closed(filt)
    pds = filt.pds if filt.pds is not None else pds_closed(filt)
    return pdc, pds


# ---------------------------------------------------------------------------
# Quadrature and spectrum comparisons
# ---------------------------------------------------------------------------


def quadrature_grid(n: int = QUADRATURE_POINTS) -> np.ndarray:
    """Uniform midpoint grid on [-pi, pi]; fixed so oracle comparisons are bit-stable."""
    return -np.pi + (np.arange(n) + 0.5) * (2.0 * np.pi / n)


def approx_error_vs_brickwall(filt: ShapingFilter, target: BrickWallSpec, n: int = QUADRATURE_POINTS) -> float:
    """(1/2pi) int |S_target(w) - |c(e^{jw})|^2|^2 dw by midpoint quadrature."""
    w = quadrature_grid(n)
    diff = target.power(w) - spectrum_power(filt.coeffs, w)
    return float(np.mean(diff * diff))


def brickwall_autocorrelation(target: BrickWallSpec, lag: int) -> float:
    """Fourier coefficient r_m of the two-step spectrum.

    r_0 = (delta + 1/delta)/2 and r_m = (1/delta - delta)/2 * sinc(m/2);
    even nonzero lags vanish exactly.
    """
    lag = abs(int(lag))
    if lag == 0:
        return 0.5 * (target.delta + 1.0 / target.delta)
    if lag % 2 == 0:
        return 0.0
    sign = 1.0 if ((lag - 1) // 2) % 2 == 0 else -1.0
    return 0.5 * (1.0 / target.delta - target.delta) * sign * 2.0 / (math.pi * lag)


def truncated_fourier_brickwall_error(target: BrickWallSpec, p: int, n: int = QUADRATURE_POINTS) -> float:
    """Spectrum-domain MSE of the order-p Fourier synthesis of the two-step target.

    The reference is the truncated autocorrelation expansion
    S_p(w) = sum_{|m|<=p} r_m e^{-jwm}; no spectral factorization is
    involved because only the spectrum error is measured.
    """
    if p < 0:
        raise ValueError("order must be >= 0")
    w = quadrature_grid(n)
    lags = np.arange(1, p + 1)
    r = np.array([brickwall_autocorrelation(target, int(m)) for m in lags])
    synth = brickwall_autocorrelation(target, 0) + 2.0 * np.cos(np.outer(w, lags)) @ r
    diff = target.power(w) - synth
    return float(np.mean(diff * diff))


# ---------------------------------------------------------------------------
# Minimum phase
# ---------------------------------------------------------------------------


def min_phase_check(filt: ShapingFilter, n: int = QUADRATURE_POINTS) -> MinPhaseReport:
    """Root locations and log-spectrum integral of c(z).

    is_min_phase holds iff every zero lies strictly inside the unit
    circle.  Roots come from companion-matrix eigenvalues; when the
    largest magnitude is within 1e-4 of the unit circle the roots are
    re-derived in extended precision before deciding.
    """
    c = np.asarray(filt.coeffs, dtype=np.float64)
    nz = np.nonzero(c)[0]
    c = c[: nz[-1] + 1]  # trim trailing zeros
    if c.shape[0] <= 1:
        max_mag = 0.0
    else:
        roots = np.roots(c)
        max_mag = float(np.abs(roots).max())
        if abs(1.0 - max_mag) < 1e-4:
            try:
                with mp.workdps(50):
                    refined = mp.polyroots(
                        [mp.mpf(repr(v)) for v in c], maxsteps=500, extraprec=200
                    )
                max_mag = float(max(abs(z) for z in refined))
            except mp.libmp.NoConvergence as exc:
                raise RuntimeError(
                    f"root finding did not converge for order {len(c) - 1}: {exc}"
                ) from None
    w = quadrature_grid(n)
    power = spectrum_power(filt.coeffs, w)
    integral = float(np.mean(np.log2(np.maximum(power, 1e-300))))
    return MinPhaseReport(
        is_min_phase=bool(max_mag < 1.0),
        max_root_magnitude=max_mag,
        log_spectrum_integral=integral,
    )


# ---------------------------------------------------------------------------
# Weight-ratio selection
# ---------------------------------------------------------------------------


def _ratio_at(p: int, lam: float) -> float:
    filt = design_yule_walker(p, lam)
    return filt.pds / filt.pdc


def find_lambda_for_ratio(gamma: float, p: int, rel_tol: float = 1e-6) -> float:
    """Weight ratio lambda_s/lambda_c whose design hits P_ds/P_dc = gamma.

    The ratio decreases monotonically from its lambda=0 maximum toward the
    white-filter floor of 2 as lambda grows, so a bracketed bisection
    applies.  Unreachable targets raise with the achievable range.
    """
    if not gamma > 1.0:
        raise ValueError("gamma must exceed 1")
    if p < 1:
        raise ValueError("order must be >= 1")
    hi_ratio = _ratio_at(p, 0.0)
    if not (2.0 < gamma <= hi_ratio):
        raise ValueError(
            f"ratio out of range for order {p}: achievable range is (2, {hi_ratio:.6g}]"
        )
    lo = 0.0  # ratio(lo) >= gamma
    hi = 1.0
    for _ in range(200):
        if _ratio_at(p, hi) < gamma:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ValueError(f"ratio out of range for order {p}: could not bracket gamma={gamma}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ratio = _ratio_at(p, mid)
        if abs(ratio / gamma - 1.0) <= rel_tol:
            return mid
        if ratio > gamma:
            lo = mid
        else:
            hi = mid
    raise ValueError(f"bisection failed to reach gamma={gamma} at order {p}")
