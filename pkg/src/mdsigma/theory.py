"""Analytic engine: the closed forms every simulation is judged against.

All rates are bits per description per source sample.  Conventions:

* Brick-wall operating point (two-step noise spectrum, level 1/delta
  in-band and delta out-of-band):
      d_s = sx2*se2*(delta+1/delta) / (2*sx2 + se2*(delta+1/delta))
      d_c = sx2*se2/delta / (2*sx2 + se2/delta)
      R   = (1/2) log2((sx2 + se2*(delta+1/delta)/2) / se2)

* Finite-order point in terms of the filter powers (P_dc, P_ds):
      d = sx2*se2*P / (sx2 + se2*P), with the Wiener post-multipliers
      alpha = sx2/(sx2 + se2*P_ds), beta = sx2/(sx2 + se2*P_dc).

* Symmetric two-description Gaussian bound: side floor sx2*2^(-2R) and
  central bound sx2*2^(-4R) / (1 - (sqrt(Pi) - sqrt(Dz))^2) with
  Pi = (1 - d_s/sx2)^2 and Dz = (d_s/sx2)^2 - 2^(-4R).  The region is
  degenerate when Pi < Dz, which is reported as an error, never clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "TheoryPoint",
    "OzarowEvaluation",
    "TestChannelParams",
    "TestChannelMap",
    "K4Spec",
    "K4Point",
    "ozarow_bounds",
    "brickwall_point",
    "finite_p_point",
    "test_channel_map",
    "k4_point",
]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoryPoint:
    """Analytic operating point, comparable against a simulation result."""

    rate_bits: float
    dc: float
    ds: float
    pdc: float
    pds: float
    alpha: float
    beta: float
    delta: float | None = None  # set when derived from a brick-wall spectrum


@dataclass(frozen=True)
class OzarowEvaluation:
    rate_bits: float
    ds: float
    pi_term: float
    delta_term: float
    dc_bound: float


@dataclass(frozen=True)
class TestChannelParams:
    """Symmetric double-branch test channel: noise correlation and variance."""

    __test__ = False  # not a pytest class despite the name

    rho: float
    sigma_n2: float

    def __post_init__(self):
        if not abs(self.rho) < 1.0:
            raise ValueError("|rho| must be < 1")
        if not self.sigma_n2 > 0:
            raise ValueError("sigma_n2 must be positive")


@dataclass(frozen=True)
class TestChannelMap:
    delta: float
    sigma_e2: float
    iterations: int
    rate_residual: float
    central_residual: float


@dataclass(frozen=True)
class K4Spec:
    """Three-step noise spectrum for the four-description codec.

    Levels: delta0 on |w| <= pi/4, delta2 = 1/sqrt(delta0*delta1) on the
    middle band, delta1 on 3pi/4 < |w| < pi.  The derived middle level
    zeroes the log-spectrum integral, keeping the filter monic/min-phase.
    """

    delta0: float
    delta1: float
    sigma_e2: float
    sigma_x2: float = 1.0

    def __post_init__(self):
        if not (self.delta0 > 0 and self.delta1 > 0):
            raise ValueError("band levels must be positive")
        if self.delta0 > 1.0 + 1e-12:
            raise ValueError("delta0 must be <= 1")
        if self.delta0 * self.delta1 > 1.0 + 1e-12:
            raise ValueError("delta0*delta1 must be <= 1")
        if not (self.sigma_e2 > 0 and self.sigma_x2 > 0):
            raise ValueError("variances must be positive")

    @property
    def delta2(self) -> float:
        return 1.0 / math.sqrt(self.delta0 * self.delta1)

    @property
    def log_spectrum_integral(self) -> float:
        # (1/2pi) int log2 S over the three-step spectrum, in bits
        return 0.25 * math.log2(self.delta0) + 0.5 * math.log2(self.delta2) + 0.25 * math.log2(self.delta1)


@dataclass(frozen=True)
class K4Point:
    dc: float
    d2: float
    d1: float
    rate_bits: float


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def ozarow_bounds(rate_bits: float, ds: float, sigma_x2: float) -> OzarowEvaluation:
    """Side-distortion floor and central-distortion bound at the given rate."""
    if not rate_bits > 0:
        raise ValueError("rate must be positive")
    if not sigma_x2 > 0:
        raise ValueError("sigma_x2 must be positive")
    floor = sigma_x2 * 2.0 ** (-2.0 * rate_bits)
    if ds < floor * (1.0 - 1e-12):
        raise ValueError("side distortion infeasible")
    pi_term = (1.0 - ds / sigma_x2) ** 2
    delta_term = (ds / sigma_x2) ** 2 - 2.0 ** (-4.0 * rate_bits)
    # at the no-excess-rate corner ds equals the floor and delta_term is an
    # exact zero; the float evaluation leaves O(eps)-level residue whose
    # square root would destroy ~8 digits of the bound, so values below the
    # rounding floor are snapped to the exact zero
    if abs(delta_term) <= 1e-13 * (ds / sigma_x2) ** 2:
        delta_term = 0.0
    if delta_term < 0.0:
        delta_term = 0.0
    if pi_term < delta_term:
        raise ValueError("degenerate region")
    dc_bound = sigma_x2 * 2.0 ** (-4.0 * rate_bits) / (
        1.0 - (math.sqrt(pi_term) - math.sqrt(delta_term)) ** 2
    )
    return OzarowEvaluation(
        rate_bits=rate_bits,
        ds=ds,
        pi_term=pi_term,
        delta_term=delta_term,
        dc_bound=dc_bound,
    )


def _alpha_beta(sigma_x2: float, sigma_e2: float, pdc: float, pds: float) -> tuple:
    alpha = sigma_x2 / (sigma_x2 + sigma_e2 * pds)
    beta = sigma_x2 / (sigma_x2 + sigma_e2 * pdc)
    return alpha, beta


def brickwall_point(delta: float, sigma_e2: float, sigma_x2: float) -> TheoryPoint:
    """Exact operating point of the two-step (infinite-order) spectrum."""
    if not (delta > 0 and sigma_e2 > 0 and sigma_x2 > 0):
        raise ValueError("all parameters must be positive")
    pdc = 0.5 / delta
    pds = 0.5 * (delta + 1.0 / delta)
    ds = sigma_x2 * sigma_e2 * (delta + 1.0 / delta) / (2.0 * sigma_x2 + sigma_e2 * (delta + 1.0 / delta))
    dc = sigma_x2 * sigma_e2 / delta / (2.0 * sigma_x2 + sigma_e2 / delta)
    rate = 0.5 * math.log2((sigma_x2 + sigma_e2 * pds) / sigma_e2)
    alpha, beta = _alpha_beta(sigma_x2, sigma_e2, pdc, pds)
    return TheoryPoint(rate_bits=rate, dc=dc, ds=ds, pdc=pdc, pds=pds, alpha=alpha, beta=beta, delta=delta)


def finite_p_point(pdc: float, pds: float, sigma_e2: float, sigma_x2: float) -> TheoryPoint:
    """Distortions and rate for an arbitrary filter given its powers."""
    if not (pds >= pdc > 0):
        raise ValueError("need pds >= pdc > 0")
    if not sigma_x2 > 0:
        raise ValueError("sigma_x2 must be positive")
    if sigma_e2 < 0:
        raise ValueError("sigma_e2 must be >= 0")
    if sigma_e2 == 0.0:
        alpha = beta = 1.0
        return TheoryPoint(rate_bits=math.inf, dc=0.0, ds=0.0, pdc=pdc, pds=pds, alpha=alpha, beta=beta)
    dc = sigma_x2 * sigma_e2 * pdc / (sigma_x2 + sigma_e2 * pdc)
    ds = sigma_x2 * sigma_e2 * pds / (sigma_x2 + sigma_e2 * pds)
    rate = 0.5 * math.log2((sigma_x2 + sigma_e2 * pds) / sigma_e2)
    alpha, beta = _alpha_beta(sigma_x2, sigma_e2, pdc, pds)
    return TheoryPoint(rate_bits=rate, dc=dc, ds=ds, pdc=pdc, pds=pds, alpha=alpha, beta=beta)


def test_channel_map(
    tc: TestChannelParams,
    mode: str = "high_res",
    sigma_x2: float = 1.0,
    delta_guess: float | None = None,
    max_iter: int = 1000,
    residual_tol: float = 1e-10,
) -> TestChannelMap:
    """Map test-channel parameters (rho, sigma_N^2) to (delta, sigma_E^2).

    high_res: delta = sqrt((1-rho)/(1+rho)), sigma_E^2 = sigma_N^2*sqrt(1-rho^2).

    general: solves the implicit pair {rate match, central-distortion
    match} by damped fixed-point iteration (damping 0.5) seeded at the
    high-resolution point (or ``delta_guess``), and certifies the residual
    of both equations.  The central-distortion match reduces to
    sigma_E^2/delta = sigma_N^2*(1+rho).
    """
    rho, sn2 = tc.rho, tc.sigma_n2
    s = math.sqrt(1.0 - rho * rho)
    delta_hr = math.sqrt((1.0 - rho) / (1.0 + rho))
    se2_hr = sn2 * s
    if mode == "high_res":
        return TestChannelMap(delta=delta_hr, sigma_e2=se2_hr, iterations=0,
                              rate_residual=0.0, central_residual=0.0)
    if mode != "general":
        raise ValueError(f"unknown mode {mode!r}")

    delta = delta_hr if delta_guess is None else float(delta_guess)
    se2 = se2_hr
    iterations = 0
    for iterations in range(1, max_iter + 1):
        denom = 2.0 * (sigma_x2 + sn2) - (delta + 1.0 / delta) * sn2 * s
        if denom <= 0:
            raise ValueError("fixed point left the feasible region")
        se2 = 2.0 * sigma_x2 * sn2 * s / denom
        delta_next = se2 / (sn2 * (1.0 + rho))
        step = delta_next - delta
        delta = delta + 0.5 * step
        if abs(step) <= 1e-15 * max(1.0, abs(delta)):
            break
    denom = 2.0 * (sigma_x2 + sn2) - (delta + 1.0 / delta) * sn2 * s
    rate_res = abs(se2 - 2.0 * sigma_x2 * sn2 * s / denom)
    central_res = abs(se2 / delta - sn2 * (1.0 + rho))
    if max(rate_res, central_res) > residual_tol:
        raise ValueError(
            f"fixed point did not converge in {max_iter} iterations "
            f"(residuals {rate_res:.3e}, {central_res:.3e})"
        )
    return TestChannelMap(delta=delta, sigma_e2=se2, iterations=iterations,
                          rate_residual=rate_res, central_residual=central_res)


def k4_point(spec: K4Spec) -> K4Point:
    """Distortions and rate of the three-step spectrum, four descriptions.

    These are the raw (unit post-multiplier) values: full reception keeps
    the low band, two interleaved descriptions add the aliased top band,
    and a single description collects the whole spectrum.
    """
    se2, sx2 = spec.sigma_e2, spec.sigma_x2
    d2l = spec.delta2
    dc = se2 * spec.delta0 / 4.0
    d2 = dc + se2 * spec.delta1 / 4.0
    d1 = d2 + se2 / (2.0 * math.sqrt(spec.delta0 * spec.delta1))
    p_total = (spec.delta0 + spec.delta1 + 2.0 * d2l) / 4.0
    rate = 0.5 * math.log2((sx2 + se2 * p_total) / se2)
    point = K4Point(dc=dc, d2=d2, d1=d1, rate_bits=rate)
    if not (point.dc <= point.d2 <= point.d1):
        raise ValueError("distortion ordering violated")
    return point
