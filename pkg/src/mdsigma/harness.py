"""Experiment orchestration: seeded Monte-Carlo runs, sweeps, CSV reports.

Reproducibility contract: a run is a pure function of (config,
master_seed).  Trials draw from pre-split Philox substreams keyed by
(trial, role) and results are merged in trial order, so output is
identical across runs and across any trial-execution order.

CSV schema (fixed column order):
    trial, pattern, n_samples, sigma_x2, sigma_e2, p, K, delta_or_gamma,
    pdc, pds, rate_theory_bits, rate_gauss_emp_bits, index_entropy_bits,
    mse_theory, mse_emp, stderr
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import codec as codec_mod
from .codec import CodecConfig, decode_central, decode_side, decode_subset_k4, encode, reconstruction_mse
from .ecdq import QuantizerSpec, ROLE_SOURCE, derive_seed, substream
from .shaping import (
    ShapingFilter,
    design_multiband,
    design_yule_walker,
    filter_powers,
    find_lambda_for_ratio,
)
from .theory import brickwall_point, ozarow_bounds

__all__ = [
    "ExperimentConfig",
    "SimResult",
    "PatternResult",
    "IndexEntropyEstimate",
    "ConfigError",
    "parse_config_text",
    "build_filter",
    "run",
    "sweep",
    "sweep_rates",
    "estimate_index_entropy",
    "universality_check",
    "CSV_COLUMNS",
]

CSV_COLUMNS = (
    "trial",
    "pattern",
    "n_samples",
    "sigma_x2",
    "sigma_e2",
    "p",
    "K",
    "delta_or_gamma",
    "pdc",
    "pds",
    "rate_theory_bits",
    "rate_gauss_emp_bits",
    "index_entropy_bits",
    "mse_theory",
    "mse_emp",
    "stderr",
)

_SOURCE_DISTS = ("gaussian", "laplace", "uniform")
_FILTER_KINDS = ("yule_walker", "yule_walker_gamma", "explicit", "multiband")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one Monte-Carlo experiment."""

    sigma_x2: float = 1.0
    sigma_e2: float | None = None      # exactly one of sigma_e2 / quant_step
    quant_step: float | None = None
    filter_kind: str = "yule_walker_gamma"
    p: int = 32
    lambda_ratio: float = 0.0
    gamma: float = 17.0
    coeffs: tuple = ()
    band_edges: tuple = ()
    band_weights: tuple = ()
    oversampling: int = 2
    n_samples: int = 1 << 20
    n_trials: int = 4
    master_seed: int = 20090401
    source_dist: str = "gaussian"
    erasure_patterns: tuple = ()       # default depends on K
    post_multipliers: str | None = None  # default: wiener for K=2, unit for K=4
    tol_mse_rel: float = 0.03

    def __post_init__(self):
        if self.source_dist not in _SOURCE_DISTS:
            raise ConfigError(f"unknown source_dist {self.source_dist!r}")
        if self.filter_kind not in _FILTER_KINDS:
            raise ConfigError(f"unknown filter {self.filter_kind!r}")
        if self.oversampling not in (2, 4):
            raise ConfigError("K must be 2 or 4")
        if self.n_samples < (1 << 14):
            raise ConfigError("n_samples must be >= 2^14")
        if self.n_samples % 2 != 0:
            raise ConfigError("n_samples must be even")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if (self.sigma_e2 is None) == (self.quant_step is None):
            raise ConfigError("specify exactly one of sigma_e2 / quant_step")
        for pat in self.erasure_patterns:
            if pat not in self.valid_patterns():
                raise ConfigError(f"pattern {pat!r} invalid for K={self.oversampling}")

    def valid_patterns(self) -> tuple:
        if self.oversampling == 2:
            return ("central", "even", "odd")
        return ("central", "pair02", "pair13", "single0", "single1", "single2", "single3")

    @property
    def step(self) -> float:
        if self.quant_step is not None:
            return float(self.quant_step)
        return math.sqrt(12.0 * self.sigma_e2)

    @property
    def noise_variance(self) -> float:
        return self.step * self.step / 12.0

    @property
    def patterns(self) -> tuple:
        return self.erasure_patterns or self.valid_patterns()

    @property
    def multiplier_mode(self) -> str:
        if self.post_multipliers is not None:
            return self.post_multipliers
        return "wiener" if self.oversampling == 2 else "unit"


# ---------------------------------------------------------------------------
# Config file ingestion (flat key = value, # comments, unknown keys rejected)
# ---------------------------------------------------------------------------

_SCALAR_KEYS = {
    "sigma_x2": float,
    "sigma_e2": float,
    "quant_step": float,
    "p": int,
    "lambda_ratio": float,
    "gamma": float,
    "oversampling": int,
    "n_samples": int,
    "n_trials": int,
    "master_seed": int,
    "tol_mse_rel": float,
}
_LIST_KEYS = {
    "coeffs": float,
    "band_edges": float,
    "band_weights": float,
    "erasure_patterns": str,
}
_STR_KEYS = ("filter", "source_dist", "post_multipliers")


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the flat ``key = value`` config format with line-precise errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        try:
            if key in _SCALAR_KEYS:
                values[key] = _SCALAR_KEYS[key](val)
            elif key in _LIST_KEYS:
                conv = _LIST_KEYS[key]
                values[key] = tuple(conv(v.strip()) for v in val.split(",") if v.strip())
            elif key in _STR_KEYS:
                values["filter_kind" if key == "filter" else key] = val
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# Pieces
# ---------------------------------------------------------------------------


def build_filter(config: ExperimentConfig) -> ShapingFilter:
    kind = config.filter_kind
    if kind == "yule_walker":
        return design_yule_walker(config.p, config.lambda_ratio)
    if kind == "yule_walker_gamma":
        lam = find_lambda_for_ratio(config.gamma, config.p)
        return design_yule_walker(config.p, lam)
    if kind == "explicit":
        if not config.coeffs:
            raise ConfigError("explicit filter needs coeffs")
        return ShapingFilter(tuple(config.coeffs))
    if kind == "multiband":
        if not (config.band_edges and config.band_weights):
            raise ConfigError("multiband filter needs band_edges and band_weights")
        return design_multiband(config.p, config.band_edges, config.band_weights)
    raise ConfigError(f"unknown filter {kind!r}")


def _codec_config(config: ExperimentConfig, filt: ShapingFilter, trial: int) -> CodecConfig:
    return CodecConfig(
        source_variance=config.sigma_x2,
        quantizer=QuantizerSpec(step=config.step),
        filter=filt,
        oversampling=config.oversampling,
        dither_seed=derive_seed(config.master_seed, trial, 1),
        post_multipliers=config.multiplier_mode,
    )


def _draw_source(config: ExperimentConfig, trial: int) -> np.ndarray:
    rng = substream(config.master_seed, trial, ROLE_SOURCE)
    n, sx2 = config.n_samples, config.sigma_x2
    if config.source_dist == "gaussian":
        return math.sqrt(sx2) * rng.standard_normal(n)
    if config.source_dist == "laplace":
        return rng.laplace(0.0, math.sqrt(sx2 / 2.0), n)
    return rng.uniform(-math.sqrt(3.0 * sx2), math.sqrt(3.0 * sx2), n)


def _decode_pattern(pattern: str, packets, cfg: CodecConfig):
    if pattern == "central":
        return decode_central(packets, cfg)
    if pattern == "even":
        return decode_side(packets[0], cfg)
    if pattern == "odd":
        return decode_side(packets[1], cfg)
    if pattern == "pair02":
        return decode_subset_k4([packets[0], packets[2]], cfg)
    if pattern == "pair13":
        return decode_subset_k4([packets[1], packets[3]], cfg)
    if pattern.startswith("single"):
        return decode_side(packets[int(pattern[-1])], cfg)
    raise ConfigError(f"unknown pattern {pattern!r}")


def _pattern_theory_mse(config: ExperimentConfig, cfg: CodecConfig, pattern: str) -> float:
    """Analytic MSE for a pattern: noise power through the reception chain,
    shrunk by the Wiener multiplier when multipliers are enabled."""
    key = "central" if pattern == "central" else ("pair" if pattern.startswith("pair") else "side")
    power = codec_mod.pattern_noise_power(cfg, key)
    se2, sx2 = config.noise_variance, config.sigma_x2
    if cfg.post_multipliers == "unit":
        return se2 * power
    return sx2 * se2 * power / (sx2 + se2 * power)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatternResult:
    pattern: str
    mse_theory: float
    mse_trials: tuple
    mse_emp: float
    stderr: float
    passed: bool


@dataclass(frozen=True)
class IndexEntropyEstimate:
    """Plug-in (histogram) entropy of the index marginal, bits per sample.

    This is a memoryless, finite-sample estimate of the per-index coding
    rate; the Miller bias term (K-1)/(2N ln 2) is reported alongside, not
    subtracted.  Conditioning on the dither is implicit: with subtractive
    dither the index marginal pooled over dither draws upper-bounds the
    dither-conditioned entropy.
    """

    bits: float
    miller_correction_bits: float
    n_symbols: int
    n_samples: int
    fixed_dither: bool = False


@dataclass(frozen=True)
class SimResult:
    config: ExperimentConfig
    pdc: float
    pds: float
    patterns: tuple  # PatternResult, in pattern order
    var_quantized_emp: float
    var_quantized_theory: float
    rate_theory_bits: float
    rate_gauss_emp_bits: float
    index_entropy_bits: float
    index_entropy_miller_bits: float

    @property
    def all_passed(self) -> bool:
        return all(p.passed for p in self.patterns)

    def pattern(self, name: str) -> PatternResult:
        for p in self.patterns:
            if p.pattern == name:
                return p
        raise KeyError(name)

    def csv_rows(self):
        cfg = self.config
        dg = cfg.gamma if cfg.filter_kind == "yule_walker_gamma" else (
            cfg.lambda_ratio if cfg.filter_kind == "yule_walker" else float("nan")
        )
        rows = []
        for trial in range(cfg.n_trials):
            for pr in self.patterns:
                rows.append(
                    (
                        trial,
                        pr.pattern,
                        cfg.n_samples,
                        cfg.sigma_x2,
                        cfg.noise_variance,
                        cfg.p if cfg.filter_kind != "explicit" else len(cfg.coeffs) - 1,
                        cfg.oversampling,
                        dg,
                        self.pdc,
                        self.pds,
                        self.rate_theory_bits,
                        self.rate_gauss_emp_bits,
                        self.index_entropy_bits,
                        pr.mse_theory,
                        pr.mse_trials[trial],
                        pr.stderr,
                    )
                )
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.csv_rows():
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def estimate_index_entropy(indices, fixed_dither: bool = False) -> IndexEntropyEstimate:
    """Plug-in entropy of the marginal index distribution in bits per sample."""
    idx = np.concatenate([np.asarray(a).ravel() for a in indices]) if isinstance(
        indices, (list, tuple)
    ) else np.asarray(indices).ravel()
    n = idx.shape[0]
    if n < 10**5:
        raise ValueError(f"need at least 10^5 indices, got {n}")
    _, counts = np.unique(idx, return_counts=True)
    prob = counts / n
    bits = float(-np.sum(prob * np.log2(prob)))
    miller = (counts.shape[0] - 1) / (2.0 * n * math.log(2.0))
    return IndexEntropyEstimate(
        bits=bits,
        miller_correction_bits=float(miller),
        n_symbols=int(counts.shape[0]),
        n_samples=int(n),
        fixed_dither=fixed_dither,
    )


def run(config: ExperimentConfig, csv_path=None) -> SimResult:
    """Execute the configured Monte-Carlo experiment.

    Deterministic given (config, master_seed); optionally writes the CSV
    report to ``csv_path``.
    """
    filt = build_filter(config)
    pdc, pds = filter_powers(filt)
    se2, sx2 = config.noise_variance, config.sigma_x2

    patterns = config.patterns
    mse_trials = {pat: [] for pat in patterns}
    var_trials = []
    all_indices = []
    for trial in range(config.n_trials):
        cfg = _codec_config(config, filt, trial)
        x = _draw_source(config, trial)
        packets, trace = encode(x, cfg)
        g = cfg.guard * config.oversampling
        var_trials.append(float(np.var(trace.quantized[g:])))
        all_indices.extend(pkt.indices for pkt in packets)
        for pat in patterns:
            decoded = _decode_pattern(pat, packets, cfg)
            mse_trials[pat].append(reconstruction_mse(decoded, x))

    cfg0 = _codec_config(config, filt, 0)
    results = []
    for pat in patterns:
        trials = tuple(mse_trials[pat])
        emp = float(np.mean(trials))
        if len(trials) > 1:
            err = float(np.std(trials, ddof=1) / math.sqrt(len(trials)))
        else:
            err = float("nan")
        theory = _pattern_theory_mse(config, cfg0, pat)
        passed = abs(emp / theory - 1.0) <= config.tol_mse_rel
        results.append(
            PatternResult(
                pattern=pat, mse_theory=theory, mse_trials=trials,
                mse_emp=emp, stderr=err, passed=passed,
            )
        )

    var_emp = float(np.mean(var_trials))
    var_theory = sx2 + se2 * pds
    rate_theory = 0.5 * math.log2(var_theory / se2)
    rate_gauss = 0.5 * math.log2(var_emp / se2)
    pooled = sum(a.shape[0] for a in all_indices)
    if pooled >= 10**5:
        ent = estimate_index_entropy(all_indices)
        ent_bits, ent_miller = ent.bits, ent.miller_correction_bits
    else:
        # too few indices for a meaningful plug-in estimate
        ent_bits = ent_miller = float("nan")

    result = SimResult(
        config=config,
        pdc=pdc,
        pds=pds,
        patterns=tuple(results),
        var_quantized_emp=var_emp,
        var_quantized_theory=var_theory,
        rate_theory_bits=rate_theory,
        rate_gauss_emp_bits=rate_gauss,
        index_entropy_bits=ent_bits,
        index_entropy_miller_bits=ent_miller,
    )
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.to_csv())
    return result


SWEEP_COLUMNS = (
    "delta",
    "sigma_e2",
    "sigma_x2",
    "rate_bits",
    "dc_theory",
    "ds_theory",
    "pdc",
    "pds",
    "ozarow_ds_floor",
    "ozarow_dc_bound",
)


def sweep(deltas: Sequence[float], sigma_e2: float, sigma_x2: float = 1.0, csv_path=None):
    """Analytic rate-distortion sweep over brick-wall operating points.

    Each grid point carries its achievability bound columns for overlay;
    degenerate bound evaluations are skipped with a NaN marker.
    """
    deltas = list(deltas)
    if not deltas:
        raise ValueError("empty grid")
    rows = []
    for d in deltas:
        pt = brickwall_point(d, sigma_e2, sigma_x2)
        try:
            oz = ozarow_bounds(pt.rate_bits, pt.ds, sigma_x2)
            floor, bound = sigma_x2 * 2.0 ** (-2 * pt.rate_bits), oz.dc_bound
        except ValueError:
            floor, bound = float("nan"), float("nan")
        rows.append(
            (d, sigma_e2, sigma_x2, pt.rate_bits, pt.dc, pt.ds, pt.pdc, pt.pds, floor, bound)
        )
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(SWEEP_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    return rows


def sweep_rates(rates: Sequence[float], delta: float, sigma_x2: float = 1.0, csv_path=None):
    """Rate-grid variant of :func:`sweep` at a fixed spectrum shape.

    For each target rate the noise variance is solved from
    R = (1/2) log2((sx2 + se2*P_ds)/se2), i.e. se2 = sx2/(4^R - P_ds);
    rates at or below (1/2) log2(1 + P_ds) are infeasible.
    """
    rates = list(rates)
    if not rates:
        raise ValueError("empty grid")
    pds = 0.5 * (delta + 1.0 / delta)
    sigma_e2s = []
    for r in rates:
        denom = 4.0**r - pds
        if denom <= 0:
            raise ValueError(f"rate {r} infeasible for delta={delta}")
        sigma_e2s.append(sigma_x2 / denom)
    rows = []
    for se2 in sigma_e2s:
        rows.extend(sweep([delta], se2, sigma_x2))
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(SWEEP_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    return rows


def universality_check(config: ExperimentConfig, csv_path=None) -> SimResult:
    """Run a non-Gaussian source at high resolution against the same closed forms.

    The distortion formulas involve only second moments, so they must hold
    unchanged; the Gaussian-accounting rate is an upper bound for
    non-Gaussian sources of the same variance (reported as usual).
    """
    if config.noise_variance > 1e-3 * config.sigma_x2:
        raise ValueError("universality check requires sigma_e2 <= 1e-3 * sigma_x2")
    return run(config, csv_path=csv_path)
