"""Closed-form quality metrics: photon statistics, min-entropy, dead-time correction, loss budget."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, InconsistentLossBudget, SaturatedDetector

PLANCK = 6.62607015e-34
LIGHT_SPEED = 299_792_458.0


@dataclass(frozen=True)
class IntervalParams:
    """Detection rate R (1/s), reference period T (s), dead time (s), bin count N."""

    detection_rate_R: float
    period_T: float
    dead_time: float
    bins_N: int = 256

    def __post_init__(self):
        if self.detection_rate_R <= 0:
            raise ConfigError("detection rate must be positive")
        if self.period_T <= 0:
            raise ConfigError("period must be positive")
        if self.dead_time < 0:
            raise ConfigError("dead time must be >= 0")
        _check_unsaturated(self.detection_rate_R, self.dead_time)


@dataclass(frozen=True)
class LossChain:
    """Measured quantities of the optical path.

    ``im_k`` in rad/um, ``nanowire_length_z`` in um, ``p_in`` in W,
    ``wavelength`` in m.
    """

    eta_dlm: float
    eta_col: float
    im_k: float
    nanowire_length_z: float
    p_in: float
    detection_rate_R: float
    wavelength: float

    def __post_init__(self):
        for name in ("eta_dlm", "eta_col"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")
        if self.im_k < 0 or self.nanowire_length_z < 0:
            raise ConfigError("im_k and nanowire_length_z must be >= 0")
        if self.p_in <= 0 or self.detection_rate_R <= 0 or self.wavelength <= 0:
            raise ConfigError("p_in, detection_rate_R and wavelength must be positive")


@dataclass(frozen=True)
class LossBudget:
    eta_total: float
    eta_wgd: float
    eta_nwr: float
    eta_grt_tpr_product: float
    p_out: float


def _check_unsaturated(rate: float, dead_time: float) -> None:
    if rate * dead_time >= 1:
        raise SaturatedDetector(f"R*tau_d = {rate * dead_time:g} >= 1")


def poisson_pmf(k: int, mean: float) -> float:
    if k < 0 or mean < 0:
        raise ValueError("k and mean must be non-negative")
    if mean == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(mean) - mean - math.lgamma(k + 1))


def mean_photons_per_interval(p: IntervalParams) -> float:
    """Mean photon number per reference period, RT / (1 - R tau_d)."""
    R = p.detection_rate_R
    return R * p.period_T / (1.0 - R * p.dead_time)


def min_entropy_lower_bound(bins: int, mean_photons: float) -> float:
    """Lower bound on min-entropy per sample (bits), log2 N + log2(1 - e^-k) - log2 k."""
    if bins < 2:
        raise ConfigError("bins must be >= 2")
    if not mean_photons > 0:
        raise ConfigError("mean photon number must be positive")
    # -expm1(-k)/k stays accurate as k -> 0
    return math.log2(bins) + math.log2(-math.expm1(-mean_photons) / mean_photons)


def min_entropy_per_bit(bins: int, mean_photons: float) -> float:
    return min_entropy_lower_bound(bins, mean_photons) / math.log2(bins)


def correction_factor(rate: float, dead_time: float) -> float:
    """Ratio of arriving to detected photons, 1 / (1 - R tau_d)."""
    _check_unsaturated(rate, dead_time)
    return 1.0 / (1.0 - rate * dead_time)


def lost_photon_fraction(rate: float, dead_time: float) -> float:
    return 1.0 - 1.0 / correction_factor(rate, dead_time)


def relative_photon_prob(k: int, mean_photons: float) -> float:
    """P(k) / (1 - P(0)): probability of exactly k photons given at least one."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not mean_photons > 0:
        raise ValueError("mean photon number must be positive")
    return poisson_pmf(k, mean_photons) / -math.expm1(-mean_photons)


def bin_probability(i: int, bins: int, photons: int) -> float:
    """Probability that the first of ``photons`` arrivals in a period falls in bin ``i`` (1-based)."""
    if bins < 1 or not 1 <= i <= bins:
        raise ValueError(f"bin index {i} outside 1..{bins}")
    if photons < 1:
        raise ValueError("photons must be >= 1")
    # python evaluates 0.0 ** 0 as 1.0, which is the convention needed at i == N
    return (1 - (i - 1) / bins) ** photons - (1 - i / bins) ** photons


def loss_budget(chain: LossChain, p_in: float | None = None, p_out: float | None = None) -> LossBudget:
    """Split the measured end-to-end transmission into its factors.

    The output power is R h c / lambda unless a measured ``p_out`` is given.
    Only the product of grating and taper transmissions is identifiable.
    """
    p_in = chain.p_in if p_in is None else p_in
    if p_in <= 0:
        raise ConfigError("p_in must be positive")
    if p_out is None:
        p_out = chain.detection_rate_R * PLANCK * LIGHT_SPEED / chain.wavelength
    eta_total = p_out / p_in
    eta_wgd = eta_total / (chain.eta_dlm * chain.eta_col)
    eta_nwr = math.exp(-2.0 * chain.im_k * chain.nanowire_length_z)
    if eta_wgd > eta_nwr:
        raise InconsistentLossBudget(
            f"waveguide transmission {eta_wgd:.3g} exceeds nanowire transmission {eta_nwr:.3g}")
    return LossBudget(
        eta_total=eta_total,
        eta_wgd=eta_wgd,
        eta_nwr=eta_nwr,
        eta_grt_tpr_product=math.sqrt(eta_wgd / eta_nwr),
        p_out=p_out,
    )
