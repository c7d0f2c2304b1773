"""Rayleigh block-fading link model.

Path loss follows the standard far-field reference-distance form, so the
expected SNR at the receiver is

    gamma_bar = P_tx / (A^2 (d/d_0)^eta N),   A = 4 pi d_0 f_0 / c,  N = N_0 W.

A transmission at coding rate R (bits per channel use) fails when the faded
capacity log2(1 + |H|^2 gamma_bar) drops below R; with unit-mean exponential
|H|^2 the outage probability is 1 - exp(-(2^R - 1)/gamma_bar).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as _SPEED_OF_LIGHT

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class ChannelModel:
    """Static link parameters plus the cached expected SNR.

    ``mean_snr_override`` bypasses the path-loss computation entirely (it may
    be ``math.inf`` to model an error-free link in tests and limit studies).
    """

    tx_power: float = 25e-3          # W
    carrier_freq: float = 868.3e6    # Hz
    ref_distance: float = 1.0        # m, antenna far-field reference
    distance: float = 200.0          # m
    pathloss_exp: float = 3.5
    noise_psd: float = 10 ** (-167 / 10) * 1e-3   # W/Hz
    bandwidth: float = 125e3         # Hz
    mean_snr_override: float | None = None
    mean_snr: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("tx_power", "carrier_freq", "ref_distance", "distance",
                     "noise_psd", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"channel.{name} must be strictly positive")
        if self.pathloss_exp < 2:
            raise ValueError("channel.pathloss_exp must be >= 2")
        if self.mean_snr_override is not None:
            if not self.mean_snr_override > 0:
                raise ValueError("channel.mean_snr_override must be positive")
            snr = float(self.mean_snr_override)
        else:
            snr = _mean_snr_formula(self)
        object.__setattr__(self, "mean_snr", snr)


def _mean_snr_formula(model: ChannelModel) -> float:
    amp = 4.0 * math.pi * model.ref_distance * model.carrier_freq / _SPEED_OF_LIGHT
    pathloss = amp * amp * (model.distance / model.ref_distance) ** model.pathloss_exp
    noise = model.noise_psd * model.bandwidth
    return model.tx_power / (pathloss * noise)


def mean_snr(model: ChannelModel) -> float:
    """Expected SNR at the receiver (linear scale)."""
    return model.mean_snr


def outage_probability(rate: float, gamma_bar: float) -> float:
    """Probability that a packet coded at ``rate`` bits/channel-use is lost.

    Non-decreasing in ``rate``, exactly 0 at rate 0, and < 1 for any finite
    positive ``gamma_bar``.
    """
    if rate < 0:
        raise ValueError("coding rate must be nonnegative")
    if not gamma_bar > 0:
        raise ValueError("mean SNR must be strictly positive")
    # 1 - exp(-(2^R - 1)/snr), written via expm1 to keep precision at low rates
    return -math.expm1(-math.expm1(rate * _LN2) / gamma_bar)


def sample_transmission(rate: float, gamma_bar: float,
                        rng: np.random.Generator) -> bool:
    """Draw one quasi-static fade and report whether the packet survives.

    The squared fade magnitude is a unit-mean exponential variate; success
    means the instantaneous capacity covers the coding rate.
    """
    if rate < 0:
        raise ValueError("coding rate must be nonnegative")
    if not gamma_bar > 0:
        raise ValueError("mean SNR must be strictly positive")
    fade_power = rng.standard_exponential()
    return bool(fade_power * gamma_bar >= math.expm1(rate * _LN2))
