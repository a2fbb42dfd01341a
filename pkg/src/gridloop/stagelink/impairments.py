"""Deterministic virtual-time impairment models for the coupling boundary.

Message-path imperfections (delay, jitter, serialization time, loss) and
analog-channel transduction (noise, clipping, quantization). All times are
virtual simulation time; with a fixed seed every decision is reproducible
regardless of wall-clock conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gridloop.util import clamp


@dataclass
class ImpairmentProfile:
    base_delay_s: float = 0.0
    jitter_s: float = 0.0                 # uniform half-width added to delay
    loss_prob: float = 0.0
    bandwidth_bps: float = math.inf       # serialization delay = 8*len/bandwidth
    noise_sigma: float = 0.0              # additive Gaussian, engineering units
    quant_bits: int = 16
    v_min: float = -1e6
    v_max: float = 1e6
    analog_regs: tuple = field(default_factory=tuple)  # measurement regs routed as analog

    def validate(self) -> None:
        if self.base_delay_s < 0 or self.jitter_s < 0:
            raise ValueError("impairment delays must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")
        if self.bandwidth_bps <= 0:
            raise ValueError("bandwidth_bps must be positive (inf for unlimited)")
        if not 1 <= self.quant_bits <= 32:
            raise ValueError("quant_bits must be in [1, 32]")
        if not self.v_min < self.v_max:
            raise ValueError("analog range requires v_min < v_max")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def is_null(self) -> bool:
        return (
            self.base_delay_s == 0.0
            and self.jitter_s == 0.0
            and self.loss_prob == 0.0
            and math.isinf(self.bandwidth_bps)
            and not self.analog_regs
        )

    @classmethod
    def null(cls) -> "ImpairmentProfile":
        return cls()


@dataclass
class Delivered:
    t_arrive: float


@dataclass
class Dropped:
    pass


def impair_message(msg: bytes, profile: ImpairmentProfile, rng: np.random.Generator,
                   t_send: float) -> Delivered | Dropped:
    """Decide the fate of one message sent at virtual time t_send.

    Both random draws happen on every call so the stream position depends
    only on the number of messages, not on the profile values; sweeping
    loss_prob or delay with the same seed then reuses the same underlying
    randomness (common random numbers).
    """
    u_loss = rng.random()
    u_jitter = rng.random()
    if u_loss < profile.loss_prob:
        return Dropped()
    delay = profile.base_delay_s + (2.0 * u_jitter - 1.0) * profile.jitter_s
    if math.isfinite(profile.bandwidth_bps):
        delay += 8.0 * len(msg) / profile.bandwidth_bps
    return Delivered(max(t_send + delay, t_send))


def analog_transduce(value: float, profile: ImpairmentProfile,
                     rng: np.random.Generator) -> float:
    """Noise, clipping and quantization of one analog-routed sample.

    Quantization snaps to the nearest of 2^bits uniform levels placed at
    v_min + k*(v_max - v_min)/(2^bits - 1); both range edges are levels.
    """
    noisy = value + rng.normal(0.0, profile.noise_sigma)
    clipped = clamp(noisy, profile.v_min, profile.v_max)
    levels = (1 << profile.quant_bits) - 1
    span = profile.v_max - profile.v_min
    k = round((clipped - profile.v_min) / span * levels)
    return profile.v_min + (k / levels) * span
