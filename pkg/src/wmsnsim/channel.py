"""Lognormal-shadowing path loss and the radio reception model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .engine import RngStream


@dataclass(frozen=True)
class ChannelParams:
    pl_d0: float = 55.0
    path_exponent: float = 2.4
    sigma: float = 4.0
    d0: float = 1.0

    def __post_init__(self):
        if self.path_exponent <= 0 or self.sigma < 0 or self.pl_d0 <= 0 or self.d0 <= 0:
            raise ValueError(f"invalid channel parameters {self}")


@dataclass(frozen=True)
class RadioParams:
    """CC2420-class radio. Powers in dBm, bitrate in bit/s."""

    tx_power: float = -15.0
    cca_threshold: float = -95.0
    sensitivity: float = -95.0
    bitrate: float = 250_000.0
    noise_floor: float = -100.0
    per_midpoint: float = 6.0
    per_steepness: float = 1.5
    capture_margin: float = 6.0

    def __post_init__(self):
        if self.bitrate <= 0 or self.per_steepness <= 0:
            raise ValueError(f"invalid radio parameters {self}")

    def airtime(self, nbytes: int) -> float:
        return nbytes * 8.0 / self.bitrate


class Outcome(enum.Enum):
    DELIVERED = "delivered"
    BELOW_SENSITIVITY = "below-sensitivity"
    CHANNEL = "channel"
    COLLISION = "collision"

    @property
    def delivered(self) -> bool:
        return self is Outcome.DELIVERED


def mean_path_loss_db(d: float, ch: ChannelParams) -> float:
    d = max(d, ch.d0)
    return ch.pl_d0 + 10.0 * ch.path_exponent * math.log10(d / ch.d0)


def path_loss_db(d: float, ch: ChannelParams, rng: RngStream) -> float:
    return mean_path_loss_db(d, ch) + rng.gaussian(0.0, ch.sigma)


def dbm_to_mw(p: float) -> float:
    return 10.0 ** (p / 10.0)


def mw_to_dbm(p: float) -> float:
    return 10.0 * math.log10(p) if p > 0 else -math.inf


def success_probability(sinr_db: float, radio: RadioParams) -> float:
    z = radio.per_steepness * (sinr_db - radio.per_midpoint)
    if z < -700:
        return 0.0
    return 1.0 / (1.0 + math.exp(-z))


def decide(rx_dbm: float, interference_mw: float, radio: RadioParams, u: float) -> Outcome:
    """Reception verdict for a packet received at ``rx_dbm``.

    ``interference_mw`` is the summed power of overlapping transmissions
    (0 when there are none); ``u`` is a uniform draw for the PER trial.
    """
    if rx_dbm < radio.sensitivity:
        return Outcome.BELOW_SENSITIVITY
    noise_mw = dbm_to_mw(radio.noise_floor)
    if interference_mw > 0.0:
        if rx_dbm - mw_to_dbm(interference_mw) < radio.capture_margin:
            return Outcome.COLLISION
        sinr = rx_dbm - mw_to_dbm(interference_mw + noise_mw)
    else:
        sinr = rx_dbm - radio.noise_floor
    return Outcome.DELIVERED if u < success_probability(sinr, radio) else Outcome.CHANNEL


def receive_decision(
    tx: RadioParams,
    d: float,
    ch: ChannelParams,
    interference: float | None,
    rng: RngStream,
) -> Outcome:
    """One reception trial at distance ``d``; ``interference`` in dBm or None."""
    rx = tx.tx_power - path_loss_db(d, ch, rng)
    interference_mw = 0.0 if interference is None else dbm_to_mw(interference)
    return decide(rx, interference_mw, tx, rng.uniform01())


def delivery_probability(tx: RadioParams, d: float, ch: ChannelParams) -> float:
    """Delivery probability without interference.

    Averages the PER curve over the shadowing distribution by Gauss-Hermite
    quadrature; exact when ``ch.sigma == 0``.
    """
    mean_rx = tx.tx_power - mean_path_loss_db(d, ch)
    if ch.sigma == 0:
        if mean_rx < tx.sensitivity:
            return 0.0
        return success_probability(mean_rx - tx.noise_floor, tx)
    import numpy as np

    nodes, weights = np.polynomial.hermite_e.hermegauss(64)
    total = 0.0
    for z, wgt in zip(nodes, weights):
        rx = mean_rx - ch.sigma * z
        if rx >= tx.sensitivity:
            total += wgt * success_probability(rx - tx.noise_floor, tx)
    return float(total / math.sqrt(2 * math.pi))


def max_range(tx: RadioParams, ch: ChannelParams) -> float:
    """Distance at which the mean received power meets the sensitivity."""
    budget = tx.tx_power - tx.sensitivity - ch.pl_d0
    return ch.d0 * 10.0 ** (budget / (10.0 * ch.path_exponent))


def cca_clear(local_power_dbm: float, cca_threshold: float) -> bool:
    return local_power_dbm < cca_threshold
