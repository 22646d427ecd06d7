"""Physical channel parameters and range information intensity (RII).

Every link contributes a scalar information intensity to the delay-domain
FIM. For a direct (localization) link it falls off with the squared
distance; for a reflected (sensing) link both legs enter squared and the
target's radar cross section adds a sigma/(4 pi) factor. Both intensities
are linear in the transmit power, which is what makes the allocation
problems convex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import GeometryError, ValidationError

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact

# Transmit powers double as per-round energies: the budget constraint divides
# the total energy by one slot duration, fixed at 1 s.
SLOT_DURATION = 1.0  # s


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_per_hz_to_watt_per_hz(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Linear-scale physical constants plus allocation limits.

    dB-valued inputs are converted once at config parse; the math here only
    ever sees linear ratios.
    """

    carrier_frequency: float  # Hz
    bandwidth: float  # Hz
    antenna_gain: float  # linear ratio, shared by transmitter and receiver
    noise_psd: float  # W/Hz
    system_loss: float  # linear ratio
    radar_cross_section: float  # m^2
    anchor_power_cap: float = 1.0  # W
    radar_power_cap: float = 1.0  # W
    total_energy: float = 10.0  # J
    velocity_variance: float = 0.01  # m^2/s^2, inter-slot position prior
    drift_rate_variance: float = 1e-10  # inter-slot clock prior
    speed_of_light: float = SPEED_OF_LIGHT  # m/s

    def __post_init__(self):
        for name in (
            "carrier_frequency",
            "bandwidth",
            "antenna_gain",
            "noise_psd",
            "system_loss",
            "radar_cross_section",
            "anchor_power_cap",
            "radar_power_cap",
            "total_energy",
            "velocity_variance",
            "drift_rate_variance",
            "speed_of_light",
        ):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"channel parameter {name} must be finite and positive, got {value!r}")
        if self.speed_of_light != SPEED_OF_LIGHT:
            raise ValidationError("speed_of_light is a fixed constant and cannot be overridden")

    def with_overrides(self, **kwargs) -> "ChannelParams":
        return replace(self, **kwargs)


def default_params() -> ChannelParams:
    """Millimeter-wave defaults used by the bundled scenarios.

    77 GHz carrier, 500 MHz bandwidth, 10 dB antenna gain, -174 dBm/Hz noise
    floor, 3 dB system loss, 10 m^2 cross section, 1 W per-node caps and a
    10 J total energy budget.
    """
    return ChannelParams(
        carrier_frequency=77e9,
        bandwidth=500e6,
        antenna_gain=db_to_linear(10.0),
        noise_psd=dbm_per_hz_to_watt_per_hz(-174.0),
        system_loss=db_to_linear(3.0),
        radar_cross_section=10.0,
    )


def _rii_common(params: ChannelParams, power: float) -> float:
    if power < 0:
        raise ValidationError(f"transmit power must be nonnegative, got {power}")
    c = params.speed_of_light
    prefactor = 8.0 * math.pi**2 * params.bandwidth**2 / c**2
    numerator = power * params.antenna_gain**2 * c**2
    denominator = (
        (4.0 * math.pi) ** 2
        * params.noise_psd
        * params.bandwidth
        * params.system_loss
        * params.carrier_frequency**2
    )
    return prefactor * numerator / denominator


def rii_localization(params: ChannelParams, power: float, dist: float) -> float:
    """RII of a direct link, 1/m^2. Linear in power, proportional to 1/d^2."""
    if dist <= 0:
        raise GeometryError(f"localization link needs a positive distance, got {dist}")
    return _rii_common(params, power) / dist**2


def rii_sensing(params: ChannelParams, power: float, dist_to_target: float, dist_from_target: float) -> float:
    """RII of a reflected link, 1/m^2.

    Same form as the direct link with the squared distance replaced by the
    product of the squared legs, scaled by sigma/(4 pi).
    """
    if dist_to_target <= 0 or dist_from_target <= 0:
        raise GeometryError(
            f"sensing link needs positive legs, got {dist_to_target} and {dist_from_target}"
        )
    sigma_factor = params.radar_cross_section / (4.0 * math.pi)
    return _rii_common(params, power) * sigma_factor / (dist_to_target**2 * dist_from_target**2)
