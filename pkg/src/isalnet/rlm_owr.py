"""Two-way timestamp exchange for clock offset and drift estimation.

One node holds the time reference; the remote node's clock runs with an
unknown offset and a slow linear drift. Each round sends a probe, stamps
its arrival on the remote clock, and stamps the echo's return on the
reference clock. The midpoint of send and return brackets the remote
arrival, so the offset at that instant drops out of the three stamps; two
rounds separated by a known baseline give the drift as a difference
quotient.

With symmetric propagation and instant turnaround the round estimate is
exact. A forward/return asymmetry of delta biases the offset estimate by
delta/2 times (1 - drift), and independent stamp noise of deviation s
gives the drift estimate a variance of 3 s^2 over the squared midpoint
baseline (each round's offset estimate carries 1.5 s^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

MAX_DRIFT_DEFAULT = 1e-3


@dataclass(frozen=True)
class ClockModel:
    """Affine clock: reading(t) = t - (offset + drift * t).

    drift is dimensionless (seconds per second) and must stay below
    max_drift in magnitude; the linearized estimator assumes it is small.
    """

    offset: float
    drift: float
    max_drift: float = MAX_DRIFT_DEFAULT

    def __post_init__(self):
        for name in ("offset", "drift", "max_drift"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValidationError(f"{name} must be finite, got {v}")
        if self.max_drift <= 0:
            raise ValidationError(f"max_drift must be positive, got {self.max_drift}")
        if abs(self.drift) >= self.max_drift:
            raise ValidationError(
                f"|drift| must stay below {self.max_drift}, got {self.drift}"
            )

    def offset_at(self, t: float) -> float:
        return self.offset + self.drift * t

    def reading(self, t: float) -> float:
        return t - self.offset_at(t)


@dataclass(frozen=True)
class ExchangeRecord:
    """Six stamps from two probe rounds.

    Per round: send and return-receipt on the reference clock, arrival on
    the remote clock. Stamps are raw readings; any noise is already in
    them.
    """

    first_send: float
    first_remote: float
    first_return: float
    second_send: float
    second_remote: float
    second_return: float

    def __post_init__(self):
        for v in self.stamps():
            if not np.isfinite(v):
                raise ValidationError("stamps must be finite")
        if self.first_return < self.first_send:
            raise ValidationError("first round returned before it was sent")
        if self.second_return < self.second_send:
            raise ValidationError("second round returned before it was sent")
        if self.second_send <= self.first_send:
            raise ValidationError("rounds must be sent in increasing order")

    def stamps(self) -> tuple[float, ...]:
        return (
            self.first_send,
            self.first_remote,
            self.first_return,
            self.second_send,
            self.second_remote,
            self.second_return,
        )


@dataclass(frozen=True)
class DriftEstimate:
    tau_first: float
    tau_second: float
    drift: float
    mid_first: float
    mid_second: float

    def baseline(self) -> float:
        return self.mid_second - self.mid_first


def simulate_exchange(
    clock: ClockModel,
    first_send: float,
    second_send: float,
    one_way_delay: float,
    stamp_noise_sd: float = 0.0,
    seed: int | None = None,
    reverse_delay: float | None = None,
    processing_delay: float = 0.0,
) -> ExchangeRecord:
    """Generate the six stamps of a two-round exchange.

    reverse_delay defaults to the forward delay (symmetric path). Noise is
    drawn independently per stamp in chronological order (send, remote
    arrival, return) round by round, so a fixed seed fixes the record.
    """
    if not (np.isfinite(one_way_delay) and one_way_delay >= 0):
        raise ValidationError(f"one_way_delay must be nonnegative, got {one_way_delay}")
    if reverse_delay is None:
        reverse_delay = one_way_delay
    if not (np.isfinite(reverse_delay) and reverse_delay >= 0):
        raise ValidationError(f"reverse_delay must be nonnegative, got {reverse_delay}")
    if processing_delay < 0 or not np.isfinite(processing_delay):
        raise ValidationError(f"processing_delay must be nonnegative, got {processing_delay}")
    if stamp_noise_sd < 0 or not np.isfinite(stamp_noise_sd):
        raise ValidationError(f"stamp_noise_sd must be nonnegative, got {stamp_noise_sd}")
    if second_send <= first_send:
        raise ValidationError("second_send must come after first_send")

    rng = np.random.default_rng(seed)

    def stamps(send):
        arrive = send + one_way_delay
        ret = arrive + processing_delay + reverse_delay
        return send, clock.reading(arrive), ret

    s1, r1, b1 = stamps(first_send)
    s2, r2, b2 = stamps(second_send)
    noise = stamp_noise_sd * rng.standard_normal(6) if stamp_noise_sd > 0 else np.zeros(6)
    return ExchangeRecord(
        first_send=s1 + noise[0],
        first_remote=r1 + noise[1],
        first_return=b1 + noise[2],
        second_send=s2 + noise[3],
        second_remote=r2 + noise[4],
        second_return=b2 + noise[5],
    )


def estimate_drift(record: ExchangeRecord) -> DriftEstimate:
    """Offsets at the two round midpoints, and drift as their slope."""
    mid_first = 0.5 * (record.first_send + record.first_return)
    mid_second = 0.5 * (record.second_send + record.second_return)
    tau_first = mid_first - record.first_remote
    tau_second = mid_second - record.second_remote
    baseline = mid_second - mid_first
    if baseline == 0.0:
        raise ValidationError("round midpoints coincide; drift is undefined")
    return DriftEstimate(
        tau_first=tau_first,
        tau_second=tau_second,
        drift=(tau_second - tau_first) / baseline,
        mid_first=mid_first,
        mid_second=mid_second,
    )


def drift_variance_estimate(stamp_noise_sd: float, record: ExchangeRecord) -> float:
    """Predicted variance of the drift estimate under iid stamp noise.

    Each offset estimate carries variance 1.5 s^2; their difference 3 s^2;
    noise in the baseline itself is second order and ignored.
    """
    if stamp_noise_sd < 0 or not np.isfinite(stamp_noise_sd):
        raise ValidationError(f"stamp_noise_sd must be nonnegative, got {stamp_noise_sd}")
    est = estimate_drift(record)
    return 3.0 * stamp_noise_sd**2 / est.baseline() ** 2
