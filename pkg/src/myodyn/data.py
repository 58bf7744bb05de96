"""Synthetic joint kinematics and numerical differentiation.

The motion protocols are raised-cosine flexion cycles: the joint starts at
rest, flexes to the protocol peak and returns, with a per-trial jittered
cycle frequency and a small seeded sum-of-sines perturbation so trials are
not identical. Velocity and acceleration always come from discrete
differentiation of the angle series, never from the analytic form, matching
how measured kinematics would be processed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

PROTOCOL_PEAK_RAD = {"knee": np.pi / 2, "elbow": 2 * np.pi / 3}
CYCLE_FREQ_RANGE_HZ = (0.28, 0.38)
_NOISE_FREQ_RANGE_HZ = (0.4, 1.0)
_NOISE_COMPONENTS = 3
_SMOOTH_WIDTH = 5  # moving-average window applied before differencing


@dataclass(frozen=True)
class KinematicSeries:
    """Uniformly sampled (q, qdot, qddot) for one trajectory."""

    time: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray
    trajectory_id: int
    rate_hz: float

    def __post_init__(self):
        n = self.time.size
        if not (self.q.size == self.qdot.size == self.qddot.size == n):
            raise DimensionError("kinematic channels have unequal lengths")
        if n >= 2:
            dt = np.diff(self.time)
            if not np.allclose(dt, 1.0 / self.rate_hz, rtol=0, atol=1e-9):
                raise ConfigError("time stamps are not uniform at the declared rate")

    def __len__(self):
        return self.time.size


def differentiate(q, rate_hz: float):
    """(qdot, qddot) from an angle series: 5-point moving-average smoothing,
    then central differences; one-sided differences at the ends."""
    q = np.asarray(q, dtype=np.float64)
    n = q.size
    if n < _SMOOTH_WIDTH:
        raise DimensionError(f"series of length {n} is too short to differentiate")
    h = 1.0 / rate_hz
    half = _SMOOTH_WIDTH // 2
    padded = np.concatenate([np.repeat(q[0], half), q, np.repeat(q[-1], half)])
    sm = np.convolve(padded, np.full(_SMOOTH_WIDTH, 1.0 / _SMOOTH_WIDTH), mode="valid")

    qdot = np.empty(n)
    qdot[1:-1] = (sm[2:] - sm[:-2]) / (2.0 * h)
    qdot[0] = (sm[1] - sm[0]) / h
    qdot[-1] = (sm[-1] - sm[-2]) / h

    qddot = np.empty(n)
    qddot[1:-1] = (sm[2:] - 2.0 * sm[1:-1] + sm[:-2]) / (h * h)
    qddot[0] = (sm[2] - 2.0 * sm[1] + sm[0]) / (h * h)
    qddot[-1] = (sm[-1] - 2.0 * sm[-2] + sm[-3]) / (h * h)
    return qdot, qddot


def generate_trajectory(protocol: str, trials: int = 4, duration_s: float = 12.0,
                        rate_hz: float = 250.0, seed: int = 0,
                        noise_rms_deg: float = 0.3) -> list[KinematicSeries]:
    """Seeded flexion cycles for one protocol; one series per trial.

    q(t) = peak/2 * (1 - cos(2 pi f t)) with f drawn per trial, plus a
    sum-of-sines perturbation scaled to noise_rms_deg (zero at t = 0 so every
    trial starts exactly at rest posture).
    """
    if protocol not in PROTOCOL_PEAK_RAD:
        raise ConfigError(f"unknown protocol '{protocol}'")
    amplitude = PROTOCOL_PEAK_RAD[protocol] / 2.0
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate_hz))
    t = np.arange(n) / rate_hz
    series = []
    for k in range(trials):
        f = rng.uniform(*CYCLE_FREQ_RANGE_HZ)
        q = amplitude * (1.0 - np.cos(2.0 * np.pi * f * t))
        if noise_rms_deg > 0.0:
            freqs = rng.uniform(*_NOISE_FREQ_RANGE_HZ, size=_NOISE_COMPONENTS)
            amps = rng.uniform(0.5, 1.0, size=_NOISE_COMPONENTS)
            noise = np.zeros(n)
            for fi, ai in zip(freqs, amps):
                noise += ai * np.sin(2.0 * np.pi * fi * t)
            rms = float(np.sqrt(np.mean(noise ** 2)))
            noise *= np.deg2rad(noise_rms_deg) / rms
            q = q + noise
        qdot, qddot = differentiate(q, rate_hz)
        series.append(KinematicSeries(time=t, q=q, qdot=qdot, qddot=qddot,
                                      trajectory_id=k, rate_hz=rate_hz))
    return series
