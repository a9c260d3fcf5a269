"""Time/phase-dependent current laws and phase profiles.

The conveyor is driven by two modulation currents on a circle,
(IM1, IM2) = A (cos phi, -sin phi), while the merge wire follows a fixed
two-harmonic waveform.  Phase profiles phi(t) translate wall-clock time
into drive phase; any monotone profile is allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Merge-wire waveform coefficients (c0, c1, phi1, c2, phi2); the second
# harmonic is subtracted: I = c0 + c1 sin(phi + phi1) - c2 sin(2 phi + phi2).
H2_DEFAULT_COEFFS = (0.462, 0.255, 0.493, 0.088, -1.482)


@dataclass(frozen=True)
class DriveConfig:
    """Amplitudes of the conveyor drive and the merge waveform."""

    I0_const: float = 2.0
    IM_amplitude: float = 1.0
    h2_coeffs: tuple = H2_DEFAULT_COEFFS
    h2_enabled: bool = False

    def __post_init__(self):
        if self.IM_amplitude < 0:
            raise DomainError("IM_amplitude must be >= 0")

    def currents_at(self, phase: float):
        """CurrentSet for a drive phase in radians."""
        from .fields import CurrentSet

        im1, im2 = conveyor_currents(phase, self.IM_amplitude)
        ih2 = h2_current(phase, self.h2_coeffs) if self.h2_enabled else 0.0
        return CurrentSet(I0=self.I0_const, IM1=im1, IM2=im2, IH2=ih2)


def conveyor_currents(phase, amplitude: float = 1.0):
    """Modulation currents (IM1, IM2) = amplitude * (cos phi, -sin phi)."""
    return amplitude * np.cos(phase), -amplitude * np.sin(phase)


def h2_current(phase, coeffs=H2_DEFAULT_COEFFS):
    """Merge-wire current c0 + c1 sin(phi+phi1) - c2 sin(2 phi+phi2), ampere."""
    c0, c1, p1, c2, p2 = coeffs
    return c0 + c1 * np.sin(phase + p1) - c2 * np.sin(2.0 * phase + p2)


def _smoothstep(u):
    """C2 quintic ramp s(u) = 6u^5 - 15u^4 + 10u^3 on [0, 1]."""
    return u**3 * (10.0 + u * (-15.0 + 6.0 * u))


def _smoothstep_rate(u):
    return 30.0 * u**2 * (1.0 - u) ** 2


@dataclass(frozen=True)
class PhaseProfile:
    """Drive phase as a function of time.

    kinds:
      - "linear": phi = omega * t over ``duration``
      - "smoothstep": quintic C2 ramp from 0 to ``total_phase`` over
        ``duration`` (zero rate at both ends)
      - "piecewise": monotone-cubic interpolation through ``knots``
    """

    kind: str = "linear"
    omega: float = 0.0
    duration: float = 0.0
    total_phase: float = 0.0
    knots: tuple = field(default_factory=tuple)
    phase0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "smoothstep", "piecewise"):
            raise DomainError(f"unknown profile kind {self.kind!r}")
        if self.kind == "piecewise":
            knots = tuple((float(t), float(p)) for t, p in self.knots)
            if len(knots) < 2:
                raise DomainError("piecewise profile needs at least two knots")
            times = [t for t, _ in knots]
            phases = [p for _, p in knots]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise DomainError("piecewise knot times must increase")
            if any(b < a for a, b in zip(phases, phases[1:])):
                raise DomainError("piecewise knot phases must be non-decreasing")
            object.__setattr__(self, "knots", knots)
            object.__setattr__(self, "duration", times[-1] - times[0])
            object.__setattr__(self, "total_phase", phases[-1] - phases[0])
            from scipy.interpolate import PchipInterpolator

            object.__setattr__(self, "_interp", PchipInterpolator(times, phases))
        elif self.duration < 0:
            raise DomainError("duration must be >= 0")

    @staticmethod
    def linear(omega: float, duration: float, phase0: float = 0.0) -> "PhaseProfile":
        return PhaseProfile(kind="linear", omega=omega, duration=duration,
                            total_phase=omega * duration, phase0=phase0)

    @staticmethod
    def smooth(total_phase: float, duration: float, phase0: float = 0.0) -> "PhaseProfile":
        return PhaseProfile(kind="smoothstep", total_phase=total_phase,
                            duration=duration, phase0=phase0)

    @staticmethod
    def piecewise(knots, phase0: float = 0.0) -> "PhaseProfile":
        return PhaseProfile(kind="piecewise", knots=tuple(knots), phase0=phase0)

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        t0 = self.knots[0][0] if self.kind == "piecewise" else 0.0
        if np.any(t < t0 - 1e-15) or np.any(t > t0 + self.duration + 1e-15):
            raise DomainError(f"time outside profile range [{t0}, {t0 + self.duration}]")
        return t

    def phase_at(self, t):
        """Phase in radians at time ``t`` (seconds, within the profile range)."""
        t = self._check_time(t)
        if self.kind == "linear":
            out = self.omega * t
        elif self.kind == "smoothstep":
            u = t / self.duration if self.duration > 0 else np.zeros_like(t)
            out = self.total_phase * _smoothstep(np.clip(u, 0.0, 1.0))
        else:
            out = self._interp(t) - self.knots[0][1]
        out = out + self.phase0
        return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out

    def rate_at(self, t):
        """dphi/dt in rad/s at time ``t``."""
        t = self._check_time(t)
        if self.kind == "linear":
            out = np.broadcast_to(self.omega, np.shape(t)).astype(float)
        elif self.kind == "smoothstep":
            u = t / self.duration if self.duration > 0 else np.zeros_like(t)
            out = self.total_phase / self.duration * _smoothstep_rate(np.clip(u, 0.0, 1.0))
        else:
            out = self._interp.derivative()(t)
        return float(out) if np.ndim(t) == 0 else out

    def max_rate(self, samples: int = 10001) -> float:
        if self.kind == "linear":
            return abs(self.omega)
        if self.kind == "smoothstep":
            # quintic ramp rate peaks at the midpoint: s'(1/2) = 15/8
            return abs(self.total_phase) / self.duration * 15.0 / 8.0
        t0 = self.knots[0][0]
        ts = np.linspace(t0, t0 + self.duration, samples)
        return float(np.max(self._interp.derivative()(ts)))


def phase_at(profile: PhaseProfile, t):
    """Functional alias for :meth:`PhaseProfile.phase_at`."""
    return profile.phase_at(t)


def max_well_velocity(profile: PhaseProfile, modulation_period: float) -> float:
    """Peak well speed: (period / 2 pi) * max dphi/dt, m/s."""
    return modulation_period / (2.0 * math.pi) * profile.max_rate()


def waveform_rows(profile: PhaseProfile, drive: DriveConfig, times):
    """Rows for the waveform CSV: t_s, phase_rad, I0_A, IM1_A, IM2_A, IH2_A."""
    rows = []
    for t in np.asarray(times, dtype=float):
        phi = profile.phase_at(t)
        im1, im2 = conveyor_currents(phi, drive.IM_amplitude)
        ih2 = h2_current(phi, drive.h2_coeffs) if drive.h2_enabled else 0.0
        rows.append((t, phi, drive.I0_const, im1, im2, ih2))
    return rows
