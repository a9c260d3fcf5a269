"""Classical ensemble dynamics in the time-dependent conveyor potential.

Thermal clouds are drawn by Metropolis sampling of the Boltzmann weight
inside one well's basin, then propagated with velocity Verlet; forces are
central finite differences of the potential at the instantaneous drive
phase.  Atoms that enter a wire exclusion zone or leave the domain box are
frozen and flagged lost, never dropped.  Everything is deterministic for a
fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import K_B, AtomState
from .errors import (ConfigurationError, DomainError, SamplingError,
                     StatisticsError)
from .fields import FD_STEP, ChipScene, CurrentSet
from .trapping import TrapCharacterization, well_chain
from .waveforms import DriveConfig, PhaseProfile

METROPOLIS_BURN_IN = 150   # sweeps before samples are taken
METROPOLIS_THIN = 30       # extra decorrelation sweeps after burn-in


@dataclass(frozen=True)
class Ensemble:
    """N classical atoms; lost atoms stay in the arrays, frozen."""

    positions: np.ndarray   # (N, 3) m
    velocities: np.ndarray  # (N, 3) m/s
    time: float
    seed: int
    atom: AtomState
    lost_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.lost_mask is None:
            object.__setattr__(self, "lost_mask", np.zeros(len(self.positions), bool))

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def n_alive(self) -> int:
        return int((~self.lost_mask).sum())

    @property
    def survival_fraction(self) -> float:
        return self.n_alive / self.n_atoms


@dataclass(frozen=True)
class TransportReport:
    v_max: float
    T_initial: float
    T_final: float
    deltaT: float
    survival_fraction: float
    com_trajectory: tuple  # ((t, x_com, z_com, T, survival), ...)


def thermal_sigmas(well: TrapCharacterization, T: float, atom: AtomState,
                   flat_scale: float = 100e-6) -> np.ndarray:
    """Per-axis thermal position spreads sqrt(kB T / m) / omega.

    Flat directions (zero frequency) fall back to ``flat_scale``.
    """
    v = math.sqrt(K_B * T / atom.mass)
    sig = np.empty(3)
    for i, f in enumerate(well.frequencies):
        sig[i] = v / (2.0 * math.pi * f) if f > 1.0 else flat_scale
    return sig


def sample_thermal(scene: ChipScene, currents: CurrentSet,
                   well: TrapCharacterization, T: float, N: int, seed: int,
                   basin_halfwidth=None) -> Ensemble:
    """Draw N atoms from exp(-U/kB T) inside the well basin, at rest frame T.

    Positions come from a vectorized Metropolis walk (one independent
    walker per atom) started at the well center and restricted to a box of
    half-widths ``basin_halfwidth`` around it (default: 5 thermal sigmas
    per principal axis).  Velocities are exact Maxwell-Boltzmann draws.

    Raises:
        SamplingError: if the Metropolis acceptance rate falls below 1%.
    """
    if T <= 0:
        raise DomainError("temperature must be > 0")
    if N < 1:
        raise DomainError("N must be >= 1")
    rng = np.random.default_rng(seed)
    model = scene.model()
    atom = scene.atom
    sig_axes = thermal_sigmas(well, T, atom)
    # Box in the eigenvector frame, expressed per lab axis.
    vecs = well.hessian_eigvecs
    lab_sigma = np.sqrt((vecs**2) @ sig_axes**2)
    if basin_halfwidth is None:
        halfwidth = 5.0 * lab_sigma
    else:
        halfwidth = np.asarray(basin_halfwidth, dtype=float)
    lo = well.position - halfwidth
    hi = well.position + halfwidth
    step = np.minimum(lab_sigma, halfwidth / 3.0)

    x = np.repeat(well.position[None, :], N, axis=0)
    x += 0.05 * step * rng.standard_normal((N, 3))
    U = model.potential(currents, x)
    beta = 1.0 / (K_B * T)
    accepted = 0
    total = 0
    for sweep in range(METROPOLIS_BURN_IN + METROPOLIS_THIN):
        prop = x + step * rng.standard_normal((N, 3))
        inside = ((prop >= lo) & (prop <= hi)).all(axis=1)
        U_prop = model.potential(currents, prop)
        accept = inside & (np.log(rng.random(N)) < -beta * (U_prop - U))
        x[accept] = prop[accept]
        U[accept] = U_prop[accept]
        if sweep >= METROPOLIS_BURN_IN // 2:
            accepted += int(accept.sum())
            total += N
    if accepted < 0.01 * total:
        raise SamplingError(
            f"Metropolis acceptance {accepted / total:.2%}; potential and "
            f"temperature are mismatched for this well")
    v = rng.normal(0.0, math.sqrt(K_B * T / atom.mass), (N, 3))
    return Ensemble(positions=x, velocities=v, time=0.0, seed=seed, atom=atom)


def force(scene: ChipScene, currents: CurrentSet, points,
          h: float = FD_STEP) -> np.ndarray:
    """-grad U by central differences, newtons; vectorized over points."""
    return scene.model().force(currents, points, h)


class _PhaseClock:
    """Drive phase vs wall time; holds the end phase after the profile ends."""

    def __init__(self, profile: PhaseProfile, t_start: float = 0.0):
        self.profile = profile
        self.t_start = t_start
        t0 = profile.knots[0][0] if profile.kind == "piecewise" else 0.0
        self._lo = t0
        self._hi = t0 + profile.duration

    def phase(self, t: float) -> float:
        tt = min(max(t - self.t_start + self._lo, self._lo), self._hi)
        return self.profile.phase_at(tt)


def integrate(ensemble: Ensemble, scene: ChipScene, drive: DriveConfig,
              profile: PhaseProfile, t_end: float, dt: float,
              nu_max: float | None = None, monitor=None,
              monitor_every: int = 0, loss_check_every: int = 10) -> Ensemble:
    """Velocity-Verlet propagation to ``t_end`` with phase-driven currents.

    The stability precondition dt <= 1/(20 nu_max) is enforced when
    ``nu_max`` (fastest expected oscillation frequency, Hz) is given;
    violating it refuses to run rather than silently subsampling.  Atoms
    are tested against the exclusion zones and the domain box every
    ``loss_check_every`` steps (they drift nanometers per step against
    micrometer-scale margins).  ``monitor(t, positions, velocities,
    lost_mask)`` is called every ``monitor_every`` steps when provided.
    """
    if t_end <= ensemble.time:
        raise DomainError("t_end must exceed the ensemble time")
    if nu_max is not None and dt > 1.0 / (20.0 * nu_max):
        raise ConfigurationError(
            f"dt = {dt:.3e} s violates dt <= 1/(20 nu_max) = "
            f"{1.0 / (20.0 * nu_max):.3e} s")
    model = scene.model()
    clock = _PhaseClock(profile)
    mass = ensemble.atom.mass

    x = ensemble.positions.copy()
    v = ensemble.velocities.copy()
    lost = ensemble.lost_mask.copy()
    t = ensemble.time
    n_steps = int(round((t_end - ensemble.time) / dt))
    currents = drive.currents_at(clock.phase(t))
    F = model.force(currents, x)
    F[lost] = 0.0
    c1 = dt * dt / (2.0 * mass)
    c2 = dt / (2.0 * mass)
    alive = ~lost
    for istep in range(n_steps):
        x[alive] += v[alive] * dt + F[alive] * c1
        t = ensemble.time + (istep + 1) * dt
        if (istep + 1) % loss_check_every == 0:
            newly_lost = alive & (model.excluded(x) | ~model.in_domain(x))
            if newly_lost.any():
                lost |= newly_lost
                v[newly_lost] = 0.0
                alive = ~lost
        currents = drive.currents_at(clock.phase(t))
        F_new = model.force(currents, x)
        F_new[lost] = 0.0
        v[alive] += (F[alive] + F_new[alive]) * c2
        F = F_new
        if monitor is not None and monitor_every and (istep + 1) % monitor_every == 0:
            monitor(t, x, v, lost)
    return replace(ensemble, positions=x, velocities=v, time=t, lost_mask=lost)


def temperature(ensemble: Ensemble, frame_velocity=None) -> float:
    """Kinetic temperature over surviving atoms, center-of-mass removed."""
    alive = ~ensemble.lost_mask
    if int(alive.sum()) < 2:
        raise StatisticsError("need at least 2 surviving atoms")
    v = ensemble.velocities[alive]
    if frame_velocity is not None:
        v = v - np.asarray(frame_velocity, dtype=float)
    dv = v - v.mean(axis=0)
    return float(ensemble.atom.mass * np.mean(np.sum(dv**2, axis=1)) / (3.0 * K_B))


def _windowed_temperature(ensemble, scene, drive, profile, duration, dt,
                          n_samples: int = 24):
    """Mean kinetic temperature over an evolution window (virial averaging)."""
    temps = []
    ens = ensemble
    t_target = ensemble.time + duration
    sample_dt = duration / n_samples
    for k in range(n_samples):
        ens = integrate(ens, scene, drive, profile,
                        min(ensemble.time + (k + 1) * sample_dt, t_target), dt)
        temps.append(temperature(ens))
    return ens, float(np.mean(temps))


def transport_experiment(scene: ChipScene, drive: DriveConfig, v_max: float,
                         distance: float, T0: float, N: int, seed: int,
                         dt: float | None = None,
                         settle_periods: float = 5.0) -> TransportReport:
    """One transport run: sample, move by ``distance`` with peak speed
    ``v_max`` on a smoothstep phase ramp, stop, let the cloud mix, report.

    ``v_max = 0`` runs the null experiment: the drive stays frozen for the
    default transport period and the temperature change is pure estimator
    noise.
    """
    if v_max < 0:
        raise DomainError("v_max must be >= 0")
    period = scene.layout.modulation_period
    chain = well_chain(scene, drive.currents_at(0.0),
                       (-1.2 * period, 1.2 * period), n_samples=96)
    if not chain.wells:
        raise DomainError("no conveyor wells found; check the scene")
    well = min(chain.wells, key=lambda w: abs(w.position[0]))
    nu_fastest = max(float(w.frequencies[2]) for w in chain.wells)
    if dt is None:
        dt = 1.0 / (40.0 * nu_fastest)

    if v_max == 0.0:
        profile = PhaseProfile.smooth(0.0, 0.15)
    else:
        total_phase = 2.0 * math.pi * distance / period
        duration = 15.0 * distance / (8.0 * v_max)
        profile = PhaseProfile.smooth(total_phase, duration)

    ens = sample_thermal(scene, drive.currents_at(0.0), well, T0, N, seed)

    # Pre-transport settling window: same-atom time-averaged temperature
    # baseline, so dT is insensitive to the finite-N sampling noise.
    nu_slow = max(float(well.frequencies[0]), 20.0)
    window = settle_periods / nu_slow
    hold = PhaseProfile.smooth(0.0, window)
    ens, T_initial = _windowed_temperature(ens, scene, drive, hold, window, dt)

    traj = []
    if v_max > 0.0:
        ens = replace(ens, time=0.0)
        n_rec = 50

        def monitor(t, x, v, lost):
            alive = ~lost
            vv = v[alive] - v[alive].mean(axis=0)
            T = scene.atom.mass * np.mean(np.sum(vv**2, axis=1)) / (3.0 * K_B)
            traj.append((t, float(x[alive, 0].mean()), float(x[alive, 2].mean()),
                         float(T), float(alive.mean())))

        every = max(1, int(round(profile.duration / dt / n_rec)))
        ens = integrate(ens, scene, drive, profile, profile.duration, dt,
                        nu_max=nu_fastest, monitor=monitor, monitor_every=every)

    hold_end = PhaseProfile.smooth(0.0, window, phase0=profile.phase_at(profile.duration))
    ens = replace(ens, time=0.0)
    ens, T_final = _windowed_temperature(ens, scene, drive, hold_end, window, dt)

    return TransportReport(
        v_max=v_max, T_initial=T_initial, T_final=T_final,
        deltaT=T_final - T_initial,
        survival_fraction=ens.survival_fraction,
        com_trajectory=tuple(traj),
    )


def mean_flux(atoms_per_well: float, profile: PhaseProfile) -> float:
    """Wells delivered per second times occupancy, for a steady linear drive."""
    if profile.kind != "linear":
        raise DomainError("mean flux is defined for steady (linear) drives only")
    return atoms_per_well * profile.omega / (2.0 * math.pi)
