"""Two-trap unification: phase maps, septum thermodynamics, PSD accounting.

The unification of two harmonic-trapped ideal gases is modeled as the
classic septum problem: sudden removal of the partition (entropy of mixing
included), then isentropic compression back to the final trap shape.  For
a classical gas in a 3D harmonic trap the phase-space density
rho = N (hbar wbar / kB T)^3 fixes the entropy per particle,
S/(N kB) = 4 - ln(rho), which is what the closed forms below bookkeep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HBAR, K_B
from .errors import DomainError, SearchError
from .fields import ChipScene
from .trapping import find_minimum, line_profile, _local_extrema
from .waveforms import DriveConfig, PhaseProfile

MERGED_EXPANSION = 2.0 ** (1.0 / 3.0)  # united double well: z doubles, wbar /= 2^(1/3)


@dataclass(frozen=True)
class PsdReport:
    N: float
    T: float
    mean_frequency: float   # geometric mean, Hz
    psd: float
    method: str             # "closed_form" | "ensemble"


@dataclass(frozen=True)
class MergePhaseMap:
    phases: np.ndarray            # rad
    minima_counts: np.ndarray     # int per phase
    barrier_heights: np.ndarray   # T; nan where undefined
    volumes: np.ndarray           # 1/Hz^3 proxy; nan where not evaluated
    volume_initial: float
    milestone_phases: tuple       # (separate_until, merged_at, compressed_at) rad
    roi: tuple                    # (x_lo, x_hi) m


def _mean_angular_frequency(frequencies) -> float:
    f = np.asarray(frequencies, dtype=float)
    if np.any(f <= 0):
        raise DomainError("frequencies must all be > 0")
    return 2.0 * math.pi * float(np.exp(np.mean(np.log(f))))


def psd_closed_form(N: float, T: float, frequencies) -> PsdReport:
    """Harmonic-gas phase-space density N (hbar wbar / kB T)^3."""
    if N <= 0 or T <= 0:
        raise DomainError("N and T must be > 0")
    wbar = _mean_angular_frequency(frequencies)
    psd = N * (HBAR * wbar / (K_B * T)) ** 3
    return PsdReport(N=N, T=T, mean_frequency=wbar / (2.0 * math.pi), psd=psd,
                     method="closed_form")


def _log_psd(N, T, wbar):
    return math.log(N) + 3.0 * math.log(HBAR * wbar / (K_B * T))


def septum_prediction(N1: float, T1: float, N2: float, T2: float,
                      freqs_init, freqs_final, merged_freqs=None):
    """Closed-form merge outcome: (T_final, psd_final / psd_initial).

    Both initial traps share the shape ``freqs_init``.  Septum removal is
    instantaneous: energy conserving (T mixes population-weighted) and the
    united well holds double the phase-space volume (``merged_freqs``
    overrides that intermediate shape; passing ``freqs_init`` makes the
    degenerate null merge).  Compression to ``freqs_final`` is isentropic.
    The initial PSD is the population-weighted geometric mean over the
    populated traps, which makes the ratio exactly the exponential of the
    entropy produced per particle.
    """
    if N1 < 0 or N2 < 0 or N1 + N2 < 1:
        raise DomainError("need at least one populated trap")
    if (N1 > 0 and T1 <= 0) or (N2 > 0 and T2 <= 0):
        raise DomainError("populated traps need positive temperatures")
    w_i = _mean_angular_frequency(freqs_init)
    w_f = _mean_angular_frequency(freqs_final)
    w_m = (_mean_angular_frequency(merged_freqs) if merged_freqs is not None
           else w_i / MERGED_EXPANSION)
    n_tot = N1 + N2
    T_mix = (N1 * T1 + N2 * T2) / n_tot
    T_final = T_mix * (w_f / w_m)
    log_psd_final = _log_psd(n_tot, T_final, w_f)
    log_psd_init = 0.0
    for Nj, Tj in ((N1, T1), (N2, T2)):
        if Nj > 0:
            log_psd_init += Nj * _log_psd(Nj, Tj, w_i)
    log_psd_init /= n_tot
    return T_final, math.exp(log_psd_final - log_psd_init)


def _volume_proxy(frequencies) -> float:
    f = np.asarray(frequencies, dtype=float)
    f = np.maximum(f, 1e-3)
    return float(1.0 / np.prod(f))


MINIMUM_PROMINENCE = 2e-6  # T; shallower line-profile dips do not count as wells


def merge_region(scene: ChipScene):
    """Two-trap window: the stationary wire plus the approach corridor.

    Asymmetric on purpose: the conveyor well arrives from -x, and nothing
    sits beyond the stationary wire on the +x side.
    """
    x_h2 = scene.layout.h2_position
    if x_h2 is None:
        raise DomainError("scene has no H2 conductor; enable the merge layout")
    period = scene.layout.modulation_period
    return (x_h2 - 0.8 * period, x_h2 + 0.4 * period)


def _profile_minima(scene, currents, roi, n_samples=56,
                    prominence: float = MINIMUM_PROMINENCE,
                    transverse_seed=None):
    """Line profile plus its well minima, after merging sub-prominence dips."""
    xs, U_line, B_line, track = line_profile(scene, currents, roi, n_samples,
                                             transverse_seed=transverse_seed)
    min_idx, max_idx = _local_extrema(U_line)
    # Collapse pairs of minima whose mutual barrier is below the prominence
    # floor: numerically they are one well.
    min_idx = list(min_idx)
    changed = True
    while changed and len(min_idx) > 1:
        changed = False
        for a, b in zip(min_idx, min_idx[1:]):
            saddle = float(B_line[a:b + 1].max())
            if saddle - max(B_line[a], B_line[b]) < prominence:
                drop = a if B_line[a] > B_line[b] else b
                min_idx.remove(drop)
                changed = True
                break
    return xs, U_line, B_line, track, min_idx, max_idx


def merge_phase_map(scene: ChipScene, drive: DriveConfig, phase_grid,
                    n_samples: int = 56, refine_volumes: bool = True,
                    roi=None) -> MergePhaseMap:
    """Count line-profile minima across the merge window and locate the
    unification milestones.

    The map records, per phase: the number of distinct minima in the
    region of interest, the barrier above the shallower well while two
    minima coexist, and (once united) the thermal-ellipsoid volume proxy
    1/(fx fy fz) of the single well.  Milestones: the last phase with two
    minima, the first phase with one, and the first phase at which the
    united well's volume reaches the stationary trap's value at the start
    of the grid.
    """
    if not drive.h2_enabled:
        raise DomainError("merge map needs the H2 channel enabled")
    phases = np.asarray(phase_grid, dtype=float)
    if phases[-1] - phases[0] < 2.0 * math.pi - 1e-9:
        raise DomainError("phase grid must cover one full period")
    if roi is None:
        roi = merge_region(scene)
    counts = np.zeros(len(phases), dtype=int)
    barriers = np.full(len(phases), np.nan)
    volumes = np.full(len(phases), np.nan)

    per_phase = []
    seed = None
    for i, phi in enumerate(phases):
        currents = drive.currents_at(phi)
        try:
            xs, U_line, B_line, track, min_idx, max_idx = _profile_minima(
                scene, currents, roi, n_samples, transverse_seed=seed)
        except SearchError as exc:
            raise SearchError(f"profile scan failed at phase {phi:.4f} rad") from exc
        seed = track  # warm-start the next phase
        counts[i] = len(min_idx)
        per_phase.append((xs, B_line, track, min_idx))
        if len(min_idx) == 2:
            a, b = min_idx
            saddle = float(B_line[a:b + 1].max())
            barriers[i] = saddle - max(B_line[a], B_line[b])

    two = np.where(counts == 2)[0]
    if two.size == 0:
        raise SearchError("no phase with two separated traps in the grid")
    after = np.where((counts == 1) & (np.arange(len(counts)) > two[0]))[0]
    if after.size == 0:
        raise SearchError("traps never unite on this grid")
    merged_i = int(after[0])
    separate_i = int(two[two < merged_i][-1])

    def _refine(i, which="stationary"):
        xs, B_line, track, min_idx = per_phase[i]
        if which == "stationary":
            j = min_idx[-1]
        else:
            j = min_idx[0]
        seed = np.array([xs[j], track[j, 0], track[j, 1]])
        return find_minimum(scene, drive.currents_at(phases[i]), seed,
                            phase=phases[i])

    vol_initial = _volume_proxy(_refine(0).frequencies)
    compressed_phase = math.nan
    if refine_volumes:
        for i in range(merged_i, len(phases)):
            if counts[i] != 1:
                continue
            volumes[i] = _volume_proxy(_refine(i).frequencies)
            if math.isnan(compressed_phase) and volumes[i] <= vol_initial:
                compressed_phase = float(phases[i])
                break

    return MergePhaseMap(
        phases=phases, minima_counts=counts, barrier_heights=barriers,
        volumes=volumes, volume_initial=vol_initial,
        milestone_phases=(float(phases[separate_i]), float(phases[merged_i]),
                          compressed_phase),
        roi=roi,
    )


def _ensemble_psd(N, T, frequencies) -> PsdReport:
    wbar = _mean_angular_frequency(np.maximum(frequencies, 1.0))
    psd = N * (HBAR * wbar / (K_B * T)) ** 3
    return PsdReport(N=N, T=T, mean_frequency=wbar / (2.0 * math.pi), psd=psd,
                     method="ensemble")


def merge_simulate(scene: ChipScene, drive: DriveConfig, populate: str,
                   N_per_well: int, T0: float, seed: int,
                   cycle_duration: float = 0.6,
                   phi_start: float = math.radians(90.0),
                   dt: float | None = None):
    """Monte Carlo unification: sample, drive one full cycle, re-fit.

    ``populate`` is "both" or "left_only" (the arriving conveyor well).
    Returns ``(before, after)`` PSD reports; ``after`` uses the measured
    kinetic temperature and the fitted frequencies of the occupied final
    well over the surviving atoms.
    """
    from .dynamics import Ensemble, integrate, sample_thermal, temperature

    if populate not in ("both", "left_only"):
        raise DomainError("populate must be 'both' or 'left_only'")
    if T0 <= 0:
        raise DomainError("T0 must be > 0")
    roi = merge_region(scene)
    currents0 = drive.currents_at(phi_start)
    xs, U_line, B_line, track, min_idx, max_idx = _profile_minima(scene, currents0, roi)
    if len(min_idx) < 2:
        raise SearchError("start phase does not show two separated traps")
    seeds = [np.array([xs[j], track[j, 0], track[j, 1]]) for j in min_idx]
    left = find_minimum(scene, currents0, seeds[0], phase=phi_start)
    right = find_minimum(scene, currents0, seeds[-1], phase=phi_start)

    wells = [left] if populate == "left_only" else [left, right]
    parts = []
    logs = []
    for k, well in enumerate(wells):
        ens = sample_thermal(scene, currents0, well, T0, N_per_well, seed + k)
        T_meas = temperature(ens)
        logs.append((N_per_well, T_meas, well.frequencies))
        parts.append(ens)
    positions = np.vstack([e.positions for e in parts])
    velocities = np.vstack([e.velocities for e in parts])
    ens = Ensemble(positions=positions, velocities=velocities, time=0.0,
                   seed=seed, atom=scene.atom)

    n_tot = sum(n for n, _, _ in logs)
    log_psd = sum(n * _log_psd(n, t, _mean_angular_frequency(np.maximum(f, 1.0)))
                  for n, t, f in logs) / n_tot
    wbar_before = _mean_angular_frequency(
        np.maximum(logs[0][2], 1.0)) if len(logs) == 1 else math.nan
    before = PsdReport(N=n_tot, T=float(np.mean([t for _, t, _ in logs])),
                       mean_frequency=(wbar_before / (2 * math.pi)
                                       if not math.isnan(wbar_before) else math.nan),
                       psd=math.exp(log_psd), method="ensemble")

    nu_fast = max(float(left.frequencies[2]), float(right.frequencies[2]))
    if dt is None:
        dt = 1.0 / (40.0 * 1.3 * nu_fast)
    profile = PhaseProfile.linear(2.0 * math.pi / cycle_duration, cycle_duration,
                                  phase0=phi_start)
    ens = integrate(ens, scene, drive, profile, cycle_duration, dt,
                    nu_max=1.3 * nu_fast)

    phi_end = phi_start + 2.0 * math.pi
    hold = PhaseProfile.smooth(0.0, 1.0, phase0=phi_end)
    final_currents = drive.currents_at(phi_end)
    final_well = find_minimum(scene, final_currents,
                              right.position, phase=phi_end)
    nu_slow = max(float(final_well.frequencies[0]), 20.0)
    window = 5.0 / nu_slow
    ens = replace_time(ens)
    ens = integrate(ens, scene, drive, hold, window, dt)

    # The stationary trap's cloud: atoms inside the final well's basin
    # (between the neighboring line-profile barriers).  Atoms dragged
    # onward by the dying conveyor wave sit outside it and are gone from
    # the trap being scored, like any other loss channel.
    fx, fU, fB, ftr, fmins, _ = _profile_minima(scene, final_currents, roi)
    j_well = min(fmins, key=lambda j: abs(fx[j] - final_well.position[0]))
    _, peaks = _local_extrema(fB)
    left_peaks = [j for j in peaks if j < j_well]
    right_peaks = [j for j in peaks if j > j_well]
    x_lo = fx[left_peaks[-1]] if left_peaks else roi[0]
    x_hi = fx[right_peaks[0]] if right_peaks else roi[1]
    held = (~ens.lost_mask) & (ens.positions[:, 0] > x_lo) & (ens.positions[:, 0] < x_hi)
    if int(held.sum()) < 10:
        raise SearchError("fewer than 10 atoms remain in the stationary trap")
    # Same-atom time-averaged temperature over one more mixing window.
    temps = []
    ens = replace_time(ens)
    hold2 = PhaseProfile.smooth(0.0, 1.0, phase0=phi_end)
    for k in range(16):
        ens = integrate(ens, scene, drive, hold2, (k + 1) * window / 16.0, dt)
        v = ens.velocities[held & ~ens.lost_mask]
        dv = v - v.mean(axis=0)
        temps.append(scene.atom.mass * np.mean(np.sum(dv**2, axis=1)) / (3.0 * K_B))
    T_fit = float(np.mean(temps))

    after = _ensemble_psd(int(held.sum()), T_fit, final_well.frequencies)
    return before, after


def replace_time(ensemble, t: float = 0.0):
    from dataclasses import replace

    return replace(ensemble, time=t)
