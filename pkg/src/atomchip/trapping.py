"""Numerical characterization of the trapping landscape.

Local minima are found with a quasi-Newton descent on finite-difference
gradients followed by a damped-Newton polish on the finite-difference
Hessian; Nelder-Mead is the fallback when the line search stalls.  Well
depths follow the operational definition: the field-magnitude difference
between a well bottom and the saddle toward the neighboring well, both
taken along the transverse-minimized line profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .constants import HBAR, K_B, MU0, AtomState, recoil_frequency
from .errors import DomainError, SaddleError, SearchError, TrackingError
from .fields import FD_STEP, ChipScene, CurrentSet

GRAD_TOL = 1e-28        # J/m, converged-gradient criterion
STEP_TOL = 1e-9         # m, converged-step criterion
EIG_FLOOR = 1e-22       # J/m^2, |curvature| below this counts as flat, not saddle

_X_SCALE = 1e-6         # optimizer works in micrometers
_U_SCALE = K_B * 1e-6   # ... and in units of kB * 1 uK


@dataclass(frozen=True)
class TrapCharacterization:
    """One well: position, minimum field, curvature spectrum, depth."""

    position: np.ndarray          # m
    Bmin: float                   # T
    frequencies: np.ndarray       # Hz, ascending; flat directions report 0
    hessian_eigvecs: np.ndarray   # columns match ``frequencies``
    U_min: float                  # J
    depth_to_saddle: float | None = None  # T
    phase: float = 0.0

    def field_curvatures(self, atom: AtomState) -> np.ndarray:
        """Eigen-curvatures of |B| in T/m^2 (Hessian / magnetic moment)."""
        lam = (2.0 * math.pi * self.frequencies) ** 2 * atom.mass
        return lam / atom.magnetic_moment


@dataclass(frozen=True)
class WellChain:
    """Wells and the transverse-minimized line profile they came from."""

    phase: float
    wells: tuple                 # TrapCharacterization, ordered by x
    line_x: np.ndarray           # m
    line_U: np.ndarray           # J
    line_B: np.ndarray           # T, |B| at the transverse minimum
    transverse_track: np.ndarray  # (n, 2) minimizing (y, z) per x

    def mean_depth(self) -> float:
        """Mean depth (tesla) over wells that have a saddle on both sides."""
        depths = [w.depth_to_saddle for w in self.wells if w.depth_to_saddle is not None]
        if not depths:
            raise SearchError("no interior wells with two saddles in range")
        return float(np.mean(depths))


def _scaled_potential(scene: ChipScene, currents: CurrentSet):
    model = scene.model()

    def batch(xs_um: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(xs_um) * _X_SCALE
        return np.asarray(model.potential(currents, pts), dtype=float).reshape(-1) / _U_SCALE

    return batch


def _fd_gradient(batch, x_um: np.ndarray, h_um: float) -> np.ndarray:
    n = x_um.size
    stencil = np.repeat(x_um[None, :], 2 * n, axis=0)
    for i in range(n):
        stencil[2 * i, i] += h_um
        stencil[2 * i + 1, i] -= h_um
    vals = batch(stencil)
    return (vals[0::2] - vals[1::2]) / (2.0 * h_um)


def _fd_hessian(batch, x_um: np.ndarray, h_um: float) -> np.ndarray:
    n = x_um.size
    pts = [x_um]
    for i in range(n):
        for s in (+1, -1):
            p = x_um.copy()
            p[i] += s * h_um
            pts.append(p)
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                p = x_um.copy()
                p[i] += si * h_um
                p[j] += sj * h_um
                pairs.append(p)
    vals = batch(np.array(pts + pairs))
    u0 = vals[0]
    H = np.empty((n, n))
    for i in range(n):
        up, um = vals[1 + 2 * i], vals[2 + 2 * i]
        H[i, i] = (up - 2.0 * u0 + um) / h_um**2
    k = 1 + 2 * n
    for i in range(n):
        for j in range(i + 1, n):
            vpp, vpm, vmp, vmm = vals[k:k + 4]
            k += 4
            H[i, j] = H[j, i] = (vpp - vpm - vmp + vmm) / (4.0 * h_um**2)
    return 0.5 * (H + H.T)


def hessian_of_potential(scene: ChipScene, currents: CurrentSet, point,
                         h: float = FD_STEP) -> np.ndarray:
    """Symmetrized central-difference Hessian of U at ``point``, J/m^2."""
    x_um = np.asarray(point, dtype=float) / _X_SCALE
    h_um = h / _X_SCALE
    model = scene.model()
    probe = np.asarray(point, dtype=float) + np.vstack([np.zeros(3), np.eye(3) * h,
                                                        -np.eye(3) * h])
    if bool(model.excluded(probe).any()):
        raise DomainError("Hessian stencil touches a wire exclusion zone")
    batch = _scaled_potential(scene, currents)
    return _fd_hessian(batch, x_um, h_um) * _U_SCALE / _X_SCALE**2


def _characterize(scene, currents, x_um, batch, h_um, phase, eig_floor):
    H = _fd_hessian(batch, x_um, h_um) * _U_SCALE / _X_SCALE**2
    lam, vec = np.linalg.eigh(H)
    if lam[0] < -eig_floor:
        raise SaddleError(
            f"converged to a saddle (curvature {lam[0]:.3e} J/m^2) at {x_um * _X_SCALE}")
    freqs = np.sqrt(np.clip(lam, 0.0, None) / scene.atom.mass) / (2.0 * math.pi)
    pos = x_um * _X_SCALE
    model = scene.model()
    B = model.field(currents, pos)
    U = float(model.potential(currents, pos))
    return TrapCharacterization(
        position=pos, Bmin=float(np.linalg.norm(B)), frequencies=freqs,
        hessian_eigvecs=vec, U_min=U, phase=phase,
    )


def find_minimum(scene: ChipScene, currents: CurrentSet, seed,
                 grad_tol: float = GRAD_TOL, h: float = FD_STEP,
                 max_iters: int = 400, phase: float = 0.0,
                 eig_floor: float = EIG_FLOOR) -> TrapCharacterization:
    """Locate the potential minimum reachable from ``seed``.

    Converged when |grad U| < ``grad_tol`` (J/m) and the last Newton step
    is below 1 nm.  Directions with curvature inside ``eig_floor`` of zero
    are treated as flat (frequency 0); a clearly negative curvature raises
    :class:`SaddleError`.
    """
    seed = np.asarray(seed, dtype=float)
    model = scene.model()
    if not bool(model.in_domain(seed)[0]) or bool(model.excluded(seed)[0]):
        raise DomainError(f"seed {seed} outside the simulation domain")
    batch = _scaled_potential(scene, currents)
    h_um = h / _X_SCALE
    gtol_scaled = grad_tol * _X_SCALE / _U_SCALE

    def fun(x):
        return float(batch(x[None, :])[0])

    def jac(x):
        return _fd_gradient(batch, x, h_um)

    x = seed / _X_SCALE
    res = minimize(fun, x, jac=jac, method="BFGS",
                   options={"gtol": max(gtol_scaled, 1e-5), "maxiter": max_iters})
    x = res.x
    if not res.success and np.linalg.norm(jac(x)) > 1e-2:
        res = minimize(fun, x, method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-12, "maxiter": 4000})
        x = res.x

    # Damped-Newton polish down to the gradient tolerance.
    step_norm = np.inf
    for _ in range(60):
        g = _fd_gradient(batch, x, h_um)
        if np.linalg.norm(g) < gtol_scaled and step_norm < STEP_TOL / _X_SCALE:
            break
        H = _fd_hessian(batch, x, h_um)
        lam, vec = np.linalg.eigh(H)
        lam_reg = np.where(np.abs(lam) < 1e-12, 1e-12, np.abs(lam))
        step = -vec @ ((vec.T @ g) / lam_reg)
        norm = np.linalg.norm(step)
        if norm > 20.0:  # keep the polish local (um units)
            step *= 20.0 / norm
        x = x + step
        step_norm = np.linalg.norm(step)
    else:
        raise SearchError(
            f"minimum search did not converge near {x * _X_SCALE} "
            f"(|grad| = {np.linalg.norm(_fd_gradient(batch, x, h_um)) * _U_SCALE / _X_SCALE:.3e} J/m)")

    return _characterize(scene, currents, x, batch, h_um, phase, eig_floor)


def _transverse_minimize(batch2, yz0, gtol=1e-8, h_um=FD_STEP / _X_SCALE):
    res = minimize(lambda v: float(batch2(v[None, :])[0]), yz0,
                   jac=lambda v: _fd_gradient(batch2, v, h_um),
                   method="BFGS", options={"gtol": gtol, "maxiter": 200})
    yz = res.x
    for _ in range(25):
        g = _fd_gradient(batch2, yz, h_um)
        if np.linalg.norm(g) < gtol:
            break
        H = _fd_hessian(batch2, yz, h_um)
        lam, vec = np.linalg.eigh(H)
        lam_reg = np.where(np.abs(lam) < 1e-12, 1e-12, np.abs(lam))
        step = -vec @ ((vec.T @ g) / lam_reg)
        norm = np.linalg.norm(step)
        if norm > 20.0:
            step *= 20.0 / norm
        yz = yz + step
    else:
        raise SearchError("transverse minimization stalled")
    return yz


# 2D stencil for simultaneous gradient + Hessian: center, axis pairs, corners.
_STENCIL2D = np.array([
    (0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)
], dtype=float)


def _transverse_minimize_all(batch, xs_um, yz, gtol=1e-8,
                             h_um=FD_STEP / _X_SCALE, max_iter=60):
    """Damped-Newton transverse minimization over all x columns at once.

    ``yz`` is the (n, 2) starting guess and is refined in place; returns
    the refined array and a per-column convergence flag.
    """
    n = len(xs_um)
    offsets = _STENCIL2D * h_um
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        pts = np.empty((n, len(offsets), 3))
        pts[:, :, 0] = xs_um[:, None]
        pts[:, :, 1] = yz[:, None, 0] + offsets[None, :, 0]
        pts[:, :, 2] = yz[:, None, 1] + offsets[None, :, 1]
        v = batch(pts.reshape(-1, 3)).reshape(n, len(offsets))
        u0, up1, um1, up2, um2, upp, upm, ump, umm = v.T
        g1 = (up1 - um1) / (2 * h_um)
        g2 = (up2 - um2) / (2 * h_um)
        H11 = (up1 - 2 * u0 + um1) / h_um**2
        H22 = (up2 - 2 * u0 + um2) / h_um**2
        H12 = (upp - upm - ump + umm) / (4 * h_um**2)
        gnorm = np.hypot(g1, g2)
        active = gnorm >= gtol
        if not active.any():
            return yz, np.ones(n, dtype=bool)
        # closed-form 2x2 eigen-solve, absolute-value regularized
        phi = 0.5 * np.arctan2(2 * H12, H11 - H22)
        c, s = np.cos(phi), np.sin(phi)
        lam1 = c * c * H11 + 2 * c * s * H12 + s * s * H22
        lam2 = s * s * H11 - 2 * c * s * H12 + c * c * H22
        lam1 = np.where(np.abs(lam1) < 1e-12, 1e-12, np.abs(lam1))
        lam2 = np.where(np.abs(lam2) < 1e-12, 1e-12, np.abs(lam2))
        gp1 = c * g1 + s * g2
        gp2 = -s * g1 + c * g2
        sp1 = -gp1 / lam1
        sp2 = -gp2 / lam2
        st1 = c * sp1 - s * sp2
        st2 = s * sp1 + c * sp2
        norm = np.hypot(st1, st2)
        cap = np.ones_like(norm)
        big = norm > 20.0
        cap[big] = 20.0 / norm[big]
        yz[active, 0] += (st1 * cap)[active]
        yz[active, 1] += (st2 * cap)[active]
    return yz, ~active


def default_transverse_seed(scene: ChipScene, currents: CurrentSet) -> np.ndarray:
    """Transverse (y, z) starting point: the side-guide estimate below the wire."""
    if currents.I0 > 0 and scene.bias.B0y > 0:
        r0 = MU0 * currents.I0 / (2.0 * math.pi * scene.bias.B0y)
    else:
        r0 = 100e-6
    return np.array([0.0, -r0])


def line_profile(scene: ChipScene, currents: CurrentSet, x_range,
                 n_samples: int = 64, transverse_seed=None):
    """Transverse-minimized potential along x.

    For each x on the grid, U is minimized over the (y, z) plane at fixed
    x (warm-started from the previous column).  Returns arrays
    ``(x, U_line, B_line, yz_track)``.
    """
    if n_samples < 16:
        raise DomainError("n_samples must be >= 16")
    xs = np.linspace(x_range[0], x_range[1], n_samples)
    model = scene.model()
    batch = _scaled_potential(scene, currents)
    if transverse_seed is None:
        seed = default_transverse_seed(scene, currents) / _X_SCALE
        yz0 = np.repeat(seed[None, :], n_samples, axis=0)
    else:
        seed = np.asarray(transverse_seed, dtype=float) / _X_SCALE
        yz0 = (np.repeat(seed[None, :], n_samples, axis=0)
               if seed.ndim == 1 else seed.copy())
    xs_um = xs / _X_SCALE
    yz, ok = _transverse_minimize_all(batch, xs_um, yz0)
    for i in np.where(~ok)[0]:  # per-column fallback for stubborn columns
        x_um = xs_um[i]

        def batch2(yzs, _x=x_um):
            pts = np.column_stack([np.full(len(yzs), _x), yzs])
            return batch(pts)

        try:
            yz[i] = _transverse_minimize(batch2, yz[i])
        except SearchError as exc:
            raise SearchError(
                f"transverse minimization failed at x = {xs[i]:.6e} m") from exc
    pts = np.column_stack([xs_um, yz]) * _X_SCALE
    B = model.field(currents, pts)
    B_line = np.linalg.norm(B, axis=1)
    U_line = np.asarray(model.potential(currents, pts), dtype=float)
    return xs, U_line, B_line, yz * _X_SCALE


def _local_extrema(values: np.ndarray):
    minima, maxima = [], []
    for i in range(1, len(values) - 1):
        if values[i] < values[i - 1] and values[i] <= values[i + 1]:
            minima.append(i)
        if values[i] > values[i - 1] and values[i] >= values[i + 1]:
            maxima.append(i)
    return minima, maxima


def well_chain(scene: ChipScene, currents: CurrentSet, x_range,
               n_samples: int = 96, phase: float = 0.0,
               transverse_seed=None) -> WellChain:
    """Extract the chain of wells along ``x_range``.

    Each line-profile minimum is refined to a full 3D minimum; the depth
    assigned to a well is the smaller of the two neighboring barrier
    heights (in field magnitude).  Edge wells without a barrier on both
    sides carry ``depth_to_saddle = None``.
    """
    xs, U_line, B_line, track = line_profile(scene, currents, x_range, n_samples,
                                             transverse_seed)
    min_idx, max_idx = _local_extrema(U_line)
    wells = []
    for i in min_idx:
        seed = np.array([xs[i], track[i, 0], track[i, 1]])
        well = find_minimum(scene, currents, seed, phase=phase)
        left = [j for j in max_idx if j < i]
        right = [j for j in max_idx if j > i]
        depth = None
        if left and right:
            barrier = min(B_line[left[-1]], B_line[right[0]])
            depth = float(barrier - well.Bmin)
        wells.append(replace(well, depth_to_saddle=depth))
    wells.sort(key=lambda w: w.position[0])
    return WellChain(phase=phase, wells=tuple(wells), line_x=xs, line_U=U_line,
                     line_B=B_line, transverse_track=track)


def track_well(scene: ChipScene, drive, phases, seed) -> list:
    """Follow one well through a sorted phase sweep by continuation.

    Raises:
        TrackingError: if the tracked position jumps by more than a
            quarter period between adjacent phases.
    """
    phases = np.asarray(phases, dtype=float)
    if np.any(np.diff(phases) < 0):
        raise DomainError("phases must be sorted ascending")
    period = scene.layout.modulation_period
    out = []
    pos = np.asarray(seed, dtype=float)
    for phi in phases:
        currents = drive.currents_at(phi)
        well = find_minimum(scene, currents, pos, phase=phi)
        if out and abs(well.position[0] - out[-1][1].position[0]) > period / 4.0:
            raise TrackingError(
                f"well jumped {abs(well.position[0] - out[-1][1].position[0]):.3e} m "
                f"between phases {out[-1][0]:.4f} and {phi:.4f}")
        out.append((float(phi), well))
        pos = well.position
    return out


def ground_state_fwhm(frequency: float, mass: float) -> float:
    """FWHM of the harmonic-oscillator ground-state wavefunction, meters.

    Amplitude convention: 2 sqrt(2 ln 2) * sqrt(hbar / (m omega)).  The
    probability-density FWHM is a factor sqrt(2) smaller.
    """
    if frequency <= 0:
        raise DomainError("frequency must be > 0")
    if mass <= 0:
        raise DomainError("mass must be > 0")
    omega = 2.0 * math.pi * frequency
    return 2.0 * math.sqrt(2.0 * math.log(2.0)) * math.sqrt(HBAR / (mass * omega))


def lamb_dicke(frequency: float, atom: AtomState, wavelength: float) -> float:
    """Lamb-Dicke parameter sqrt(recoil frequency / trap frequency)."""
    if frequency <= 0:
        raise DomainError("frequency must be > 0")
    return math.sqrt(recoil_frequency(atom, wavelength) / frequency)
