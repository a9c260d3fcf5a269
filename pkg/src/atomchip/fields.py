"""Field synthesis: finite-segment Biot-Savart superposition plus bias.

The magnetic field of every conductor is the sum over its thin-filament
decomposition of the closed-form field of a straight finite segment,

    B = (mu0 I / 4 pi) * (cos a1 - cos a2) * (u x r1) / |u x r1|^2,

with u the segment direction and r1, r2 the vectors from the endpoints to
the evaluation point.  The trapping potential of a weak-field seeker is
U = gF mF muB |B|, plus m g z when gravity is enabled (z is the height
coordinate; atoms hang below the chip at z < 0, so falling away from the
chip lowers the gravitational energy).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .constants import G_EARTH, MU0, MU_B, AtomState, RB87
from .errors import DomainError, WireFieldSingularityError
from .geometry import ChipLayout, decompose_ribbon

EXCLUSION_MARGIN = 1e-6   # added to the ribbon half width, m
FD_STEP = 5e-8            # central-difference step for gradients/Hessians, m

CHANNELS = ("I0", "M1", "M2", "H2")


@dataclass(frozen=True)
class BiasField:
    """Spatially uniform bias field, tesla."""

    B0x: float = 0.0
    B0y: float = 0.0
    B0z: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.B0x, self.B0y, self.B0z])


@dataclass(frozen=True)
class CurrentSet:
    """Channel currents in ampere; any channel may be zero."""

    I0: float = 0.0
    IM1: float = 0.0
    IM2: float = 0.0
    IH2: float = 0.0
    extra: dict = field(default_factory=dict)

    def channel(self, name: str) -> float:
        if name == "I0":
            return self.I0
        if name == "M1":
            return self.IM1
        if name == "M2":
            return self.IM2
        if name == "H2":
            return self.IH2
        if name == "constant":
            return 1.0  # magnitude lives in ``extra`` keyed by conductor id
        return self.extra.get(name, 0.0)


@dataclass(frozen=True)
class FieldSample:
    B: np.ndarray
    magnitude: float


def default_domain(layout: ChipLayout) -> np.ndarray:
    """Loss box for dynamics: [lo, hi] corners, meters."""
    half_x = layout.center_wire_length / 2.0
    return np.array([[-half_x, -1.5e-3, -3.0e-3], [half_x, 1.5e-3, -1.0e-6]])


@dataclass(frozen=True)
class ChipScene:
    """Full static description of one experiment's field sources."""

    layout: ChipLayout
    bias: BiasField
    atom: AtomState = RB87
    n_filaments: int = 1
    include_gravity: bool = False
    gravity_sign: float = 1.0  # +1: force along -e_z (atoms below the chip)
    domain: np.ndarray | None = None

    def __post_init__(self):
        if self.n_filaments < 1:
            raise DomainError("n_filaments must be >= 1")
        dom = self.domain if self.domain is not None else default_domain(self.layout)
        object.__setattr__(self, "domain", np.asarray(dom, dtype=float))
        object.__setattr__(self, "_model", None)

    def model(self) -> "FieldModel":
        if self._model is None:
            object.__setattr__(self, "_model", FieldModel.from_scene(self))
        return self._model


class FieldModel:
    """Flattened filament arrays for fast vectorized evaluation."""

    def __init__(self, starts, ends, channel_names, channel_index, fractions,
                 ribbon_starts, ribbon_ends, ribbon_eps, scene: ChipScene):
        self.starts = starts                  # (S, 3)
        self.ends = ends                      # (S, 3)
        self.channel_names = channel_names    # tuple of channel keys
        self.channel_index = channel_index    # (S,) int
        self.fractions = fractions            # (S,) filament share of channel current
        self.ribbon_starts = ribbon_starts    # (R, 3) exclusion centerlines
        self.ribbon_ends = ribbon_ends
        self.ribbon_eps = ribbon_eps          # (R,)
        self.scene = scene
        self._u = ends - starts
        self._len = np.linalg.norm(self._u, axis=1)
        self._u = self._u / self._len[:, None]

    @classmethod
    def from_scene(cls, scene: ChipScene) -> "FieldModel":
        starts, ends, ch_idx, fracs = [], [], [], []
        rib_s, rib_e, rib_eps = [], [], []
        names = list(CHANNELS)
        for cond in scene.layout.conductors:
            binding = cond.current_binding
            if binding == "constant":
                binding = cond.id
            if binding not in names:
                names.append(binding)
            ci = names.index(binding)
            for seg in cond.polyline:
                rib_s.append(seg.start)
                rib_e.append(seg.end)
                rib_eps.append(seg.width / 2.0 + EXCLUSION_MARGIN)
                n = scene.n_filaments if seg.width > 0 else 1
                for fil in decompose_ribbon(seg, n):
                    starts.append(fil.start)
                    ends.append(fil.end)
                    ch_idx.append(ci)
                    fracs.append(fil.current_fraction)
        return cls(
            np.array(starts), np.array(ends), tuple(names),
            np.array(ch_idx, dtype=int), np.array(fracs),
            np.array(rib_s), np.array(rib_e), np.array(rib_eps), scene,
        )

    def current_vector(self, currents: CurrentSet) -> np.ndarray:
        vec = np.empty(len(self.channel_names))
        for i, name in enumerate(self.channel_names):
            vec[i] = currents.channel(name) if name in CHANNELS else currents.extra.get(name, 0.0)
        return vec

    def field(self, currents: CurrentSet, points: np.ndarray,
              chunk: int = 16384) -> np.ndarray:
        """B(points) in tesla; points (..., 3) -> same leading shape + (3,)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        seg_currents = self.current_vector(currents)[self.channel_index] * self.fractions
        out = np.empty_like(pts)
        for i0 in range(0, len(pts), chunk):
            out[i0:i0 + chunk] = self._field_chunk(seg_currents, pts[i0:i0 + chunk])
        out += self.scene.bias.as_vector()
        return out.reshape(np.shape(points))

    def _field_chunk(self, seg_currents, pts):
        # pts (P,3) x segments (S,3) -> (P,S,3)
        r1 = pts[:, None, :] - self.starts[None, :, :]
        r2 = pts[:, None, :] - self.ends[None, :, :]
        u = self._u[None, :, :]
        n1 = np.linalg.norm(r1, axis=2)
        n2 = np.linalg.norm(r2, axis=2)
        cos1 = np.einsum("psk,psk->ps", r1, u) / np.maximum(n1, 1e-300)
        cos2 = np.einsum("psk,psk->ps", r2, u) / np.maximum(n2, 1e-300)
        cross = np.cross(np.broadcast_to(u, r1.shape), r1)
        c2 = np.einsum("psk,psk->ps", cross, cross)
        # Collinear continuation of a segment: dl x r = 0 exactly.
        safe = np.where(c2 > 1e-300, c2, 1.0)
        coef = (MU0 / (4.0 * np.pi)) * seg_currents[None, :] * (cos1 - cos2) / safe
        coef = np.where(c2 > 1e-300, coef, 0.0)
        return np.einsum("ps,psk->pk", coef, cross)

    def distance_to_wires(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest ribbon centerline."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.ribbon_starts[None, :, :]
        d = (self.ribbon_ends - self.ribbon_starts)[None, :, :]
        l2 = np.einsum("psk,psk->ps", d, d)
        t = np.clip(np.einsum("psk,psk->ps", pts[:, None, :] - a, d) / l2, 0.0, 1.0)
        nearest = a + t[..., None] * d
        dist = np.linalg.norm(pts[:, None, :] - nearest, axis=2)
        return dist.min(axis=1)

    def excluded(self, points: np.ndarray) -> np.ndarray:
        """True where a point lies inside a wire exclusion zone."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.ribbon_starts[None, :, :]
        d = (self.ribbon_ends - self.ribbon_starts)[None, :, :]
        l2 = np.einsum("psk,psk->ps", d, d)
        t = np.clip(np.einsum("psk,psk->ps", pts[:, None, :] - a, d) / l2, 0.0, 1.0)
        nearest = a + t[..., None] * d
        dist = np.linalg.norm(pts[:, None, :] - nearest, axis=2)
        return (dist < self.ribbon_eps[None, :]).any(axis=1)

    def in_domain(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = self.scene.domain
        return ((pts >= lo) & (pts <= hi)).all(axis=1)

    @property
    def _gravity_coeff(self) -> float:
        if not self.scene.include_gravity:
            return 0.0
        return self.scene.gravity_sign * self.scene.atom.mass * G_EARTH

    def potential(self, currents: CurrentSet, points: np.ndarray) -> np.ndarray:
        """Trapping potential in joules, vectorized over points."""
        pts = np.asarray(points, dtype=float)
        flat = np.ascontiguousarray(pts.reshape(-1, 3))
        if _kernels.HAVE_NUMBA:
            seg = self.current_vector(currents)[self.channel_index] * self.fractions
            U = _kernels.potential_points(
                flat, self.starts, self.ends, self._u, seg, MU0,
                self.scene.bias.as_vector(), self.scene.atom.magnetic_moment,
                self._gravity_coeff, np.empty(len(flat)))
        else:
            B = self.field(currents, flat)
            U = self.scene.atom.magnetic_moment * np.linalg.norm(B, axis=1)
            U = U + self._gravity_coeff * flat[:, 2]
        return U.reshape(np.shape(points)[:-1]) if np.ndim(points) > 1 else float(U[0])

    def force(self, currents: CurrentSet, points: np.ndarray,
              h: float = FD_STEP) -> np.ndarray:
        """-grad U by central differences, newtons; vectorized over points."""
        pts = np.asarray(points, dtype=float)
        flat = np.ascontiguousarray(pts.reshape(-1, 3))
        if _kernels.HAVE_NUMBA:
            seg = self.current_vector(currents)[self.channel_index] * self.fractions
            F = _kernels.force_points(
                flat, h, self.starts, self.ends, self._u, seg, MU0,
                self.scene.bias.as_vector(), self.scene.atom.magnetic_moment,
                self._gravity_coeff, np.empty_like(flat))
        else:
            n = len(flat)
            stencil = np.repeat(flat, 6, axis=0).reshape(n, 6, 3)
            for i in range(3):
                stencil[:, 2 * i, i] += h
                stencil[:, 2 * i + 1, i] -= h
            U = self.potential(currents, stencil.reshape(-1, 3)).reshape(n, 6)
            F = np.empty((n, 3))
            for i in range(3):
                F[:, i] = -(U[:, 2 * i] - U[:, 2 * i + 1]) / (2.0 * h)
        return F.reshape(np.shape(points))


def filament_field(filament, current: float, point) -> np.ndarray:
    """Field of a single thin finite segment carrying ``current``, tesla."""
    start = np.asarray(filament.start, dtype=float)
    end = np.asarray(filament.end, dtype=float)
    p = np.asarray(point, dtype=float)
    u = end - start
    u = u / np.linalg.norm(u)
    r1 = p - start
    r2 = p - end
    cross = np.cross(u, r1)
    c2 = float(np.dot(cross, cross))
    if c2 < 1e-300:
        return np.zeros(3)
    cos1 = float(np.dot(r1, u) / np.linalg.norm(r1))
    cos2 = float(np.dot(r2, u) / np.linalg.norm(r2))
    return (MU0 / (4.0 * np.pi)) * current * (cos1 - cos2) * cross / c2


def total_field(scene: ChipScene, currents: CurrentSet, point) -> FieldSample:
    """Superposed field of all conductors plus bias at one point.

    Raises:
        WireFieldSingularityError: inside a wire exclusion zone.
    """
    model = scene.model()
    if bool(model.excluded(point)[0]):
        raise WireFieldSingularityError(f"point {np.asarray(point)} is inside a wire exclusion zone")
    B = model.field(currents, np.asarray(point, dtype=float))
    return FieldSample(B=B, magnitude=float(np.linalg.norm(B)))


def potential(scene: ChipScene, currents: CurrentSet, point) -> float:
    """Weak-field-seeker potential U = gF mF muB |B| (+ m g z), joules."""
    model = scene.model()
    if bool(model.excluded(point)[0]):
        raise WireFieldSingularityError(f"point {np.asarray(point)} is inside a wire exclusion zone")
    return float(model.potential(currents, np.asarray(point, dtype=float)))


def guide_estimates(I0: float, B0y: float, B0x: float = 0.0):
    """Closed-form side-guide design values (r0, Bmin).

    r0 = mu0 I0 / (2 pi B0y) is the trap distance below the wire and the
    minimum field strength of the resulting guide is approximately B0x.
    """
    if I0 <= 0:
        raise DomainError("I0 must be > 0")
    if B0y <= 0:
        raise DomainError("B0y must be > 0")
    r0 = MU0 * I0 / (2.0 * np.pi * B0y)
    return r0, B0x


def grid_sample_rows(scene: ChipScene, currents: CurrentSet, points: np.ndarray):
    """Rows for the field-sampling CSV: positions in um, B in gauss, U in uK.

    Points inside exclusion zones are skipped.
    """
    from .constants import K_B, m_to_um, tesla_to_gauss

    model = scene.model()
    pts = np.atleast_2d(points)
    keep = ~model.excluded(pts)
    pts = pts[keep]
    B = model.field(currents, pts)
    mag = np.linalg.norm(B, axis=1)
    U = model.potential(currents, pts)
    rows = []
    for p, b, m, u in zip(pts, B, mag, np.atleast_1d(U)):
        rows.append((
            m_to_um(p[0]), m_to_um(p[1]), m_to_um(p[2]),
            tesla_to_gauss(b[0]), tesla_to_gauss(b[1]), tesla_to_gauss(b[2]),
            tesla_to_gauss(m), u / K_B * 1e6,
        ))
    return rows
