"""Chip conductor pattern: ribbon segments, conductors, and layouts.

Geometry convention: all conductors lie in the chip plane z = 0 and the
atoms live in the half space z < 0 ("hanging" below the chip).  The
center wire carries its current toward -x so that, together with a bias
field along +y, the field-magnitude minimum forms below the chip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import um_to_m
from .errors import DomainError

WIRE_WIDTH = um_to_m(50.0)         # lateral width of all relevant conductors
WIRE_THICKNESS = um_to_m(7.0)      # stored for provenance, not modeled volumetrically
CENTER_WIRE_LENGTH = 5.5e-3        # m

# Fitted defaults for the dimensions the conveyor needs but that are not
# fixed by published observables.  ``calibrate period`` reproduces the
# modulation-period value from the 2.5 G mean-well-depth target.
DEFAULT_MODULATION_PERIOD = um_to_m(598.8)
DEFAULT_N_PERIODS = 4
DEFAULT_CROSSING_LENGTH = um_to_m(150.0)
DEFAULT_M2_OFFSET_FRACTION = 0.20  # M2 train shift in units of the period
DEFAULT_H2_LENGTH = um_to_m(400.0)
DEFAULT_H2_OFFSET = um_to_m(150.0)  # stationary-trap wire beyond the last crossing

# Orientation of the merge wire's crossing segment.  Positive merge current
# flowing along this axis deepens the stationary well for a +x bias; it is
# the mirror-frame equivalent of driving the wire the opposite way with the
# bias reversed.
H2_SEGMENT_DIRECTION = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class RibbonSegment:
    """Straight finite-width conductor piece in the chip plane."""

    start: np.ndarray
    end: np.ndarray
    width: float = WIRE_WIDTH
    thickness: float = WIRE_THICKNESS
    conductor_id: str = ""

    def __post_init__(self):
        start = np.asarray(self.start, dtype=float)
        end = np.asarray(self.end, dtype=float)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        if np.allclose(start, end):
            raise DomainError(f"degenerate segment in conductor {self.conductor_id!r}")
        if self.width < 0:
            raise DomainError("segment width must be >= 0")
        if abs(start[2]) > 1e-12 or abs(end[2]) > 1e-12:
            raise DomainError("segments must lie in the chip plane z = 0")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def direction(self) -> np.ndarray:
        d = self.end - self.start
        return d / np.linalg.norm(d)


@dataclass(frozen=True)
class Filament:
    """Thin-wire element of a ribbon decomposition."""

    start: np.ndarray
    end: np.ndarray
    current_fraction: float


@dataclass(frozen=True)
class Conductor:
    """Named connected path of ribbon segments driven by one current channel.

    ``current_binding`` picks the waveform channel: "I0", "M1", "M2",
    "H2", or "constant" (the per-scene extra map).
    """

    id: str
    polyline: tuple
    current_binding: str

    def __post_init__(self):
        object.__setattr__(self, "polyline", tuple(self.polyline))
        if not self.polyline:
            raise DomainError(f"conductor {self.id!r} has no segments")
        for a, b in zip(self.polyline, self.polyline[1:]):
            if not np.allclose(a.end, b.start):
                raise DomainError(f"conductor {self.id!r} polyline is not connected")


@dataclass(frozen=True)
class ChipLayout:
    """Collection of conductors plus the pattern dimensions."""

    conductors: tuple
    center_wire_length: float = CENTER_WIRE_LENGTH
    modulation_period: float = DEFAULT_MODULATION_PERIOD
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "conductors", tuple(self.conductors))
        if self.modulation_period <= 0:
            raise DomainError("modulation_period must be > 0")
        bindings = [c.current_binding for c in self.conductors]
        if bindings.count("I0") != 1:
            raise DomainError("layout must bind exactly one conductor to I0")
        if bindings.count("H2") > 1:
            raise DomainError("layout must bind at most one conductor to H2")

    def channel_conductors(self, channel: str):
        return [c for c in self.conductors if c.current_binding == channel]

    def crossing_positions(self, channel: str) -> np.ndarray:
        """Sorted x positions where the channel's segments cross y = 0."""
        xs = []
        for cond in self.channel_conductors(channel):
            for seg in cond.polyline:
                if abs(seg.direction[0]) < 1e-9:  # runs along y
                    xs.append(0.5 * (seg.start[0] + seg.end[0]))
        return np.array(sorted(xs))

    @property
    def h2_position(self):
        xs = self.crossing_positions("H2")
        return float(xs[0]) if xs.size else None


def decompose_ribbon(segment: RibbonSegment, n_filaments: int):
    """Split a ribbon into ``n_filaments`` parallel thin wires.

    Filaments are evenly spaced across the width (midpoint rule), centered
    on the ribbon axis, each carrying current fraction 1/n.
    """
    if n_filaments < 1:
        raise DomainError("n_filaments must be >= 1")
    d = segment.direction
    perp = np.cross([0.0, 0.0, 1.0], d)
    norm = np.linalg.norm(perp)
    if norm == 0:  # degenerate only for out-of-plane segments, excluded above
        perp = np.array([1.0, 0.0, 0.0])
    else:
        perp = perp / norm
    offsets = segment.width * ((np.arange(n_filaments) + 0.5) / n_filaments - 0.5)
    return [
        Filament(
            start=segment.start + off * perp,
            end=segment.end + off * perp,
            current_fraction=1.0 / n_filaments,
        )
        for off in offsets
    ]


def _crossing(cid: str, channel: str, x: float, half_length: float, upward: bool,
              width: float) -> Conductor:
    y0, y1 = (-half_length, half_length) if upward else (half_length, -half_length)
    seg = RibbonSegment(
        start=np.array([x, y0, 0.0]),
        end=np.array([x, y1, 0.0]),
        width=width,
        conductor_id=cid,
    )
    return Conductor(id=cid, polyline=(seg,), current_binding=channel)


def conveyor_layout(
    modulation_period: float = DEFAULT_MODULATION_PERIOD,
    n_periods: int = DEFAULT_N_PERIODS,
    center_wire_length: float = CENTER_WIRE_LENGTH,
    wire_width: float = WIRE_WIDTH,
    crossing_length: float = DEFAULT_CROSSING_LENGTH,
    m2_offset_fraction: float = DEFAULT_M2_OFFSET_FRACTION,
    include_h2: bool = False,
    h2_offset: float = DEFAULT_H2_OFFSET,
    h2_length: float = DEFAULT_H2_LENGTH,
) -> ChipLayout:
    """Build the conveyor conductor pattern.

    A center wire runs along x (current toward -x).  Two families of
    finite-length crossing segments run along y with alternating
    orientation: M1 crossings at half-period spacing starting at the
    pattern origin, M2 crossings shifted by ``m2_offset_fraction`` of a
    period.  One 2*pi advance of the drive phase translates the well chain
    by exactly one ``modulation_period`` toward +x.  The offset fraction
    deliberately differs from exact quadrature (0.25) so the well depth
    varies with the drive phase, as observed.  With ``include_h2`` a single
    extra crossing past the +x end of the pattern forms the stationary
    trap used in the merge experiments.

    Lead/return segments are omitted: in the comb-feed picture they sit
    several trap distances away and their field is second order.
    """
    if modulation_period <= 0:
        raise DomainError("modulation_period must be > 0")
    if n_periods < 1:
        raise DomainError("n_periods must be >= 1")

    period = modulation_period
    half = crossing_length / 2.0
    n_cross = 2 * n_periods  # per channel

    # Center the M1+M2 union on x = 0.
    span = m2_offset_fraction * period + (n_cross - 1) * period / 2.0
    x0 = -span / 2.0

    center_seg = RibbonSegment(
        start=np.array([center_wire_length / 2.0, 0.0, 0.0]),
        end=np.array([-center_wire_length / 2.0, 0.0, 0.0]),
        width=wire_width,
        conductor_id="center",
    )
    conductors = [Conductor(id="center", polyline=(center_seg,), current_binding="I0")]

    for j in range(n_cross):
        x = x0 + j * period / 2.0
        # M1: +y orientation on even crossings (well sites at drive phase 0).
        conductors.append(
            _crossing(f"m1_{j}", "M1", x, half, upward=(j % 2 == 0), width=wire_width)
        )
    for j in range(n_cross):
        x = x0 + m2_offset_fraction * period + j * period / 2.0
        # M2: -y orientation first, which makes the chain advance toward +x.
        conductors.append(
            _crossing(f"m2_{j}", "M2", x, half, upward=(j % 2 == 1), width=wire_width)
        )

    if include_h2:
        x_h2 = x0 + m2_offset_fraction * period + (n_cross - 1) * period / 2.0 + h2_offset
        seg = RibbonSegment(
            start=np.array([x_h2, 0.0, 0.0]) - half_len_vec(h2_length),
            end=np.array([x_h2, 0.0, 0.0]) + half_len_vec(h2_length),
            width=wire_width,
            conductor_id="h2",
        )
        conductors.append(Conductor(id="h2", polyline=(seg,), current_binding="H2"))

    params = {
        "modulation_period": period,
        "n_periods": n_periods,
        "crossing_length": crossing_length,
        "m2_offset_fraction": m2_offset_fraction,
        "include_h2": include_h2,
        "h2_offset": h2_offset,
        "h2_length": h2_length,
        "pattern_origin": x0,
    }
    return ChipLayout(
        conductors=tuple(conductors),
        center_wire_length=center_wire_length,
        modulation_period=period,
        params=params,
    )


def half_len_vec(length: float) -> np.ndarray:
    return (length / 2.0) * H2_SEGMENT_DIRECTION


def guide_layout(center_wire_length: float = CENTER_WIRE_LENGTH,
                 wire_width: float = WIRE_WIDTH) -> ChipLayout:
    """Center wire only: the plain quasi-2D guide configuration."""
    seg = RibbonSegment(
        start=np.array([center_wire_length / 2.0, 0.0, 0.0]),
        end=np.array([-center_wire_length / 2.0, 0.0, 0.0]),
        width=wire_width,
        conductor_id="center",
    )
    cond = Conductor(id="center", polyline=(seg,), current_binding="I0")
    return ChipLayout(conductors=(cond,), center_wire_length=center_wire_length,
                      params={"kind": "guide"})
