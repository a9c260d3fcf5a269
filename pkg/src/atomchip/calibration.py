"""Fits for the chip dimensions that published observables pin down only
indirectly.

The crossing-wire spacing is not a published number; it is recovered by
requiring the simulated conveyor to reproduce the 2.5 G mean well depth
under the standard drive (I0 = 2 A, |IM| = 1 A, bias 7 G ex + 16 G ey).
"""

from __future__ import annotations

import math

import numpy as np

from .constants import gauss_to_tesla, tesla_to_gauss
from .errors import SearchError
from .fields import BiasField, ChipScene
from .geometry import conveyor_layout
from .trapping import well_chain
from .waveforms import DriveConfig

CAL_TARGET_DEPTH_G = 2.5
CAL_BRACKET = (450e-6, 900e-6)


def mean_conveyor_depth(modulation_period: float, n_periods: int = 4,
                        crossing_length: float = None, phase: float = 0.0,
                        bias_G=(7.0, 16.0, 0.0), I0: float = 2.0,
                        IM: float = 1.0, n_filaments: int = 1) -> float:
    """Mean interior-well depth (gauss) of the conveyor at one phase."""
    kwargs = {}
    if crossing_length is not None:
        kwargs["crossing_length"] = crossing_length
    layout = conveyor_layout(modulation_period=modulation_period,
                             n_periods=n_periods, **kwargs)
    scene = ChipScene(layout=layout,
                      bias=BiasField(*(gauss_to_tesla(b) for b in bias_G)),
                      n_filaments=n_filaments)
    drive = DriveConfig(I0_const=I0, IM_amplitude=IM)
    span = 1.7 * modulation_period
    chain = well_chain(scene, drive.currents_at(phase), (-span, span),
                       n_samples=128, phase=phase)
    return tesla_to_gauss(chain.mean_depth())


def calibrate_modulation_period(target_depth_G: float = CAL_TARGET_DEPTH_G,
                                bracket=CAL_BRACKET, tol: float = 0.5e-6,
                                **kwargs):
    """Bisect the modulation period to the target mean well depth.

    Returns ``(period_m, achieved_depth_G, evaluations)`` where
    ``evaluations`` is the list of (period, depth) pairs probed.  The
    depth grows monotonically with the period over the bracket (the
    crossing-field harmonic at the trap line strengthens as the pattern
    coarsens), so bisection is well posed.
    """
    lo, hi = bracket
    evals = []
    d_lo = mean_conveyor_depth(lo, **kwargs)
    d_hi = mean_conveyor_depth(hi, **kwargs)
    evals += [(lo, d_lo), (hi, d_hi)]
    if not (d_lo < target_depth_G < d_hi):
        raise SearchError(
            f"target depth {target_depth_G} G not bracketed: "
            f"depth({lo * 1e6:.0f} um) = {d_lo:.3f} G, "
            f"depth({hi * 1e6:.0f} um) = {d_hi:.3f} G")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        d_mid = mean_conveyor_depth(mid, **kwargs)
        evals.append((mid, d_mid))
        if d_mid < target_depth_G:
            lo = mid
        else:
            hi = mid
    period = 0.5 * (lo + hi)
    depth = mean_conveyor_depth(period, **kwargs)
    evals.append((period, depth))
    return period, depth, evals
