"""Compiled inner loops for field and force evaluation.

Plain nested loops over (point, segment) pairs, jitted with numba.  All
kernels are single-threaded and avoid fastmath so that repeated runs are
bit-identical regardless of the host's thread configuration.  The numpy
fallbacks in :mod:`atomchip.fields` implement the same math.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]

_FOUR_PI_INV = 1.0 / (4.0 * np.pi)


@njit(cache=True)
def bfield_points(pts, starts, ends, units, seg_currents, mu0, bias, out):
    """Accumulate the segment fields plus bias into ``out`` (n, 3)."""
    n = pts.shape[0]
    m = starts.shape[0]
    for i in range(n):
        bx = bias[0]
        by = bias[1]
        bz = bias[2]
        px, py, pz = pts[i, 0], pts[i, 1], pts[i, 2]
        for s in range(m):
            r1x = px - starts[s, 0]
            r1y = py - starts[s, 1]
            r1z = pz - starts[s, 2]
            r2x = px - ends[s, 0]
            r2y = py - ends[s, 1]
            r2z = pz - ends[s, 2]
            ux, uy, uz = units[s, 0], units[s, 1], units[s, 2]
            cx = uy * r1z - uz * r1y
            cy = uz * r1x - ux * r1z
            cz = ux * r1y - uy * r1x
            c2 = cx * cx + cy * cy + cz * cz
            if c2 < 1e-300:
                continue
            n1 = np.sqrt(r1x * r1x + r1y * r1y + r1z * r1z)
            n2 = np.sqrt(r2x * r2x + r2y * r2y + r2z * r2z)
            cos1 = (r1x * ux + r1y * uy + r1z * uz) / n1
            cos2 = (r2x * ux + r2y * uy + r2z * uz) / n2
            coef = mu0 * _FOUR_PI_INV * seg_currents[s] * (cos1 - cos2) / c2
            bx += coef * cx
            by += coef * cy
            bz += coef * cz
        out[i, 0] = bx
        out[i, 1] = by
        out[i, 2] = bz
    return out


@njit(cache=True)
def potential_points(pts, starts, ends, units, seg_currents, mu0, bias,
                     moment, grav_coeff, out):
    """U = moment |B| + grav_coeff * z at each point."""
    n = pts.shape[0]
    m = starts.shape[0]
    for i in range(n):
        bx = bias[0]
        by = bias[1]
        bz = bias[2]
        px, py, pz = pts[i, 0], pts[i, 1], pts[i, 2]
        for s in range(m):
            r1x = px - starts[s, 0]
            r1y = py - starts[s, 1]
            r1z = pz - starts[s, 2]
            r2x = px - ends[s, 0]
            r2y = py - ends[s, 1]
            r2z = pz - ends[s, 2]
            ux, uy, uz = units[s, 0], units[s, 1], units[s, 2]
            cx = uy * r1z - uz * r1y
            cy = uz * r1x - ux * r1z
            cz = ux * r1y - uy * r1x
            c2 = cx * cx + cy * cy + cz * cz
            if c2 < 1e-300:
                continue
            n1 = np.sqrt(r1x * r1x + r1y * r1y + r1z * r1z)
            n2 = np.sqrt(r2x * r2x + r2y * r2y + r2z * r2z)
            cos1 = (r1x * ux + r1y * uy + r1z * uz) / n1
            cos2 = (r2x * ux + r2y * uy + r2z * uz) / n2
            coef = mu0 * _FOUR_PI_INV * seg_currents[s] * (cos1 - cos2) / c2
            bx += coef * cx
            by += coef * cy
            bz += coef * cz
        out[i] = moment * np.sqrt(bx * bx + by * by + bz * bz) + grav_coeff * pz
    return out


@njit(cache=True)
def force_points(pts, h, starts, ends, units, seg_currents, mu0, bias,
                 moment, grav_coeff, out):
    """-grad U by central differences with step ``h``, per point."""
    n = pts.shape[0]
    stencil = np.empty((6, 3))
    u6 = np.empty(6)
    for i in range(n):
        for a in range(3):
            for k in range(3):
                stencil[2 * a, k] = pts[i, k]
                stencil[2 * a + 1, k] = pts[i, k]
            stencil[2 * a, a] += h
            stencil[2 * a + 1, a] -= h
        potential_points(stencil, starts, ends, units, seg_currents, mu0,
                         bias, moment, grav_coeff, u6)
        for a in range(3):
            out[i, a] = -(u6[2 * a] - u6[2 * a + 1]) / (2.0 * h)
    return out
