"""Cell sums over the exterior region between two leaves.

The region D(tau1, tau2) = {r >= R} intersected with the strip between the
two leaves' null pieces is, on a junction-aligned grid, an exact trapezoid in
(u, v): rows i from the tau1 u-line to the tau2 u-line, columns from the
junction diagonal to the outer v edge.  Cells strictly above the diagonal are
summed with midpoint values; the diagonal cells contribute their upper-left
triangular halves (centroid rule).  Everything is second-order accurate.
"""

from __future__ import annotations

import numpy as np

from .background import r_and_gap_of_rstar
from .errors import CoverageError, ValidationError
from .leaves import leaf_indices
from .solver import ModeField


def region_rows(field: ModeField, tau1: float, tau2: float) -> tuple[int, int]:
    """Row indices (i1, i2) of the two leaves' u-lines; i1 < i2."""
    i1, _ = leaf_indices(field.grid, tau1)
    i2, _ = leaf_indices(field.grid, tau2)
    if i2 <= i1:
        raise ValidationError("tau2 must exceed tau1 by at least one grid step")
    return i1, i2


def region_bulk_sums(
    field: ModeField,
    tau1: float,
    tau2: float,
    coef_v: dict | None = None,
    coef_s: dict | None = None,
) -> tuple[dict, dict]:
    """Bulk integrals over D(tau1, tau2) against dpsi_v^2 and psi^2.

    ``coef_v`` / ``coef_s`` map term names to vectorised coefficient
    functions ``c(r, gap)`` evaluated at cell-center radii.  Returns two
    name -> value dicts (du dv measure).
    """
    grid = field.grid
    psi = field.psi
    h = grid.h
    kR = grid.junction_k
    i1, i2 = region_rows(field, tau1, tau2)
    coef_v = coef_v or {}
    coef_s = coef_s or {}
    sums_v = {name: 0.0 for name in coef_v}
    sums_s = {name: 0.0 for name in coef_s}

    # triangle geometry is shared by every row: centroid at rstar_R + h/6
    r_tri, gap_tri = r_and_gap_of_rstar(grid.background.rstar_at_junction + h / 6.0, grid.background)
    cv_tri = {name: float(fn(np.array([r_tri]), np.array([gap_tri]))[0]) for name, fn in coef_v.items()}
    cs_tri = {name: float(fn(np.array([r_tri]), np.array([gap_tri]))[0]) for name, fn in coef_s.items()}

    for i in range(i1, i2):
        jb = i + kR  # diagonal (triangle) cell column
        if not (0 <= jb <= grid.nv - 2):
            raise CoverageError("region between leaves exits the grid's v-range")
        jj = np.arange(jb + 1, grid.nv - 1)
        if jj.size:
            ko = grid.k_offset(jj - i)
            r_c = grid.r_diag[ko]
            gap_c = grid.gap_diag[ko]
            dpsi_v = (psi[i, jj + 1] - psi[i, jj] + psi[i + 1, jj + 1] - psi[i + 1, jj]) / (2.0 * h)
            psi_c = 0.25 * (psi[i, jj] + psi[i, jj + 1] + psi[i + 1, jj] + psi[i + 1, jj + 1])
            for name, fn in coef_v.items():
                sums_v[name] += h * h * float(np.sum(fn(r_c, gap_c) * dpsi_v**2))
            for name, fn in coef_s.items():
                sums_s[name] += h * h * float(np.sum(fn(r_c, gap_c) * psi_c**2))
        # upper-left triangular half of the diagonal cell
        dpsi_v_t = (psi[i, jb + 1] - psi[i, jb]) / h
        psi_t = (psi[i, jb] + psi[i, jb + 1] + psi[i + 1, jb + 1]) / 3.0
        for name in coef_v:
            sums_v[name] += 0.5 * h * h * cv_tri[name] * dpsi_v_t**2
        for name in coef_s:
            sums_s[name] += 0.5 * h * h * cs_tri[name] * psi_t**2
    return sums_v, sums_s
