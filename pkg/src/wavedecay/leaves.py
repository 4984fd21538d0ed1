"""Sampling an evolved field along foliation leaves.

Internal plumbing shared by the diagnostics: resolves a leaf label tau to
grid indices, walks the null piece along its u-line (edge-midpoint values for
second-order quadrature) and walks the spacelike piece by bilinear
interpolation at points uniform in rstar.  Uniform-rstar sampling keeps the
curve speed bounded in (u, v) all the way down to the horizon region, where
uniform-r points would skip cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import Background, FoliationLeaf, leaf, r_and_gap_of_rstar, potential_from_gap
from .errors import CoverageError, ValidationError
from .grid import NullGrid
from .solver import ModeField

# Inner radius floor for spacelike quadrature, in units of the horizon radius.
HORIZON_FLOOR = 1e-6


def leaf_indices(grid: NullGrid, tau: float) -> tuple[int, int]:
    """(row, column) of the leaf's junction node; snaps tau to a v-line."""
    if grid.junction_k is None:
        raise CoverageError(
            "grid diagonals are not aligned with the junction sphere r = R; "
            "build the grid with junction_aligned_grid"
        )
    x = (tau - grid.v0) / grid.h
    j = int(round(x))
    if abs(x - j) > 1e-3:
        raise ValidationError(
            f"tau = {tau} is not aligned with a grid v-line (nearest {grid.v0 + j * grid.h})"
        )
    if not (0 <= j < grid.nv):
        raise CoverageError(f"leaf tau = {tau} lies outside the grid's v-range")
    i = j - grid.junction_k
    if not (0 <= i < grid.nu):
        raise CoverageError(f"leaf tau = {tau}: null piece u-line outside the grid")
    return i, j


def _bilinear(arr: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear interpolation at fractional indices (x, y), clipped to the grid."""
    nx, ny = arr.shape
    x = np.clip(x, 0.0, nx - 1.0)
    y = np.clip(y, 0.0, ny - 1.0)
    i0 = np.clip(x.astype(int), 0, nx - 2)
    j0 = np.clip(y.astype(int), 0, ny - 2)
    fx = x - i0
    fy = y - j0
    return (
        arr[i0, j0] * (1 - fx) * (1 - fy)
        + arr[i0 + 1, j0] * fx * (1 - fy)
        + arr[i0, j0 + 1] * (1 - fx) * fy
        + arr[i0 + 1, j0 + 1] * fx * fy
    )


@dataclass
class LeafSample:
    """Field values and geometry along one leaf, ready for quadrature."""

    field: ModeField
    tau: float
    leaf: FoliationLeaf
    row: int
    col: int
    spacelike_truncated: bool
    r_inner: float
    # null piece, edge midpoints (length nv - 1 - col)
    null_dpsi_v: np.ndarray
    null_psi_mid: np.ndarray
    null_r_mid: np.ndarray
    null_gap_mid: np.ndarray
    # null piece, nodes (length nv - col)
    null_psi: np.ndarray
    null_r: np.ndarray
    # spacelike piece samples (uniform in rstar)
    sl_w: np.ndarray  # trapezoid weights (drstar)
    sl_r: np.ndarray
    sl_gap: np.ndarray
    sl_psi: np.ndarray
    sl_psi_u: np.ndarray
    sl_psi_v: np.ndarray
    sl_V: np.ndarray

    @property
    def background(self) -> Background:
        return self.field.background

    @property
    def h(self) -> float:
        return self.field.grid.h

    # -- derived spacelike quantities ----------------------------------------

    @property
    def sl_one_minus_mu(self) -> np.ndarray:
        return self.sl_gap / self.sl_r

    @property
    def sl_one_plus_mu(self) -> np.ndarray:
        return (self.sl_r + 2.0 * self.background.mass) / self.sl_r

    @property
    def sl_phi(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.sl_r > 1e-300, self.sl_psi / np.maximum(self.sl_r, 1e-300), 0.0)

    def sl_integrate(self, density: np.ndarray) -> float:
        return float(np.sum(self.sl_w * density))

    def null_integrate_edges(self, density: np.ndarray) -> float:
        return float(self.h * np.sum(density))

    @property
    def null_phi(self) -> np.ndarray:
        return self.null_psi / self.null_r


def sample_leaf(field: ModeField, tau: float) -> LeafSample:
    """Build the per-leaf sample; raises CoverageError if the leaf exits the grid.

    The Schwarzschild spacelike piece is truncated at the grid's u-edge (the
    piece dives toward u = +infinity at the horizon) and never extends below
    r = 2M(1 + 1e-6); both truncations drop exponentially small tails.  Flat
    leaves must be covered down to the axis r = 0.
    """
    grid = field.grid
    bg = grid.background
    i, j = leaf_indices(grid, tau)
    tau_exact = grid.v0 + j * grid.h
    lf = leaf(tau_exact, bg)
    if j >= grid.nv - 1:
        raise CoverageError(f"leaf tau = {tau}: null piece has no extent inside the grid")

    h = grid.h
    ks = np.arange(j, grid.nv)  # node columns on the null piece
    ko_nodes = grid.k_offset(ks - i)
    ko_edges = ko_nodes[:-1]
    null_psi = field.psi[i, j:]
    null_dpsi_v = (field.psi[i, j + 1 :] - field.psi[i, j:-1]) / h
    null_psi_mid = 0.5 * (field.psi[i, j + 1 :] + field.psi[i, j:-1])
    sample_kwargs = dict(
        field=field,
        tau=tau_exact,
        leaf=lf,
        row=i,
        col=j,
        null_dpsi_v=null_dpsi_v,
        null_psi_mid=null_psi_mid,
        null_r_mid=grid.r_vedge[ko_edges],
        null_gap_mid=grid.gap_vedge[ko_edges],
        null_psi=null_psi,
        null_r=grid.r_diag[ko_nodes],
    )

    # -- spacelike coverage ---------------------------------------------------
    rstar_R = bg.rstar_at_junction
    if bg.is_flat:
        R = bg.foliation_radius
        rstar_lo = -R
        u_at_axis = tau_exact + 2.0 * R  # u = v - 2 rstar at the axis
        if tau_exact - R < grid.v0 - 1e-9 * h or u_at_axis > grid.u_max + 1e-9 * h:
            raise CoverageError(
                f"leaf tau = {tau}: flat spacelike piece not covered down to the axis"
            )
        truncated = False
    else:
        floor = bg.horizon_radius * (1.0 + HORIZON_FLOOR)
        rstar_lo = float(
            floor + 2.0 * bg.mass * np.log(bg.horizon_radius * HORIZON_FLOOR) - bg.foliation_radius
        )
        truncated = False
        # u(rstar) = tau + r(rstar) - R - 2 rstar is strictly decreasing; clip at u_max
        if _u_on_spacelike(lf, rstar_lo, bg) > grid.u_max:
            rstar_lo = _bisect_increasing(
                lambda rs: grid.u_max - _u_on_spacelike(lf, rs, bg), rstar_lo, rstar_R
            )
            truncated = True
        # v(rstar) = tau + r - R is increasing; clip at v0
        v_lo = tau_exact + r_and_gap_of_rstar(rstar_lo, bg)[0] - bg.foliation_radius
        if v_lo < grid.v0:
            rstar_lo = _bisect_increasing(
                lambda rs: tau_exact
                + r_and_gap_of_rstar(rs, bg)[0]
                - bg.foliation_radius
                - grid.v0,
                rstar_lo,
                rstar_R,
            )
            truncated = True
    if rstar_lo >= rstar_R:
        raise CoverageError(f"leaf tau = {tau}: spacelike piece not covered by the grid")

    n = max(int(np.ceil((rstar_R - rstar_lo) / (h / 2.0))) + 1, 3)
    rs = np.linspace(rstar_lo, rstar_R, n)
    w = np.full(n, rs[1] - rs[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    r, gap = r_and_gap_of_rstar(rs, bg)
    u_pts = lf.tau + r - bg.foliation_radius - 2.0 * rs
    v_pts = lf.tau + r - bg.foliation_radius
    xi = (u_pts - grid.u0) / h
    yj = (v_pts - grid.v0) / h
    sl_psi = _bilinear(field.psi, xi, yj)
    sl_psi_u = _bilinear(field.psi_u, xi, yj)
    sl_psi_v = _bilinear(field.psi_v, xi, yj)
    sl_V = potential_from_gap(r, gap, field.ell, bg)
    return LeafSample(
        spacelike_truncated=truncated,
        r_inner=float(r[0]),
        sl_w=w,
        sl_r=r,
        sl_gap=gap,
        sl_psi=sl_psi,
        sl_psi_u=sl_psi_u,
        sl_psi_v=sl_psi_v,
        sl_V=sl_V,
        **sample_kwargs,
    )


def _u_on_spacelike(lf: FoliationLeaf, rstar: float, bg: Background) -> float:
    r, _ = r_and_gap_of_rstar(rstar, bg)
    return lf.tau + r - bg.foliation_radius - 2.0 * rstar


def _bisect_increasing(fn, lo: float, hi: float, iters: int = 200) -> float:
    """Root of an increasing function with fn(lo) < 0 <= fn(hi)."""
    flo = fn(lo)
    if flo >= 0.0:
        return lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return hi
