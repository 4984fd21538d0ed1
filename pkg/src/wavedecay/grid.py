"""Uniform double-null lattices with cached radius tables.

A grid node (i, j) sits at ``u = u0 + i h``, ``v = v0 + j h``.  Because
``rstar = (v - u)/2`` depends only on ``k = j - i``, every constant-radius
line is a grid diagonal and one 1-D inversion table indexed by k serves all
nodes.  Cell centers share the node diagonals (the half-steps cancel), while
v-edge and u-edge midpoints live on the shifted diagonals ``rstar +- h/4``;
those get their own tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .background import Background, rstar_of_r, r_and_gap_of_rstar
from .errors import ValidationError

_ALIGN_TOL = 1e-9


def _int_if_close(x: float, tol: float = _ALIGN_TOL):
    n = round(x)
    return int(n) if abs(x - n) <= tol * max(1.0, abs(x)) else None


@dataclass
class NullGrid:
    """Rectangular (u, v) lattice with uniform step h in both directions."""

    background: Background
    u0: float
    v0: float
    h: float
    nu: int
    nv: int

    rstar_diag: np.ndarray = field(init=False, repr=False)
    r_diag: np.ndarray = field(init=False, repr=False)
    gap_diag: np.ndarray = field(init=False, repr=False)
    r_vedge: np.ndarray = field(init=False, repr=False)
    gap_vedge: np.ndarray = field(init=False, repr=False)
    r_uedge: np.ndarray = field(init=False, repr=False)
    gap_uedge: np.ndarray = field(init=False, repr=False)
    junction_k: int | None = field(init=False)
    axis_k: int | None = field(init=False)

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValidationError("grid step h must be positive")
        if self.nu < 2 or self.nv < 2:
            raise ValidationError("grid needs at least 2 nodes per direction")
        bg = self.background
        k = np.arange(-(self.nu - 1), self.nv)  # j - i over the full lattice
        self.rstar_diag = ((self.v0 - self.u0) + k * self.h) / 2.0
        if bg.is_flat:
            R = bg.foliation_radius
            self.r_diag = self.rstar_diag + R
            self.gap_diag = self.r_diag
            self.r_vedge = self.rstar_diag + self.h / 4.0 + R
            self.gap_vedge = self.r_vedge
            self.r_uedge = self.rstar_diag - self.h / 4.0 + R
            self.gap_uedge = self.r_uedge
            self.axis_k = _int_if_close((-2.0 * R - (self.v0 - self.u0)) / self.h)
            if self.r_diag[0] < -0.25 * self.h and self.axis_k is None:
                raise ValidationError(
                    "flat grid extends below r = 0 but the axis rstar = -R is "
                    "not aligned with a grid diagonal; adjust v0 - u0 or h"
                )
        else:
            self.r_diag, self.gap_diag = r_and_gap_of_rstar(self.rstar_diag, bg)
            self.r_vedge, self.gap_vedge = r_and_gap_of_rstar(self.rstar_diag + self.h / 4.0, bg)
            self.r_uedge, self.gap_uedge = r_and_gap_of_rstar(self.rstar_diag - self.h / 4.0, bg)
            self.axis_k = None
        rsR = bg.rstar_at_junction
        self.junction_k = _int_if_close((2.0 * rsR - (self.v0 - self.u0)) / self.h)

    # -- coordinates ---------------------------------------------------------

    @property
    def u(self) -> np.ndarray:
        return self.u0 + self.h * np.arange(self.nu)

    @property
    def v(self) -> np.ndarray:
        return self.v0 + self.h * np.arange(self.nv)

    @property
    def u_max(self) -> float:
        return self.u0 + self.h * (self.nu - 1)

    @property
    def v_max(self) -> float:
        return self.v0 + self.h * (self.nv - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nu, self.nv)

    def k_offset(self, k) -> np.ndarray:
        """Index into the diagonal tables for diagonal(s) k = j - i."""
        return np.asarray(k) + self.nu - 1

    def node_rstar(self, i, j):
        return self.rstar_diag[self.k_offset(np.asarray(j) - np.asarray(i))]

    def node_r(self, i, j):
        return self.r_diag[self.k_offset(np.asarray(j) - np.asarray(i))]

    def index_of_u(self, u: float, tol: float = 1e-6) -> int:
        x = (u - self.u0) / self.h
        i = int(round(x))
        if abs(x - i) > tol or not (0 <= i < self.nu):
            raise ValidationError(f"u = {u} is not a grid u-line of this grid")
        return i

    def index_of_v(self, v: float, tol: float = 1e-6) -> int:
        x = (v - self.v0) / self.h
        j = int(round(x))
        if abs(x - j) > tol or not (0 <= j < self.nv):
            raise ValidationError(f"v = {v} is not a grid v-line of this grid")
        return j

    def contains(self, u, v) -> np.ndarray:
        eps = 1e-9 * self.h
        return (
            (np.asarray(u) >= self.u0 - eps)
            & (np.asarray(u) <= self.u_max + eps)
            & (np.asarray(v) >= self.v0 - eps)
            & (np.asarray(v) <= self.v_max + eps)
        )

    def metadata(self) -> dict:
        bg = self.background
        return {
            "kind": bg.kind,
            "mass": bg.mass,
            "foliation_radius": bg.foliation_radius,
            "u0": self.u0,
            "v0": self.v0,
            "h": self.h,
            "nu": self.nu,
            "nv": self.nv,
        }


def make_grid(bg: Background, u_range, v_range, h: float) -> NullGrid:
    """Build a grid over ``u_range x v_range``; h must divide both spans.

    Schwarzschild nodes automatically satisfy r > 2M (rstar is finite);
    flat grids reaching below r = 0 must have the axis on a grid diagonal.
    """
    u0, u1 = map(float, u_range)
    v0, v1 = map(float, v_range)
    if not (u1 > u0 and v1 > v0):
        raise ValidationError("u_range and v_range must be nondegenerate")
    nu = _int_if_close((u1 - u0) / h, 1e-9)
    nv = _int_if_close((v1 - v0) / h, 1e-9)
    if nu is None or nv is None:
        raise ValidationError("h must divide the u and v spans")
    return NullGrid(bg, u0, v0, float(h), nu + 1, nv + 1)


def junction_aligned_grid(
    bg: Background, u0: float, u_span: float, v_span: float, h: float, v_anchor: float | None = None
) -> NullGrid:
    """Grid whose main diagonal j = i is the junction sphere r = R.

    Sets ``v0 = u0 + 2 rstar(R)`` so that leaves labelled by grid v-lines have
    node-aligned junctions and u-line null pieces.  ``v_anchor`` shifts v0 by
    a whole number of steps (useful to extend the grid below the junction).
    """
    v0 = u0 + 2.0 * rstar_of_r(bg.foliation_radius, bg)
    if v_anchor is not None:
        n = int(np.floor((v_anchor - v0) / h + 1e-12))
        v0 = v0 + n * h
    return make_grid(bg, (u0, u0 + u_span), (v0, v0 + v_span), h)
