"""Characteristic evolution of reduced wave-equation modes.

The per-mode unknown is ``psi = r * phi`` with mode number ``ell``.  In the
null coordinates of :mod:`wavedecay.background` it satisfies

    d2 psi / du dv = -(V(r)/4) psi,

with the effective potential V of :func:`wavedecay.background.potential`
(the 1/4 is the Jacobian of u = t - rstar, v = t + rstar).  Integrating over
one grid cell gives the explicit diamond update

    psi_N = psi_E + psi_W - psi_S - (h^2/8) V(r_c) (psi_E + psi_W),

second-order accurate, with the potential evaluated at the exact cell-center
radius.  Data are posed on the two initial null segments u = u0 and v = v0;
no other boundary condition is needed: the outer edges are pure outflow and
the Schwarzschild horizon sits at u = +infinity, beyond any finite grid.

On flat grids that contain the symmetry axis r = 0 (a grid diagonal), psi is
pinned to zero there and, after the march, the region below the axis is
filled with the odd reflection of the field so that centered differences
remain second-order accurate up to the axis.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import spherical_jn

from .background import Background, potential_from_gap
from .errors import NumericalError, ValidationError
from .grid import NullGrid


@dataclass(frozen=True)
class InitialData:
    """Characteristic data: psi on the initial segments u = u0 and v = v0.

    ``outgoing(u0, v)`` and ``ingoing(v0, u)`` are vectorised profiles in the
    physical null coordinates; :meth:`sample` evaluates and validates them on
    a concrete grid (corner consistency, zeros on the flat axis).
    """

    family: str
    params: dict
    outgoing: Callable
    ingoing: Callable

    def sample(self, grid: NullGrid):
        f = np.asarray(self.outgoing(grid.u0, grid.v), dtype=float)
        g = np.asarray(self.ingoing(grid.v0, grid.u), dtype=float)
        if f.shape != (grid.nv,) or g.shape != (grid.nu,):
            raise ValidationError("initial data arrays do not match the grid")
        scale = max(np.max(np.abs(f)), np.max(np.abs(g)), 1e-300)
        if abs(f[0] - g[0]) > 1e-9 * scale:
            raise ValidationError(
                f"inconsistent corner value: outgoing {f[0]!r} vs ingoing {g[0]!r}"
            )
        g = g.copy()
        g[0] = f[0]
        if grid.axis_k is not None:
            f, g = f.copy(), g
            kf = np.arange(grid.nv)  # diagonal of node (0, j) is j
            kg = -np.arange(grid.nu)  # diagonal of node (i, 0) is -i
            on_or_below_f = kf <= grid.axis_k
            on_or_below_g = kg <= grid.axis_k
            bad = max(
                np.max(np.abs(f[on_or_below_f]), initial=0.0),
                np.max(np.abs(g[on_or_below_g]), initial=0.0),
            )
            if bad > 1e-8 * scale:
                raise ValidationError("flat data must vanish on and below the axis r = 0")
            f[on_or_below_f] = 0.0
            g[on_or_below_g] = 0.0
        return f, g

    def scaled(self, lam: float) -> "InitialData":
        return InitialData(
            self.family,
            dict(self.params, scale=lam),
            lambda u0, v: lam * self.outgoing(u0, v),
            lambda v0, u: lam * self.ingoing(v0, u),
        )


def gaussian_data(center: float, width: float, amplitude: float = 1.0) -> InitialData:
    """Outgoing Gaussian pulse in rstar, constant along the ingoing segment.

    psi(u0, v) = A exp(-((v - u0)/2 - center)^2 / width^2); the ingoing
    segment carries the constant corner value, so at the corner the pulse is
    purely outgoing.  Decays below machine precision a few dozen widths out.
    """
    if width <= 0.0:
        raise ValidationError("gaussian width must be positive")

    def outgoing(u0, v):
        rs = (np.asarray(v) - u0) / 2.0
        return amplitude * np.exp(-(((rs - center) / width) ** 2))

    def ingoing(v0, u):
        # constant in u, pinned to the corner value of the outgoing profile
        u = np.asarray(u, dtype=float)
        u0 = u.flat[0] if u.ndim else float(u)
        rs0 = (v0 - u0) / 2.0
        val = amplitude * np.exp(-(((rs0 - center) / width) ** 2))
        return np.full_like(u, val) if u.ndim else val

    return InitialData(
        "gaussian",
        {"center": center, "width": width, "amplitude": amplitude},
        outgoing,
        ingoing,
    )


def bessel_data(ell: int, wavenumber: float, background: Background) -> InitialData:
    """Exact flat-space mode phi = j_ell(k r) cos(k t), sampled on both segments.

    Only meaningful on the flat background (it is an exact solution there),
    which makes it the convergence oracle for the scheme.
    """
    if not background.is_flat:
        raise ValidationError("bessel data is an exact mode of the flat background only")
    R = background.foliation_radius
    k = float(wavenumber)

    def mode(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        t = (u + v) / 2.0
        r = (v - u) / 2.0 + R
        r = np.maximum(r, 0.0)
        return r * spherical_jn(ell, k * r) * np.cos(k * t)

    return InitialData(
        "bessel",
        {"ell": ell, "wavenumber": k},
        lambda u0, v: mode(u0, v),
        lambda v0, u: mode(u, v0),
    )


def callable_data(fn: Callable, family: str = "custom", params: dict | None = None) -> InitialData:
    """Data sampled from an arbitrary psi(u, v) (e.g. an exact solution)."""
    return InitialData(
        family,
        params or {},
        lambda u0, v: fn(u0, np.asarray(v, dtype=float)),
        lambda v0, u: fn(np.asarray(u, dtype=float), v0),
    )


def table_data(outgoing_values, ingoing_values) -> InitialData:
    """Data given as node tables on the two initial segments."""
    f = np.asarray(outgoing_values, dtype=float)
    g = np.asarray(ingoing_values, dtype=float)

    return InitialData(
        "table",
        {"n_outgoing": f.size, "n_ingoing": g.size},
        lambda u0, v: f,
        lambda v0, u: g,
    )


@dataclass
class ModeField:
    """An evolved mode: psi = r*phi on a NullGrid, plus lazy derivative tables."""

    grid: NullGrid
    ell: int
    psi: np.ndarray
    commuted_order: int = 0
    _psi_u: np.ndarray | None = field(default=None, repr=False)
    _psi_v: np.ndarray | None = field(default=None, repr=False)

    @property
    def background(self) -> Background:
        return self.grid.background

    @property
    def psi_u(self) -> np.ndarray:
        """du-derivative at nodes (centered; second-order one-sided at edges)."""
        if self._psi_u is None:
            self._psi_u = np.gradient(self.psi, self.grid.h, axis=0, edge_order=2)
        return self._psi_u

    @property
    def psi_v(self) -> np.ndarray:
        if self._psi_v is None:
            self._psi_v = np.gradient(self.psi, self.grid.h, axis=1, edge_order=2)
        return self._psi_v


def _potential_diag(grid: NullGrid, ell: int) -> np.ndarray:
    """V on the shared node/cell-center diagonal table, zeroed off-domain."""
    V = potential_from_gap(grid.r_diag, grid.gap_diag, ell, grid.background)
    if grid.axis_k is not None:
        V[: grid.k_offset(grid.axis_k) + 1] = 0.0
    return V


def evolve(data: InitialData, grid: NullGrid, ell: int, bg: Background | None = None) -> ModeField:
    """March the diamond scheme over the whole grid.

    Parameters
    ----------
    data : InitialData
    grid : NullGrid
    ell : int
        Angular mode number (multipole).
    bg : Background, optional
        Must match ``grid.background`` when given (signature convenience).

    Raises
    ------
    NumericalError
        On the first non-finite cell, with its location.
    """
    if bg is not None and bg != grid.background:
        raise ValidationError("bg argument disagrees with grid.background")
    f, g = data.sample(grid)
    psi = _march(grid, ell, f, g)
    _check_finite(grid, psi)
    if grid.axis_k is not None:
        _fill_odd_reflection(grid, psi)
    return ModeField(grid=grid, ell=ell, psi=psi, commuted_order=0)


def evolve_commuted(
    data: InitialData, grid: NullGrid, ell: int, bg: Background | None = None, order: int = 1
) -> ModeField:
    """Evolve the time-derivative companion of the given data.

    The time translation T is Killing, so T^order of a solution solves the
    same reduced equation; its characteristic data are built from the given
    data via dpsi/dt = dpsi/du + dpsi/dv, where the transverse derivative
    along each initial segment is integrated out of the field equation
    (dpsi_u/dv = -(V/4) psi along u = u0) from a one-sided corner value.
    """
    if order not in (1, 2):
        raise ValidationError("commuted order must be 1 or 2")
    if bg is not None and bg != grid.background:
        raise ValidationError("bg argument disagrees with grid.background")
    f, g = data.sample(grid)
    for _ in range(order):
        f, g = _time_derivative_data(grid, ell, f, g)
    psi = _march(grid, ell, f, g)
    _check_finite(grid, psi)
    if grid.axis_k is not None:
        _fill_odd_reflection(grid, psi)
    return ModeField(grid=grid, ell=ell, psi=psi, commuted_order=order)


def _time_derivative_data(grid: NullGrid, ell: int, f: np.ndarray, g: np.ndarray):
    h = grid.h
    V = _potential_diag(grid, ell)
    V_f = V[grid.k_offset(np.arange(grid.nv))]  # along u = u0, node (0, j)
    V_g = V[grid.k_offset(-np.arange(grid.nu))]  # along v = v0, node (i, 0)
    f_v = np.gradient(f, h, edge_order=2)
    g_u = np.gradient(g, h, edge_order=2)
    # transverse derivatives from the field equation, anchored at the corner
    psi_u_line = g_u[0] + cumulative_trapezoid(-(V_f / 4.0) * f, dx=h, initial=0.0)
    psi_v_line = f_v[0] + cumulative_trapezoid(-(V_g / 4.0) * g, dx=h, initial=0.0)
    Tf = f_v + psi_u_line
    Tg = g_u + psi_v_line
    if grid.axis_k is not None:
        Tf[np.arange(grid.nv) <= grid.axis_k] = 0.0
        Tg[-np.arange(grid.nu) <= grid.axis_k] = 0.0
    Tg[0] = Tf[0]
    return Tf, Tg


def _march(grid: NullGrid, ell: int, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    nu, nv, h = grid.nu, grid.nv, grid.h
    coef = (h * h / 8.0) * _potential_diag(grid, ell)
    psi = np.zeros((nu, nv))
    psi[0, :] = f
    psi[:, 0] = g
    off = nu - 1
    ax = grid.axis_k + off if grid.axis_k is not None else None
    # march along antidiagonals i + j = s; every cell on one antidiagonal
    # depends only on the two previous antidiagonals
    for s in range(2, nu + nv - 1):
        ilo = max(1, s - (nv - 1))
        ihi = min(nu - 1, s - 1)
        if ilo > ihi:
            continue
        ii = np.arange(ilo, ihi + 1)
        jj = s - ii
        kk = jj - ii + off
        c = coef[kk]
        vals = (
            psi[ii - 1, jj]
            + psi[ii, jj - 1]
            - psi[ii - 1, jj - 1]
            - c * (psi[ii - 1, jj] + psi[ii, jj - 1])
        )
        if ax is not None:
            vals = np.where(kk <= ax, 0.0, vals)
        psi[ii, jj] = vals
    return psi


def _fill_odd_reflection(grid: NullGrid, psi: np.ndarray) -> None:
    """Fill r < 0 nodes with -psi(mirror) so differences are valid at the axis."""
    ka = grid.axis_k
    nu, nv = grid.nu, grid.nv
    for k in range(-(nu - 1), ka):
        ilo, ihi = max(0, -k), min(nu - 1, nv - 1 - k)
        if ilo > ihi:
            continue
        ii = np.arange(ilo, ihi + 1)
        im = ii + (k - ka)  # mirror row
        jm = ii + ka  # mirror column
        ok = (im >= 0) & (im < nu) & (jm >= 0) & (jm < nv)
        psi[ii[ok], ii[ok] + k] = -psi[im[ok], jm[ok]]


def _check_finite(grid: NullGrid, psi: np.ndarray) -> None:
    if np.isfinite(psi).all():
        return
    bad = np.argwhere(~np.isfinite(psi))
    order = np.argsort(bad.sum(axis=1))
    i, j = bad[order[0]]
    raise NumericalError(
        "non-finite field value first reached at cell "
        f"(i={i}, j={j}), u={grid.u0 + i * grid.h}, v={grid.v0 + j * grid.h}"
    )


def dump_field(fld: ModeField, path: str, fmt: str = "npy") -> None:
    """Write the full psi table: 'npy' (binary) or 'csv' (node-ordered)."""
    meta = fld.grid.metadata()
    meta.update({"ell": fld.ell, "commuted_order": fld.commuted_order})
    if fmt == "npy":
        np.save(path, fld.psi)
        return
    if fmt != "csv":
        raise ValidationError(f"unknown dump format {fmt!r}")
    buf = io.StringIO()
    head = " ".join(f"{k}={v}" for k, v in meta.items())
    buf.write(f"# wavedecay-field v1 {head}\n")
    buf.write("i,j,u,v,r,psi\n")
    g = fld.grid
    for i in range(g.nu):
        u = g.u0 + i * g.h
        r_row = g.r_diag[g.k_offset(np.arange(g.nv) - i)]
        for j in range(g.nv):
            buf.write(
                f"{i},{j},{u:.17g},{g.v0 + j * g.h:.17g},{r_row[j]:.17g},{fld.psi[i, j]:.17g}\n"
            )
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
