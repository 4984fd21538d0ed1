"""Discrete balance of the r^p-weighted energy identities.

Multiplying the reduced equation  (4/(1-mu)) psi_uv + (l(l+1)/r^2 + 2M/r^3) psi = 0
by 2 r^p psi_v and integrating over the exterior region D(tau1, tau2) between
two leaves gives the exact identity (all integrals du dv; lam = l(l+1)):

    outgoing_flux_final        int 4 r^p/(1-mu) psi_v^2 dv   on the tau2 ray
  + bulk_v                     int 2 p r^(p-1) psi_v^2
  + bulk_v_corrected           - int 2 r^(p-1) mu/(1-mu) psi_v^2     (M > 0)
  + bulk_ang                   int (lam/2)(2-p)(1-mu) r^(p-3) psi^2
  + bulk_psi2                  int M (3-p)(1-mu) r^(p-4) psi^2       (M > 0)
  + scri_ang                   int lam r^(p-2) psi^2 du    at v = v_max
  + scri_psi2                  int 2 M r^(p-3) psi^2 du    at v = v_max (M > 0)
  + timelike_boundary          int [4 r^p/(1-mu) psi_v^2 - lam r^(p-2) psi^2
                                    - 2 M r^(p-3) psi^2] du   at r = R
  = outgoing_flux_initial      int 4 r^p/(1-mu) psi_v^2 dv   on the tau1 ray.

The outer-v terms are the region's own boundary contribution, so the
identity closes exactly on the truncated region; they approximate the null
infinity terms when the field has left the outer edge.  For 0 < p <= 2 the
terms bulk_v, bulk_ang, scri_ang (and scri_psi2, bulk_psi2 for p <= 3) are
individually nonnegative.  The ledger residual (left minus right sum) of a
second-order evolved field vanishes at second order in h.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .background import Background, potential_from_gap
from .errors import ValidationError
from .leaves import leaf_indices
from .regions import region_bulk_sums, region_rows
from .solver import ModeField

FLAT_TERMS = (
    "outgoing_flux_final",
    "bulk_v",
    "bulk_ang",
    "scri_ang",
    "outgoing_flux_initial",
    "timelike_boundary",
)
SCHWARZSCHILD_TERMS = FLAT_TERMS + ("scri_psi2", "bulk_psi2", "bulk_v_corrected")

# terms with a predicted sign (nonnegative) for 0 < p <= 2 (resp. <= 3)
SIGNED_TERMS = ("outgoing_flux_final", "outgoing_flux_initial", "bulk_v",
                "bulk_ang", "scri_ang", "scri_psi2", "bulk_psi2")


@dataclass
class IdentityLedger:
    """Every named term of one weighted identity on one region."""

    p: float
    tau1: float
    tau2: float
    grid_h: float
    background: Background
    r_boundary: float
    terms: dict
    truncation_warning: bool = False

    @property
    def residual(self) -> float:
        left = sum(v for k, v in self.terms.items() if k != "outgoing_flux_initial")
        return left - self.terms["outgoing_flux_initial"]

    @property
    def residual_relative(self) -> float:
        scale = max(abs(v) for v in self.terms.values())
        return abs(self.residual) / scale if scale > 0.0 else 0.0

    @property
    def largest_term(self) -> float:
        return max(abs(v) for v in self.terms.values())

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "tau1": self.tau1,
            "tau2": self.tau2,
            "grid_h": self.grid_h,
            "kind": self.background.kind,
            "mass": self.background.mass,
            "foliation_radius": self.background.foliation_radius,
            "r_boundary": self.r_boundary,
            "terms": dict(self.terms),
            "residual": self.residual,
            "residual_relative": self.residual_relative,
            "truncation_warning": self.truncation_warning,
        }

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def _ray_flux(fld: ModeField, row: int, p: float) -> float:
    """int 4 r^p/(1-mu) psi_v^2 dv along the null piece of the row's leaf."""
    grid = fld.grid
    h = grid.h
    j0 = row + grid.junction_k
    jj = np.arange(j0, grid.nv - 1)
    ko = grid.k_offset(jj - row)
    r_mid = grid.r_vedge[ko]
    om = grid.gap_vedge[ko] / r_mid
    dpsi_v = (fld.psi[row, jj + 1] - fld.psi[row, jj]) / h
    return float(h * np.sum(4.0 * r_mid**p / om * dpsi_v**2))


def pwe_ledger(
    fld: ModeField, tau1: float, tau2: float, p: float, bg: Background | None = None
) -> IdentityLedger:
    """Assemble the weighted identity's terms on D(tau1, tau2).

    Requires 0 < p <= 3 (the angular bulk term flips sign for p > 2 and is
    reported as such).  Warns, without failing, when the field is active at
    the outer v edge, where the finite-v truncation makes the scri terms
    deviate from their null-infinity meaning.
    """
    if bg is not None and bg != fld.background:
        raise ValidationError("bg argument disagrees with the field's background")
    bg = fld.background
    if not (0.0 < p <= 3.0):
        raise ValidationError("pwe_ledger requires 0 < p <= 3")
    grid = fld.grid
    h = grid.h
    psi = fld.psi
    M = bg.mass
    lam = float(fld.ell * (fld.ell + 1))
    i1, i2 = region_rows(fld, tau1, tau2)
    kR = grid.junction_k

    coef_v = {"bulk_v": lambda r, gap: 2.0 * p * r ** (p - 1.0)}
    coef_s = {"bulk_ang": lambda r, gap: (lam / 2.0) * (2.0 - p) * (gap / r) * r ** (p - 3.0)}
    if not bg.is_flat:
        coef_v["bulk_v_corrected"] = lambda r, gap: -2.0 * r ** (p - 1.0) * (2.0 * M / r) / (gap / r)
        coef_s["bulk_psi2"] = lambda r, gap: M * (3.0 - p) * (gap / r) * r ** (p - 4.0)
    sums_v, sums_s = region_bulk_sums(fld, tau1, tau2, coef_v, coef_s)

    terms = {
        "outgoing_flux_final": _ray_flux(fld, i2, p),
        "bulk_v": sums_v["bulk_v"],
        "bulk_ang": sums_s["bulk_ang"],
        "outgoing_flux_initial": _ray_flux(fld, i1, p),
    }

    # outer v edge (null-infinity stand-in), u-edge midpoint rule
    ii = np.arange(i1, i2)
    ko_u = grid.k_offset((grid.nv - 1) - ii)
    r_u = grid.r_uedge[ko_u]
    psi_mid = 0.5 * (psi[ii, grid.nv - 1] + psi[ii + 1, grid.nv - 1])
    terms["scri_ang"] = float(h * np.sum(lam * r_u ** (p - 2.0) * psi_mid**2))
    if not bg.is_flat:
        terms["scri_psi2"] = float(h * np.sum(2.0 * M * r_u ** (p - 3.0) * psi_mid**2))
        terms["bulk_v_corrected"] = sums_v["bulk_v_corrected"]
        terms["bulk_psi2"] = sums_s["bulk_psi2"]

    # timelike boundary at r = R: cell-center values along the junction diagonal
    jb = ii + kR
    ko_c = grid.k_offset(np.full_like(ii, kR))
    r_c = grid.r_diag[ko_c]
    om_c = grid.gap_diag[ko_c] / r_c
    dpsi_v_c = (psi[ii, jb + 1] - psi[ii, jb] + psi[ii + 1, jb + 1] - psi[ii + 1, jb]) / (2.0 * h)
    psi_c = 0.25 * (psi[ii, jb] + psi[ii, jb + 1] + psi[ii + 1, jb] + psi[ii + 1, jb + 1])
    f_c = 4.0 * r_c**p / om_c * dpsi_v_c**2
    g_c = lam * r_c ** (p - 2.0) * psi_c**2 + 2.0 * M * r_c ** (p - 3.0) * psi_c**2
    terms["timelike_boundary"] = float(h * np.sum(f_c - g_c))

    # truncation warning: field active at the outer v edge of the region
    region_max = float(np.max(np.abs(psi[i1 : i2 + 1, :])))
    edge_max = float(np.max(np.abs(psi[i1 : i2 + 1, grid.nv - 1])))
    truncated = region_max > 0.0 and edge_max > 1e-6 * region_max
    if truncated:
        warnings.warn(
            "field has support at the outer v edge; scri terms include a "
            "finite-v truncation contribution",
            RuntimeWarning,
            stacklevel=2,
        )

    _, j1 = leaf_indices(grid, tau1)
    return IdentityLedger(
        p=p,
        tau1=grid.v0 + j1 * h,
        tau2=grid.v0 + (j1 + (i2 - i1)) * h,
        grid_h=h,
        background=bg,
        r_boundary=float(grid.r_diag[grid.k_offset(kR)]),
        terms=terms,
        truncation_warning=truncated,
    )


def residual_order(ledgers) -> float | str:
    """Observed convergence order of ledger residuals under refinement.

    Least-squares slope of log|residual| against log h over >= 3 ledgers of
    the same region and p.  Returns the string ``"saturated"`` when every
    residual sits at rounding level relative to the ledger terms.
    """
    ledgers = list(ledgers)
    if len(ledgers) < 3:
        raise ValidationError("residual_order needs at least 3 ledgers")
    p0, t1, t2 = ledgers[0].p, ledgers[0].tau1, ledgers[0].tau2
    for led in ledgers[1:]:
        if abs(led.p - p0) > 1e-12 or abs(led.tau1 - t1) > 1e-6 or abs(led.tau2 - t2) > 1e-6:
            raise ValidationError("residual_order requires a common region and p")
    res = np.array([abs(led.residual) for led in ledgers])
    scale = np.array([max(led.largest_term, 1e-300) for led in ledgers])
    if np.all(res <= 1e-14 * scale):
        return "saturated"
    hs = np.array([led.grid_h for led in ledgers])
    good = res > 0.0
    if good.sum() < 2:
        return "saturated"
    slope = np.polyfit(np.log(hs[good]), np.log(res[good]), 1)[0]
    return float(slope)
