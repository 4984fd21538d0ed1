"""Per-leaf flux, bulk and pointwise diagnostics of an evolved mode.

All quantities are per-mode: the angular integration contributes a constant
sphere factor that is dropped throughout (every inequality the package
checks is homogeneous in it).  Energies are assembled from the reduced
variable psi = r*phi and the exactly conserved mode current

    d/du [2 psi_v^2 + V psi^2 / 2] + d/dv [2 psi_u^2 + V psi^2 / 2] = 0,

whose line integral over a leaf gives the energy flux.  Parameterising the
spacelike piece by rstar, the flux density is

    e_T = (2 psi_v^2 + V psi^2/2)(1 - mu) + (2 psi_u^2 + V psi^2/2)(1 + mu),

with mu = 2M/r, while the null piece carries 2 psi_v^2 + V psi^2/2 per unit
v.  The transverse weight (1 + mu) degenerates (in regular variables) at the
horizon; the non-degenerate energy adds the compensating term

    e_N = e_T + 2 mu (1 + mu) / (1 - mu) * psi_u^2,

which vanishes identically for M = 0, never decreases the integrand, and
stays bounded in horizon-regular variables (psi_u itself shrinks like
1 - mu there).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .background import Background, potential_from_gap
from .errors import NumericalError, ValidationError
from .leaves import LeafSample, sample_leaf
from .regions import region_bulk_sums
from .solver import ModeField

DEFAULT_P_LIST = (0.5, 1.0, 2.0)
SERIES_SCHEMA = "wavedecay-series v1"


# ---------------------------------------------------------------------------
# scalar diagnostics
# ---------------------------------------------------------------------------


def _energy_parts(s: LeafSample) -> tuple[float, float]:
    """(E_T, horizon term E_N - E_T) for one leaf sample."""
    fld = s.field
    bg = s.background
    V_edge = potential_from_gap(s.null_r_mid, s.null_gap_mid, fld.ell, bg)
    e_null = s.null_integrate_edges(2.0 * s.null_dpsi_v**2 + 0.5 * V_edge * s.null_psi_mid**2)
    P = 2.0 * s.sl_psi_v**2 + 0.5 * s.sl_V * s.sl_psi**2
    Q = 2.0 * s.sl_psi_u**2 + 0.5 * s.sl_V * s.sl_psi**2
    om = s.sl_one_minus_mu
    op = s.sl_one_plus_mu
    e_sl = s.sl_integrate(P * om + Q * op)
    if bg.is_flat:
        return e_null + e_sl, 0.0
    mu = 2.0 * bg.mass / s.sl_r
    extra = s.sl_integrate((2.0 * mu * op * s.sl_psi_u**2) / om)
    return e_null + e_sl, extra


def energy_flux_T(fld: ModeField, tau: float) -> float:
    """Stationary-energy flux through the leaf labelled tau (>= 0).

    Spacelike integrand per unit rstar plus the outgoing null flux, as in the
    module docstring; second-order trapezoid/midpoint quadrature.  Refuses a
    tau whose leaf is not covered by the grid.
    """
    return _energy_parts(sample_leaf(fld, tau))[0]


def energy_flux_N(fld: ModeField, tau: float) -> float:
    """Non-degenerate energy flux: E_T plus the horizon-weight compensation.

    Coincides with :func:`energy_flux_T` exactly on the flat background and
    on the null piece (r >= R); the added spacelike term keeps uniform
    control of the transverse derivative toward r -> 2M without any
    1/(1 - 2M/r) blow-up of the assembled integrand.
    """
    e_t, extra = _energy_parts(sample_leaf(fld, tau))
    return e_t + extra


def weighted_flux(fld: ModeField, tau: float, p: float) -> float:
    """r^p-weighted outgoing null flux  F_p = int r^p (dpsi/dv)^2 dv  (>= 0)."""
    if not (0.0 < p <= 2.0):
        raise ValidationError("weighted_flux requires 0 < p <= 2")
    s = sample_leaf(fld, tau)
    return s.null_integrate_edges(s.null_r_mid**p * s.null_dpsi_v**2)


def bulk_integral(fld: ModeField, tau1: float, tau2: float, p: float) -> tuple[float, float]:
    """Weighted bulk integrals over D(tau1, tau2) = {r >= R} between leaves.

    Returns (term_v, term_ang) =
    (int p r^{p-1} (dpsi_v)^2, int (2-p) l(l+1) r^{p-3} psi^2), du dv measure.
    Both are nonnegative for 0 < p <= 2.
    """
    if p <= 0.0:
        raise ValidationError("bulk_integral requires p > 0")
    lam = float(fld.ell * (fld.ell + 1))
    sums_v, sums_s = region_bulk_sums(
        fld,
        tau1,
        tau2,
        coef_v={"v": lambda r, gap: p * r ** (p - 1.0)},
        coef_s={"ang": lambda r, gap: (2.0 - p) * lam * r ** (p - 3.0)},
    )
    return sums_v["v"], sums_s["ang"]


def local_energy_density(fld: ModeField, tau: float) -> float:
    """The r <= R local-energy integrand of the spacetime decay estimate.

    int_{r<=R} [ chi e_N + ((d_r phi)^2 + phi^2) r^2 (1-mu) ] drstar with
    chi = (1 - 3M/r)^2 on Schwarzschild (vanishing quadratically at the
    photon sphere) and chi = 1 on flat space; d_r is the horizon-regular
    radial derivative at fixed tstar.
    """
    return _local_density(sample_leaf(fld, tau))


def _local_density(s: LeafSample) -> float:
    bg = s.background
    P = 2.0 * s.sl_psi_v**2 + 0.5 * s.sl_V * s.sl_psi**2
    Q = 2.0 * s.sl_psi_u**2 + 0.5 * s.sl_V * s.sl_psi**2
    om = s.sl_one_minus_mu
    op = s.sl_one_plus_mu
    e_n = P * om + Q * op
    if not bg.is_flat:
        mu = 2.0 * bg.mass / s.sl_r
        e_n = e_n + (2.0 * mu * op * s.sl_psi_u**2) / om
        chi = (1.0 - 3.0 * bg.mass / s.sl_r) ** 2
    else:
        chi = 1.0
    r_safe = np.maximum(s.sl_r, 1e-300)
    dpsi_r = -s.sl_psi_u * op / np.maximum(om, 1e-300) + s.sl_psi_v
    phi = s.sl_phi
    phi_r = dpsi_r / r_safe - s.sl_psi / r_safe**2
    lower = np.where(s.sl_r > 1e-12, (phi_r**2 + phi**2) * s.sl_r**2 * om, 0.0)
    return s.sl_integrate(chi * e_n + lower)


def iled_integral(fld: ModeField, tau: float, horizon_T: float, tau_step: float | None = None) -> float:
    """Windowed spacetime integral of :func:`local_energy_density`.

    Trapezoid over leaves tau' in [tau, tau + horizon_T] at grid-aligned
    spacing (default ~horizon_T/64, at least one grid step).  Monotone
    nondecreasing in horizon_T by positivity of the integrand.
    """
    if horizon_T <= 0.0:
        raise ValidationError("horizon_T must be positive")
    h = fld.grid.h
    if tau_step is None:
        tau_step = max(horizon_T / 64.0, h)
    n = max(1, int(round(tau_step / h)))
    step = n * h
    m = int(np.floor(horizon_T / step + 1e-9))
    if m < 1:
        m = 1
    taus = tau + step * np.arange(m + 1)
    vals = np.array([_local_density(sample_leaf(fld, t)) for t in taus])
    return float(np.trapezoid(vals, dx=step))


@dataclass(frozen=True)
class HardyBalance:
    """Both sides of the null-segment identity relating psi- and phi-fluxes.

    lhs = int (dpsi_v)^2 dv equals r2_term = int r^2 (dphi_v)^2 dv plus the
    endpoint exchange (far_term - boundary_term, each (1-mu) r phi^2 / 2) and
    minus the curvature remainder bulk_term = int (1-mu)(mu/4) phi^2 dv
    (identically zero on flat space).  residual -> 0 at second order.
    """

    lhs: float
    r2_term: float
    boundary_term: float
    far_term: float
    bulk_term: float

    @property
    def residual(self) -> float:
        return self.lhs - self.r2_term - self.far_term + self.boundary_term + self.bulk_term


def hardy_decomposition(fld: ModeField, tau: float) -> HardyBalance:
    """Evaluate the null-segment flux decomposition on the leaf tau."""
    s = sample_leaf(fld, tau)
    bg = s.background
    om_mid = s.null_gap_mid / s.null_r_mid
    lhs = s.null_integrate_edges(s.null_dpsi_v**2)
    dphi_v = s.null_dpsi_v / s.null_r_mid - s.null_psi_mid * om_mid / (2.0 * s.null_r_mid**2)
    r2_term = s.null_integrate_edges(s.null_r_mid**2 * dphi_v**2)
    gap_nodes = s.null_r - 2.0 * bg.mass if not bg.is_flat else s.null_r
    phi0 = s.null_psi[0] / s.null_r[0]
    phiN = s.null_psi[-1] / s.null_r[-1]
    boundary = 0.5 * gap_nodes[0] * phi0**2
    far = 0.5 * gap_nodes[-1] * phiN**2
    if bg.is_flat:
        bulk = 0.0
    else:
        mu_mid = 2.0 * bg.mass / s.null_r_mid
        phi_mid = s.null_psi_mid / s.null_r_mid
        bulk = s.null_integrate_edges(om_mid * (mu_mid / 4.0) * phi_mid**2)
    return HardyBalance(lhs=lhs, r2_term=r2_term, boundary_term=boundary, far_term=far, bulk_term=bulk)


def pointwise_sups(fld: ModeField, tau: float) -> tuple[float, float]:
    """(sup r^(1/2)|phi|, sup r|phi|) over the leaf's sample points."""
    return _sups_from_sample(sample_leaf(fld, tau))


# ---------------------------------------------------------------------------
# series collection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxRecord:
    """All diagnostics of one field at one leaf.

    bulk_v / bulk_ang are the p = 1 bulk increments accumulated over
    (previous tau, this tau]; the first record carries zeros.  The `iled`
    field is the local-energy integrand at this tau (not yet time-integrated).
    """

    tau: float
    E_T: float
    E_N: float
    F_p: dict
    bulk_v: float
    bulk_ang: float
    iled: float
    sup_rhalf_phi: float
    sup_r_phi: float

    def validate(self):
        vals = [self.tau, self.E_T, self.E_N, self.bulk_v, self.bulk_ang, self.iled,
                self.sup_rhalf_phi, self.sup_r_phi, *self.F_p.values()]
        if not np.all(np.isfinite(vals)):
            raise NumericalError(f"non-finite diagnostic at tau = {self.tau}")
        if self.E_T > self.E_N * (1.0 + 1e-12) + 1e-300:
            raise NumericalError(f"E_T > E_N at tau = {self.tau}")


@dataclass
class FluxSeries:
    """Diagnostics of one (field, commuted order) along increasing leaves."""

    background: Background
    ell: int
    commuted_order: int
    h: float
    data_family: str
    records: list = field(default_factory=list)

    @property
    def taus(self) -> np.ndarray:
        return np.array([rec.tau for rec in self.records])

    def column(self, name: str) -> np.ndarray:
        if name.startswith("F_"):
            p = float(name[2:])
            return np.array([rec.F_p[p] for rec in self.records])
        return np.array([getattr(rec, name) for rec in self.records])

    @property
    def p_list(self) -> tuple:
        return tuple(sorted(self.records[0].F_p)) if self.records else ()


@dataclass
class SeriesBundle:
    """FluxSeries for a base field and its commuted companions, keyed by order."""

    series: dict
    meta: dict = field(default_factory=dict)

    def __getitem__(self, order: int) -> FluxSeries:
        return self.series[order]

    @property
    def orders(self) -> list:
        return sorted(self.series)


def collect_series(
    fields,
    taus,
    p_list=DEFAULT_P_LIST,
    with_bulk: bool = True,
    meta: dict | None = None,
) -> SeriesBundle:
    """Run every diagnostic at every tau for a field and its companions.

    ``fields`` is a ModeField or an iterable/dict of them (keyed by commuted
    order).  taus must be strictly increasing and leaf-aligned.  Records are
    validated (finite, E_T <= E_N) as they are produced.
    """
    if isinstance(fields, ModeField):
        fields = {fields.commuted_order: fields}
    elif not isinstance(fields, dict):
        fields = {f.commuted_order: f for f in fields}
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size < 1 or np.any(np.diff(taus) <= 0):
        raise ValidationError("taus must be a strictly increasing 1-D sequence")
    out = {}
    for order, fld in sorted(fields.items()):
        recs = []
        prev_tau = None
        for tau in taus:
            s = sample_leaf(fld, tau)
            e_t, extra = _energy_parts(s)
            fp = {float(p): s.null_integrate_edges(s.null_r_mid ** float(p) * s.null_dpsi_v**2)
                  for p in p_list}
            sup_half, sup_one = _sups_from_sample(s)
            if with_bulk and prev_tau is not None:
                bv, bang = bulk_integral(fld, prev_tau, s.tau, p=1.0)
            else:
                bv, bang = 0.0, 0.0
            rec = FluxRecord(
                tau=s.tau,
                E_T=e_t,
                E_N=e_t + extra,
                F_p=fp,
                bulk_v=bv,
                bulk_ang=bang,
                iled=_local_density(s),
                sup_rhalf_phi=sup_half,
                sup_r_phi=sup_one,
            )
            rec.validate()
            recs.append(rec)
            prev_tau = s.tau
        out[order] = FluxSeries(
            background=fld.background,
            ell=fld.ell,
            commuted_order=order,
            h=fld.grid.h,
            data_family=(meta or {}).get("data_family", "unknown"),
            records=recs,
        )
    return SeriesBundle(series=out, meta=dict(meta or {}))


def _sups_from_sample(s: LeafSample) -> tuple[float, float]:
    phi_null = np.abs(s.null_phi)
    phi_sl = np.abs(s.sl_phi)
    sup_half = max(
        float(np.max(np.sqrt(s.null_r) * phi_null, initial=0.0)),
        float(np.max(np.sqrt(np.maximum(s.sl_r, 0.0)) * phi_sl, initial=0.0)),
    )
    sup_one = max(
        float(np.max(s.null_r * phi_null, initial=0.0)),
        float(np.max(s.sl_r * phi_sl, initial=0.0)),
    )
    return sup_half, sup_one


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return "%.17g" % x


def series_to_csv(bundle: SeriesBundle, path: str) -> None:
    """Fixed, versioned schema; one row per (commuted order, tau)."""
    orders = bundle.orders
    if not orders:
        raise ValidationError("empty bundle")
    base = bundle.series[orders[0]]
    p_list = base.p_list
    fcols = [f"F_{p:g}" for p in p_list]
    meta = {
        "kind": base.background.kind,
        "mass": base.background.mass,
        "foliation_radius": base.background.foliation_radius,
        "ell": base.ell,
        "h": base.h,
        "data": base.data_family,
    }
    head = " ".join(f"{k}={v}" for k, v in meta.items())
    cols = ["tau", "E_T", "E_N", *fcols, "bulk_v", "bulk_ang", "iled",
            "sup_rhalf_phi", "sup_r_phi", "commuted_order"]
    lines = [f"# {SERIES_SCHEMA} {head}", ",".join(cols)]
    for order in orders:
        for rec in bundle.series[order].records:
            row = [rec.tau, rec.E_T, rec.E_N, *[rec.F_p[p] for p in p_list],
                   rec.bulk_v, rec.bulk_ang, rec.iled, rec.sup_rhalf_phi, rec.sup_r_phi]
            lines.append(",".join(_fmt(x) for x in row) + f",{order}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def series_to_json(bundle: SeriesBundle, path: str, config: dict | None = None) -> None:
    orders = bundle.orders
    base = bundle.series[orders[0]]
    doc = {
        "schema": SERIES_SCHEMA,
        "meta": {
            "kind": base.background.kind,
            "mass": base.background.mass,
            "foliation_radius": base.background.foliation_radius,
            "ell": base.ell,
            "h": base.h,
            "data_family": base.data_family,
            **bundle.meta,
        },
        "config": config,
        "series": {
            str(order): [
                {
                    "tau": rec.tau,
                    "E_T": rec.E_T,
                    "E_N": rec.E_N,
                    "F_p": {f"{p:g}": val for p, val in sorted(rec.F_p.items())},
                    "bulk_v": rec.bulk_v,
                    "bulk_ang": rec.bulk_ang,
                    "iled": rec.iled,
                    "sup_rhalf_phi": rec.sup_rhalf_phi,
                    "sup_r_phi": rec.sup_r_phi,
                }
                for rec in bundle.series[order].records
            ]
            for order in orders
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def series_from_csv(path: str) -> SeriesBundle:
    """Read back a bundle written by :func:`series_to_csv`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith(f"# {SERIES_SCHEMA}"):
        raise ValidationError(f"{path}: not a recognised series CSV")
    meta = {}
    for tok in lines[0].split()[3:]:
        if "=" in tok:
            k, v = tok.split("=", 1)
            meta[k] = v
    cols = lines[1].split(",")
    fcols = [(idx, float(c[2:])) for idx, c in enumerate(cols) if c.startswith("F_")]
    idx_of = {c: idx for idx, c in enumerate(cols)}
    bg = Background(meta["kind"], float(meta["mass"]), float(meta["foliation_radius"]))
    rows_by_order: dict[int, list] = {}
    for ln in lines[2:]:
        parts = ln.split(",")
        order = int(parts[idx_of["commuted_order"]])
        rec = FluxRecord(
            tau=float(parts[idx_of["tau"]]),
            E_T=float(parts[idx_of["E_T"]]),
            E_N=float(parts[idx_of["E_N"]]),
            F_p={p: float(parts[idx]) for idx, p in fcols},
            bulk_v=float(parts[idx_of["bulk_v"]]),
            bulk_ang=float(parts[idx_of["bulk_ang"]]),
            iled=float(parts[idx_of["iled"]]),
            sup_rhalf_phi=float(parts[idx_of["sup_rhalf_phi"]]),
            sup_r_phi=float(parts[idx_of["sup_r_phi"]]),
        )
        rows_by_order.setdefault(order, []).append(rec)
    series = {
        order: FluxSeries(
            background=bg,
            ell=int(meta["ell"]),
            commuted_order=order,
            h=float(meta["h"]),
            data_family=meta.get("data", "unknown"),
            records=recs,
        )
        for order, recs in rows_by_order.items()
    }
    return SeriesBundle(series=series, meta=meta)
