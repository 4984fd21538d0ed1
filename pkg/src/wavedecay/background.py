"""Background geometries: flat space and the Schwarzschild exterior.

Conventions used throughout the package
---------------------------------------
Geometric units, mass parameter ``M`` (flat space is ``M = 0``).  A fixed
foliation radius ``R`` anchors both the radial coordinate and the foliation.

* radial coordinate:  ``rstar = r - R`` on the flat background and
  ``rstar = r + 2M log(r - 2M) - R`` on Schwarzschild.  ``rstar`` is strictly
  increasing in ``r``; the horizon ``r = 2M`` sits at ``rstar = -inf``.
* null coordinates: ``u = t - rstar``, ``v = t + rstar``, so that
  ``rstar = (v - u)/2`` and ``t = (u + v)/2``.  With these (coordinate)
  derivatives, ``d(r)/dv = (1 - 2M/r)/2`` along a ``u = const`` ray.
* horizon-regular time: ``tstar = t + 2M log(r - 2M)`` (equal to ``t`` on the
  flat background).  Along any surface ``tstar = const`` one has exactly
  ``v = tstar + r - R``; in particular ``v = tstar`` at ``r = R``.

A foliation leaf with label ``tau`` is the union of a spacelike inner disk
``{tstar = tau, r <= R}`` and the outgoing null ray through its boundary
sphere.  The two pieces share the junction sphere at ``r = R``, which in null
coordinates sits at ``v = tau`` and ``u = tau - 4M log(R - 2M)`` (flat:
``u = v = tau``).  Leaves labelled ``tau`` and ``tau + s`` are exact time
translates of one another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError

FLAT = "flat"
SCHWARZSCHILD = "schwarzschild"

_NEWTON_CAP = 200


@dataclass(frozen=True)
class Background:
    """A static spherically symmetric background.

    Parameters
    ----------
    kind : str
        ``"flat"`` or ``"schwarzschild"``.
    mass : float
        Mass parameter M in geometric units.  Must be 0 for flat and > 0 for
        Schwarzschild.
    foliation_radius : float
        The radius R > 0 at which the spacelike and null pieces of each
        foliation leaf are glued.  Schwarzschild requires R > 3M so the
        junction sits outside the photon sphere.
    """

    kind: str
    mass: float
    foliation_radius: float

    def __post_init__(self):
        if self.kind not in (FLAT, SCHWARZSCHILD):
            raise ValidationError(f"unknown background kind {self.kind!r}")
        if self.kind == FLAT and self.mass != 0.0:
            raise ValidationError("flat background requires mass = 0")
        if self.kind == SCHWARZSCHILD and self.mass <= 0.0:
            raise ValidationError("schwarzschild background requires mass > 0")
        if self.foliation_radius <= 0.0:
            raise ValidationError("foliation_radius must be positive")
        if self.kind == SCHWARZSCHILD and self.foliation_radius <= 3.0 * self.mass:
            raise ValidationError(
                "foliation_radius must exceed 3*mass (got "
                f"foliation_radius={self.foliation_radius}, mass={self.mass})"
            )

    # -- constructors -------------------------------------------------------

    @classmethod
    def flat(cls, foliation_radius: float = 10.0) -> "Background":
        return cls(FLAT, 0.0, foliation_radius)

    @classmethod
    def schwarzschild(cls, mass: float = 1.0, foliation_radius: float = 10.0) -> "Background":
        return cls(SCHWARZSCHILD, mass, foliation_radius)

    # -- simple accessors ----------------------------------------------------

    @property
    def is_flat(self) -> bool:
        return self.kind == FLAT

    @property
    def horizon_radius(self) -> float:
        return 2.0 * self.mass

    @property
    def photon_sphere_radius(self) -> float:
        return 3.0 * self.mass

    def mu(self, r):
        """2M/r, the horizon function; identically 0 on the flat background."""
        return 2.0 * self.mass / np.asarray(r, dtype=float)

    @property
    def rstar_at_junction(self) -> float:
        """rstar evaluated at r = R (zero on the flat background)."""
        return float(rstar_of_r(self.foliation_radius, self))

    @property
    def leaf_u_offset(self) -> float:
        """u at the junction of the leaf labelled tau = 0, i.e. -2*rstar(R)."""
        return -2.0 * self.rstar_at_junction


def rstar_of_r(r, bg: Background):
    """Radial tortoise-type coordinate.

    ``r - R`` on flat space; ``r + 2M log(r - 2M) - R`` on Schwarzschild.
    Strictly increasing, with ``rstar -> -inf`` as ``r -> 2M`` from above.

    Parameters
    ----------
    r : float or ndarray
        Areal radius; requires ``r > 2M`` (Schwarzschild) or ``r >= 0`` (flat).
    bg : Background

    Raises
    ------
    DomainError
        If any radius lies outside the background's domain.
    """
    r = np.asarray(r, dtype=float)
    R = bg.foliation_radius
    if bg.is_flat:
        if np.any(r < 0.0):
            raise DomainError("flat background requires r >= 0")
        out = r - R
    else:
        M = bg.mass
        if np.any(r <= 2.0 * M):
            raise DomainError(f"schwarzschild rstar requires r > 2M = {2.0 * M}")
        out = r + 2.0 * M * np.log(r - 2.0 * M) - R
    return out if out.ndim else float(out)


def r_of_rstar(rstar, bg: Background):
    """Numerical inverse of :func:`rstar_of_r`.

    Safeguarded Newton iteration with a maintained bisection bracket, solved
    in the horizon gap ``g = r - 2M`` to stay accurate when ``g`` underflows
    relative to ``r``.  Composes with ``rstar_of_r`` to the identity within
    1e-12 relative error on ``r in [2M(1+1e-6), 1e4 M]``.

    Parameters
    ----------
    rstar : float or ndarray
    bg : Background

    Returns
    -------
    r : float or ndarray
    """
    r, _ = r_and_gap_of_rstar(rstar, bg)
    return r


def r_and_gap_of_rstar(rstar, bg: Background):
    """Like :func:`r_of_rstar` but also returns the gap ``r - 2M`` exactly.

    The gap is the quantity actually solved for; returning it avoids the
    catastrophic cancellation of recomputing ``r - 2M`` near the horizon.
    On the flat background the gap is ``r`` itself.
    """
    x = np.asarray(rstar, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    R = bg.foliation_radius
    if bg.is_flat:
        if np.any(x < -R):
            raise DomainError("flat background requires rstar >= -R")
        r = x + R
        out = (r, r.copy())
    else:
        g = _solve_gap(x + R - 2.0 * bg.mass, bg.mass)
        r = 2.0 * bg.mass + g
        out = (r, g)
    if scalar:
        return float(out[0][0]), float(out[1][0])
    return out


def _solve_gap(c, M):
    """Solve ``g + 2M log g = c`` for g > 0, vectorised.

    The map is strictly increasing from -inf to +inf, so the root is unique.
    Newton steps with a bisection fallback whenever a step leaves the
    maintained bracket; capped at _NEWTON_CAP iterations (hitting the cap
    signals a bug, not a user error).
    """
    c = np.asarray(c, dtype=float)
    twoM = 2.0 * M
    # Asymptotic initial guesses: g ~ exp(c/2M) deep in the log-dominated
    # regime, g ~ c - 2M log(c) when the linear term dominates.
    g = np.where(c < 0.0, np.exp(c / twoM), np.maximum(c, 1e-300))
    big = c > twoM
    if np.any(big):
        g = np.where(big, np.maximum(c - twoM * np.log(np.maximum(c, 1e-300)), 1e-300), g)
    # Underflowed guesses are already converged to machine precision.
    live = g > 0.0
    lo = np.full_like(g, 0.0)
    hi = np.full_like(g, np.inf)
    for _ in range(_NEWTON_CAP):
        if not np.any(live):
            break
        gl = np.where(live, g, 1.0)
        f = gl + twoM * np.log(gl) - np.where(live, c, 0.0)
        lo = np.where(live & (f < 0.0), np.maximum(lo, gl), lo)
        hi = np.where(live & (f > 0.0), np.minimum(hi, gl), hi)
        step = f / (1.0 + twoM / gl)
        gn = gl - step
        # Bisect when Newton leaves the bracket or goes nonpositive.
        bad = live & ((gn <= lo) | (gn >= hi) | ~np.isfinite(gn))
        mid = np.where(np.isfinite(hi), 0.5 * (lo + hi), 2.0 * np.maximum(gl, 1.0))
        gn = np.where(bad, mid, gn)
        conv = live & (np.abs(gn - gl) <= 1e-15 * np.maximum(gn, 1e-300))
        g = np.where(live, gn, g)
        live = live & ~conv
    if np.any(live):  # pragma: no cover - indicates a bug per the contract
        raise NumericalIterationError("r(rstar) Newton iteration failed to converge")
    return g


class NumericalIterationError(RuntimeError):
    """Non-convergence of the safeguarded Newton inversion (a bug if raised)."""


def potential(r, ell: int, bg: Background):
    """Effective per-mode potential V(r) of the reduced radial equation.

    ``V = (1 - 2M/r) (l(l+1)/r^2 + 2M/r^3)`` on Schwarzschild and
    ``V = l(l+1)/r^2`` on flat space.  Nonnegative on the whole domain; the
    factor ``(1 - 2M/r)`` kills it at the horizon.

    Raises
    ------
    DomainError
        Outside the domain, including r = 0 on flat space with ell >= 1.
    """
    if ell < 0:
        raise ValidationError("ell must be a nonnegative integer")
    r = np.asarray(r, dtype=float)
    lam = float(ell * (ell + 1))
    if bg.is_flat:
        if np.any(r < 0.0):
            raise DomainError("flat background requires r >= 0")
        if ell == 0:
            out = np.zeros_like(r)
        else:
            if np.any(r == 0.0):
                raise DomainError("flat potential diverges at r = 0 for ell >= 1")
            out = lam / r**2
    else:
        M = bg.mass
        if np.any(r <= 2.0 * M):
            raise DomainError(f"schwarzschild potential requires r > 2M = {2.0 * M}")
        out = (1.0 - 2.0 * M / r) * (lam / r**2 + 2.0 * M / r**3)
    return out if out.ndim else float(out)


def potential_from_gap(r, gap, ell: int, bg: Background):
    """Potential evaluated from (r, r - 2M) without re-deriving the gap.

    Near the horizon ``1 - 2M/r`` computed from ``r`` alone loses all digits;
    ``gap / r`` does not.  ``gap`` must equal r on the flat background.
    Vectorised, no domain checks (grid caches guarantee the domain).
    """
    r = np.asarray(r, dtype=float)
    gap = np.asarray(gap, dtype=float)
    lam = float(ell * (ell + 1))
    if bg.is_flat:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0.0, lam / np.where(r > 0.0, r, 1.0) ** 2, 0.0)
        return out
    M = bg.mass
    return (gap / r) * (lam / r**2 + 2.0 * M / r**3)


@dataclass(frozen=True)
class FoliationLeaf:
    """One leaf of the hybrid foliation.

    The spacelike piece is ``{tstar = tau, r <= R}`` (``t = tau`` on flat
    space); the null piece is the outgoing ray ``u = junction_u`` with
    ``v >= tau``.  Both meet at the junction sphere r = R.
    """

    tau: float
    background: Background

    @property
    def junction_v(self) -> float:
        """v at the junction sphere; equals tau in these conventions."""
        return self.tau

    @property
    def junction_u(self) -> float:
        """u along the null piece: tau - 4M log(R - 2M) (tau on flat space)."""
        return self.tau + self.background.leaf_u_offset

    def spacelike_uv(self, r):
        """Null coordinates (u, v) of the spacelike piece at radius r <= R.

        Exact closed forms: ``v = tau + r - R`` and ``u = v - 2 rstar(r)``.
        """
        bg = self.background
        r = np.asarray(r, dtype=float)
        if np.any(r > bg.foliation_radius * (1 + 1e-12)):
            raise ValidationError("spacelike piece only extends to r <= R")
        v = self.tau + r - bg.foliation_radius
        u = v - 2.0 * rstar_of_r(r, bg)
        return u, v

    def spacelike_uv_of_rstar(self, rstar):
        """Same as :meth:`spacelike_uv` but parameterised by rstar."""
        bg = self.background
        rs = np.asarray(rstar, dtype=float)
        r, _ = r_and_gap_of_rstar(rs, bg)
        v = self.tau + r - bg.foliation_radius
        return v - 2.0 * rs, v

    def translated(self, delta: float) -> "FoliationLeaf":
        """The leaf time-translated by delta: leaf(tau + delta)."""
        return FoliationLeaf(self.tau + delta, self.background)

    def describe(self) -> dict:
        bg = self.background
        label = "t" if bg.is_flat else "tstar"
        return {
            "spacelike_segment": {label: self.tau, "r_max": bg.foliation_radius},
            "null_segment": {"u": self.junction_u, "v_min": self.junction_v},
        }


def leaf(tau: float, bg: Background) -> FoliationLeaf:
    """The foliation leaf with label tau."""
    return FoliationLeaf(float(tau), bg)
