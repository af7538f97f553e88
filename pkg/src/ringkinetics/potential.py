"""External confining magnetic potential and the a-priori growth constants.

The confinement mechanism is an external magnetic field derived from a radial
potential that blows up near the annulus walls.  The reference profile

    psi_base(r) = csc(pi (r - r1)/(r2 - r1)) - 1

vanishes at the midpoint radius and diverges at both walls.  Because the
divergence would make the field unbounded, the potential actually applied at
time t is *capped* at a time-increasing truncation level Lbar(t) chosen large
enough that no reachable trajectory ever sees the capped region.  The cap is
applied with a C^1 cubic-Hermite blend so the external field stays continuous.

The truncation level and the confinement radii are built from three run
constants -- here named growth_rate, field_coeff, and bar_gain -- computed
from the norms of the initial data.  They are piecewise constant in time,
jumping when the wave transit count ceil(t / (r2 - r1)) increments.

Printed CLI labels for the three constants are ``C``, ``C_tilde`` and ``K``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .domain import AnnulusSpec, NormsBundle
from .errors import DomainError, PotentialTableError

logger = logging.getLogger(__name__)

__all__ = [
    "PotentialSpec",
    "AprioriConstants",
    "base_potential",
    "base_potential_slope",
    "margin_band_sup",
    "truncation_level",
    "capped_potential",
    "external_field",
    "external_field_profile",
    "confinement_threshold",
    "confinement_radii",
]

# Distance from a wall below which the base potential is reported as +inf
# rather than evaluated (the cap turns the sentinel into a finite value).
_WALL_SENTINEL = 1e-14


# ---------------------------------------------------------------------------
# Potential descriptor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialSpec:
    """Descriptor of the reference confining potential.

    kind = "explicit-csc": the closed-form cosecant profile on (r1, r2).
    kind = "tabulated":    monotone-cubic interpolation of (r, psi) samples;
                           the profile diverges within distance ``delta`` of
                           the walls, so the table must end above
                           ``divergence_floor`` on both sides.
    """

    kind: str
    annulus: AnnulusSpec
    delta: float
    table: Optional[np.ndarray] = None  # (n, 2) array of (r, psi) samples
    divergence_floor: float = 100.0

    def __post_init__(self):
        if self.kind not in ("explicit-csc", "tabulated"):
            raise PotentialTableError(f"unknown potential kind {self.kind!r}")
        if self.kind == "tabulated":
            tab = self.table
            if tab is None or tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 4:
                raise PotentialTableError(
                    "tabulated potential needs an (n, 2) table with n >= 4"
                )
            r = tab[:, 0]
            if np.any(np.diff(r) <= 0.0):
                raise PotentialTableError("table radii must be strictly increasing")
            ann = self.annulus
            if r[0] <= ann.r1 or r[-1] >= ann.r2:
                raise PotentialTableError(
                    f"table radii must lie strictly inside ({ann.r1}, {ann.r2}); "
                    f"got [{r[0]}, {r[-1]}]"
                )
            # the profile must already be enormous where the table stops
            if abs(tab[0, 1]) < self.divergence_floor or abs(tab[-1, 1]) < self.divergence_floor:
                raise PotentialTableError(
                    f"table end values |{tab[0, 1]}|, |{tab[-1, 1]}| must exceed the "
                    f"divergence floor {self.divergence_floor}; the profile has to blow "
                    "up toward the walls"
                )

    def _interpolant(self):
        from scipy.interpolate import PchipInterpolator

        return PchipInterpolator(self.table[:, 0], self.table[:, 1], extrapolate=False)


# ---------------------------------------------------------------------------
# Reference profile
# ---------------------------------------------------------------------------

def _check_open_interval(ann: AnnulusSpec, r: np.ndarray) -> None:
    if np.any(r <= ann.r1) or np.any(r >= ann.r2):
        bad_lo = float(np.min(r))
        bad_hi = float(np.max(r))
        raise DomainError(
            f"potential is defined on the open interval ({ann.r1}, {ann.r2}); "
            f"got radii spanning [{bad_lo}, {bad_hi}]"
        )


def base_potential(spec: PotentialSpec, r) -> np.ndarray:
    """Reference profile psi_base(r); +inf sentinel within 1e-14 of a wall.

    Raises DomainError at or outside the walls.
    """
    ann = spec.annulus
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    _check_open_interval(ann, r)

    near_wall = np.minimum(r - ann.r1, ann.r2 - r) <= _WALL_SENTINEL
    out = np.full(r.shape, np.inf)

    if spec.kind == "explicit-csc":
        s = (r[~near_wall] - ann.r1) / ann.width
        out[~near_wall] = 1.0 / np.sin(np.pi * s) - 1.0
    else:
        interp = spec._interpolant()
        vals = interp(r[~near_wall])
        # beyond the tabulated range the profile has diverged: report +inf
        vals = np.where(np.isnan(vals), np.inf, vals)
        out[~near_wall] = vals

    return float(out[0]) if scalar else out


def base_potential_slope(spec: PotentialSpec, r) -> np.ndarray:
    """d/dr of the reference profile (analytic for the cosecant profile)."""
    ann = spec.annulus
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    _check_open_interval(ann, r)

    near_wall = np.minimum(r - ann.r1, ann.r2 - r) <= _WALL_SENTINEL
    out = np.zeros(r.shape)
    if spec.kind == "explicit-csc":
        s = (r - ann.r1) / ann.width
        with np.errstate(divide="ignore", over="ignore"):
            slope = -(np.pi / ann.width) * np.cos(np.pi * s) / np.sin(np.pi * s) ** 2
        out[:] = slope
        # sign of the divergence matches the profile blowing up at each wall
        out[near_wall & (r < ann.r_mid)] = -np.inf
        out[near_wall & (r >= ann.r_mid)] = np.inf
    else:
        interp = spec._interpolant().derivative()
        vals = interp(r)
        out[:] = np.where(np.isnan(vals), 0.0, vals)
    return float(out[0]) if scalar else out


def margin_band_sup(spec: PotentialSpec, delta0: float) -> float:
    """sup of |psi_base| over the initial-support band [r1+delta0, r2-delta0].

    For the cosecant profile the sup sits at the band endpoints (the profile
    is nonnegative, zero at the midpoint, and increases monotonically toward
    each wall), giving the closed form csc(pi*delta0/width) - 1.  Tabulated
    profiles are sampled densely.
    """
    ann = spec.annulus
    if not (0.0 < delta0 < 0.5 * ann.width):
        raise DomainError(f"delta0 must lie in (0, (r2-r1)/2); got {delta0}")
    if spec.kind == "explicit-csc":
        return 1.0 / math.sin(math.pi * delta0 / ann.width) - 1.0
    rs = np.linspace(ann.r1 + delta0, ann.r2 - delta0, 4097)
    return float(np.max(np.abs(base_potential(spec, rs))))


# ---------------------------------------------------------------------------
# A-priori constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AprioriConstants:
    """The run constants controlling every provable bound.

    All three are piecewise constant in time through the wave transit count
    m(t) = ceil(t / (r2 - r1)) and nondecreasing.  CLI label mapping:
    growth_rate -> C, field_coeff -> C_tilde, bar_gain -> K.
    """

    annulus: AnnulusSpec
    norms: NormsBundle

    def transit_count(self, t: float) -> int:
        """Number of completed wall-to-wall wave transits, m(t) = ceil(t/width).

        A tiny tolerance keeps exact multiples of the width from rounding up.
        """
        if t < 0.0:
            raise DomainError(f"time must be nonnegative; got {t}")
        return max(0, math.ceil(t / self.annulus.width - 1e-12))

    def growth_rate(self, t: float) -> float:
        """Exponential rate in every e^{C t} bound (label C)."""
        m = self.transit_count(t)
        return (1.0 + 4.0 * self.annulus.r2 * m * self.norms.ebtheta_sup) / self.annulus.r1

    def field_coeff(self, t: float) -> float:
        """Prefactor of the tangential-field bound (label C_tilde)."""
        n = self.norms
        ann = self.annulus
        m = self.transit_count(t)
        linear = (ann.r2 / ann.r1) * (
            2.0 * n.etheta0_sup + n.b0_sup + (4.0 * m + 2.0) * n.ebtheta_sup
        )
        quad = (
            2.0 * ann.r2**2 * m * ((n.f0_l1 + n.lam) ** 2 + n.etheta0_sup**2 + n.b0_sup**2)
            + 2.0 * m * n.rp0f0_l1
        ) / (2.0 * ann.r1)
        return linear + quad

    def bar_gain(self, t: float) -> float:
        """Coefficient of e^{C t} in the truncation level (label K)."""
        ann = self.annulus
        c = self.growth_rate(t)
        ct = self.field_coeff(t)
        m0 = self.norms.m0
        return (
            0.5 * ct * (ann.r2 + ann.r_mid) * ann.width
            + (2.0 * ann.r2 - ann.r1) * (2.0 * ct / c + m0)
            + ann.r2 * m0
            + ct * ann.r_mid / c
        )

    # -- derived bounds -----------------------------------------------------

    def radial_field_bound(self) -> float:
        """Uniform bound on |E_r|: total charge plus the enclosed-charge
        parameter (valid for r1 >= 1, which every shipped configuration uses)."""
        return self.norms.f0_l1 + self.norms.lam

    def tangential_field_bound(self, t: float) -> float:
        """Uniform bound on |E_theta| and |B|: field_coeff * e^{growth_rate*t}."""
        return self.field_coeff(t) * math.exp(self.growth_rate(t) * t)

    def momentum_support_bound(self, t: float) -> float:
        """Largest |p| the support can reach by time t."""
        c = self.growth_rate(t)
        return self.norms.m0 + 4.0 * self.field_coeff(t) * math.exp(c * t) / c

    def density_bound(self, t: float) -> float:
        """Uniform bound on |rho| and |j|: pi * ||f0||_inf * (momentum support)^2."""
        return math.pi * self.norms.f0_linf * self.momentum_support_bound(t) ** 2


# ---------------------------------------------------------------------------
# Truncation
# ---------------------------------------------------------------------------

def truncation_level(
    spec: PotentialSpec, constants: AprioriConstants, delta0: float, t: float
) -> float:
    """Cap level Lbar(t) above which the potential is flattened.

    Lbar(t) = (r2/r1) * sup_{band} |psi_base| + (bar_gain(t)/r1) e^{growth_rate(t) t}.
    The sup over the moving sublevel set collapses to the fixed margin band:
    the profile is continuous and diverges at the band's far ends, so the
    sublevel-set maximum equals the threshold value.
    """
    ann = spec.annulus
    first = (ann.r2 / ann.r1) * margin_band_sup(spec, delta0)
    return first + (constants.bar_gain(t) / ann.r1) * math.exp(constants.growth_rate(t) * t)


def _hermite_blend(u: np.ndarray) -> np.ndarray:
    """Cubic Hermite h(u) = u(1-u)^2 + u^2(3-2u): h(0)=0, h'(0)=1, h(1)=1, h'(1)=0."""
    return u * (1.0 - u) ** 2 + u * u * (3.0 - 2.0 * u)


def _hermite_blend_slope(u: np.ndarray) -> np.ndarray:
    """h'(u) = 1 + 2u - 3u^2 (expanded from h(u) = u + u^2 - u^3)."""
    return 1.0 + 2.0 * u - 3.0 * u * u


def capped_potential(
    spec: PotentialSpec, constants: AprioriConstants, delta0: float, t: float, r
) -> np.ndarray:
    """Potential actually applied at time t: psi_base capped at Lbar(t).

    Three branches: untouched below the cap, flat at Lbar+1 one unit above it,
    C^1 Hermite blend in between.
    """
    bar = truncation_level(spec, constants, delta0, t)
    psi = np.asarray(base_potential(spec, r), dtype=float)
    scalar = psi.ndim == 0
    psi = np.atleast_1d(psi)
    with np.errstate(invalid="ignore"):
        u = psi - bar
    out = psi.copy()
    flat = u >= 1.0  # includes the +inf sentinel
    blend = (u > 0.0) & ~flat
    out[flat] = bar + 1.0
    out[blend] = bar + _hermite_blend(u[blend])
    return float(out[0]) if scalar else out


def external_field(
    spec: PotentialSpec, constants: AprioriConstants, delta0: float, t: float, r
) -> np.ndarray:
    """External magnetic field B_ext = psi_ext/r + d/dr psi_ext at time t.

    The slope is analytic through the cap: zero on the flat branch,
    h'(u) * psi_base' on the blend branch, psi_base' below the cap.
    Tabulated profiles use the interpolant's derivative in place of the
    closed-form slope.
    """
    bar = truncation_level(spec, constants, delta0, t)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    scalar = np.asarray(r).ndim == 0

    psi = np.atleast_1d(base_potential(spec, r_arr))
    slope = np.atleast_1d(base_potential_slope(spec, r_arr))
    u = psi - bar

    psi_ext = psi.copy()
    slope_ext = slope.copy()
    flat = u >= 1.0
    blend = (u > 0.0) & ~flat
    psi_ext[flat] = bar + 1.0
    slope_ext[flat] = 0.0
    psi_ext[blend] = bar + _hermite_blend(u[blend])
    slope_ext[blend] = _hermite_blend_slope(u[blend]) * slope[blend]

    out = psi_ext / r_arr + slope_ext
    return float(out[0]) if scalar else out


def external_field_profile(
    spec: Optional[PotentialSpec],
    constants: Optional[AprioriConstants],
    delta0: float,
    t: float,
    r_nodes: np.ndarray,
) -> np.ndarray:
    """External field sampled on radial nodes that may include the walls.

    Wall samples are nudged a hair inside the open interval; the cap is flat
    there, so the nudge does not change the value.  With no potential
    configured the profile is identically zero.
    """
    if spec is None or constants is None:
        return np.zeros_like(np.asarray(r_nodes, dtype=float))
    ann = spec.annulus
    tiny = 1e-13 * ann.width
    r = np.clip(np.asarray(r_nodes, dtype=float), ann.r1 + tiny, ann.r2 - tiny)
    return np.asarray(external_field(spec, constants, delta0, t, r))


# ---------------------------------------------------------------------------
# Confinement radii
# ---------------------------------------------------------------------------

_arcsin_note_emitted = False


def confinement_threshold(
    spec: PotentialSpec, constants: AprioriConstants, delta0: float, t: float
) -> float:
    """Threshold value the capped potential must exceed at the turning radius:

    C_s = 1 + (r2/r1)|csc(pi(width - delta0)/width) - 1| + (bar_gain/r1)e^{growth_rate*t}.
    """
    ann = spec.annulus
    band_edge = abs(1.0 / math.sin(math.pi * (ann.width - delta0) / ann.width) - 1.0)
    return (
        1.0
        + (ann.r2 / ann.r1) * band_edge
        + (constants.bar_gain(t) / ann.r1) * math.exp(constants.growth_rate(t) * t)
    )


def confinement_radii(
    spec: PotentialSpec, constants: AprioriConstants, delta0: float, t: float
) -> Tuple[float, float]:
    """Provable no-go radii: the support stays inside (r_lo, r_hi) up to time t.

    r_lo = r1 + (width/pi) * arcsin(1/C_s)  and symmetrically for r_hi.
    The arcsin takes 1/C_s, not C_s: the threshold satisfies C_s >= 1, so the
    turning condition sin(pi (r-r1)/width) >= 1/C_s is the invertible form.
    """
    global _arcsin_note_emitted
    if spec.kind != "explicit-csc":
        raise DomainError("confinement radii require the explicit cosecant profile")
    if not _arcsin_note_emitted:
        logger.warning(
            "confinement radii use arcsin(1/C_s); the inverted form arcsin(C_s) "
            "is undefined for C_s >= 1 and is corrected here"
        )
        _arcsin_note_emitted = True
    ann = spec.annulus
    cs = confinement_threshold(spec, constants, delta0, t)
    clearance = (ann.width / math.pi) * math.asin(1.0 / cs)
    return ann.r1 + clearance, ann.r2 - clearance
