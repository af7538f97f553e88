"""Annulus geometry, phase-space grid, states, and initial data.

The spatial domain is the annulus r1 < |x| < r2 reduced by axisymmetry to the
radial interval [r1, r2]; phase space adds the two momentum components
(p_r, p_theta) on a symmetric square box [-p_max, p_max]^2.  The distribution
function f(t, r, p_r, p_theta) lives on the tensor grid

    r_i     = r1 + i (r2 - r1) / Nr,        i = 0..Nr
    p_a     = -p_max + a * 2 p_max/(Np-1),  a = 0..Np-1   (Np odd => p=0 node)

with f = 0 pinned on the radial boundary rows and on the momentum-box edge
(compactly supported data never touches either in a healthy run).

All phase-space integrals use trapezoid weights on every axis; Np odd makes
the p = 0 node explicit so odd-in-p integrands cancel pairwise to roundoff.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import GridError, GridSupportWarning, SupportError

__all__ = [
    "AnnulusSpec",
    "PhaseSpaceGrid",
    "DistributionFunction",
    "FieldState",
    "BoundaryTrace",
    "InitialData",
    "NormsBundle",
    "uniform_radial_nodes",
    "symmetric_momentum_nodes",
    "build_grid",
    "trapezoid_weights",
    "total_charge",
    "radial_p0_l1_norm",
    "gaussian_ring_profile",
    "gaussian_ring_ic",
    "zero_ic",
]


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnnulusSpec:
    """Annular domain with support margins.

    r1, r2     : inner/outer wall radii, 0 < r1 < r2.
    delta0     : initial-data margin; supp f0 stays within [r1+delta0, r2-delta0].
    delta      : run-time confinement distance the solution must keep from the
                 walls, 0 < delta < delta0 < (r2 - r1)/2.
    """

    r1: float
    r2: float
    delta0: float
    delta: float

    def __post_init__(self):
        problems = []
        if not (0.0 < self.r1 < self.r2):
            problems.append(f"wall radii must satisfy 0 < r1 < r2; got r1={self.r1}, r2={self.r2}")
        half_width = 0.5 * (self.r2 - self.r1)
        if not (0.0 < self.delta < self.delta0 < half_width):
            problems.append(
                "support margins must satisfy 0 < delta < delta0 < (r2 - r1)/2; "
                f"got delta={self.delta}, delta0={self.delta0}, (r2-r1)/2={half_width}"
            )
        if problems:
            raise GridError("; ".join(problems))

    @property
    def width(self) -> float:
        """Annulus width r2 - r1 (also the wave transit time at unit speed)."""
        return self.r2 - self.r1

    @property
    def r_mid(self) -> float:
        """Midpoint radius (r1 + r2)/2, the gauge point of the magnetic potential."""
        return 0.5 * (self.r1 + self.r2)


def uniform_radial_nodes(r1: float, r2: float, nr: int) -> np.ndarray:
    """Nr+1 uniformly spaced radial nodes including both walls."""
    if r2 <= r1:
        raise GridError(f"need r1 < r2; got r1={r1}, r2={r2}")
    if nr < 1:
        raise GridError(f"need at least one radial cell; got Nr={nr}")
    return np.linspace(float(r1), float(r2), nr + 1)


def symmetric_momentum_nodes(np_pts: int, p_max: float) -> np.ndarray:
    """Np momentum nodes symmetric about 0; odd Np puts a node exactly at 0."""
    if p_max <= 0.0:
        raise GridError(f"p_max must be positive; got {p_max}")
    if np_pts < 2:
        raise GridError(f"need at least two momentum nodes; got Np={np_pts}")
    nodes = np.linspace(-float(p_max), float(p_max), np_pts)
    if np_pts % 2 == 1:
        nodes[np_pts // 2] = 0.0  # exact zero, not -0.0 or roundoff
    # linspace is not bitwise antisymmetric; mirror the upper half so that
    # odd-in-p trapezoid sums cancel exactly.
    nodes[: np_pts // 2] = -nodes[np_pts - np_pts // 2:][::-1]
    return nodes


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Tensor phase-space grid over (r, p_r, p_theta)."""

    annulus: AnnulusSpec
    Nr: int
    Np: int
    p_max: float
    r: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)

    @property
    def dr(self) -> float:
        return (self.annulus.r2 - self.annulus.r1) / self.Nr

    @property
    def dp(self) -> float:
        return 2.0 * self.p_max / (self.Np - 1)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.Nr + 1, self.Np, self.Np)

    def momentum_squares(self) -> Tuple[np.ndarray, np.ndarray]:
        """Meshed (p_r, p_theta) arrays of shape (Np, Np)."""
        return np.meshgrid(self.p, self.p, indexing="ij")

    def p0(self) -> np.ndarray:
        """Relativistic energy sqrt(1 + |p|^2) on the momentum mesh."""
        pr, pt = self.momentum_squares()
        return np.sqrt(1.0 + pr * pr + pt * pt)


def build_grid(
    annulus: AnnulusSpec,
    nr: int,
    np_pts: int,
    p_max: float,
    *,
    support_bound: Optional[float] = None,
    strict_support: bool = False,
) -> PhaseSpaceGrid:
    """Construct the phase-space grid, enforcing resolution minimums.

    If ``support_bound`` is given (the provable momentum-support radius for the
    configured end time) and ``p_max`` falls short of it, a
    ``GridSupportWarning`` is raised -- or ``GridError`` when
    ``strict_support=True``.  Runs that deliberately size the box to the
    *measured* support (the provable bound is wildly conservative) keep the
    warning-level behaviour.
    """
    problems = []
    if nr < 8:
        problems.append(f"Nr must be >= 8; got {nr}")
    if np_pts < 8:
        problems.append(f"Np must be >= 8; got {np_pts}")
    if np_pts % 2 == 0:
        problems.append(f"Np must be odd so p = 0 is a node; got {np_pts}")
    if p_max <= 0.0:
        problems.append(f"p_max must be positive; got {p_max}")
    if problems:
        raise GridError("; ".join(problems))

    if support_bound is not None and p_max < support_bound:
        msg = (
            f"momentum box p_max={p_max} is below the provable support bound "
            f"{support_bound:.6g} for the configured end time; growth beyond the box "
            "cannot be represented"
        )
        if strict_support:
            raise GridError(msg)
        warnings.warn(msg, GridSupportWarning, stacklevel=2)

    return PhaseSpaceGrid(
        annulus=annulus,
        Nr=nr,
        Np=np_pts,
        p_max=float(p_max),
        r=uniform_radial_nodes(annulus.r1, annulus.r2, nr),
        p=symmetric_momentum_nodes(np_pts, p_max),
    )


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def trapezoid_weights(n: int, h: float) -> np.ndarray:
    """Composite trapezoid weights for n uniformly spaced nodes."""
    if n < 2:
        raise GridError(f"trapezoid rule needs at least two nodes; got {n}")
    w = np.full(n, h)
    w[0] = 0.5 * h
    w[-1] = 0.5 * h
    return w


def total_charge(values: np.ndarray, grid: PhaseSpaceGrid) -> float:
    """Total charge  integral of f * r dr dp_r dp_theta  (trapezoid on all axes)."""
    wr = trapezoid_weights(grid.Nr + 1, grid.dr) * grid.r
    wp = trapezoid_weights(grid.Np, grid.dp)
    return float(np.einsum("i,a,b,iab->", wr, wp, wp, values))


def radial_p0_l1_norm(values: np.ndarray, grid: PhaseSpaceGrid) -> float:
    """Integral of r * p0 * f dr dp_r dp_theta (the kinetic-energy-weighted L1)."""
    wr = trapezoid_weights(grid.Nr + 1, grid.dr) * grid.r
    wp = trapezoid_weights(grid.Np, grid.dp)
    return float(np.einsum("i,a,b,ab,iab->", wr, wp, wp, grid.p0(), values))


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass
class DistributionFunction:
    """Grid samples of f with its structural invariants.

    values >= 0 everywhere, exactly zero on the radial boundary rows and on
    the momentum-box edge.
    """

    values: np.ndarray
    grid: PhaseSpaceGrid

    def validate(self) -> None:
        v = self.values
        if v.shape != self.grid.shape:
            raise GridError(f"distribution shape {v.shape} != grid shape {self.grid.shape}")
        if np.any(v < 0.0):
            raise GridError(f"distribution has negative values (min {v.min()})")
        edges = [v[0, :, :], v[-1, :, :], v[:, 0, :], v[:, -1, :], v[:, :, 0], v[:, :, -1]]
        for name, sl in zip(
            ("inner wall", "outer wall", "p_r low", "p_r high", "p_theta low", "p_theta high"),
            edges,
        ):
            if np.any(sl != 0.0):
                raise GridError(f"distribution must vanish on the {name} boundary")

    def linf(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0

    def charge(self) -> float:
        return total_charge(self.values, self.grid)

    def copy(self) -> "DistributionFunction":
        return DistributionFunction(self.values.copy(), self.grid)


@dataclass
class FieldState:
    """Self-consistent field profiles on the radial nodes at one time level.

    er[0] always equals the enclosed-charge parameter lambda: the radial field
    at the inner wall is fixed by the charge enclosed inside the annulus hole.
    """

    time: float
    er: np.ndarray
    etheta: np.ndarray
    b: np.ndarray
    lam: float

    def validate(self, grid: PhaseSpaceGrid, atol: float = 1e-12) -> None:
        n = grid.Nr + 1
        for name, arr in (("er", self.er), ("etheta", self.etheta), ("b", self.b)):
            if arr.shape != (n,):
                raise GridError(f"field {name} has shape {arr.shape}, expected ({n},)")
        if abs(self.er[0] - self.lam) > atol * max(1.0, abs(self.lam)):
            raise GridError(
                f"er at the inner wall must equal lambda={self.lam}; got {self.er[0]}"
            )


# ---------------------------------------------------------------------------
# Boundary trace of the tangential electric field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryTrace:
    """Prescribed tangential electric field at the two walls.

    kind = "constant":  (value_r1, value_r2) for all t.
    kind = "sinusoid":  amp * sin(omega t + phase) per wall.
    kind = "tabulated": linear interpolation in a (t, value_r1, value_r2) table.
    """

    kind: str = "constant"
    value_r1: float = 0.0
    value_r2: float = 0.0
    amp_r1: float = 0.0
    amp_r2: float = 0.0
    omega: float = 1.0
    phase: float = 0.0
    table: Optional[np.ndarray] = None  # shape (n, 3): t, value_r1, value_r2

    def __call__(self, t: float) -> Tuple[float, float]:
        if self.kind == "constant":
            return self.value_r1, self.value_r2
        if self.kind == "sinusoid":
            s = math.sin(self.omega * t + self.phase)
            return self.amp_r1 * s, self.amp_r2 * s
        if self.kind == "tabulated":
            tab = self.table
            if tab is None or tab.ndim != 2 or tab.shape[1] != 3:
                raise GridError("tabulated boundary trace needs an (n, 3) table")
            v1 = float(np.interp(t, tab[:, 0], tab[:, 1]))
            v2 = float(np.interp(t, tab[:, 0], tab[:, 2]))
            return v1, v2
        raise GridError(f"unknown boundary trace kind {self.kind!r}")

    def sup_norm(self, t_end: float, samples: int = 4097) -> float:
        """sup over [0, t_end] of max(|value_r1|, |value_r2|)."""
        if self.kind == "constant":
            return max(abs(self.value_r1), abs(self.value_r2))
        if self.kind == "sinusoid":
            # |sin| <= 1 and the sup is attained (or approached) within any
            # interval longer than a quarter period; use the exact envelope.
            return max(abs(self.amp_r1), abs(self.amp_r2))
        ts = np.linspace(0.0, t_end, samples)
        vals = np.array([self(t) for t in ts])
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.value_r1 == 0.0 and self.value_r2 == 0.0
        if self.kind == "sinusoid":
            return self.amp_r1 == 0.0 and self.amp_r2 == 0.0
        return self.table is not None and bool(np.all(self.table[:, 1:] == 0.0))


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormsBundle:
    """The norms of the initial data entering every a-priori constant."""

    etheta0_sup: float
    b0_sup: float
    ebtheta_sup: float
    f0_l1: float
    rp0f0_l1: float
    f0_linf: float
    lam: float
    m0: float


@dataclass
class InitialData:
    """Initial distribution, initial field profiles, wall trace, and lambda."""

    f0: DistributionFunction
    etheta0: np.ndarray
    b0: np.ndarray
    ebtrace: BoundaryTrace
    lam: float
    m0: float

    def validate(self) -> None:
        self.f0.validate()
        grid = self.f0.grid
        ann = grid.annulus
        v = self.f0.values
        thresh = 0.0
        # radial support inside [r1+delta0, r2-delta0]
        occupied = np.any(v > thresh, axis=(1, 2))
        if np.any(occupied):
            r_occ = grid.r[occupied]
            if r_occ.min() < ann.r1 + ann.delta0 - 1e-12 or r_occ.max() > ann.r2 - ann.delta0 + 1e-12:
                raise SupportError(
                    "initial radial support must lie within "
                    f"[{ann.r1 + ann.delta0}, {ann.r2 - ann.delta0}]; "
                    f"found values in [{r_occ.min()}, {r_occ.max()}]"
                )
        # momentum support inside |p| <= m0
        pr, pt = grid.momentum_squares()
        pnorm = np.sqrt(pr * pr + pt * pt)
        occ_p = np.any(v > thresh, axis=0)
        if np.any(occ_p) and float(pnorm[occ_p].max()) > self.m0 + 1e-12:
            raise SupportError(
                f"initial momentum support must lie within |p| <= m0 = {self.m0}; "
                f"found |p| up to {pnorm[occ_p].max()}"
            )

    def norms(self, t_end: float) -> NormsBundle:
        grid = self.f0.grid
        return NormsBundle(
            etheta0_sup=float(np.max(np.abs(self.etheta0))) if self.etheta0.size else 0.0,
            b0_sup=float(np.max(np.abs(self.b0))) if self.b0.size else 0.0,
            ebtheta_sup=self.ebtrace.sup_norm(t_end),
            f0_l1=total_charge(self.f0.values, grid),
            rp0f0_l1=radial_p0_l1_norm(self.f0.values, grid),
            f0_linf=self.f0.linf(),
            lam=self.lam,
            m0=self.m0,
        )


# ---------------------------------------------------------------------------
# Gaussian ring initial condition
# ---------------------------------------------------------------------------

def _taper(s: np.ndarray, s0: float = 0.7) -> np.ndarray:
    """C^3 cutoff: 1 for s <= s0, seventh-degree smoothstep to exactly 0 at s = 1.

    Three vanishing derivatives at both joins keep the fourth derivative of the
    profile bounded, so cubic interpolation of the sampled profile stays
    fourth-order accurate across the cutoff band.
    """
    s = np.asarray(s, dtype=float)
    out = np.ones_like(s)
    u = (s - s0) / (1.0 - s0)
    mid = (s > s0) & (s < 1.0)
    um = u[mid]
    u4 = um * um * um * um
    out[mid] = 1.0 - u4 * (35.0 - 84.0 * um + 70.0 * um * um - 20.0 * um * um * um)
    out[s >= 1.0] = 0.0
    return out


def gaussian_ring_profile(
    center_r: float,
    width_r: float,
    temp: float,
    amplitude: float,
    m0: float,
) -> Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]:
    """Smooth closed-form ring profile f0(r, p_r, p_theta).

    Product of a radial Gaussian ring (C^3 cutoff at |r - c| = 3w) and an
    isotropic momentum Gaussian (C^3 cutoff at |p| = m0).  Returned as a
    vectorized callable so exact pushforwards can compose with it analytically.
    """

    def f0(r, pr, pt):
        r = np.asarray(r, dtype=float)
        pr = np.asarray(pr, dtype=float)
        pt = np.asarray(pt, dtype=float)
        sr = np.abs(r - center_r) / (3.0 * width_r)
        gr = np.exp(-0.5 * ((r - center_r) / width_r) ** 2) * _taper(sr)
        pnorm = np.sqrt(pr * pr + pt * pt)
        gp = np.exp(-0.5 * (pnorm / temp) ** 2) * _taper(pnorm / m0)
        return amplitude * gr * gp

    return f0


def gaussian_ring_ic(
    grid: PhaseSpaceGrid,
    center_r: float,
    width_r: float,
    temp: float,
    amplitude: float,
    m0: float,
    perturb: float = 0.0,
    seed: int = 0,
) -> DistributionFunction:
    """Sample the Gaussian ring on the grid, with optional seeded perturbation.

    Raises SupportError when the radial taper would touch the margin bands
    [r1, r1+delta0] / [r2-delta0, r2] or the momentum taper would touch the
    box edge.
    """
    ann = grid.annulus
    problems = []
    if width_r <= 0.0 or temp <= 0.0 or amplitude < 0.0 or m0 <= 0.0:
        problems.append(
            f"need width_r > 0, temp > 0, amplitude >= 0, m0 > 0; got "
            f"width_r={width_r}, temp={temp}, amplitude={amplitude}, m0={m0}"
        )
    lo, hi = center_r - 3.0 * width_r, center_r + 3.0 * width_r
    if not problems and (lo < ann.r1 + ann.delta0 or hi > ann.r2 - ann.delta0):
        problems.append(
            f"radial taper [{lo}, {hi}] must stay within the margin band "
            f"[{ann.r1 + ann.delta0}, {ann.r2 - ann.delta0}]"
        )
    if m0 >= grid.p_max:
        problems.append(
            f"momentum taper radius m0={m0} must stay strictly inside the box p_max={grid.p_max}"
        )
    if problems:
        raise SupportError("; ".join(problems))

    profile = gaussian_ring_profile(center_r, width_r, temp, amplitude, m0)
    r3 = grid.r[:, None, None]
    pr, pt = grid.momentum_squares()
    values = profile(r3, pr[None, :, :], pt[None, :, :])

    if perturb > 0.0:
        if perturb >= 1.0:
            raise SupportError(f"perturbation amplitude must be < 1 to keep f >= 0; got {perturb}")
        rng = np.random.default_rng(seed)
        width = ann.r2 - ann.r1
        modes = np.arange(1, 5)
        coeffs = rng.uniform(-1.0, 1.0, size=modes.size)
        coeffs /= max(1.0, np.abs(coeffs).sum())
        wiggle = np.zeros_like(grid.r)
        for k, c in zip(modes, coeffs):
            wiggle += c * np.sin(np.pi * k * (grid.r - ann.r1) / width)
        values = values * (1.0 + perturb * wiggle[:, None, None])

    out = DistributionFunction(values, grid)
    out.validate()
    return out


def zero_ic(grid: PhaseSpaceGrid) -> DistributionFunction:
    """Identically-zero distribution (driven-vacuum runs)."""
    return DistributionFunction(np.zeros(grid.shape), grid)
