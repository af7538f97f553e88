"""Run orchestration: the coupled field/transport loop plus all bookkeeping.

One step from t to t + dt (unit CFL, dt = dr):

1. moments of f(t) -> charge and current densities;
2. radial field from the charge integral (wall value pinned to lambda);
3. diagnostics row at t (margins, energies, residuals of the previous step);
4. wave-pair transport step with the current frozen at level t and the
   prescribed wall values at t + dt -> E_theta, B at t + dt;
5. backward semi-Lagrangian transport of f with the tangential pair averaged
   between the levels, the radial field at level t, and the external field
   at the half step;
6. wall-flux accumulation for the global energy balance (trapezoid in time,
   with the emergent boundary B).

The kinetic stage is skipped when the distribution starts identically zero
(driven-vacuum runs), and the field stage when ``fields_off`` requests pure
transport; the free-streaming closed form then serves as an exact oracle,
emitted alongside the diagnostics.

Exit status: 0 only if every applicable margin stayed nonnegative at every
recorded step and the leak count stayed zero.
"""

from __future__ import annotations

import logging
import os
import traceback
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import (
    RunConfig,
    emit_config,
    load_boundary_table,
    load_potential_table,
)
from .diagnostics import (
    SUPPORT_FLOOR_REL,
    BoundMargins,
    DiagnosticsRecord,
    balance_gap,
    bound_checks,
    energy_densities,
    energy_identity_residual,
    measured_support,
    record_field_names,
    total_energy,
)
from .domain import (
    AnnulusSpec,
    BoundaryTrace,
    DistributionFunction,
    InitialData,
    NormsBundle,
    PhaseSpaceGrid,
    build_grid,
    gaussian_ring_ic,
    gaussian_ring_profile,
    zero_ic,
)
from .errors import CflError, GridError
from .fields import (
    WaveHistory,
    WaveState,
    ampere_consistency,
    fields_from_waves,
    gauss_radial_field,
    step_waves,
    waves_from_fields,
)
from .potential import AprioriConstants, PotentialSpec, external_field_profile
from .transport import SlStepStats, moments, free_streaming_pushforward, semi_lagrangian_step

__all__ = [
    "Problem",
    "RunResult",
    "build_problem",
    "run",
    "run_with_output",
    "save_snapshot",
    "load_snapshot",
    "check_snapshot",
]

logger = logging.getLogger(__name__)

BEXT_REFINE = 8  # radial refinement factor of the external-field table


# ---------------------------------------------------------------------------
# Problem assembly
# ---------------------------------------------------------------------------

@dataclass
class Problem:
    """Everything a run needs, assembled and validated from a RunConfig."""

    config: RunConfig
    annulus: AnnulusSpec
    grid: PhaseSpaceGrid
    init: InitialData
    norms: NormsBundle
    constants: AprioriConstants
    potential: Optional[PotentialSpec]
    dt: float
    n_steps: int
    t_end: float  # = n_steps * dt, snapped onto the step grid


def build_problem(config: RunConfig) -> Problem:
    ann = AnnulusSpec(config.r1, config.r2, config.delta0, config.delta)

    # dt_override bypasses unit CFL.  Config files may only request it with
    # fields_off (parse-time gate); the CLI's testing flag sets it directly,
    # and a fields-on run then fails loudly inside the wave stepper.
    if config.dt_override > 0.0:
        dt = config.dt_override
    else:
        dt = (ann.r2 - ann.r1) / config.nr
    n_steps = max(1, int(round(config.t_end / dt)))
    t_end = n_steps * dt
    if abs(t_end - config.t_end) > 1e-9 * max(1.0, abs(config.t_end)):
        logger.warning(
            "t_end=%r is not a whole number of steps of dt=%r; running to %r",
            config.t_end, dt, t_end,
        )

    if config.initial_kind == "zero":
        m0 = 0.0
    else:
        m0 = config.m0

    if config.boundary_kind == "constant":
        trace = BoundaryTrace(
            kind="constant", value_r1=config.value_r1, value_r2=config.value_r2
        )
    elif config.boundary_kind == "sinusoid":
        trace = BoundaryTrace(
            kind="sinusoid",
            amp_r1=config.amp_r1,
            amp_r2=config.amp_r2,
            omega=config.omega,
            phase=config.phase,
        )
    else:
        trace = BoundaryTrace(
            kind="tabulated", table=load_boundary_table(config.boundary_table)
        )

    # Support sizing: warn (or fail under strict_support) when the momentum
    # box is smaller than the provable support radius at t_end.  The bound
    # needs the norms, the norms need the sampled initial state, so assemble
    # first and check afterwards via build_grid's support hook.
    grid = build_grid(ann, config.nr, config.np_pts, config.p_max)

    if config.initial_kind == "zero":
        f0 = zero_ic(grid)
    else:
        f0 = gaussian_ring_ic(
            grid,
            config.center_r,
            config.width_r,
            config.temp,
            config.amplitude,
            config.m0,
            perturb=config.perturb,
            seed=config.seed,
        )

    ones = np.ones_like(grid.r)
    init = InitialData(
        f0=f0,
        etheta0=config.etheta0 * ones,
        b0=config.b0 * ones,
        ebtrace=trace,
        lam=config.lam,
        m0=m0,
    )
    init.validate()

    norms = init.norms(t_end)
    constants = AprioriConstants(ann, norms)

    if config.dt_override > 0.0 and dt > grid.dr * (1.0 + 1e-12):
        raise CflError(
            f"dt_override={dt} exceeds the radial spacing {grid.dr}; the "
            "transport stencil tracks feet at most one cell away"
        )

    if norms.f0_linf > 0.0:
        # Re-run the support check now that the provable radius is known.
        build_grid(
            ann, config.nr, config.np_pts, config.p_max,
            support_bound=constants.momentum_support_bound(t_end),
            strict_support=config.strict_support,
        )

    if config.potential_kind == "none":
        potential = None
    elif config.potential_kind == "explicit-csc":
        potential = PotentialSpec("explicit-csc", ann, config.delta)
    else:
        potential = PotentialSpec(
            "tabulated",
            ann,
            config.delta,
            table=load_potential_table(config.potential_table),
            divergence_floor=config.divergence_floor,
        )

    return Problem(
        config=config,
        annulus=ann,
        grid=grid,
        init=init,
        norms=norms,
        constants=constants,
        potential=potential,
        dt=dt,
        n_steps=n_steps,
        t_end=t_end,
    )


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    problem: Problem
    records: List[DiagnosticsRecord]
    f_final: DistributionFunction
    er: np.ndarray
    etheta: np.ndarray
    b: np.ndarray
    waves: WaveState
    history: Optional[WaveHistory]
    oracle_rows: List[Tuple[float, float]]  # (time, max |f - closed form|)
    leaks_total: int
    exit_code: int


_ZERO_STATS = SlStepStats(
    leaks=0,
    pre_fixer_drift=0.0,
    post_fixer_drift=0.0,
    clamped_mass=0.0,
    renorm_factor=1.0,
    min_raw=0.0,
)


def run(config: RunConfig, *, backend: Optional[str] = None) -> RunResult:
    """Execute the configured run and return the full in-memory result."""
    prob = build_problem(config)
    grid, ann, constants = prob.grid, prob.annulus, prob.constants
    cfg = prob.config
    r = grid.r
    dt = prob.dt

    f = prob.init.f0.copy()
    etheta = prob.init.etheta0.copy()
    b = prob.init.b0.copy()
    waves = waves_from_fields(etheta, b, r, 0.0)
    trace = prob.init.ebtrace

    kinetic_active = prob.norms.f0_linf > 0.0
    fields_on = not cfg.fields_off
    support_floor = SUPPORT_FLOOR_REL * prob.norms.f0_linf

    # Exact closed-form transport solution, available for pure free streaming.
    oracle_profile = None
    if (
        cfg.fields_off
        and cfg.initial_kind == "gaussian_ring"
        and cfg.perturb == 0.0
        and prob.potential is None
    ):
        oracle_profile = gaussian_ring_profile(
            cfg.center_r, cfg.width_r, cfg.temp, cfg.amplitude, cfg.m0
        )

    r_fine = np.linspace(ann.r1, ann.r2, grid.Nr * BEXT_REFINE + 1)
    bext_zero = np.zeros_like(r_fine)

    history: Optional[WaveHistory] = WaveHistory(r, dt) if cfg.track_history else None

    records: List[DiagnosticsRecord] = []
    oracle_rows: List[Tuple[float, float]] = []
    leaks_total = 0
    pre_drift_accum = 0.0
    stats_prev = _ZERO_STATS
    energy0: Optional[float] = None
    flux_accum = 0.0
    g_prev = 0.0
    e_prev = m_prev = er_prev = jr_prev = None

    for step in range(prob.n_steps + 1):
        t = step * dt
        mom = moments(f)
        er = (
            gauss_radial_field(mom.rho, r, prob.init.lam)
            if fields_on
            else np.zeros_like(r)
        )

        e_prof, m_prof = energy_densities(f, er, etheta, b)
        energy_now = total_energy(e_prof, r)
        if energy0 is None:
            energy0 = energy_now

        eb1, eb2 = trace(t)
        g_now = ann.r2 * eb2 * b[-1] - ann.r1 * eb1 * b[0]
        if step > 0:
            flux_accum += 0.5 * dt * (g_prev + g_now)
        g_prev = g_now

        if history is not None:
            history.append(waves, b, mom.j_theta, (eb1, eb2))

        if step == 0:
            energy_res = float("nan")
            ampere_res = float("nan")
        else:
            energy_res = energy_identity_residual(
                e_prev, e_prof, 0.5 * (m_prev + m_prof), r, dt
            )
            ampere_res = (
                ampere_consistency(er_prev, er, 0.5 * (jr_prev + mom.j_r), dt)
                if fields_on
                else float("nan")
            )

        support = measured_support(f, support_floor)
        margins = bound_checks(
            f, mom, er, etheta, b, constants, t, prob.norms.f0_linf,
            potential_spec=prob.potential, delta=ann.delta, delta0=ann.delta0,
            support=support,
        )
        records.append(
            _make_record(
                t, f, margins, support, energy_now, energy0, flux_accum,
                energy_res, ampere_res, stats_prev, leaks_total,
                pre_drift_accum,
            )
        )

        if oracle_profile is not None and (
            step % cfg.cadence == 0 or step == prob.n_steps
        ):
            exact = free_streaming_pushforward(oracle_profile, grid, t)
            oracle_rows.append((t, float(np.max(np.abs(f.values - exact.values)))))

        if step == prob.n_steps:
            break

        e_prev, m_prev, er_prev, jr_prev = e_prof, m_prof, er, mom.j_r
        etheta_old, b_old = etheta, b

        if fields_on:
            eb_new = trace(t + dt)
            waves = step_waves(
                waves, r, dt,
                b_old=b_old, jtheta_old=mom.j_theta, jtheta_new=mom.j_theta,
                eb_new=eb_new,
            )
            etheta, b = fields_from_waves(waves, r)

        if kinetic_active:
            if prob.potential is None:
                bext_fine = bext_zero
            else:
                bext_fine = external_field_profile(
                    prob.potential, constants, ann.delta0, t + 0.5 * dt, r_fine
                )
            f, stats_prev = semi_lagrangian_step(
                f, er,
                0.5 * (etheta_old + etheta), 0.5 * (b_old + b),
                bext_fine, dt, backend=backend,
            )
            leaks_total += stats_prev.leaks
            pre_drift_accum += stats_prev.pre_fixer_drift
        else:
            stats_prev = _ZERO_STATS

    exit_code = 0 if (leaks_total == 0 and not any(rec.failed for rec in records)) else 1
    return RunResult(
        problem=prob,
        records=records,
        f_final=f,
        er=er,
        etheta=etheta,
        b=b,
        waves=waves,
        history=history,
        oracle_rows=oracle_rows,
        leaks_total=leaks_total,
        exit_code=exit_code,
    )


def _make_record(
    t: float,
    f: DistributionFunction,
    margins: BoundMargins,
    support: Tuple[float, float, float],
    energy_now: float,
    energy0: float,
    flux_accum: float,
    energy_res: float,
    ampere_res: float,
    stats: SlStepStats,
    leaks_total: int,
    pre_drift_accum: float,
) -> DiagnosticsRecord:
    m_meas, r_lo, r_hi = support
    return DiagnosticsRecord(
        time=t,
        charge=f.charge(),
        total_energy=energy_now,
        flux_accum=flux_accum,
        balance_gap=balance_gap(energy_now, energy0, flux_accum),
        energy_residual=energy_res,
        ampere_residual=ampere_res,
        measured_m=m_meas,
        r_support_lo=r_lo,
        r_support_hi=r_hi,
        margin_radial_field=margins.radial_field,
        margin_tangential_field=margins.tangential_field,
        margin_magnetic_field=margins.magnetic_field,
        margin_momentum_support=margins.momentum_support,
        margin_charge_density=margins.charge_density,
        margin_current_density=margins.current_density,
        confinement_distance=margins.confinement_distance,
        margin_confinement_delta=margins.confinement_vs_delta,
        margin_confinement_bound=margins.confinement_vs_bound,
        leaks_step=stats.leaks,
        leaks_total=leaks_total,
        pre_fixer_drift=stats.pre_fixer_drift,
        pre_fixer_drift_accum=pre_drift_accum,
        post_fixer_drift=stats.post_fixer_drift,
        renorm_factor=stats.renorm_factor,
        min_raw=stats.min_raw,
        failed=margins.failed(),
    )


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    """Shortest round-trip text: bit-identical reload for floats."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: str, header: List[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def run_with_output(
    config: RunConfig, out_dir: str, *, backend: Optional[str] = None
) -> RunResult:
    """Run and persist results under ``out_dir``; leave FAILED on any error."""
    os.makedirs(out_dir, exist_ok=True)
    try:
        result = run(config, backend=backend)
        write_outputs(result, out_dir)
    except Exception as exc:
        with open(os.path.join(out_dir, "FAILED"), "w", encoding="utf-8") as fh:
            fh.write(f"{type(exc).__name__}: {exc}\n\n{traceback.format_exc()}")
        raise
    return result


def write_outputs(result: RunResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    cfg = result.problem.config

    with open(os.path.join(out_dir, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(emit_config(cfg))

    names = record_field_names()
    kept = [
        rec
        for i, rec in enumerate(result.records)
        if i % cfg.cadence == 0 or i == len(result.records) - 1
    ]
    _write_csv(
        os.path.join(out_dir, "diagnostics.csv"),
        names,
        ([getattr(rec, n) for n in names] for rec in kept),
    )

    r = result.problem.grid.r
    _write_csv(
        os.path.join(out_dir, "fields_final.csv"),
        ["r", "er", "etheta", "b", "pplus", "pminus"],
        zip(r, result.er, result.etheta, result.b,
            result.waves.pplus, result.waves.pminus),
    )

    if result.oracle_rows:
        _write_csv(
            os.path.join(out_dir, "oracle.csv"),
            ["time", "max_error"],
            result.oracle_rows,
        )

    save_snapshot(result, os.path.join(out_dir, "snapshot"))


# ---------------------------------------------------------------------------
# Snapshots: save, load, re-check
# ---------------------------------------------------------------------------

def save_snapshot(result: RunResult, path: str) -> None:
    """Persist the final state with everything needed to re-verify it."""
    os.makedirs(path, exist_ok=True)
    prob = result.problem
    cfg = prob.config
    n = prob.norms
    meta = [
        ("time", prob.t_end),
        ("r1", prob.annulus.r1),
        ("r2", prob.annulus.r2),
        ("delta0", prob.annulus.delta0),
        ("delta", prob.annulus.delta),
        ("nr", prob.grid.Nr),
        ("np", prob.grid.Np),
        ("p_max", prob.grid.p_max),
        ("lam", n.lam),
        ("m0", n.m0),
        ("etheta0_sup", n.etheta0_sup),
        ("b0_sup", n.b0_sup),
        ("ebtheta_sup", n.ebtheta_sup),
        ("f0_l1", n.f0_l1),
        ("rp0f0_l1", n.rp0f0_l1),
        ("f0_linf", n.f0_linf),
        ("potential_kind", cfg.potential_kind),
        ("divergence_floor", cfg.divergence_floor),
    ]
    _write_csv(os.path.join(path, "meta.csv"), ["key", "value"], meta)

    r = prob.grid.r
    _write_csv(
        os.path.join(path, "fields.csv"),
        ["r", "er", "etheta", "b"],
        zip(r, result.er, result.etheta, result.b),
    )

    values = result.f_final.values
    idx = np.argwhere(values != 0.0)
    _write_csv(
        os.path.join(path, "f.csv"),
        ["ir", "ipr", "ipt", "value"],
        ((i, j, k, values[i, j, k]) for i, j, k in idx),
    )

    if prob.potential is not None and prob.potential.kind == "tabulated":
        _write_csv(
            os.path.join(path, "potential_table.csv"),
            ["r", "psi"],
            prob.potential.table,
        )


@dataclass
class SnapshotBundle:
    time: float
    grid: PhaseSpaceGrid
    f: DistributionFunction
    er: np.ndarray
    etheta: np.ndarray
    b: np.ndarray
    constants: AprioriConstants
    potential: Optional[PotentialSpec]
    f0_linf: float


def _read_csv(path: str) -> Tuple[List[str], List[List[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def load_snapshot(path: str) -> SnapshotBundle:
    _, meta_rows = _read_csv(os.path.join(path, "meta.csv"))
    meta: Dict[str, str] = {key: value for key, value in meta_rows}

    ann = AnnulusSpec(
        float(meta["r1"]), float(meta["r2"]),
        float(meta["delta0"]), float(meta["delta"]),
    )
    grid = build_grid(ann, int(meta["nr"]), int(meta["np"]), float(meta["p_max"]))

    header, rows = _read_csv(os.path.join(path, "fields.csv"))
    cols = {name: np.array([float(row[i]) for row in rows])
            for i, name in enumerate(header)}
    if cols["r"].shape != grid.r.shape or np.max(np.abs(cols["r"] - grid.r)) > 1e-9:
        raise GridError(f"snapshot radial nodes in {path!r} do not match its meta")

    values = np.zeros(grid.shape)
    _, frows = _read_csv(os.path.join(path, "f.csv"))
    for row in frows:
        values[int(row[0]), int(row[1]), int(row[2])] = float(row[3])
    f = DistributionFunction(values, grid)

    norms = NormsBundle(
        etheta0_sup=float(meta["etheta0_sup"]),
        b0_sup=float(meta["b0_sup"]),
        ebtheta_sup=float(meta["ebtheta_sup"]),
        f0_l1=float(meta["f0_l1"]),
        rp0f0_l1=float(meta["rp0f0_l1"]),
        f0_linf=float(meta["f0_linf"]),
        lam=float(meta["lam"]),
        m0=float(meta["m0"]),
    )
    constants = AprioriConstants(ann, norms)

    kind = meta["potential_kind"]
    if kind == "none":
        potential = None
    elif kind == "explicit-csc":
        potential = PotentialSpec("explicit-csc", ann, ann.delta)
    else:
        _, prows = _read_csv(os.path.join(path, "potential_table.csv"))
        table = np.array([[float(a), float(b)] for a, b in prows])
        potential = PotentialSpec(
            "tabulated", ann, ann.delta,
            table=table, divergence_floor=float(meta["divergence_floor"]),
        )

    return SnapshotBundle(
        time=float(meta["time"]),
        grid=grid,
        f=f,
        er=cols["er"],
        etheta=cols["etheta"],
        b=cols["b"],
        constants=constants,
        potential=potential,
        f0_linf=float(meta["f0_linf"]),
    )


def check_snapshot(path: str) -> Tuple[BoundMargins, List[str], int]:
    """Recompute every margin for a stored snapshot; PASS/FAIL per line."""
    snap = load_snapshot(path)
    ann = snap.grid.annulus
    mom = moments(snap.f)
    margins = bound_checks(
        snap.f, mom, snap.er, snap.etheta, snap.b,
        snap.constants, snap.time, snap.f0_linf,
        potential_spec=snap.potential, delta=ann.delta, delta0=ann.delta0,
    )
    lines = []
    for name in (
        "radial_field", "tangential_field", "magnetic_field",
        "momentum_support", "charge_density", "current_density",
        "confinement_vs_delta", "confinement_vs_bound",
    ):
        value = getattr(margins, name)
        enforced = name in BoundMargins._ENFORCED
        if isinstance(value, float) and np.isnan(value):
            status = "N/A "
        elif value >= 0.0:
            status = "PASS"
        else:
            # The delta clearance is informational for arbitrary snapshots.
            status = "FAIL" if enforced else "info"
        lines.append(f"{status} margin {name} = {_fmt(value)}")
    code = 1 if margins.failed() else 0
    return margins, lines, code
