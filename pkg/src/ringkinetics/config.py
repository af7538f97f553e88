"""Run configuration: sectioned key=value files, strict and total validation.

Format::

    [domain]
    r1 = 1.0
    r2 = 3.0
    # comments and blank lines are fine

Rules the parser enforces:

* every key belongs to a known section and a known name — typos are errors,
  never silently ignored;
* all violations in a file are collected and reported together with their
  line numbers (one pass fixes everything);
* semantic constraints are validated here, not at first use: geometry
  ordering, margin inequalities, odd momentum grids, mode compatibility
  (``fields_off`` demands genuinely field-free data).

``emit_config`` writes the canonical form; ``parse_config(emit_config(c))``
reproduces ``c`` exactly, so emitted files are stable under round-trips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError

__all__ = ["RunConfig", "parse_config", "parse_config_file", "emit_config"]


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Typed, validated run description."""

    # [domain]
    r1: float = 1.0
    r2: float = 3.0
    delta0: float = 0.5
    delta: float = 0.25
    # [grid]
    nr: int = 64
    np_pts: int = 33
    p_max: float = 1.0
    strict_support: bool = False
    # [time]
    t_end: float = 2.0
    # [initial]
    initial_kind: str = "gaussian_ring"   # gaussian_ring | zero
    center_r: float = 2.0
    width_r: float = 0.1
    temp: float = 0.15
    amplitude: float = 1.0
    m0: float = 0.5
    perturb: float = 0.0
    seed: int = 0
    etheta0: float = 0.0
    b0: float = 0.0
    lam: float = 0.0
    # [boundary]
    boundary_kind: str = "constant"       # constant | sinusoid | tabulated
    value_r1: float = 0.0
    value_r2: float = 0.0
    amp_r1: float = 0.0
    amp_r2: float = 0.0
    omega: float = 1.0
    phase: float = 0.0
    boundary_table: str = ""              # CSV path: t, value_r1, value_r2
    # [potential]
    potential_kind: str = "explicit-csc"  # explicit-csc | tabulated | none
    potential_table: str = ""             # CSV path: r, psi
    divergence_floor: float = 100.0
    # [run]
    fields_off: bool = False
    track_history: bool = False
    dt_override: float = 0.0              # 0 = unit CFL (dt = dr); testing only
    # [output]
    directory: str = "out"
    cadence: int = 1


# (section, key in file) -> (attribute, type tag)
_SCHEMA: Dict[str, Dict[str, Tuple[str, str]]] = {
    "domain": {
        "r1": ("r1", "float"),
        "r2": ("r2", "float"),
        "delta0": ("delta0", "float"),
        "delta": ("delta", "float"),
    },
    "grid": {
        "nr": ("nr", "int"),
        "np": ("np_pts", "int"),
        "p_max": ("p_max", "float"),
        "strict_support": ("strict_support", "bool"),
    },
    "time": {
        "t_end": ("t_end", "float"),
    },
    "initial": {
        "kind": ("initial_kind", "str"),
        "center_r": ("center_r", "float"),
        "width_r": ("width_r", "float"),
        "temp": ("temp", "float"),
        "amplitude": ("amplitude", "float"),
        "m0": ("m0", "float"),
        "perturb": ("perturb", "float"),
        "seed": ("seed", "int"),
        "etheta0": ("etheta0", "float"),
        "b0": ("b0", "float"),
        "lam": ("lam", "float"),
    },
    "boundary": {
        "kind": ("boundary_kind", "str"),
        "value_r1": ("value_r1", "float"),
        "value_r2": ("value_r2", "float"),
        "amp_r1": ("amp_r1", "float"),
        "amp_r2": ("amp_r2", "float"),
        "omega": ("omega", "float"),
        "phase": ("phase", "float"),
        "table": ("boundary_table", "str"),
    },
    "potential": {
        "kind": ("potential_kind", "str"),
        "table": ("potential_table", "str"),
        "divergence_floor": ("divergence_floor", "float"),
    },
    "run": {
        "fields_off": ("fields_off", "bool"),
        "track_history": ("track_history", "bool"),
        "dt_override": ("dt_override", "float"),
    },
    "output": {
        "directory": ("directory", "str"),
        "cadence": ("cadence", "int"),
    },
}

_SECTION_ORDER = ["domain", "grid", "time", "initial", "boundary", "potential", "run", "output"]


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _convert(raw: str, kind: str):
    if kind == "float":
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value
    if kind == "int":
        return int(raw, 10)
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError("expected true/false")
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raise ConfigError listing *every* problem found."""
    errors: List[str] = []
    values: Dict[str, object] = {}
    section: Optional[str] = None
    seen: set = set()

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SCHEMA:
                errors.append(f"line {lineno}: unknown section [{name}]")
                section = None
            else:
                section = name
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, _, raw_value = line.partition("=")
        key = key.strip().lower()
        raw_value = raw_value.strip()
        if section is None:
            errors.append(f"line {lineno}: key {key!r} appears before any valid section")
            continue
        spec = _SCHEMA[section].get(key)
        if spec is None:
            errors.append(f"line {lineno}: unknown key {key!r} in section [{section}]")
            continue
        attr, kind = spec
        if (section, key) in seen:
            errors.append(f"line {lineno}: duplicate key {key!r} in section [{section}]")
            continue
        seen.add((section, key))
        try:
            values[attr] = _convert(raw_value, kind)
        except ValueError as exc:
            errors.append(
                f"line {lineno}: bad value {raw_value!r} for {key!r} ({kind}: {exc})"
            )

    config = replace(RunConfig(), **values) if not errors else None
    if config is not None:
        errors.extend(_semantic_errors(config))
    if errors:
        raise ConfigError(errors)
    return config


def parse_config_file(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _semantic_errors(c: RunConfig) -> List[str]:
    errs: List[str] = []
    if not (0.0 < c.r1 < c.r2):
        errs.append(f"[domain] walls must satisfy 0 < r1 < r2, got r1={c.r1!r} r2={c.r2!r}")
    else:
        half_width = 0.5 * (c.r2 - c.r1)
        if not (0.0 < c.delta < c.delta0 < half_width):
            errs.append(
                "[domain] support margins must satisfy "
                "0 < delta < delta0 < (r2 - r1)/2, got "
                f"delta={c.delta!r} delta0={c.delta0!r} (r2 - r1)/2={half_width!r}"
            )
    if c.nr < 8:
        errs.append(f"[grid] nr must be at least 8, got {c.nr}")
    if c.np_pts < 8:
        errs.append(f"[grid] np must be at least 8, got {c.np_pts}")
    elif c.np_pts % 2 == 0:
        errs.append(f"[grid] np must be odd so p = 0 is a node, got {c.np_pts}")
    if not c.p_max > 0.0:
        errs.append(f"[grid] p_max must be positive, got {c.p_max!r}")
    if not c.t_end > 0.0:
        errs.append(f"[time] t_end must be positive, got {c.t_end!r}")
    if c.initial_kind not in ("gaussian_ring", "zero"):
        errs.append(
            f"[initial] kind must be gaussian_ring or zero, got {c.initial_kind!r}"
        )
    elif c.initial_kind == "gaussian_ring":
        for name, value in (
            ("width_r", c.width_r), ("temp", c.temp),
            ("amplitude", c.amplitude), ("m0", c.m0),
        ):
            if not value > 0.0:
                errs.append(f"[initial] {name} must be positive, got {value!r}")
        if not 0.0 <= c.perturb < 1.0:
            errs.append(f"[initial] perturb must lie in [0, 1), got {c.perturb!r}")
    if c.boundary_kind not in ("constant", "sinusoid", "tabulated"):
        errs.append(
            "[boundary] kind must be constant, sinusoid or tabulated, "
            f"got {c.boundary_kind!r}"
        )
    if c.boundary_kind == "tabulated" and not c.boundary_table:
        errs.append("[boundary] kind = tabulated requires table = <csv path>")
    if c.potential_kind not in ("explicit-csc", "tabulated", "none"):
        errs.append(
            "[potential] kind must be explicit-csc, tabulated or none, "
            f"got {c.potential_kind!r}"
        )
    if c.potential_kind == "tabulated" and not c.potential_table:
        errs.append("[potential] kind = tabulated requires table = <csv path>")
    if c.fields_off:
        clean = (
            c.potential_kind == "none"
            and c.etheta0 == 0.0 and c.b0 == 0.0 and c.lam == 0.0
            and _boundary_is_zero(c)
        )
        if not clean:
            errs.append(
                "[run] fields_off = true requires potential kind = none, "
                "etheta0 = b0 = lam = 0 and an identically zero boundary trace"
            )
    if c.dt_override != 0.0:
        if not c.dt_override > 0.0:
            errs.append(f"[run] dt_override must be positive, got {c.dt_override!r}")
        if not c.fields_off:
            errs.append(
                "[run] dt_override breaks the unit-CFL wave stepping and is "
                "only allowed together with fields_off = true"
            )
    if c.cadence < 1:
        errs.append(f"[output] cadence must be a positive integer, got {c.cadence}")
    return errs


def _boundary_is_zero(c: RunConfig) -> bool:
    if c.boundary_kind == "constant":
        return c.value_r1 == 0.0 and c.value_r2 == 0.0
    if c.boundary_kind == "sinusoid":
        return c.amp_r1 == 0.0 and c.amp_r2 == 0.0
    return False  # tabulated: cannot certify without reading the table


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(config: RunConfig) -> str:
    """Canonical text form; parse_config(emit_config(c)) == c."""
    lines: List[str] = []
    for section in _SECTION_ORDER:
        lines.append(f"[{section}]")
        for key, (attr, _) in _SCHEMA[section].items():
            lines.append(f"{key} = {_format(getattr(config, attr))}")
        lines.append("")
    return "\n".join(lines)


def load_boundary_table(path: str) -> np.ndarray:
    """Read a (t, value_r1, value_r2) CSV for tabulated boundary traces."""
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    if table.shape[1] != 3:
        raise ConfigError(
            [f"boundary table {path!r} must have columns t, value_r1, value_r2"]
        )
    return table


def load_potential_table(path: str) -> np.ndarray:
    """Read an (r, psi) CSV for tabulated potentials."""
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    if table.shape[1] != 2:
        raise ConfigError([f"potential table {path!r} must have columns r, psi"])
    return table
