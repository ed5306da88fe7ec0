"""Sectioned key = value run configuration with line-anchored errors,
plus the initial-condition presets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qtensor import ModelParams, State, random_qtensor
from .spectral import Grid, random_velocity
from .timestepping import TimeConfig


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


_SCHEMA: dict[str, set[str]] = {
    "grid": {"n", "len"},
    "params": {"a", "b", "c", "gamma", "nu", "L", "n_cutoff"},
    "time": {"dt", "t_end", "cfl", "scheme"},
    "init": {"preset", "snapshot", "seed", "amplitude_u", "amplitude_q",
             "kmin", "kmax", "decay"},
    "output": {"dir", "snapshot_stride", "probes"},
}

_REQUIRED: tuple[tuple[str, str], ...] = (
    ("grid", "n"),
    ("params", "a"), ("params", "b"), ("params", "c"),
    ("params", "gamma"), ("params", "nu"), ("params", "L"),
)

PRESETS = ("taylor_green", "uniaxial_wave", "random_spectrum")


@dataclass
class RunConfig:
    """Validated configuration for one simulation or twin run."""

    n: int
    length: float
    params: ModelParams
    time: TimeConfig
    preset: str = "random_spectrum"
    snapshot: str | None = None
    seed: int = 0
    amplitude_u: float = 0.5
    amplitude_q: float = 0.5
    kmin: float = 1.0
    kmax: float | None = None
    decay: float = 2.0
    out_dir: str = "."
    snapshot_stride: int = 100
    hs_probes: tuple[float, ...] = field(default_factory=tuple)


def _parse_sections(text: str) -> dict[tuple[str, str], tuple[str, int]]:
    entries: dict[tuple[str, str], tuple[str, int]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{section}]")
        if (section, key) in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in section [{section}]")
        entries[(section, key)] = (value, lineno)
    return entries


def _get(entries, section, key, cast, default=None):
    if (section, key) not in entries:
        return default
    value, lineno = entries[(section, key)]
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"line {lineno}: cannot parse [{section}] {key} = {value!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a sectioned-text configuration."""
    entries = _parse_sections(text)
    for section, key in _REQUIRED:
        if (section, key) not in entries:
            raise ConfigError(f"missing required key {key!r} in section [{section}]")

    n = _get(entries, "grid", "n", int)
    length = _get(entries, "grid", "len", float, 2.0 * math.pi)
    if n < 8 or (n & (n - 1)) != 0:
        lineno = entries[("grid", "n")][1]
        raise ConfigError(f"line {lineno}: grid n must be a power of two >= 8, got {n}")
    if not length > 0:
        lineno = entries[("grid", "len")][1]
        raise ConfigError(f"line {lineno}: grid len must be positive")

    kwargs = {k: _get(entries, "params", k, float) for k in ("a", "b", "c", "gamma", "nu", "L")}
    n_cutoff = _get(entries, "params", "n_cutoff", int)
    try:
        params = ModelParams(n_cutoff=n_cutoff, **kwargs)
    except ValueError as err:
        raise ConfigError(f"section [params]: {err}")

    dt_raw = _get(entries, "time", "dt", str, "auto")
    dt: float | str = "auto" if dt_raw == "auto" else float(dt_raw)
    try:
        tc = TimeConfig(
            dt=dt,
            t_end=_get(entries, "time", "t_end", float, 1.0),
            cfl=_get(entries, "time", "cfl", float, 0.4),
            scheme=_get(entries, "time", "scheme", str, "if-rk2"),
        )
    except ValueError as err:
        raise ConfigError(f"section [time]: {err}")

    preset = _get(entries, "init", "preset", str, "random_spectrum")
    if preset not in PRESETS:
        lineno = entries[("init", "preset")][1]
        raise ConfigError(f"line {lineno}: unknown preset {preset!r}; choose from {PRESETS}")
    snapshot = _get(entries, "init", "snapshot", str)

    stride = _get(entries, "output", "snapshot_stride", int, 100)
    if stride < 1:
        lineno = entries[("output", "snapshot_stride")][1]
        raise ConfigError(f"line {lineno}: snapshot_stride must be >= 1")

    probes_raw = _get(entries, "output", "probes", str, "")
    hs: list[float] = []
    for tok in filter(None, (tok.strip() for tok in probes_raw.split(","))):
        if not tok.startswith("hs:"):
            lineno = entries[("output", "probes")][1]
            raise ConfigError(f"line {lineno}: unknown probe {tok!r} (expected 'hs:<s>')")
        hs.append(float(tok[3:]))

    return RunConfig(
        n=n,
        length=length,
        params=params,
        time=tc,
        preset=preset,
        snapshot=snapshot,
        seed=_get(entries, "init", "seed", int, 0),
        amplitude_u=_get(entries, "init", "amplitude_u", float, 0.5),
        amplitude_q=_get(entries, "init", "amplitude_q", float, 0.5),
        kmin=_get(entries, "init", "kmin", float, 1.0),
        kmax=_get(entries, "init", "kmax", float),
        decay=_get(entries, "init", "decay", float, 2.0),
        out_dir=_get(entries, "output", "dir", str, "."),
        snapshot_stride=stride,
        hs_probes=tuple(hs),
    )


# -- initial-condition presets ------------------------------------------------------


def taylor_green(grid: Grid, amplitude: float = 1.0) -> np.ndarray:
    """Solenoidal single-cell vortex (sin x cos y, -cos x sin y), scaled to the box."""
    x, y = grid.nodes()
    w = 2.0 * math.pi / grid.length
    return amplitude * np.stack([np.sin(w * x) * np.cos(w * y),
                                 -np.cos(w * x) * np.sin(w * y)])


def uniaxial_wave(grid: Grid, amplitude: float = 1.0) -> np.ndarray:
    """Q = s(x) (e3.e3 - Id/3) with a band-limited modulation s."""
    x, y = grid.nodes()
    w = 2.0 * math.pi / grid.length
    s = amplitude * (np.cos(w * x) + 0.5 * np.sin(2.0 * w * y))
    q = np.zeros((5, grid.n, grid.n))
    q[1] = -math.sqrt(2.0 / 3.0) * s  # e3.e3 - Id/3 = -sqrt(2/3) E2
    return q


def build_initial_state(cfg: RunConfig, grid: Grid) -> State:
    """Materialize the configured initial condition on the grid."""
    if cfg.snapshot is not None:
        from .snapshots import read_snapshot

        _, _, state = read_snapshot(cfg.snapshot)
        return state
    if cfg.preset == "taylor_green":
        return State(taylor_green(grid, cfg.amplitude_u), np.zeros((5, grid.n, grid.n)))
    if cfg.preset == "uniaxial_wave":
        return State(np.zeros((2, grid.n, grid.n)), uniaxial_wave(grid, cfg.amplitude_q))
    rng = np.random.default_rng(cfg.seed)
    u = cfg.amplitude_u * random_velocity(grid, rng, cfg.kmin, cfg.kmax, cfg.decay)
    q = cfg.amplitude_q * random_qtensor(grid, rng, cfg.kmin, cfg.kmax, cfg.decay)
    return State(u, q)
