"""Experiment configuration: strict INI parsing and initial-data construction.

Grammar: standard INI sections with ``key = value`` lines (``#`` or ``;``
comments). Only the sections and keys listed in :data:`DEFAULTS` are
accepted; every problem found is reported at once.
"""
from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor_algebra as ta
from .dynamics import SCHEMES, SolverConfig
from .landau_de_gennes import MaterialParams
from .snapshot import read_snapshot
from .spectral_domain import SpectralGrid, random_band_limited
from .state import SimState

INITIAL_KINDS = ("zero", "single_mode", "random", "uniaxial", "file")

# section -> key -> default (None: optional with no default)
DEFAULTS: dict[str, dict[str, object]] = {
    "grid": {"n": 32, "box_length": 2.0 * math.pi},
    "params": {"a": -0.2, "b": 1.0, "c": 1.0, "L1": 1.0, "L2": 0.5, "L3": 0.5, "L4": 0.3,
               "mu": 1.0, "gamma": 1.0},
    "solver": {"scheme": "explicit_rk4", "dt": 1e-3, "t_end": 0.5, "mollifier_n": None,
               "snapshot_every": 1},
    "initial": {"kind": "random", "seed": None, "decay": 3.0, "u_amplitude": 0.5,
                "q_amplitude": 0.3, "s": 0.5, "axis": "0,0,1", "mode": "1,0,0",
                "amplitude": 0.1, "component": "q12", "path": None},
    "output": {"directory": "out", "csv": True, "snapshots": False},
}

_INT = {("grid", "n"), ("solver", "mollifier_n"), ("solver", "snapshot_every"), ("initial", "seed")}
_BOOL = {("output", "csv"), ("output", "snapshots")}
_STR = {("solver", "scheme"), ("initial", "kind"), ("initial", "axis"), ("initial", "mode"),
        ("initial", "component"), ("initial", "path"), ("output", "directory")}
_COMPONENT_NAMES = ("q11", "q12", "q13", "q22", "q23")


class ConfigError(ValueError):
    """All violations found in a configuration."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.violations))


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    seed: int
    decay: float
    u_amplitude: float
    q_amplitude: float
    s: float
    axis: tuple
    mode: tuple
    amplitude: float
    component: str
    path: str | None


@dataclass(frozen=True)
class OutputSpec:
    directory: str
    csv: bool
    snapshots: bool


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    box_length: float
    params: MaterialParams
    solver: SolverConfig
    initial: InitialSpec
    output: OutputSpec
    values: tuple  # resolved (section, key, value) triples, in DEFAULTS order

    def grid(self) -> SpectralGrid:
        return SpectralGrid(self.n, self.box_length)

    def echo(self) -> str:
        """Canonical INI text of every resolved value."""
        lines = []
        current = None
        for sec, key, val in self.values:
            if sec != current:
                if current is not None:
                    lines.append("")
                lines.append(f"[{sec}]")
                current = sec
            lines.append(f"{key} = {_fmt(val)}")
        return "\n".join(lines) + "\n"

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.echo().encode()).hexdigest()

    def initial_state(self, base_dir=None) -> SimState:
        return build_initial_state(self.grid(), self.initial, base_dir)


def _fmt(val) -> str:
    if val is None:
        return "none"
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    return str(val)


def _convert(sec, key, raw, problems):
    raw = raw.strip()
    if raw.lower() in ("none", "") and DEFAULTS[sec][key] is None:
        return None
    try:
        if (sec, key) in _BOOL:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError
        if (sec, key) in _INT:
            return int(raw)
        if (sec, key) in _STR:
            return raw
        val = float(raw)
        if not math.isfinite(val):
            problems.append(f"[{sec}] {key} must be finite, got {raw!r}")
        return val
    except ValueError:
        kind = "boolean" if (sec, key) in _BOOL else "integer" if (sec, key) in _INT else "number"
        problems.append(f"[{sec}] {key}: expected a {kind}, got {raw!r}")
        return DEFAULTS[sec][key]


def _int_triple(text, what, problems):
    try:
        vals = tuple(int(v) for v in text.split(","))
        if len(vals) != 3:
            raise ValueError
        return vals
    except ValueError:
        problems.append(f"[initial] {what} must be three comma-separated integers, got {text!r}")
        return (0, 0, 1)


def _float_triple(text, what, problems):
    try:
        vals = tuple(float(v) for v in text.split(","))
        if len(vals) != 3 or not all(math.isfinite(v) for v in vals):
            raise ValueError
        return vals
    except ValueError:
        problems.append(f"[initial] {what} must be three comma-separated numbers, got {text!r}")
        return (0.0, 0.0, 1.0)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text; raises ConfigError listing every
    violation."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (L1 vs l1)
    problems: list[str] = []
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError([f"unreadable configuration: {err}"]) from None

    given: dict[tuple, object] = {}
    for sec in cp.sections():
        if sec not in DEFAULTS:
            problems.append(f"unknown section [{sec}]")
            continue
        for key, raw in cp.items(sec):
            if key not in DEFAULTS[sec]:
                problems.append(f"unknown key [{sec}] {key}")
                continue
            given[(sec, key)] = _convert(sec, key, raw, problems)

    values = []
    resolved: dict[str, dict[str, object]] = {}
    for sec, keys in DEFAULTS.items():
        resolved[sec] = {}
        for key, default in keys.items():
            val = given.get((sec, key), default)
            resolved[sec][key] = val
            values.append((sec, key, val))

    g = resolved["grid"]
    if g["n"] < 8 or g["n"] % 2:
        problems.append(f"[grid] n must be even and >= 8, got {g['n']}")
    if not g["box_length"] > 0:
        problems.append("[grid] box_length must be positive")

    pr = resolved["params"]
    params = None
    try:
        params = MaterialParams(**pr)
    except ValueError as err:
        problems.extend(f"[params] {v}" for v in getattr(err, "violations", [str(err)]))

    sv = resolved["solver"]
    if sv["scheme"] not in SCHEMES:
        problems.append(f"[solver] scheme must be one of {', '.join(SCHEMES)}, got {sv['scheme']!r}")
    solver = None
    try:
        solver = SolverConfig(dt=sv["dt"], t_end=sv["t_end"], scheme=sv["scheme"],
                              mollifier_n=sv["mollifier_n"], snapshot_every=sv["snapshot_every"])
    except ValueError as err:
        if sv["scheme"] in SCHEMES:
            problems.extend(f"[solver] {v}" for v in str(err).split("; "))

    ini = resolved["initial"]
    kind = ini["kind"]
    if kind not in INITIAL_KINDS:
        problems.append(f"[initial] kind must be one of {', '.join(INITIAL_KINDS)}, got {kind!r}")
    if kind == "file":
        if ini["path"] is None:
            problems.append("[initial] kind = file needs a path")
        if ("initial", "seed") in given:
            problems.append("[initial] ambiguous initial data: kind = file together with a random seed")
    elif ("initial", "path") in given:
        problems.append(f"[initial] ambiguous initial data: path given but kind = {kind}")
    if ("initial", "seed") in given and kind not in ("random", "file"):
        problems.append(f"[initial] seed only applies to kind = random, got kind = {kind}")
    if not ini["decay"] > 0:
        problems.append("[initial] decay must be positive")
    axis = _float_triple(ini["axis"], "axis", problems)
    if all(v == 0 for v in axis):
        problems.append("[initial] axis must be non-zero")
    mode = _int_triple(ini["mode"], "mode", problems)
    if ini["component"] not in _COMPONENT_NAMES:
        problems.append(f"[initial] component must be one of {', '.join(_COMPONENT_NAMES)}")
    if kind == "single_mode" and g["n"] >= 8:
        limit = [(g["n"] - 1) // 3] * 3
        if any(abs(mi) > li for mi, li in zip(mode, limit)) or all(mi == 0 for mi in mode):
            problems.append(f"[initial] mode {mode} must be non-zero and inside the dealiased band |m_i| <= {limit[0]}")

    if problems:
        raise ConfigError(problems)

    initial = InitialSpec(
        kind=kind, seed=0 if ini["seed"] is None else ini["seed"], decay=ini["decay"],
        u_amplitude=ini["u_amplitude"], q_amplitude=ini["q_amplitude"], s=ini["s"], axis=axis,
        mode=mode, amplitude=ini["amplitude"], component=ini["component"], path=ini["path"],
    )
    out = resolved["output"]
    return ExperimentConfig(g["n"], g["box_length"], params, solver, initial,
                            OutputSpec(out["directory"], out["csv"], out["snapshots"]), tuple(values))


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as err:
        raise ConfigError([f"cannot read {path}: {err}"]) from None
    return parse_config(text)


# ----------------------------------------------------------------------------
# initial data

def uniaxial_tensor(s: float, axis) -> np.ndarray:
    """s (n n^T - I/3) for the unit vector along ``axis``, 5 components."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    return ta.sym_traceless_project(s * np.outer(n, n))


def build_initial_state(grid: SpectralGrid, spec: InitialSpec, base_dir=None) -> SimState:
    kind = spec.kind
    if kind == "zero":
        return SimState.zeros(grid)
    if kind == "random":
        u = random_band_limited(grid, "vector", spec.decay, spec.seed, solenoidal=True,
                                amplitude=spec.u_amplitude)
        Q = random_band_limited(grid, "qtensor", spec.decay, spec.seed + 1, amplitude=spec.q_amplitude)
        return SimState.from_physical(grid, u, Q)
    if kind == "uniaxial":
        q = uniaxial_tensor(spec.s, spec.axis)
        Q = np.broadcast_to(q.reshape(5, 1, 1, 1), (5,) + grid.shape)
        return SimState.from_physical(grid, None, Q)
    if kind == "single_mode":
        x = grid.x
        scale = 2.0 * np.pi / grid.box_length
        phase = scale * (spec.mode[0] * x[0] + spec.mode[1] * x[1] + spec.mode[2] * x[2])
        Q = np.zeros((5,) + grid.shape)
        Q[_COMPONENT_NAMES.index(spec.component)] = spec.amplitude * np.sin(phase)
        return SimState.from_physical(grid, None, Q)
    if kind == "file":
        path = Path(spec.path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        comps, box_length, t = read_snapshot(path)
        if comps.shape != (8,) + grid.shape:
            raise ConfigError([f"{path}: snapshot has shape {comps.shape}, grid expects {(8,) + grid.shape}"])
        if not math.isclose(box_length, grid.box_length, rel_tol=1e-12):
            raise ConfigError([f"{path}: box_length {box_length} differs from the grid's {grid.box_length}"])
        return SimState.from_physical(grid, comps[:3], comps[3:], t=0.0)
    raise ConfigError([f"unknown initial kind {kind!r}"])
