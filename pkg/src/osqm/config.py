"""Scenario configuration: strict JSON schema with full-error reporting."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .grid import PhaseGrid
from .scenarios import HAMILTONIAN_PRESETS, STATE_PRESETS

__all__ = ["ScenarioConfig", "ConfigError", "parse_config", "config_to_dict"]


class ConfigError(ValueError):
    """Carries every validation failure found, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" +
                         "\n".join(f"  - {e}" for e in self.errors))


_TOP_KEYS = {"grid", "hamiltonian", "partition", "initial_state", "schedule",
             "ensemble", "output", "backend", "projection_mode"}
_DEFAULTS = {
    "partition": {"x_boundaries": [], "p_boundaries": []},
    "schedule": {"dt": 0.01, "dt_proj": None, "t_final": 1.0, "mode": "single-shot"},
    "ensemble": {"num_seeds": 1, "base_seed": 0},
    "output": {"out_dir": "runs", "snapshot_stride": 0},
    "backend": "oracle",
    "projection_mode": "sqrt",
}


@dataclass
class ScenarioConfig:
    grid: dict
    hamiltonian: dict
    initial_state: dict
    partition: dict = field(default_factory=lambda: dict(_DEFAULTS["partition"]))
    schedule: dict = field(default_factory=lambda: dict(_DEFAULTS["schedule"]))
    ensemble: dict = field(default_factory=lambda: dict(_DEFAULTS["ensemble"]))
    output: dict = field(default_factory=lambda: dict(_DEFAULTS["output"]))
    backend: str = "oracle"
    projection_mode: str = "sqrt"

    def build_grid(self) -> PhaseGrid:
        g = self.grid
        dof = g.get("dof", 1)
        pts = g["points"]
        ext = g["x_extent"]
        if isinstance(pts, int):
            pts = [pts] * dof
        if isinstance(ext, (int, float)):
            ext = [float(ext)] * dof
        return PhaseGrid(dof=dof, points=tuple(int(p) for p in pts),
                         x_extents=tuple(float(e) for e in ext),
                         hbar=float(g.get("hbar", 1.0)))

    def build_partition(self, grid: PhaseGrid):
        from .regions import build_partition
        return build_partition(grid, self.partition.get("x_boundaries", []),
                               self.partition.get("p_boundaries", []))

    def build_hamiltonian(self, grid: PhaseGrid):
        from .scenarios import hamiltonian_preset
        return hamiltonian_preset(grid, self.hamiltonian["preset"],
                                  self.hamiltonian.get("params", {}))

    def build_initial_state(self, grid: PhaseGrid):
        from .scenarios import initial_state_preset
        return initial_state_preset(grid, self.initial_state["preset"],
                                    self.initial_state.get("params", {}))


def _check_block(raw: dict, name: str, allowed: set, errors: list) -> dict:
    block = raw.get(name, None)
    if block is None:
        return dict(_DEFAULTS.get(name, {}))
    if not isinstance(block, dict):
        errors.append(f"{name}: expected an object")
        return {}
    unknown = set(block) - allowed
    if unknown:
        errors.append(f"{name}: unknown keys {sorted(unknown)}")
    merged = dict(_DEFAULTS.get(name, {}))
    merged.update({k: v for k, v in block.items() if k in allowed})
    return merged


def parse_config(path_or_dict) -> ScenarioConfig:
    """Load and validate a scenario config; raises ConfigError listing every
    problem found (unknown keys are errors, strict mode)."""
    if isinstance(path_or_dict, (str, Path)):
        with open(path_or_dict) as fh:
            raw = json.load(fh)
    else:
        raw = dict(path_or_dict)
    errors: list = []

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        errors.append(f"unknown top-level keys {sorted(unknown)}")
    for req in ("grid", "hamiltonian", "initial_state"):
        if req not in raw:
            errors.append(f"missing required block {req!r}")

    grid = _check_block(raw, "grid", {"dof", "points", "x_extent", "hbar"}, errors)
    ham = _check_block(raw, "hamiltonian", {"preset", "params"}, errors)
    state = _check_block(raw, "initial_state", {"preset", "params"}, errors)
    partition = _check_block(raw, "partition", {"x_boundaries", "p_boundaries"}, errors)
    schedule = _check_block(raw, "schedule", {"dt", "dt_proj", "t_final", "mode"}, errors)
    ensemble = _check_block(raw, "ensemble", {"num_seeds", "base_seed"}, errors)
    output = _check_block(raw, "output", {"out_dir", "snapshot_stride"}, errors)
    backend = raw.get("backend", _DEFAULTS["backend"])
    projection_mode = raw.get("projection_mode", _DEFAULTS["projection_mode"])

    if "hamiltonian" in raw:
        preset = ham.get("preset")
        if preset not in HAMILTONIAN_PRESETS:
            errors.append(f"hamiltonian: unknown preset {preset!r}; "
                          f"available: {list(HAMILTONIAN_PRESETS)}")
    if "initial_state" in raw:
        preset = state.get("preset")
        if preset not in STATE_PRESETS:
            errors.append(f"initial_state: unknown preset {preset!r}; "
                          f"available: {list(STATE_PRESETS)}")
    if backend not in ("oracle", "phase"):
        errors.append(f"backend: {backend!r} not in ('oracle', 'phase')")
    if projection_mode not in ("sqrt", "exact"):
        errors.append(f"projection_mode: {projection_mode!r} not in ('sqrt', 'exact')")
    if schedule.get("mode") not in ("continuous", "periodic", "single-shot"):
        errors.append(f"schedule: unknown mode {schedule.get('mode')!r}")
    if schedule.get("mode") == "periodic":
        dtp, dt = schedule.get("dt_proj"), schedule.get("dt")
        if dtp is None:
            errors.append("schedule: periodic mode needs dt_proj")
        elif dt and dtp < dt:
            errors.append("schedule: dt_proj must be >= dt")
    if ensemble.get("num_seeds", 1) < 1:
        errors.append("ensemble: num_seeds must be >= 1")

    cfg = None
    if not errors:
        cfg = ScenarioConfig(grid=grid, hamiltonian=ham, initial_state=state,
                             partition=partition, schedule=schedule,
                             ensemble=ensemble, output=output, backend=backend,
                             projection_mode=projection_mode)
        # physics-level cross validation (grid legality, box sizes, presets)
        try:
            g = cfg.build_grid()
        except Exception as exc:
            errors.append(f"grid: {exc}")
            g = None
        if g is not None:
            for builder, label in ((cfg.build_partition, "partition"),
                                   (cfg.build_hamiltonian, "hamiltonian"),
                                   (cfg.build_initial_state, "initial_state")):
                try:
                    builder(g)
                except Exception as exc:
                    errors.append(f"{label}: {exc}")
    if errors:
        raise ConfigError(errors)
    return cfg


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return asdict(cfg)
