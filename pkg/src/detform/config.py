"""Experiment configuration: named presets, plain-text key-value files and overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .nse import SolverConfig
from .nudging import NudgingConfig
from .spectral import Grid, ModalProjector

# desk: 64^2 grid, mu scaled down to 50, looser secant tolerance
PRESETS = {
    "desk": {"n_modes": 64, "dt": 2e-4, "mu": 50.0, "secant_tol": 1e-6},
    "paper": {"n_modes": 256, "dt": 5e-5, "mu": 150.0, "secant_tol": 1e-12},
}


@dataclass
class ExperimentConfig:
    """Everything a command-line experiment needs.

    ``scale`` names the preset the solver values came from. Overriding any of
    them turns it into ``"custom"`` so a desk run is never labelled paper-scale.
    """

    scale: str = "desk"
    n_modes: int = 64
    dt: float = 2e-4
    nu: float = 1.0
    mu: float = 50.0
    cutoff: int = 5
    s1: float = 1.0
    s2: float = 1.5
    spin_up: float = 50.0
    orbit_window: float = 2.0
    orbit_stride: float = 0.01
    perturbation: float = 0.5
    theta_samples: int = 150
    refine_count: int = 20
    tau_end: float | None = None
    secant_tol: float = 1e-6
    secant_max_iter: int = 10
    output_dir: Path = Path("results")
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    batch_size: int = 8

    @classmethod
    def preset(cls, scale: str) -> ExperimentConfig:
        if scale not in PRESETS:
            raise ValueError(f"unknown scale {scale!r}; choose from {sorted(PRESETS)}")
        return cls(scale=scale, **PRESETS[scale])

    def with_overrides(self, values: dict) -> ExperimentConfig:
        """Apply ``key -> value`` overrides (strings are coerced to the field type)."""
        types = {f.name: f.type for f in dataclasses.fields(self)}
        kw = {}
        for k, v in values.items():
            if k == "scale":
                raise KeyError("scale selects a preset; use ExperimentConfig.preset or load_config")
            if k not in types:
                raise KeyError(f"unknown config key {k!r}")
            kw[k] = _coerce(types[k], v)
        out = dataclasses.replace(self, **kw)
        preset = PRESETS.get(out.scale)
        if preset and any(getattr(out, k) != v for k, v in preset.items()):
            out.scale = "custom"
        return out

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(Grid(self.n_modes), nu=self.nu, dt=self.dt)

    @property
    def nudging(self) -> NudgingConfig:
        return NudgingConfig(self.solver, mu=self.mu, projector=ModalProjector(self.cutoff),
                             s1=self.s1, s2=self.s2)

    def as_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, Path) else v) for k, v in dataclasses.asdict(self).items()}


def _coerce(tp, v):
    if not isinstance(v, str):
        return v
    tp = str(tp)
    if v.lower() in ("none", ""):
        return None
    if "Path" in tp:
        return Path(v)
    if "int" in tp:
        return int(v)
    if "float" in tp:
        return float(v)
    return v


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


def load_config(scale: str | None = None, path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Preset, then file values, then explicit overrides."""
    file_values = read_config_file(path) if path else {}
    scale = scale or file_values.pop("scale", "desk")
    file_values.pop("scale", None)
    cfg = ExperimentConfig.preset(scale)
    return cfg.with_overrides({**file_values, **(overrides or {})})
