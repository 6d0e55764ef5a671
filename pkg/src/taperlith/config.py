"""Run configuration: JSON files with explicit units, strict key checking, and
defaults expanded into an effective config that reproduces the run byte-for-byte."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .bpm import BpmSettings
from .geometry import (
    ExposureSetup,
    FiberSpec,
    FrustumGeometry,
    Grid2D,
    MaskPattern,
    trapezoid_mask,
)
from .lithosim import make_litho_grid
from .modes import FieldSlice, elliptical_gaussian_source


class ConfigError(ValueError):
    """Invalid run configuration (unknown keys, bad types, violated invariants)."""


DEFAULTS: dict[str, dict[str, Any]] = {
    "mask": {
        "w_short_um": 7.5,
        "w_long_um": 14.0,
        "altitude_um": 1000.0,
    },
    "exposure": {
        "gap0_um": 500.0,
        "tilt_deg": 10.0,
        "wavelength_um": 0.405,
        "dose_threshold": 0.3,
        "dose_clear": 0.7,
        "resist_thickness_um": 35.0,
        "dose_scale": 1.15,
    },
    "litho_grid": {
        "dx_um": 0.2,
        "dy_um": 0.2,
        "strip_um": 10.0,
    },
    "frustum": {
        "w_in_um": 3.0,
        "w_out_um": 10.0,
        "h_in_um": 2.0,
        "h_out_um": 10.0,
        "length_um": 1000.0,
        "n_core": 1.465,
        "n_clad": 1.445,
        "n_substrate": 1.445,
    },
    "fiber": {
        "core_diameter_um": 9.0,
        "n_core": 1.450,
        "n_clad": 1.444,
    },
    "source": {
        "kind": "mode",
        "waist_x_um": 1.5,
        "waist_y_um": 1.0,
    },
    "bpm": {
        "wavelength_um": 1.55,
        "dx_um": 0.1,
        "dy_um": 0.1,
        "dz_um": 0.5,
        "domain_x_um": 40.0,
        "domain_y_um": 40.0,
        "y_min_um": -15.0,
        "pml_thickness_um": 3.0,
        "pml_strength": 4.0,
        "polarization": "te",
        "n_ref": None,
        "snapshot_zs_um": [0.0, 500.0, 900.0, 1000.0],
    },
    "sweep": {
        "tilt_deg_list": [0.0, 5.0, 8.0, 10.0, 15.0],
        "gap0_um_list": [120.0, 180.0, 240.0, 300.0, 360.0, 420.0, 480.0,
                         540.0, 600.0, 660.0, 720.0, 780.0, 840.0, 900.0],
        "wavelength_um_list": [1.26, 1.33, 1.40, 1.47, 1.54, 1.61, 1.68],
        "mask_w_short_um": None,
        "mask_w_long_um": None,
        # lower-NA fiber whose cutoff sits below the band, so every sweep
        # wavelength stays single-mode (the main fiber cuts off at 1.55)
        "fiber_n_core": 1.4478,
    },
}


def _merge(defaults: Mapping[str, Any], override: Mapping[str, Any], path: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key in override:
        if key not in defaults:
            raise ConfigError(f"unknown config key: {path}{key}")
    for key, default in defaults.items():
        if key not in override:
            out[key] = list(default) if isinstance(default, list) else default
            continue
        value = override[key]
        if isinstance(default, Mapping):
            if not isinstance(value, Mapping):
                raise ConfigError(f"config section {path}{key} must be an object")
            out[key] = _merge(default, value, f"{path}{key}.")
        else:
            out[key] = _check_leaf(default, value, f"{path}{key}")
    return out


def _check_leaf(default: Any, value: Any, path: str) -> Any:
    if value is None:
        if default is None:
            return None
        raise ConfigError(f"config key {path} must not be null (use [] to disable a sweep axis)")
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"config key {path} must be a string")
        return value
    if isinstance(default, list) or path.endswith("_list"):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"config key {path} must be a list of numbers")
        return [float(v) for v in value]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key {path} must be a number")
    if not math.isfinite(float(value)):
        raise ConfigError(f"config key {path} must be finite")
    return float(value)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration with domain-object constructors.

    Constructing the domain objects re-validates every module-level invariant,
    so a config that loads cleanly is a config that can run.
    """

    data: Mapping[str, Any]

    # -- litho ------------------------------------------------------------
    def mask(self) -> MaskPattern:
        m = self.data["mask"]
        return trapezoid_mask(m["w_short_um"], m["w_long_um"], m["altitude_um"])

    def sweep_mask(self) -> MaskPattern:
        """Mask for sweep cells; the sweep section may override the widths."""
        s = self.data["sweep"]
        base = self.data["mask"]
        w_short = s["mask_w_short_um"] if s["mask_w_short_um"] is not None else base["w_short_um"]
        w_long = s["mask_w_long_um"] if s["mask_w_long_um"] is not None else base["w_long_um"]
        return trapezoid_mask(w_short, w_long, base["altitude_um"])

    def exposure(self) -> ExposureSetup:
        e = self.data["exposure"]
        return ExposureSetup(
            gap0=e["gap0_um"],
            tilt_deg=e["tilt_deg"],
            wavelength=e["wavelength_um"],
            dose_threshold=e["dose_threshold"],
            dose_clear=e["dose_clear"],
            resist_thickness=e["resist_thickness_um"],
        )

    @property
    def dose_scale(self) -> float:
        return self.data["exposure"]["dose_scale"]

    def litho_grid(self) -> Grid2D:
        g = self.data["litho_grid"]
        return make_litho_grid(self.mask(), self.exposure(), dx=g["dx_um"], dy=g["dy_um"])

    @property
    def strip(self) -> float:
        return self.data["litho_grid"]["strip_um"]

    # -- optics -----------------------------------------------------------
    def frustum(self) -> FrustumGeometry:
        f = self.data["frustum"]
        return FrustumGeometry(
            w_in=f["w_in_um"], w_out=f["w_out_um"],
            h_in=f["h_in_um"], h_out=f["h_out_um"],
            length=f["length_um"],
            n_core=f["n_core"], n_clad=f["n_clad"], n_substrate=f["n_substrate"],
        )

    def fiber(self) -> FiberSpec:
        f = self.data["fiber"]
        return FiberSpec(core_diameter=f["core_diameter_um"], n_core=f["n_core"],
                         n_clad=f["n_clad"])

    def sweep_fiber(self) -> FiberSpec:
        """Fiber for the wavelength sweep: single-mode across the whole band."""
        f = self.data["fiber"]
        return FiberSpec(core_diameter=f["core_diameter_um"],
                         n_core=self.data["sweep"]["fiber_n_core"], n_clad=f["n_clad"])

    def bpm_settings(self) -> BpmSettings:
        b = self.data["bpm"]
        return BpmSettings(
            wavelength=b["wavelength_um"],
            dz=b["dz_um"],
            n_ref=b["n_ref"],
            polarization=b["polarization"],
            pml_thickness=b["pml_thickness_um"],
            pml_strength=b["pml_strength"],
        )

    def bpm_grid(self) -> Grid2D:
        b = self.data["bpm"]
        nx = int(round(b["domain_x_um"] / b["dx_um"])) + 1
        ny = int(round(b["domain_y_um"] / b["dy_um"])) + 1
        return Grid2D(nx=nx, ny=ny, dx=b["dx_um"], dy=b["dy_um"],
                      x0=-0.5 * (nx - 1) * b["dx_um"], y0=b["y_min_um"])

    def source(self, grid: Grid2D) -> FieldSlice | None:
        """Launch field: None means the entrance-facet fundamental mode."""
        s = self.data["source"]
        if s["kind"] == "mode":
            return None
        if s["kind"] == "gaussian":
            f = self.frustum()
            b = self.data["bpm"]
            return elliptical_gaussian_source(
                s["waist_x_um"], s["waist_y_um"], grid, b["wavelength_um"],
                polarization=b["polarization"], center=(0.0, 0.5 * f.h_in),
            )
        raise ConfigError(f"source.kind must be 'mode' or 'gaussian', got {s['kind']!r}")

    @property
    def snapshot_zs(self) -> list[float]:
        return list(self.data["bpm"]["snapshot_zs_um"])

    # -- sweeps -----------------------------------------------------------
    @property
    def tilt_list(self) -> list[float]:
        return list(self.data["sweep"]["tilt_deg_list"])

    @property
    def gap0_list(self) -> list[float]:
        return list(self.data["sweep"]["gap0_um_list"])

    @property
    def wavelength_list(self) -> list[float]:
        return list(self.data["sweep"]["wavelength_um_list"])

    # -- serialization ----------------------------------------------------
    def effective_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2) + "\n"

    def config_hash(self) -> str:
        canonical = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def validate(self) -> None:
        """Build every domain object once so invariant violations fail the load."""
        try:
            self.mask()
            self.sweep_mask()
            setup = self.exposure()
            self.frustum()
            self.fiber()
            self.bpm_settings()
            grid = self.bpm_grid()
            self.source(grid)
            if self.dose_scale <= 0.0:
                raise ValueError("exposure.dose_scale must be positive")
            lg = self.data["litho_grid"]
            if lg["dx_um"] > 0.5 * setup.wavelength or lg["dy_um"] > 0.5 * setup.wavelength:
                raise ValueError(
                    "litho grid spacing must be <= half the exposure wavelength"
                )
            if lg["strip_um"] <= 0.0:
                raise ValueError("litho_grid.strip_um must be positive")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def from_dict(raw: Mapping[str, Any]) -> RunConfig:
    """Merge a raw mapping over the defaults, rejecting unknown keys."""
    if not isinstance(raw, Mapping):
        raise ConfigError("top-level config must be an object")
    cfg = RunConfig(data=_merge(DEFAULTS, raw, ""))
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Load a JSON config file; ``None`` yields the pure defaults."""
    if path is None:
        return from_dict({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return from_dict(raw)
