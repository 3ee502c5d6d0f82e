"""Scenario files (JSON or TOML) and their conversion to internal parameters."""
from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .bath import BathSpec, OttoCycleSpec
from .dynamics import CompressionProtocol
from .errors import ScenarioError
from .lattice import RB87_MASS_KG, Boundary, PhysicalParams, UnitSystem

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSection(_Strict):
    boundary: Literal["neumann", "dirichlet"] = "neumann"
    box_length_um: float = Field(gt=0)
    n_pixels: Optional[int] = Field(default=None, ge=1)
    pixel_size_um: Optional[float] = Field(default=None, gt=0)
    atom_count: Optional[float] = Field(default=None, gt=0)
    mean_density_per_um: Optional[float] = Field(default=None, gt=0)
    atom_mass_kg: float = Field(default=RB87_MASS_KG, gt=0)
    healing_length_um: Optional[float] = Field(default=None, gt=0)
    coupling_g_si: Optional[float] = Field(default=None, gt=0)
    temperature_nK: Optional[float] = Field(default=None, gt=0)
    mu_relative: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _one_of_each(self):
        if (self.n_pixels is None) == (self.pixel_size_um is None):
            raise ValueError("give exactly one of n_pixels, pixel_size_um")
        if (self.atom_count is None) == (self.mean_density_per_um is None):
            raise ValueError("give exactly one of atom_count, mean_density_per_um")
        if (self.healing_length_um is None) == (self.coupling_g_si is None):
            raise ValueError("give exactly one of healing_length_um, coupling_g_si")
        if self.pixel_size_um is not None:
            n = self.box_length_um / self.pixel_size_um
            if abs(n - round(n)) > 1e-9 * n:
                raise ValueError("box_length_um is not a multiple of pixel_size_um")
        return self


class ProtocolSection(_Strict):
    length_ratio_final: float = Field(gt=0)
    total_time_s: float = Field(gt=0)
    n_steps: int = Field(ge=1)
    snapshot_every: Optional[int] = Field(default=None, ge=1)


class CycleSection(_Strict):
    ratio: float = Field(gt=0)
    t_comp_s: float = Field(gt=0)
    n_steps: int = Field(ge=1)
    T_hot_nK: float = Field(gt=0)
    T_cold_nK: float = Field(gt=0)
    gamma_per_s: float = Field(gt=0)
    t_bath_s: float = Field(gt=0)
    bath_substeps: int = Field(default=50, ge=1)


class ScanSection(_Strict):
    T_min_nK: float = Field(gt=0)
    T_max_nK: float = Field(gt=0)
    n_points: int = Field(default=21, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.T_max_nK < self.T_min_nK:
            raise ValueError("T_max_nK must not be below T_min_nK")
        return self


class RunSection(_Strict):
    seed: int = 0
    output_dir: Optional[str] = None
    snapshot_every: Optional[int] = Field(default=None, ge=1)
    gap_tol: float = Field(default=1e-8, gt=0)
    feas_tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=200, ge=1)
    sdp: bool = True
    trace_every: int = Field(default=1, ge=1)


class Scenario(_Strict):
    model: ModelSection
    protocol: Optional[ProtocolSection] = None
    cycle: Optional[CycleSection] = None
    scan: Optional[ScanSection] = None
    run: RunSection = RunSection()

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def override(self, **model_changes) -> "Scenario":
        changes = {k: v for k, v in model_changes.items() if v is not None}
        if not changes:
            return self
        data = self.model_dump()
        data["model"].update(changes)
        return parse_scenario(data)

    @property
    def units(self) -> UnitSystem:
        return UnitSystem(self.model.atom_mass_kg)

    def physical_params(self) -> PhysicalParams:
        m = self.model
        units = self.units
        length = m.box_length_um
        n_pixels = m.n_pixels if m.n_pixels is not None else int(round(length / m.pixel_size_um))
        density = m.mean_density_per_um if m.mean_density_per_um is not None else \
            m.atom_count / length
        if m.healing_length_um is not None:
            g = 1.0 / (density * m.healing_length_um ** 2)
        else:
            g = units.coupling_from_si(m.coupling_g_si)
        params = PhysicalParams(1.0, g, density, length, n_pixels, 0.0, Boundary(m.boundary))
        mu_rel = m.mu_relative
        if mu_rel is None:
            mu_rel = 1e-6 if params.boundary is Boundary.NEUMANN else 0.0
        return params.with_mu_relative(mu_rel)

    def temperature(self) -> float:
        if self.model.temperature_nK is None:
            raise ScenarioError("model.temperature_nK is required for this command")
        return self.units.temperature_from_nK(self.model.temperature_nK)

    def compression_protocol(self) -> CompressionProtocol:
        if self.protocol is None:
            raise ScenarioError("scenario has no protocol section")
        p = self.protocol
        return CompressionProtocol(p.length_ratio_final, self.units.time_from_s(p.total_time_s),
                                   p.n_steps)

    def otto_spec(self) -> OttoCycleSpec:
        if self.cycle is None:
            raise ScenarioError("scenario has no cycle section")
        c = self.cycle
        u = self.units
        rate = u.rate_from_per_s(c.gamma_per_s)
        return OttoCycleSpec.symmetric(
            c.ratio, u.time_from_s(c.t_comp_s), c.n_steps,
            BathSpec(u.temperature_from_nK(c.T_hot_nK), rate),
            BathSpec(u.temperature_from_nK(c.T_cold_nK), rate),
            u.time_from_s(c.t_bath_s), c.bath_substeps)


def parse_scenario(data: dict) -> Scenario:
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors())
        raise ScenarioError(problems) from exc


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(raw.decode())
        else:
            data = json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from exc
    return parse_scenario(data)
