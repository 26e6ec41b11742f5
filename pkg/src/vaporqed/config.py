"""Run-configuration schema, loading and sweep planning.

Configs are YAML documents validated against a strict schema (unknown keys
are rejected).  See ``docs/config.md`` in the repository for the full format.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import math
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dynamics import PropagationConfig
from .ensemble import EnsembleSpec
from .errors import ConfigError
from .model import CavityParams

FORMAT_TAG = "vaporqed-config/1"

ExperimentKind = Literal["full_vs_effective", "classical_drive", "single_photon", "lambda", "validity_scan"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class EnsembleSection(_Strict):
    n_atoms: int = Field(1, ge=1)
    detuning: Optional[float] = 50.0
    two_photon_detuning: float = 0.0
    rest_splittings: Optional[tuple[float, float]] = None
    g12: float = Field(1.0, ge=0)
    g23: float = Field(1.0, ge=0)
    drive_rabi: float = Field(1.0, ge=0)
    temperature_sigma_beta: float = Field(0.0, ge=0)
    coupling_model: Literal["uniform", "gaussian_mode"] = "uniform"
    waist: float = Field(1.0, gt=0)
    disk_radius: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _one_frequency_source(self):
        if self.rest_splittings is not None and self.detuning is not None:
            raise ValueError("give either 'detuning' or 'rest_splittings', not both (set detuning: null)")
        if self.rest_splittings is None and self.detuning is None:
            raise ValueError("one of 'detuning' or 'rest_splittings' is required")
        return self


class CavitySection(_Strict):
    omega_c1: float = Field(1000.0, gt=0)
    omega_c2: float = Field(1000.0, gt=0)
    geometry: Literal["counterpropagating", "copropagating"] = "counterpropagating"
    standing_wave_factor: Literal[0.5, 1.0] = 1.0


class PropagationSection(_Strict):
    t_final: Optional[float] = Field(None, gt=0)
    periods: float = Field(10.0, gt=0)
    n_samples: int = Field(512, ge=2)
    method: Literal["auto", "dense_expm", "krylov", "rk_adaptive"] = "auto"
    tolerance: float = Field(1e-9, gt=0)


class OptionsSection(_Strict):
    n1: int = Field(1, ge=0)
    n2: int = Field(1, ge=0)
    fock_cutoff_1: Optional[int] = Field(None, ge=0)
    fock_cutoff_2: Optional[int] = Field(None, ge=0)
    variant: Literal["simplified", "full"] = "simplified"
    validity_threshold: float = Field(0.1, gt=0)
    include_vacuum_shift: bool = False


class SweepAxis(_Strict):
    parameter: str
    values: list[Any] = Field(min_length=1)


class RunConfig(_Strict):
    format: Literal["vaporqed-config/1"] = FORMAT_TAG
    experiment: ExperimentKind
    seed: int = Field(0, ge=0, lt=2**64)
    output_dir: str = "results"
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)
    cavity: CavitySection = Field(default_factory=CavitySection)
    propagation: PropagationSection = Field(default_factory=PropagationSection)
    options: OptionsSection = Field(default_factory=OptionsSection)
    sweep: list[SweepAxis] = Field(default_factory=list)

    @field_validator("sweep")
    @classmethod
    def _unique_axes(cls, axes):
        names = [a.parameter for a in axes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate sweep parameters: {names}")
        return axes

    @model_validator(mode="after")
    def _sweep_paths_exist(self):
        data = self.model_dump()
        for axis in self.sweep:
            if axis.parameter == "sweep" or axis.parameter.startswith("sweep."):
                raise ValueError("cannot sweep the sweep definition itself")
            try:
                _get_path(data, axis.parameter)
            except KeyError:
                raise ValueError(f"sweep parameter {axis.parameter!r} does not exist") from None
        return self

    # -- conversions -----------------------------------------------------------

    def cavity_params(self) -> CavityParams:
        c = self.cavity
        return CavityParams(c.omega_c1, c.omega_c2, c.geometry, float(c.standing_wave_factor))

    def ensemble_spec(self) -> EnsembleSpec:
        e = self.ensemble
        if e.rest_splittings is not None:
            splittings = tuple(e.rest_splittings)
        elif self.experiment == "lambda":
            # level 2 above both lower levels: w2 - w1 = wc1 + D, w2 - w3 = wc2 + D - two_photon
            splittings = (self.cavity.omega_c1 + e.detuning, -(self.cavity.omega_c2 + e.detuning - e.two_photon_detuning))
        else:
            splittings = (self.cavity.omega_c1 + e.detuning, self.cavity.omega_c2 - e.detuning + e.two_photon_detuning)
        return EnsembleSpec(
            n_atoms=e.n_atoms,
            rest_splittings=splittings,
            g12_max=e.g12,
            g23_max=e.g23,
            drive_rabi_max=e.drive_rabi,
            temperature_sigma_beta=e.temperature_sigma_beta,
            coupling_model=e.coupling_model,
            waist=e.waist,
            disk_radius=e.disk_radius,
            seed=self.seed,
            configuration="lambda" if self.experiment == "lambda" else "ladder",
        )

    def propagation_config(self, reference_frequency: Optional[float] = None) -> PropagationConfig:
        """Propagation settings; without ``t_final`` the horizon is ``periods`` reference periods."""
        p = self.propagation
        if p.t_final is not None:
            t_final = p.t_final
        else:
            if not reference_frequency or not math.isfinite(reference_frequency):
                raise ConfigError("no t_final given and no reference frequency available", "propagation.t_final")
            t_final = p.periods * 2 * math.pi / reference_frequency
        t_final = self.cavity_params().interaction_time(t_final)
        return PropagationConfig(t_final, p.n_samples, p.method, p.tolerance)


# -- dotted paths ---------------------------------------------------------------


def _get_path(data: dict, path: str):
    node = data
    for part in path.split("."):
        if isinstance(node, dict) and part in node:
            node = node[part]
        elif isinstance(node, (list, tuple)) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        else:
            raise KeyError(path)
    return node


def _set_path(data: dict, path: str, value) -> None:
    parts = path.split(".")
    node = data
    for part in parts[:-1]:
        node = node[int(part)] if isinstance(node, list) else node[part]
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    elif isinstance(node, tuple):
        raise KeyError(path)
    else:
        node[last] = value


# -- loading ----------------------------------------------------------------------


def _line_of(text: str, loc: tuple) -> Optional[int]:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    line = None
    for part in loc:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            match = [(k, v) for k, v in node.value if k.value == str(part)]
            if not match:
                return line
            key, node = match[0]
            line = key.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _raise_validation(exc: ValidationError, text: Optional[str]) -> None:
    err = exc.errors()[0]
    loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and p.startswith("function-")))
    path = ".".join(str(p) for p in loc) or None
    msg = err["msg"]
    if err["type"] == "extra_forbidden":
        msg = "unknown key"
    line = _line_of(text, loc) if text and loc else None
    if line is not None:
        msg = f"{msg} (line {line})"
    if len(exc.errors()) > 1:
        msg += f" [+{len(exc.errors()) - 1} more error(s)]"
    raise ConfigError(msg, path) from None


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"YAML parse error{where}: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level")
    return config_from_dict(data, text)


def config_from_dict(data: dict, text: Optional[str] = None) -> RunConfig:
    if data.get("format", FORMAT_TAG) != FORMAT_TAG:
        raise ConfigError(f"unsupported format tag {data.get('format')!r}, expected {FORMAT_TAG!r}", "format")
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        _raise_validation(exc, text)
    plan_points(cfg)
    return cfg


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a run config; every planned sweep point is validated too."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text())


def dump_config(cfg: RunConfig) -> str:
    data = cfg.model_dump(mode="json")
    return yaml.safe_dump(data, sort_keys=False)


def config_hash(cfg: RunConfig) -> str:
    canonical = yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def plan_points(cfg: RunConfig) -> list[tuple[dict, RunConfig]]:
    """Cartesian product of the sweep axes, each as ``(overrides, config)``.

    The returned configs carry no sweep of their own.
    """
    base = cfg.model_dump(mode="json")
    base["sweep"] = []
    axes = cfg.sweep
    if not axes:
        return [({}, RunConfig.model_validate(base))]
    points = []
    for combo in itertools.product(*(a.values for a in axes)):
        data = copy.deepcopy(base)
        overrides = {}
        for axis, value in zip(axes, combo):
            _set_path(data, axis.parameter, value)
            overrides[axis.parameter] = value
        try:
            point = RunConfig.model_validate(data)
        except ValidationError as exc:
            err = exc.errors()[0]
            path = ".".join(str(p) for p in err["loc"])
            raise ConfigError(f"sweep point {overrides}: {err['msg']}", path or None) from None
        points.append((overrides, point))
    return points
