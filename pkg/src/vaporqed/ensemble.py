"""Thermal ensembles, effective couplings and large-detuning validity checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import SingularDetuningError
from .model import AtomParams, CavityParams, detunings, doppler_signs

ModeTag = Literal["classical_drive", "single_photon"]


@dataclass(frozen=True)
class EnsembleSpec:
    """Recipe for sampling one realization of an atomic ensemble.

    ``rest_splittings`` are ``(w2 - w1, w3 - w2)`` for an atom at rest.
    With ``coupling_model="gaussian_mode"`` every coupling is scaled by
    ``exp(-r^2 / waist^2)`` for a transverse radius ``r`` drawn uniformly
    over a disk of ``disk_radius``.
    """

    n_atoms: int
    rest_splittings: tuple[float, float]
    g12_max: float
    g23_max: float
    drive_rabi_max: float = 0.0
    temperature_sigma_beta: float = 0.0
    coupling_model: Literal["uniform", "gaussian_mode"] = "uniform"
    waist: float = 1.0
    disk_radius: float = 1.0
    seed: int = 0
    configuration: Literal["ladder", "lambda"] = "ladder"

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")
        if self.temperature_sigma_beta < 0:
            raise ValueError(f"temperature_sigma_beta must be >= 0, got {self.temperature_sigma_beta}")
        if not self.g12_max > 0:
            raise ValueError(f"g12_max must be > 0, got {self.g12_max}")
        if not self.g23_max > 0:
            raise ValueError(f"g23_max must be > 0, got {self.g23_max}")
        if self.drive_rabi_max < 0:
            raise ValueError(f"drive_rabi_max must be >= 0, got {self.drive_rabi_max}")
        if self.coupling_model not in ("uniform", "gaussian_mode"):
            raise ValueError(f"unknown coupling model {self.coupling_model!r}")
        if self.coupling_model == "gaussian_mode" and not (self.waist > 0 and self.disk_radius > 0):
            raise ValueError("gaussian_mode needs waist > 0 and disk_radius > 0")


def sample_ensemble(spec: EnsembleSpec, cavity: CavityParams) -> list[AtomParams]:
    """Draw velocities and couplings for ``spec.n_atoms`` atoms.

    Velocities along the cavity axis are normal with standard deviation
    ``temperature_sigma_beta`` (in units of c).  Draw order is fixed
    (all velocities, then all radii) so a seed reproduces the ensemble exactly.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.temperature_sigma_beta > 0:
        betas = rng.normal(0.0, spec.temperature_sigma_beta, spec.n_atoms)
    else:
        betas = np.zeros(spec.n_atoms)
    if spec.coupling_model == "gaussian_mode":
        radii = spec.disk_radius * np.sqrt(rng.uniform(0.0, 1.0, spec.n_atoms))
        profile = np.exp(-(radii**2) / spec.waist**2)
    else:
        profile = np.ones(spec.n_atoms)
    w12, w23 = spec.rest_splittings
    return [
        AtomParams.from_rest(
            w12,
            w23,
            cavity,
            g12=spec.g12_max * p,
            g23=spec.g23_max * p,
            rabi12=spec.drive_rabi_max * p,
            beta=float(b),
            config=spec.configuration,
        )
        for b, p in zip(betas, profile)
    ]


@dataclass(frozen=True)
class EffectiveCoupling:
    per_atom: tuple[float, ...]
    g_eff_0: float
    n_e: float
    mode_tag: ModeTag

    @classmethod
    def from_values(cls, per_atom: Sequence[float], mode_tag: ModeTag = "classical_drive") -> "EffectiveCoupling":
        g = np.asarray(per_atom, dtype=float)
        g0 = float(np.max(np.abs(g))) if g.size else 0.0
        n_e = float(np.sum(g**2) / g0**2) if g0 > 0 else 0.0
        return cls(tuple(float(x) for x in g), g0, n_e, mode_tag)

    @property
    def collective(self) -> float:
        """``g_eff,0 * sqrt(N_e)``, the norm of the coupling vector."""
        return self.g_eff_0 * math.sqrt(self.n_e)


def effective_couplings(atoms: Sequence[AtomParams], cavity: CavityParams, mode_tag: ModeTag) -> EffectiveCoupling:
    """Per-atom two-photon couplings.

    classical_drive: ``Omega12 g23 / (2 D_j)``; single_photon: ``g12 g23 / D_j``.
    """
    values = []
    for j, atom in enumerate(atoms, start=1):
        delta = detunings(atom, cavity, "ladder", warn=False).delta
        if delta == 0:
            raise SingularDetuningError(f"atom {j} has zero detuning")
        if mode_tag == "classical_drive":
            values.append(atom.rabi12 * atom.g23 / (2 * delta))
        elif mode_tag == "single_photon":
            values.append(atom.g12 * atom.g23 / delta)
        else:
            raise ValueError(f"unknown mode tag {mode_tag!r}")
    return EffectiveCoupling.from_values(values, mode_tag)


@dataclass
class ValidityReport:
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    r4: np.ndarray
    g0_1: float
    g0_2: float
    n_e_1: float
    n_e_2: float
    threshold: float
    atom_pass: np.ndarray
    doppler_residual_max: float
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.atom_pass))

    def rows(self) -> list[dict]:
        return [
            {"atom": j + 1, "r1": float(self.r1[j]), "r2": float(self.r2[j]), "r3": float(self.r3[j]),
             "r4": float(self.r4[j]), "pass": bool(self.atom_pass[j])}
            for j in range(len(self.r1))
        ]


def _safe_ratio(num: float, den: float) -> float:
    if den == 0:
        return math.inf if num != 0 else math.nan
    return abs(num) / abs(den)


def _collective(g: np.ndarray) -> tuple[float, float]:
    g0 = float(np.max(g)) if g.size else 0.0
    n_e = float(np.sum(g**2) / g0**2) if g0 > 0 else 0.0
    return g0, n_e


def check_validity(atoms: Sequence[AtomParams], cavity: CavityParams, threshold: float = 0.1) -> ValidityReport:
    """Evaluate the large-detuning sufficient conditions for every atom.

    Ratios: ``r1 = |D1+D2|/|D1|``, ``r2 = |D1+D2|/|D2|``,
    ``r3 = g0(1) sqrt(Ne(1)) / |D|``, ``r4 = g0(2) sqrt(Ne(2)) / |D|``, with
    ``g0(1) = max g12`` and ``Ne(1) = sum g12^2 / g0(1)^2`` (same for g23).
    An atom passes iff every ratio is strictly below ``threshold``; undefined
    ratios (zero denominators) fail and are listed in ``flags``.
    """
    g0_1, n_e_1 = _collective(np.array([a.g12 for a in atoms]))
    g0_2, n_e_2 = _collective(np.array([a.g23 for a in atoms]))
    c1, c2 = g0_1 * math.sqrt(n_e_1), g0_2 * math.sqrt(n_e_2)
    r1, r2, r3, r4, flags = [], [], [], [], []
    for j, atom in enumerate(atoms, start=1):
        d = detunings(atom, cavity, "ladder", warn=False)
        ratios = (
            _safe_ratio(d.two_photon, d.delta1),
            _safe_ratio(d.two_photon, d.delta2),
            _safe_ratio(c1, d.delta),
            _safe_ratio(c2, d.delta),
        )
        for name, value in zip(("r1", "r2", "r3", "r4"), ratios):
            if not math.isfinite(value):
                flags.append(f"atom {j}: {name} undefined (zero detuning)")
        r1.append(ratios[0])
        r2.append(ratios[1])
        r3.append(ratios[2])
        r4.append(ratios[3])
    arr = np.array([r1, r2, r3, r4])
    with np.errstate(invalid="ignore"):
        atom_pass = np.all(np.isfinite(arr) & (arr < threshold), axis=0)
    s1, s2 = doppler_signs(cavity.geometry)
    residual = max((abs(a.beta * (s1 * cavity.omega_c1 + s2 * cavity.omega_c2)) for a in atoms), default=0.0)
    return ValidityReport(
        np.array(r1), np.array(r2), np.array(r3), np.array(r4),
        g0_1, g0_2, n_e_1, n_e_2, threshold, atom_pass, residual, flags,
    )
