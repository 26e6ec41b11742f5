"""End-to-end experiment kinds run by the command line tool.

Each runner takes a single-point :class:`~vaporqed.config.RunConfig` (no
sweep) and returns a :class:`PointResult`: a flat summary of scalars and a
set of columnar series.  Runners are deterministic in the config and seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .collective import build_collective_states, block_hamiltonian
from .config import RunConfig
from .dynamics import Trajectory, extract_frequency, propagate, standard_observables
from .ensemble import check_validity, effective_couplings, sample_ensemble
from .hilbert import commutator, ground_state, make_basis
from .model import (
    build_classical_drive,
    build_effective_ladder,
    build_effective_lambda,
    build_full_ladder,
    build_single_photon,
    detunings,
    lambda_charges,
)


@dataclass
class Series:
    columns: tuple[str, ...]
    data: np.ndarray
    units: tuple[str, ...] = ()


@dataclass
class PointResult:
    summary: dict
    series: dict[str, Series] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _time_series(traj: Trajectory, name: str, key: str | None = None) -> Series:
    values = traj.observables[key or name]
    return Series(("time", name), np.column_stack([traj.times, values]), ("1/(rad/s)", "dimensionless"))


def _trajectory_summary(prefix: str, traj: Trajectory) -> dict:
    return {
        f"{prefix}method": traj.method,
        f"{prefix}norm_drift": traj.norm_drift,
        f"{prefix}energy_drift": traj.energy_drift,
        f"{prefix}truncation_max": traj.truncation_max,
        f"{prefix}valid": traj.valid,
    }


def _validity_summary(report) -> dict:
    return {
        "validity_pass": report.passed,
        "validity_threshold": report.threshold,
        "validity_max_r1": float(np.max(report.r1)),
        "validity_max_r2": float(np.max(report.r2)),
        "validity_max_r3": float(np.max(report.r3)),
        "validity_max_r4": float(np.max(report.r4)),
        "doppler_residual_max": report.doppler_residual_max,
    }


def _cutoffs(cfg: RunConfig, default1: int, default2: int) -> tuple[int, int]:
    o = cfg.options
    return (
        default1 if o.fock_cutoff_1 is None else o.fock_cutoff_1,
        default2 if o.fock_cutoff_2 is None else o.fock_cutoff_2,
    )


def run_full_vs_effective(cfg: RunConfig) -> PointResult:
    cavity = cfg.cavity_params()
    atoms = sample_ensemble(cfg.ensemble_spec(), cavity)
    n1, n2 = cfg.options.n1, cfg.options.n2
    basis = make_basis(len(atoms), *_cutoffs(cfg, n1 + 1, n2 + 1))
    h_full = build_full_ladder(basis, atoms, cavity)
    h_eff = build_effective_ladder(basis, atoms, cavity, include_vacuum_shift=cfg.options.include_vacuum_shift)
    reference = 2 * effective_couplings(atoms, cavity, "single_photon").collective * math.sqrt(max(n1 * n2, 1))
    pcfg = cfg.propagation_config(reference)
    obs = standard_observables(basis)
    wanted = {k: v for k, v in obs.items() if k.startswith("pop") or k in ("n1", "n2")}
    psi0 = ground_state(basis, n1, n2)
    full = propagate(h_full, psi0, pcfg, wanted)
    eff = propagate(h_eff, psi0, pcfg, wanted)
    level_keys = [k for k in wanted if "_atom" in k]
    discrepancy = max(float(np.max(np.abs(full.observables[k] - eff.observables[k]))) for k in level_keys)
    summary = {
        "discrepancy": discrepancy,
        "t_final": pcfg.t_final,
        "detuning": detunings(atoms[0], cavity, warn=False).delta,
        **_trajectory_summary("full_", full),
        **_trajectory_summary("effective_", eff),
        **_validity_summary(check_validity(atoms, cavity, cfg.options.validity_threshold)),
    }
    series = {}
    for level in (1, 2, 3):
        series[f"pop{level}_full"] = _time_series(full, f"pop{level}_full", f"pop{level}")
        series[f"pop{level}_effective"] = _time_series(eff, f"pop{level}_effective", f"pop{level}")
    series["n2_full"] = _time_series(full, "n2_full", "n2")
    series["n2_effective"] = _time_series(eff, "n2_effective", "n2")
    return PointResult(summary, series)


def _run_block(cfg: RunConfig, mode_tag: str) -> PointResult:
    cavity = cfg.cavity_params()
    atoms = sample_ensemble(cfg.ensemble_spec(), cavity)
    n2 = cfg.options.n2
    if n2 < 1:
        raise ValueError(f"{mode_tag} experiments need options.n2 >= 1")
    if mode_tag == "classical_drive" and n2 != 1:
        # with more than one mode-2 photon the two-state block is not closed
        raise ValueError(f"classical_drive experiments use a single mode-2 photon, got options.n2 = {n2}")
    coupling = effective_couplings(atoms, cavity, mode_tag)
    if mode_tag == "classical_drive":
        basis = make_basis(len(atoms), 0, _cutoffs(cfg, 0, n2 + 1)[1])
        h = build_classical_drive(basis, atoms, cavity, variant=cfg.options.variant)
        sector = (0, n2)
    else:
        basis = make_basis(len(atoms), *_cutoffs(cfg, 2, n2 + 1))
        h = build_single_photon(basis, atoms, cavity)
        sector = (1, n2)
    two_photon = float(np.mean([detunings(a, cavity, warn=False).two_photon for a in atoms]))
    block = block_hamiltonian(coupling, two_photon, mode_tag, n2)
    psi1, psi2 = build_collective_states(basis, coupling, sector)
    pcfg = cfg.propagation_config(block.rabi_frequency)
    obs = standard_observables(basis)
    traj = propagate(
        h, psi1.vector, pcfg, {"n1": obs["n1"], "n2": obs["n2"], "pop3": obs["pop3"]},
        overlaps={"psi1": psi1.vector, "psi2": psi2.vector},
    )
    freq = extract_frequency(traj.observables["psi1"], traj.times)
    leakage = float(np.max(1.0 - traj.observables["psi1"] - traj.observables["psi2"]))
    g23_max = max(a.g23 for a in atoms)
    summary = {
        "n_atoms": len(atoms),
        "n2": n2,
        "g_eff_0": coupling.g_eff_0,
        "n_e": coupling.n_e,
        "two_photon_detuning": two_photon,
        "measured_frequency": freq.omega,
        "frequency_uncertainty": freq.uncertainty,
        "analytic_frequency": block.rabi_frequency,
        "relative_error": abs(freq.omega - block.rabi_frequency) / block.rabi_frequency,
        "leakage_max": max(leakage, 0.0),
        "collective_to_single_ratio": coupling.collective / g23_max if g23_max else math.inf,
        "t_final": pcfg.t_final,
        **_trajectory_summary("", traj),
        **_validity_summary(check_validity(atoms, cavity, cfg.options.validity_threshold)),
    }
    if mode_tag == "single_photon":
        absorbed = float(np.max(n2 - traj.observables["n2"]))
        summary["absorbed_max"] = absorbed
        summary["saturation_ok"] = absorbed <= 1 + 1e-9
    series = {
        "psi1_population": _time_series(traj, "psi1_population", "psi1"),
        "psi2_population": _time_series(traj, "psi2_population", "psi2"),
        "n2": _time_series(traj, "n2"),
        "pop3": _time_series(traj, "pop3"),
    }
    if mode_tag == "single_photon":
        series["n1"] = _time_series(traj, "n1")
    return PointResult(summary, series)


def run_classical_drive(cfg: RunConfig) -> PointResult:
    return _run_block(cfg, "classical_drive")


def run_single_photon(cfg: RunConfig) -> PointResult:
    return _run_block(cfg, "single_photon")


def run_lambda(cfg: RunConfig) -> PointResult:
    cavity = cfg.cavity_params()
    atoms = sample_ensemble(cfg.ensemble_spec(), cavity)
    n1, n2 = cfg.options.n1, cfg.options.n2
    basis = make_basis(len(atoms), *_cutoffs(cfg, n1 + 1, n2 + min(n1, len(atoms)) + 1))
    h = build_effective_lambda(basis, atoms, cavity)
    q1, q2 = lambda_charges(basis)
    scale = max(h.max_abs(), 1.0)
    comm = max(commutator(h, q1).max_abs(), commutator(h, q2).max_abs()) / scale
    couplings = [a.g12 * a.g23 / detunings(a, cavity, "lambda", warn=False).delta for a in atoms]
    reference = 2 * float(np.linalg.norm(couplings)) * math.sqrt(max(n1, 1))
    pcfg = cfg.propagation_config(reference)
    obs = standard_observables(basis)
    traj = propagate(h, ground_state(basis, n1, n2), pcfg, {"n1": obs["n1"], "n2": obs["n2"], "pop3": obs["pop3"], "Q1": q1, "Q2": q2})
    summary = {
        "hermitian_residual": h.hermitian_residual(),
        "charge_commutator_max": comm,
        "Q1_drift": float(np.ptp(traj.observables["Q1"])),
        "Q2_drift": float(np.ptp(traj.observables["Q2"])),
        "transferred_max": float(np.max(traj.observables["n2"]) - n2),
        "t_final": pcfg.t_final,
        **_trajectory_summary("", traj),
    }
    series = {name: _time_series(traj, name) for name in ("n1", "n2", "pop3")}
    return PointResult(summary, series)


def run_validity_scan(cfg: RunConfig) -> PointResult:
    cavity = cfg.cavity_params()
    atoms = sample_ensemble(cfg.ensemble_spec(), cavity)
    report = check_validity(atoms, cavity, cfg.options.validity_threshold)
    rows = report.rows()
    table = np.array([[r["atom"], r["r1"], r["r2"], r["r3"], r["r4"], float(r["pass"])] for r in rows])
    summary = {
        "g0_1": report.g0_1,
        "g0_2": report.g0_2,
        "n_e_1": report.n_e_1,
        "n_e_2": report.n_e_2,
        "flags": list(report.flags),
        **_validity_summary(report),
    }
    series = {"validity_table": Series(("atom", "r1", "r2", "r3", "r4", "pass"), table)}
    return PointResult(summary, series)


RUNNERS = {
    "full_vs_effective": run_full_vs_effective,
    "classical_drive": run_classical_drive,
    "single_photon": run_single_photon,
    "lambda": run_lambda,
    "validity_scan": run_validity_scan,
}


def run_point(cfg: RunConfig) -> PointResult:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = RUNNERS[cfg.experiment](cfg)
    result.warnings = sorted({str(w.message) for w in caught})
    return result
