"""Hamiltonian builders for N three-level atoms in a two-mode cavity.

Units: hbar = 1, every energy is an angular frequency (rad/s or any
consistent scaled unit).  The full and effective ladder builders, and the
Lambda-type builder, return lab-frame operators; the classical-drive and
single-photon builders return interaction-picture operators.  The frame is
stored on the returned :class:`~vaporqed.hilbert.SparseOperator`.

Doppler model.  Each atom's level frequencies are given in the frame in which
the cavity fields have their lab frequencies, i.e. already Doppler shifted.
:meth:`AtomParams.from_rest` shifts the lower transition by
``s1 * beta * omega_c1`` and the upper one by ``s2 * beta * omega_c2`` with
``(s1, s2) = (+1, -1)`` for counterpropagating modes and ``(+1, +1)`` for
copropagating ones, so that the two-photon detuning of a moving atom is
``Delta1 + Delta2 + beta * (omega_c1 -/+ omega_c2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import BasisMismatchError, DetuningWarning, SingularDetuningError
from .hilbert import (
    SparseOperator,
    TensorBasis,
    annihilation,
    atomic_sigma,
    creation,
    diagonal,
    zero,
)

Config = Literal["ladder", "lambda"]
Geometry = Literal["counterpropagating", "copropagating"]

MAX_BETA = 1e-3
RESONANCE_RATIO = 0.05
SINGULAR_RATIO = 1e-6


@dataclass(frozen=True)
class AtomParams:
    omega1: float
    omega2: float
    omega3: float
    g12: float
    g23: float
    rabi12: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        for name in ("g12", "g23", "rabi12"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be real and >= 0, got {value}")
        if not abs(self.beta) < MAX_BETA:
            raise ValueError(f"|beta| must be < {MAX_BETA} (nonrelativistic), got {self.beta}")

    @classmethod
    def from_rest(
        cls,
        splitting12: float,
        splitting23: float,
        cavity: "CavityParams",
        *,
        g12: float,
        g23: float,
        rabi12: float = 0.0,
        beta: float = 0.0,
        omega1: float = 0.0,
        config: Config = "ladder",
    ) -> "AtomParams":
        """Atom with rest-frame splittings ``w2-w1`` and ``w3-w2`` moving at ``beta``.

        ``splitting23`` carries the sign of ``w3 - w2`` (positive for a ladder,
        negative for a Lambda atom whose level 3 lies below level 2).  For a
        Lambda atom mode 2 is absorbed on 3->2, so its Doppler shift enters
        ``w3 - w2`` with the opposite sign.
        """
        s1, s2 = doppler_signs(cavity.geometry)
        if config == "lambda":
            s2 = -s2
        omega2 = omega1 + splitting12 + s1 * beta * cavity.omega_c1
        omega3 = omega2 + splitting23 + s2 * beta * cavity.omega_c2
        return cls(omega1, omega2, omega3, g12, g23, rabi12, beta)


@dataclass(frozen=True)
class CavityParams:
    omega_c1: float
    omega_c2: float
    geometry: Geometry = "counterpropagating"
    standing_wave_factor: float = 1.0

    def __post_init__(self):
        if not (self.omega_c1 > 0 and self.omega_c2 > 0):
            raise ValueError(f"cavity frequencies must be > 0, got ({self.omega_c1}, {self.omega_c2})")
        if self.geometry not in ("counterpropagating", "copropagating"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.standing_wave_factor not in (0.5, 1.0):
            raise ValueError(f"standing_wave_factor must be 0.5 or 1.0, got {self.standing_wave_factor}")

    def interaction_time(self, t: float) -> float:
        """Effective counterpropagating interaction time for a nominal duration ``t``."""
        return t * self.standing_wave_factor


@dataclass(frozen=True)
class DetuningSet:
    delta1: float
    delta2: float
    delta: float
    config: Config

    @property
    def two_photon(self) -> float:
        return self.delta1 + self.delta2


def doppler_signs(geometry: Geometry) -> tuple[int, int]:
    if geometry == "counterpropagating":
        return 1, -1
    if geometry == "copropagating":
        return 1, 1
    raise ValueError(f"unknown geometry {geometry!r}")


def detunings(
    atom: AtomParams,
    cavity: CavityParams,
    config: Config = "ladder",
    *,
    ratio_threshold: float = RESONANCE_RATIO,
    warn: bool = True,
) -> DetuningSet:
    """One-photon detunings of ``atom`` from the two cavity modes.

    Ladder: ``delta1 = w2 - w1 - wc1``, ``delta2 = w3 - w2 - wc2``.
    Lambda: mode 1 drives 1->2 and mode 2 drives 3->2, so
    ``delta1 = w2 - w1 - wc1`` and ``delta2 = w2 - w3 - wc2``.
    """
    d1 = atom.omega2 - atom.omega1 - cavity.omega_c1
    if config == "ladder":
        d2 = atom.omega3 - atom.omega2 - cavity.omega_c2
        mismatch = abs(d1 + d2)
        label = "|delta1 + delta2|"
    elif config == "lambda":
        d2 = atom.omega2 - atom.omega3 - cavity.omega_c2
        mismatch = abs(d1 - d2)
        label = "|delta1 - delta2|"
    else:
        raise ValueError(f"unknown level configuration {config!r}")
    if warn and mismatch > ratio_threshold * abs(d1):
        warnings.warn(
            f"{label} = {mismatch:.4g} is not small compared with |delta1| = {abs(d1):.4g}; "
            "the single-detuning effective Hamiltonian may be inaccurate",
            DetuningWarning,
            stacklevel=2,
        )
    return DetuningSet(d1, d2, d1, config)


def doppler_two_photon_sum(delta1_rest: float, delta2_rest: float, beta: float, cavity: CavityParams) -> float:
    """Two-photon detuning of an atom moving at ``beta`` along the cavity axis.

    Counterpropagating modes give ``D1 + D2 + beta*(wc1 - wc2)``; the
    copropagating contrast case gives ``D1 + D2 + beta*(wc1 + wc2)``.
    """
    if not abs(beta) < MAX_BETA:
        raise ValueError(f"|beta| must be < {MAX_BETA}, got {beta}")
    if cavity.geometry == "counterpropagating":
        return delta1_rest + delta2_rest + beta * (cavity.omega_c1 - cavity.omega_c2)
    warnings.warn("copropagating geometry: the two-photon detuning is Doppler broadened", DetuningWarning, stacklevel=2)
    return delta1_rest + delta2_rest + beta * (cavity.omega_c1 + cavity.omega_c2)


# -- helpers --------------------------------------------------------------------


def _check_atoms(basis: TensorBasis, atoms: Sequence[AtomParams]) -> None:
    if basis.n_atoms != len(atoms):
        raise BasisMismatchError(f"basis holds {basis.n_atoms} atoms but {len(atoms)} AtomParams were given")


def _eliminated_detuning(j: int, atom: AtomParams, dset: DetuningSet) -> float:
    scale = max(atom.g12, atom.g23, atom.rabi12)
    if dset.delta == 0 or abs(dset.delta) < SINGULAR_RATIO * scale:
        raise SingularDetuningError(
            f"atom {j}: detuning {dset.delta!r} is too small for adiabatic elimination "
            f"(couplings up to {scale:.4g})"
        )
    return dset.delta


def _level_masks(basis: TensorBasis):
    levels, n1, n2 = basis.labels
    return [(levels[:, j] == 1, levels[:, j] == 2, levels[:, j] == 3) for j in range(basis.n_atoms)], n1, n2


def _atomic_diagonal(basis: TensorBasis, atoms: Sequence[AtomParams], cavity: CavityParams, levels=(1, 2, 3)):
    masks, n1, n2 = _level_masks(basis)
    diag = cavity.omega_c1 * n1 + cavity.omega_c2 * n2
    diag = diag.astype(np.float64)
    for (m1, m2, m3), atom in zip(masks, atoms):
        energies = {1: (m1, atom.omega1), 2: (m2, atom.omega2), 3: (m3, atom.omega3)}
        for lev in levels:
            mask, w = energies[lev]
            diag = diag + w * mask
    return diag


def _with_hc(op: SparseOperator) -> SparseOperator:
    return op + op.dag()


# -- builders -------------------------------------------------------------------


def build_full_ladder(basis: TensorBasis, atoms: Sequence[AtomParams], cavity: CavityParams) -> SparseOperator:
    """Rotating-wave Hamiltonian of N ladder atoms coupled to two cavity modes."""
    _check_atoms(basis, atoms)
    h = diagonal(basis, _atomic_diagonal(basis, atoms, cavity))
    a1, a2 = annihilation(basis, 1), annihilation(basis, 2)
    for j, atom in enumerate(atoms, start=1):
        if atom.g12:
            h = h + atom.g12 * _with_hc(a1 @ atomic_sigma(basis, j, 2, 1))
        if atom.g23:
            h = h + atom.g23 * _with_hc(a2 @ atomic_sigma(basis, j, 3, 2))
    return h.with_frame("lab")


def build_effective_ladder(
    basis: TensorBasis,
    atoms: Sequence[AtomParams],
    cavity: CavityParams,
    *,
    check_resonance: bool = True,
    include_vacuum_shift: bool = False,
) -> SparseOperator:
    """Effective two-photon Hamiltonian after eliminating level 2.

    ``H0`` is the bare atomic and field energy; the interaction part holds the
    photon-number dependent Stark shifts and the two-photon exchange
    ``-(g12 g23 / D)(a1+ a2+ s13 + a1 a2 s31)``.  The Stark shifts follow the
    normally-ordered form ``-(g12^2/D) n1 (s11 - s22) - (g23^2/D) n2 (s33 - s22)``.

    ``include_vacuum_shift=True`` replaces them by the exact second-order
    shifts, which differ by the vacuum contributions
    (``n2 -> n2 + 1`` on level 3 and ``n1 -> n1 + 1`` on level 2 for the lower
    transition).  This is an opt-in diagnostic, off by default.
    """
    _check_atoms(basis, atoms)
    masks, n1, n2 = _level_masks(basis)
    diag = _atomic_diagonal(basis, atoms, cavity)
    a1d, a2d = creation(basis, 1), creation(basis, 2)
    exchange = zero(basis)
    for j, (atom, (m1, m2, m3)) in enumerate(zip(atoms, masks), start=1):
        dset = detunings(atom, cavity, "ladder", warn=check_resonance)
        delta = _eliminated_detuning(j, atom, dset)
        s12, s23 = atom.g12**2 / delta, atom.g23**2 / delta
        if include_vacuum_shift:
            diag = diag - s12 * (n1 * m1 - (n1 + 1) * m2) - s23 * ((n2 + 1) * m3 - n2 * m2)
        else:
            diag = diag - s12 * n1 * (m1.astype(float) - m2) - s23 * n2 * (m3.astype(float) - m2)
        if atom.g12 and atom.g23:
            exchange = exchange - (atom.g12 * atom.g23 / delta) * _with_hc(a1d @ a2d @ atomic_sigma(basis, j, 1, 3))
    return (diagonal(basis, diag) + exchange).with_frame("lab")


def build_classical_drive(
    basis: TensorBasis,
    atoms: Sequence[AtomParams],
    cavity: CavityParams,
    *,
    variant: Literal["simplified", "full"] = "simplified",
    check_resonance: bool = True,
) -> SparseOperator:
    """Interaction-picture Hamiltonian with mode 1 replaced by a classical drive.

    The basis must not carry mode 1 (``fock_cutoff_1 == 0``).  ``"full"``
    keeps the two-photon detuning, the ``(D1 - D2) s22 / 2`` term and both
    Stark shifts; ``"simplified"`` keeps only the two-photon detuning
    ``(D1 + D2) sz / 2`` and the exchange term.  Both use the exchange sign
    ``-(Omega12 g23 / 2D)(a2+ s13 + a2 s31)``.
    """
    if basis.fock_cutoff_1 != 0:
        raise BasisMismatchError(
            f"classical drive replaces mode 1 by a c-number; build the basis with cutoff1=0 "
            f"(got {basis.fock_cutoff_1})"
        )
    if variant not in ("simplified", "full"):
        raise ValueError(f"variant must be 'simplified' or 'full', got {variant!r}")
    _check_atoms(basis, atoms)
    masks, _, n2 = _level_masks(basis)
    diag = np.zeros(basis.dimension)
    a2d = creation(basis, 2)
    exchange = zero(basis)
    for j, (atom, (m1, m2, m3)) in enumerate(zip(atoms, masks), start=1):
        dset = detunings(atom, cavity, "ladder", warn=check_resonance)
        delta = _eliminated_detuning(j, atom, dset)
        diag = diag + 0.5 * dset.two_photon * (m3.astype(float) - m1)
        if variant == "full":
            diag = diag + 0.5 * (dset.delta1 - dset.delta2) * m2
            diag = diag - atom.rabi12**2 / (4 * delta) * (m1.astype(float) - m2)
            diag = diag - atom.g23**2 / delta * n2 * (m3.astype(float) - m2)
        coupling = atom.rabi12 * atom.g23 / (2 * delta)
        if coupling:
            exchange = exchange - coupling * _with_hc(a2d @ atomic_sigma(basis, j, 1, 3))
    return (diagonal(basis, diag) + exchange).with_frame("interaction")


def build_single_photon(
    basis: TensorBasis,
    atoms: Sequence[AtomParams],
    cavity: CavityParams,
    *,
    check_resonance: bool = True,
) -> SparseOperator:
    """Interaction-picture Hamiltonian for a quantized (single-photon) drive of mode 1.

    ``sum_j [ (D1 + D2) sz_j / 2 - (g12 g23 / D)(a1+ a2+ s13 + a1 a2 s31) ]``,
    i.e. the exchange of the effective ladder Hamiltonian with Stark shifts
    dropped, so that the collective coupling is ``g_eff,j = g12 g23 / D``.
    """
    _check_atoms(basis, atoms)
    masks, _, _ = _level_masks(basis)
    diag = np.zeros(basis.dimension)
    a1d, a2d = creation(basis, 1), creation(basis, 2)
    exchange = zero(basis)
    for j, (atom, (m1, _, m3)) in enumerate(zip(atoms, masks), start=1):
        dset = detunings(atom, cavity, "ladder", warn=check_resonance)
        delta = _eliminated_detuning(j, atom, dset)
        diag = diag + 0.5 * dset.two_photon * (m3.astype(float) - m1)
        coupling = atom.g12 * atom.g23 / delta
        if coupling:
            exchange = exchange - coupling * _with_hc(a1d @ a2d @ atomic_sigma(basis, j, 1, 3))
    return (diagonal(basis, diag) + exchange).with_frame("interaction")


def build_effective_lambda(
    basis: TensorBasis,
    atoms: Sequence[AtomParams],
    cavity: CavityParams,
    *,
    check_resonance: bool = True,
) -> SparseOperator:
    """Effective Hamiltonian for Lambda atoms (levels 1 and 3 below level 2).

    Level 2 is dropped from ``H0`` and from the Stark shifts; the exchange is of
    beam-splitter type, ``-(g12 g23 / D)(a1+ a2 s13 + a1 a2+ s31)``.
    """
    _check_atoms(basis, atoms)
    masks, n1, n2 = _level_masks(basis)
    diag = _atomic_diagonal(basis, atoms, cavity, levels=(1, 3))
    a1d, a2 = creation(basis, 1), annihilation(basis, 2)
    exchange = zero(basis)
    for j, (atom, (m1, _, m3)) in enumerate(zip(atoms, masks), start=1):
        dset = detunings(atom, cavity, "lambda", warn=check_resonance)
        delta = _eliminated_detuning(j, atom, dset)
        diag = diag - atom.g12**2 / delta * n1 * m1 - atom.g23**2 / delta * n2 * m3
        if atom.g12 and atom.g23:
            exchange = exchange - (atom.g12 * atom.g23 / delta) * _with_hc(a1d @ a2 @ atomic_sigma(basis, j, 1, 3))
    return (diagonal(basis, diag) + exchange).with_frame("lab")


# -- conserved quantities -------------------------------------------------------


def excitation_number(basis: TensorBasis) -> SparseOperator:
    """``n1 + n2 + sum_j (s22 + 2 s33)``, conserved by the full ladder Hamiltonian."""
    levels, n1, n2 = basis.labels
    return diagonal(basis, n1 + n2 + (levels - 1).sum(axis=1))


def ladder_charges(basis: TensorBasis) -> tuple[SparseOperator, SparseOperator]:
    """``(n1 + sum s33, n2 + sum s33)``, conserved by the effective ladder Hamiltonian."""
    levels, n1, n2 = basis.labels
    n3 = (levels == 3).sum(axis=1)
    return diagonal(basis, n1 + n3), diagonal(basis, n2 + n3)


def lambda_charges(basis: TensorBasis) -> tuple[SparseOperator, SparseOperator]:
    """``(n1 - sum s11, n2 - sum s33)``, conserved by the Lambda effective Hamiltonian."""
    levels, n1, n2 = basis.labels
    return diagonal(basis, n1 - (levels == 1).sum(axis=1)), diagonal(basis, n2 - (levels == 3).sum(axis=1))
