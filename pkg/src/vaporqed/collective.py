"""Collective single-excitation states and their 2x2 effective blocks.

The two-dimensional block is spanned by

* ``|psi1> = |1...1> |field>`` (zero excitation, all atoms in level 1), and
* ``|psi2> = |1_A> |field'>`` with ``|1_A> = sum_j g_eff,j |1..3_j..1> / (g_eff,0 sqrt(N_e))``.

For a classical drive ``field = (0, n2)`` and ``field' = (0, n2 - 1)``; for a
single-photon drive ``field = (1, n2)`` and ``field' = (0, n2 - 1)``.  With
the exchange sign used by the builders the block reads
``[[-d/2, -G], [-G, +d/2]]`` (up to a constant), with ``d = D1 + D2`` and
``G = g_eff,0 sqrt(N_e)`` or ``g_eff,0 sqrt(n2 N_e)``.  Populations then
oscillate at ``2 |lambda_+| = 2 sqrt(d^2/4 + G^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .dynamics import FrequencyEstimate, PropagationConfig, Trajectory, extract_frequency, propagate, standard_observables
from .ensemble import EffectiveCoupling, ModeTag, effective_couplings
from .errors import BasisMismatchError, DegenerateCouplingError
from .hilbert import StateVector, TensorBasis, make_basis
from .model import AtomParams, CavityParams, build_classical_drive, build_single_photon, detunings


@dataclass(frozen=True)
class CollectiveBlock:
    mode_tag: ModeTag
    n2: int
    g_eff_0: float
    n_e: float
    two_photon_detuning: float
    hamiltonian_2x2: np.ndarray
    eigenvalues: tuple[float, float]

    @property
    def coupling(self) -> float:
        """Magnitude of the off-diagonal element."""
        return abs(float(self.hamiltonian_2x2[0, 1].real))

    @property
    def rabi_frequency(self) -> float:
        """Population oscillation frequency ``lambda_+ - lambda_-``."""
        return self.eigenvalues[1] - self.eigenvalues[0]


def block_hamiltonian(
    coupling: EffectiveCoupling,
    two_photon_detuning: float = 0.0,
    mode_tag: Optional[ModeTag] = None,
    n2: int = 1,
) -> CollectiveBlock:
    mode_tag = mode_tag or coupling.mode_tag
    if mode_tag == "single_photon":
        if n2 < 1:
            raise ValueError(f"single-photon block needs n2 >= 1, got {n2}")
        g = coupling.g_eff_0 * math.sqrt(n2 * coupling.n_e)
    elif mode_tag == "classical_drive":
        g = coupling.g_eff_0 * math.sqrt(coupling.n_e)
    else:
        raise ValueError(f"unknown mode tag {mode_tag!r}")
    d = two_photon_detuning
    h = np.array([[-0.5 * d, -g], [-g, 0.5 * d]], dtype=np.complex128)
    lam = math.sqrt(0.25 * d * d + g * g)
    return CollectiveBlock(mode_tag, n2, coupling.g_eff_0, coupling.n_e, d, h, (-lam, lam))


@dataclass
class CollectiveState:
    label: Literal["zero_excitation", "one_excitation"]
    vector: StateVector


def build_collective_states(
    basis: TensorBasis,
    coupling: EffectiveCoupling,
    field_sector: tuple[int, int] = (0, 1),
) -> tuple[CollectiveState, CollectiveState]:
    """Zero- and one-excitation collective kets for the given field sector.

    ``field_sector = (n1, n2)`` is the field state of the zero-excitation ket.
    For ``single_photon`` couplings ``n1`` must be 1 and the excited ket
    carries ``(0, n2 - 1)``; for ``classical_drive`` it carries ``(n1, n2 - 1)``.
    """
    n1, n2 = field_sector
    if len(coupling.per_atom) != basis.n_atoms:
        raise BasisMismatchError(f"{len(coupling.per_atom)} couplings for a {basis.n_atoms}-atom basis")
    if coupling.mode_tag == "single_photon":
        if n1 != 1:
            raise ValueError(f"single-photon sector needs n1 = 1 in the zero-excitation ket, got {n1}")
        excited_field = (0, n2 - 1)
    else:
        excited_field = (n1, n2 - 1)
    if n2 < 1:
        raise ValueError(f"field sector needs n2 >= 1, got {n2}")
    g = np.asarray(coupling.per_atom, dtype=float)
    norm = float(np.linalg.norm(g))
    if norm == 0:
        raise DegenerateCouplingError("all effective couplings vanish; the collective excitation is undefined")

    ground = (1,) * basis.n_atoms
    zero = np.zeros(basis.dimension, dtype=np.complex128)
    zero[basis.encode(ground, n1, n2)] = 1.0
    one = np.zeros(basis.dimension, dtype=np.complex128)
    for j, gj in enumerate(g):
        levels = ground[:j] + (3,) + ground[j + 1 :]
        one[basis.encode(levels, *excited_field)] = gj / norm
    return (
        CollectiveState("zero_excitation", StateVector(basis, zero, normalized=True)),
        CollectiveState("one_excitation", StateVector(basis, one, normalized=True)),
    )


@dataclass
class BlockComparison:
    mode_tag: ModeTag
    n2: int
    block: CollectiveBlock
    measured: FrequencyEstimate
    analytic_frequency: float
    leakage_max: float
    absorbed_max: Optional[float]
    collective_to_single_ratio: float
    trajectory: Trajectory = field(repr=False)

    @property
    def relative_error(self) -> float:
        return abs(self.measured.omega - self.analytic_frequency) / self.analytic_frequency


def collective_basis(atoms: Sequence[AtomParams], mode_tag: ModeTag, n2: int = 1) -> TensorBasis:
    """Smallest basis whose top Fock levels are never populated in the block dynamics."""
    if mode_tag == "single_photon":
        return make_basis(len(atoms), 2, n2 + 1)
    return make_basis(len(atoms), 0, n2 + 1)


def verify_block_against_full(
    atoms: Sequence[AtomParams],
    cavity: CavityParams,
    basis: TensorBasis,
    mode_tag: ModeTag,
    n2: int,
    cfg: PropagationConfig,
    *,
    variant: Literal["simplified", "full"] = "simplified",
) -> BlockComparison:
    """Propagate the tensor-basis Hamiltonian and compare with the 2x2 block.

    The state starts in the zero-excitation collective ket.  Reported: the
    largest weight outside ``span{psi1, psi2}``, the population oscillation
    frequency of ``|psi1>`` against ``2 |lambda_+|`` and, for a single-photon
    drive, the largest number of photons absorbed from mode 2.
    """
    coupling = effective_couplings(atoms, cavity, mode_tag)
    if mode_tag == "classical_drive":
        H = build_classical_drive(basis, atoms, cavity, variant=variant)
        sector = (0, n2)
    else:
        H = build_single_photon(basis, atoms, cavity)
        sector = (1, n2)
    psi1, psi2 = build_collective_states(basis, coupling, sector)
    two_photon = float(np.mean([detunings(a, cavity, warn=False).two_photon for a in atoms]))
    block = block_hamiltonian(coupling, two_photon, mode_tag, n2)
    obs = {"n2": standard_observables(basis)["n2"]}
    traj = propagate(H, psi1.vector, cfg, obs, overlaps={"psi1": psi1.vector, "psi2": psi2.vector})
    leakage = float(np.max(1.0 - traj.observables["psi1"] - traj.observables["psi2"]))
    measured = extract_frequency(traj.observables["psi1"], traj.times)
    absorbed = float(np.max(n2 - traj.observables["n2"])) if mode_tag == "single_photon" else None
    g23_max = max(a.g23 for a in atoms)
    return BlockComparison(
        mode_tag=mode_tag,
        n2=n2,
        block=block,
        measured=measured,
        analytic_frequency=block.rabi_frequency,
        leakage_max=max(leakage, 0.0),
        absorbed_max=absorbed,
        collective_to_single_ratio=coupling.collective / g23_max if g23_max else math.inf,
        trajectory=traj,
    )
