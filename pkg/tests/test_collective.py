import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vaporqed.collective import (
    block_hamiltonian,
    build_collective_states,
    collective_basis,
    verify_block_against_full,
)
from vaporqed.dynamics import PropagationConfig
from vaporqed.ensemble import EffectiveCoupling, effective_couplings
from vaporqed.errors import DegenerateCouplingError
from vaporqed.hilbert import make_basis
from vaporqed.model import AtomParams, CavityParams

CAV = CavityParams(1000.0, 1000.0)


def atom(delta=50.0, g12=1.0, g23=1.0, rabi12=1.0, two_photon=0.0):
    return AtomParams.from_rest(
        CAV.omega_c1 + delta, CAV.omega_c2 - delta + two_photon, CAV, g12=g12, g23=g23, rabi12=rabi12
    )


def horizon(freq, periods=30):
    return periods * 2 * math.pi / freq


# -- collective kets ------------------------------------------------------------------


def test_single_atom_excitation_is_level_three():
    basis = make_basis(1, 0, 1)
    zero, one = build_collective_states(basis, EffectiveCoupling.from_values([0.3]), (0, 1))
    assert one.vector.amplitudes[basis.encode((3,), 0, 0)] == 1.0
    assert zero.vector.amplitudes[basis.encode((1,), 0, 1)] == 1.0


@pytest.mark.parametrize("couplings, expected", [([1.0, 1.0], (1 / math.sqrt(2),) * 2), ([1.0, 0.5], (2 / math.sqrt(5), 1 / math.sqrt(5)))])
def test_two_atom_amplitudes(couplings, expected):
    basis = make_basis(2, 0, 1)
    zero, one = build_collective_states(basis, EffectiveCoupling.from_values(couplings), (0, 1))
    amps = one.vector.amplitudes
    assert amps[basis.encode((3, 1), 0, 0)] == pytest.approx(expected[0], abs=1e-15)
    assert amps[basis.encode((1, 3), 0, 0)] == pytest.approx(expected[1], abs=1e-15)
    assert np.count_nonzero(amps) == 2
    assert one.vector.norm() == pytest.approx(1.0, abs=1e-15)
    assert zero.vector.inner(one.vector) == 0


def test_single_photon_sector():
    basis = make_basis(2, 1, 3)
    zero, one = build_collective_states(basis, EffectiveCoupling.from_values([1, 2], "single_photon"), (1, 3))
    assert zero.vector.amplitudes[basis.encode((1, 1), 1, 3)] == 1.0
    assert one.vector.amplitudes[basis.encode((1, 3), 0, 2)] == pytest.approx(2 / math.sqrt(5))
    with pytest.raises(ValueError):
        build_collective_states(basis, EffectiveCoupling.from_values([1, 2], "single_photon"), (0, 3))


def test_degenerate_coupling():
    with pytest.raises(DegenerateCouplingError):
        build_collective_states(make_basis(2, 0, 1), EffectiveCoupling.from_values([0.0, 0.0]), (0, 1))


# -- 2x2 block --------------------------------------------------------------------------


def test_block_examples():
    b = block_hamiltonian(EffectiveCoupling.from_values([1.0] * 4), 0.0, "classical_drive")
    assert b.eigenvalues == pytest.approx((-2.0, 2.0))
    b = block_hamiltonian(EffectiveCoupling.from_values([1.0], "single_photon"), 0.0, "single_photon", n2=4)
    assert b.eigenvalues == pytest.approx((-2.0, 2.0))
    assert b.rabi_frequency == pytest.approx(4.0)
    with pytest.raises(ValueError):
        block_hamiltonian(EffectiveCoupling.from_values([1.0], "single_photon"), 0.0, "single_photon", n2=0)


def test_block_matches_numeric_diagonalization():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        tag = "classical_drive" if rng.uniform() < 0.5 else "single_photon"
        c = EffectiveCoupling.from_values(rng.uniform(0.01, 2.0, n), tag)
        d = float(rng.normal()) if rng.uniform() < 0.5 else 0.0
        n2 = int(rng.integers(1, 10))
        b = block_hamiltonian(c, d, tag, n2)
        numeric = np.linalg.eigvalsh(b.hamiltonian_2x2)
        np.testing.assert_allclose(b.eigenvalues, numeric, rtol=1e-12)
        g = c.collective * (math.sqrt(n2) if tag == "single_photon" else 1.0)
        assert b.eigenvalues[1] == pytest.approx(math.sqrt(d * d / 4 + g * g), rel=1e-12)
        assert b.coupling == pytest.approx(g, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(couplings=st.lists(st.floats(0.05, 2.0), min_size=2, max_size=5), seed=st.integers(0, 1000))
def test_block_invariant_under_atom_permutation(couplings, seed):
    perm = np.random.default_rng(seed).permutation(len(couplings))
    a = block_hamiltonian(EffectiveCoupling.from_values(couplings), 0.3)
    b = block_hamiltonian(EffectiveCoupling.from_values([couplings[i] for i in perm]), 0.3)
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-12)


# -- propagation against the block ------------------------------------------------------


def test_classical_drive_frequency_identical_atoms():
    n = 4
    atoms = [atom(rabi12=2.0, g23=1.0)] * n
    g_eff = 2.0 * 1.0 / (2 * 50.0)
    basis = collective_basis(atoms, "classical_drive")
    cfg = PropagationConfig(horizon(2 * g_eff * math.sqrt(n)), 1024)
    res = verify_block_against_full(atoms, CAV, basis, "classical_drive", 1, cfg)
    assert res.measured.omega == pytest.approx(2 * g_eff * math.sqrt(n), rel=0.01)
    assert res.leakage_max < 1e-9
    assert res.collective_to_single_ratio == pytest.approx(2.0 * math.sqrt(n) / (2 * 50.0))


def test_classical_drive_inhomogeneous_block_closed():
    rng = np.random.default_rng(11)
    atoms = [atom(rabi12=rng.uniform(0.5, 2), g23=rng.uniform(0.5, 1.5)) for _ in range(3)]
    coupling = effective_couplings(atoms, CAV, "classical_drive")
    basis = collective_basis(atoms, "classical_drive")
    cfg = PropagationConfig(horizon(2 * coupling.collective), 1024)
    res = verify_block_against_full(atoms, CAV, basis, "classical_drive", 1, cfg)
    assert res.leakage_max < 1e-9
    assert res.relative_error < 0.01


def test_single_photon_sqrt_n2_and_saturation():
    atoms = [atom(g12=1.0, g23=0.8), atom(g12=0.6, g23=1.0)]
    results = {}
    for n2 in (1, 4, 9):
        basis = collective_basis(atoms, "single_photon", n2)
        g = effective_couplings(atoms, CAV, "single_photon").collective * math.sqrt(n2)
        cfg = PropagationConfig(horizon(2 * g), 1024)
        res = verify_block_against_full(atoms, CAV, basis, "single_photon", n2, cfg)
        assert res.leakage_max < 1e-9
        assert res.absorbed_max <= 1 + 1e-9
        assert res.trajectory.truncation_ok
        results[n2] = res.measured.omega
    assert results[4] / results[1] == pytest.approx(2.0, rel=0.01)
    assert results[9] / results[1] == pytest.approx(3.0, rel=0.01)


def _full_vs_simplified(n, collective):
    # per-atom drive scaled so the collective coupling stays fixed across n
    delta, g23 = 50.0, 1.0
    rabi = 2 * delta * collective / (g23 * math.sqrt(n))
    atoms = [atom(delta=delta, g23=g23, rabi12=rabi)] * n
    basis = collective_basis(atoms, "classical_drive")
    cfg = PropagationConfig(horizon(2 * collective, 40), 2048)
    simp = verify_block_against_full(atoms, CAV, basis, "classical_drive", 1, cfg, variant="simplified")
    full = verify_block_against_full(atoms, CAV, basis, "classical_drive", 1, cfg, variant="full")
    # the mode-2 Stark term vanishes on both collective kets of the n2 = 1 sector,
    # so only the drive-induced shift competes with the collective coupling
    stark = rabi**2 / (4 * delta)
    return abs(full.measured.omega - simp.measured.omega) / simp.measured.omega, collective / stark


def test_full_agrees_with_simplified_when_collective_dominates():
    err, dominance = _full_vs_simplified(8, 0.005)
    assert dominance >= 20
    assert err < 0.05


def test_full_vs_simplified_error_decreases_with_n():
    errors = [_full_vs_simplified(n, 0.02)[0] for n in (1, 2, 4, 8)]
    assert all(b < a for a, b in itertools.pairwise(errors))
