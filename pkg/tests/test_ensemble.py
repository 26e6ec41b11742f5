import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vaporqed.ensemble import EffectiveCoupling, EnsembleSpec, check_validity, effective_couplings, sample_ensemble
from vaporqed.model import AtomParams, CavityParams, detunings

CAV = CavityParams(1000.0, 1000.0)


def spec(**kw):
    base = dict(n_atoms=5, rest_splittings=(1050.0, 950.0), g12_max=1.0, g23_max=1.0, drive_rabi_max=2.0)
    base.update(kw)
    return EnsembleSpec(**base)


def identical(n, delta, g=1.0, two_photon=0.0):
    s = EnsembleSpec(n, (CAV.omega_c1 + delta, CAV.omega_c2 - delta + two_photon), g, g)
    return sample_ensemble(s, CAV)


def test_spec_validation():
    with pytest.raises(ValueError):
        spec(n_atoms=0)
    with pytest.raises(ValueError):
        spec(temperature_sigma_beta=-1e-6)
    with pytest.raises(ValueError, match="g12_max"):
        spec(g12_max=0.0)


def test_zero_temperature_gives_zero_velocity():
    assert all(a.beta == 0 for a in sample_ensemble(spec(), CAV))


def test_same_seed_same_ensemble():
    s = spec(temperature_sigma_beta=1e-6, coupling_model="gaussian_mode", seed=123)
    assert sample_ensemble(s, CAV) == sample_ensemble(s, CAV)
    other = sample_ensemble(spec(temperature_sigma_beta=1e-6, coupling_model="gaussian_mode", seed=124), CAV)
    assert other != sample_ensemble(s, CAV)


def test_uniform_couplings_equal():
    atoms = sample_ensemble(spec(temperature_sigma_beta=1e-6), CAV)
    assert len({a.g12 for a in atoms}) == 1 and len({a.g23 for a in atoms}) == 1


def test_velocity_spread_matches_sigma():
    betas = np.array([a.beta for a in sample_ensemble(spec(n_atoms=100_000, temperature_sigma_beta=2e-6, seed=9), CAV)])
    assert abs(betas.mean()) < 0.02 * 2e-6
    assert betas.std() == pytest.approx(2e-6, rel=0.02)


def test_gaussian_mode_couplings_bounded_by_center_value():
    atoms = sample_ensemble(spec(n_atoms=200, coupling_model="gaussian_mode", waist=1.0, disk_radius=1.5, seed=4), CAV)
    g = np.array([a.g12 for a in atoms])
    assert np.all(g <= 1.0) and np.all(g >= math.exp(-(1.5**2)))
    assert np.allclose([a.g23 for a in atoms], g)
    assert np.allclose([a.rabi12 for a in atoms], 2.0 * g)


def test_n_e_examples():
    assert EffectiveCoupling.from_values([0.3] * 5).n_e == pytest.approx(5.0)
    c = EffectiveCoupling.from_values([1.0, 0.5])
    assert c.g_eff_0 == 1.0 and c.n_e == pytest.approx(1.25)
    assert EffectiveCoupling.from_values([0.7]).n_e == 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=1, max_size=12))
def test_n_e_bounds(values):
    c = EffectiveCoupling.from_values(values)
    assert 1.0 - 1e-12 <= c.n_e <= len(values) + 1e-12
    assert c.collective == pytest.approx(float(np.linalg.norm(values)))


def test_effective_coupling_values():
    atoms = sample_ensemble(spec(n_atoms=2, drive_rabi_max=3.0, g23_max=0.5), CAV)
    cd = effective_couplings(atoms, CAV, "classical_drive")
    assert cd.per_atom[0] == pytest.approx(3.0 * 0.5 / (2 * 50.0))
    sp_ = effective_couplings(atoms, CAV, "single_photon")
    assert sp_.per_atom[0] == pytest.approx(1.0 * 0.5 / 50.0)


def test_validity_passes_deep_in_regime():
    g, n = 1.0, 4
    atoms = identical(n, 100 * g * math.sqrt(n))
    report = check_validity(atoms, CAV)
    assert report.passed
    for r in (report.r1, report.r2, report.r3, report.r4):
        assert np.all(r <= 0.01)


def test_validity_zero_delta2_flagged():
    atom = AtomParams(0.0, CAV.omega_c1 + 50.0, CAV.omega_c1 + 50.0 + CAV.omega_c2, 1.0, 1.0)
    assert detunings(atom, CAV, warn=False).delta2 == 0
    report = check_validity([atom], CAV)
    assert not report.passed
    assert math.isinf(report.r2[0])
    assert any("r2" in f for f in report.flags)


def test_validity_boundary_is_strict():
    # r3 = g0 sqrt(Ne) / |D| = 5 / 50 = 0.1 exactly
    atoms = identical(1, 50.0, g=5.0)
    report = check_validity(atoms, CAV, threshold=0.1)
    assert report.r3[0] == 0.1
    assert not report.passed
    assert check_validity(atoms, CAV, threshold=0.1000001).passed


@settings(max_examples=30, deadline=None)
@given(
    delta=st.floats(5.0, 500.0),
    factor=st.floats(1.01, 10.0),
    n=st.integers(1, 6),
    two_photon=st.floats(-1.0, 1.0),
)
def test_validity_ratios_monotone_in_detuning(delta, factor, n, two_photon):
    small = check_validity(identical(n, delta, two_photon=two_photon), CAV)
    large = check_validity(identical(n, delta * factor, two_photon=two_photon), CAV)
    for a, b in ((small.r1, large.r1), (small.r2, large.r2), (small.r3, large.r3), (small.r4, large.r4)):
        assert np.all(b <= a * (1 + 1e-12) + 1e-12)
    if small.passed:
        assert large.passed


def test_validity_rows_and_residual():
    cav = CavityParams(1000.0, 990.0)
    s = EnsembleSpec(3, (1050.0, 940.0), 1.0, 1.0, temperature_sigma_beta=1e-5, seed=2)
    atoms = sample_ensemble(s, cav)
    report = check_validity(atoms, cav)
    assert [r["atom"] for r in report.rows()] == [1, 2, 3]
    expected = max(abs(a.beta * (1000.0 - 990.0)) for a in atoms)
    assert report.doppler_residual_max == pytest.approx(expected)
