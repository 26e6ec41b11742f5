"""Unitary propagation of state vectors and observable extraction.

Every Hamiltonian in this package is time independent, so all three methods
evaluate ``psi(t) = exp(-i H t) psi0`` on a uniform time grid:

``dense_expm``
    Exact diagonalisation of the invariant block of ``H`` that contains the
    support of ``psi0`` (found from the sparsity graph of ``H``).  Used as the
    reference oracle; refuses blocks larger than ``DENSE_BLOCK_LIMIT``.
``krylov``
    Lanczos projection with full reorthogonalisation and adaptive sub-steps,
    driven purely by sparse matrix-vector products.
``rk_adaptive``
    Explicit Runge-Kutta (DOP853) on the Schrodinger equation, for
    cross-validation only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.csgraph import connected_components

from .errors import BasisMismatchError, ConvergenceError, FrameMismatchError, NotHermitianError
from .hilbert import SparseOperator, StateVector, TensorBasis, level_projector_sum, number

Method = Literal["auto", "dense_expm", "krylov", "rk_adaptive"]

DENSE_BLOCK_LIMIT = 4096
AUTO_DENSE_LIMIT = 256
TRUNCATION_LIMIT = 1e-6
KRYLOV_TOL_FLOOR = 1e-14


@dataclass(frozen=True)
class PropagationConfig:
    t_final: float
    n_samples: int = 256
    method: Method = "auto"
    tolerance: float = 1e-9
    krylov_dim: int = 30

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError(f"t_final must be > 0, got {self.t_final}")
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {self.n_samples}")
        if self.method not in ("auto", "dense_expm", "krylov", "rk_adaptive"):
            raise ValueError(f"unknown propagation method {self.method!r}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_samples)


@dataclass
class Trajectory:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    final_state: StateVector
    truncation_max: float
    norm_drift: float
    energy_drift: float
    energy_scale: float
    method: str
    tolerance: float
    flags: list[str] = field(default_factory=list)

    @property
    def truncation_ok(self) -> bool:
        return self.truncation_max <= TRUNCATION_LIMIT

    @property
    def unitary_ok(self) -> bool:
        return self.norm_drift < 10 * self.tolerance

    @property
    def energy_ok(self) -> bool:
        return self.energy_drift < 10 * self.tolerance * self.energy_scale

    @property
    def valid(self) -> bool:
        return self.truncation_ok and self.unitary_ok and self.energy_ok


# -- steppers ----------------------------------------------------------------------


def _invariant_block(h: sp.csr_matrix, support: np.ndarray) -> np.ndarray:
    pattern = (h != 0).astype(np.int8)
    _, labels = connected_components(pattern, directed=False)
    wanted = np.unique(labels[support])
    return np.flatnonzero(np.isin(labels, wanted))


def _dense_states(h: sp.csr_matrix, psi0: np.ndarray, times: np.ndarray):
    support = np.flatnonzero(psi0)
    idx = _invariant_block(h, support)
    if idx.size > DENSE_BLOCK_LIMIT:
        raise ConvergenceError(
            f"dense_expm: invariant block of dimension {idx.size} exceeds {DENSE_BLOCK_LIMIT}; use krylov"
        )
    block = h[idx][:, idx].toarray()
    evals, evecs = np.linalg.eigh(block)
    coeffs = evecs.conj().T @ psi0[idx]
    out = np.zeros_like(psi0)
    for k, t in enumerate(times):
        if k == 0:
            yield psi0.copy()
            continue
        out[idx] = evecs @ (np.exp(-1j * evals * t) * coeffs)
        yield out.copy()


def lanczos_expm(matvec, v: np.ndarray, dt: float, m_max: int, tol: float):
    """Approximate ``exp(-i H dt) v`` in a Lanczos subspace of at most ``m_max`` vectors.

    Returns ``(w, err)``; ``w`` is ``None`` when the a-posteriori error
    estimate ``beta_m |e_m^T exp(-i T dt) e_1|`` never drops below ``tol``.
    """
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return np.zeros_like(v), 0.0
    n = v.size
    basis = np.empty((m_max + 1, n), dtype=np.complex128)
    basis[0] = v / beta0
    alphas, betas = [], []
    err = math.inf
    for k in range(m_max):
        w = matvec(basis[k])
        alpha = float(np.vdot(basis[k], w).real)
        w = w - alpha * basis[k]
        if k:
            w = w - betas[-1] * basis[k - 1]
        w = w - basis[: k + 1].T @ (basis[: k + 1].conj() @ w)
        beta = float(np.linalg.norm(w))
        alphas.append(alpha)
        evals, evecs = eigh_tridiagonal(np.array(alphas), np.array(betas)) if k else (np.array(alphas), np.ones((1, 1)))
        c = evecs @ (np.exp(-1j * evals * dt) * evecs[0].conj())
        err = beta0 * beta * abs(c[-1])
        breakdown = beta <= 1e-13 * max(1.0, abs(alpha))
        if err <= tol or breakdown:
            return beta0 * (basis[: k + 1].T @ c), err
        betas.append(beta)
        basis[k + 1] = w / beta
    return None, err


def _krylov_states(h: sp.csr_matrix, psi0: np.ndarray, times: np.ndarray, tol: float, m_max: int):
    t_final = times[-1]
    matvec = h.__matmul__
    psi = psi0.copy()
    yield psi.copy()
    step = times[1] - times[0]
    min_step = t_final * 1e-12
    for k in range(1, times.size):
        remaining = times[k] - times[k - 1]
        while remaining > 0:
            dt = min(step, remaining)
            # roundoff puts a floor under the achievable error estimate
            local_tol = max(tol * dt / t_final, KRYLOV_TOL_FLOOR)
            new, err = lanczos_expm(matvec, psi, dt, m_max, local_tol)
            if new is None:
                step = dt / 2
                if step < min_step:
                    raise ConvergenceError(
                        f"krylov: step shrank below {min_step:.3g} at t={times[k - 1] + (times[k] - times[k - 1] - remaining):.6g} "
                        f"(last error estimate {err:.3g}, tolerance {local_tol:.3g})"
                    )
                continue
            psi = new
            remaining -= dt
            if dt == step and err < 0.01 * local_tol:
                step *= 2
        yield psi.copy()


def _rk_states(h: sp.csr_matrix, psi0: np.ndarray, times: np.ndarray, tol: float):
    sol = solve_ivp(
        lambda t, y: -1j * (h @ y),
        (times[0], times[-1]),
        psi0,
        method="DOP853",
        t_eval=times,
        # global error accumulates over many steps, so ask the integrator for more
        rtol=tol * 1e-2,
        atol=tol * 1e-4,
    )
    if not sol.success:
        raise ConvergenceError(f"rk_adaptive: {sol.message}")
    for k in range(times.size):
        yield sol.y[:, k] if k else psi0.copy()


# -- public API ---------------------------------------------------------------------


ObservableSpec = Union[Mapping[str, SparseOperator], Sequence[SparseOperator], None]


def _named(observables: ObservableSpec) -> dict[str, SparseOperator]:
    if observables is None:
        return {}
    if isinstance(observables, Mapping):
        return dict(observables)
    return {f"obs{k}": op for k, op in enumerate(observables)}


def _top_level_masks(basis: TensorBasis) -> list[np.ndarray]:
    _, n1, n2 = basis.labels
    masks = []
    if basis.fock_cutoff_1 > 0:
        masks.append(n1 == basis.fock_cutoff_1)
    if basis.fock_cutoff_2 > 0:
        masks.append(n2 == basis.fock_cutoff_2)
    return masks


def resolve_method(H: SparseOperator, psi0: StateVector, method: Method) -> str:
    if method != "auto":
        return method
    block = _invariant_block(H.matrix, np.flatnonzero(psi0.amplitudes))
    return "dense_expm" if block.size <= AUTO_DENSE_LIMIT else "krylov"


def propagate(
    H: SparseOperator,
    psi0: StateVector,
    cfg: PropagationConfig,
    observables: ObservableSpec = None,
    overlaps: Optional[Mapping[str, StateVector]] = None,
) -> Trajectory:
    """Evolve ``psi0`` under ``H`` and record observables on a uniform grid.

    Parameters
    ----------
    H : SparseOperator
        Time-independent Hermitian Hamiltonian (hbar = 1).
    psi0 : StateVector
        Normalized initial state on the same basis.
    cfg : PropagationConfig
    observables : mapping or sequence of SparseOperator, optional
        Each series is ``Re <psi(t)|O|psi(t)>``.  Hermitian observables must
        have an imaginary residual below ``1e-9`` (relative).  Unnamed
        observables are recorded as ``obs0``, ``obs1``, ...
    overlaps : mapping of StateVector, optional
        Each series is ``|<phi|psi(t)>|^2``.

    Returns
    -------
    Trajectory
        Also records the maximum population of the top Fock level of every
        mode present (cutoff > 0), the norm drift and the drift of ``<H>``.
    """
    basis = H.basis
    if psi0.basis != basis:
        raise BasisMismatchError("initial state and Hamiltonian live on different bases")
    if not H.is_hermitian:
        raise NotHermitianError(f"Hamiltonian is not Hermitian (residual {H.hermitian_residual():.3g})")
    if abs(psi0.norm() - 1.0) > 1e-9:
        raise ValueError(f"initial state must be normalized, norm = {psi0.norm():.12g}")
    named = _named(observables)
    for name, op in named.items():
        if op.basis != basis:
            raise BasisMismatchError(f"observable {name!r} lives on a different basis")
        if op.frame and H.frame and op.frame != H.frame:
            raise FrameMismatchError(f"observable {name!r} is a {op.frame}-frame operator, H is {H.frame}-frame")
    overlaps = dict(overlaps or {})
    for name, phi in overlaps.items():
        if phi.basis != basis:
            raise BasisMismatchError(f"overlap target {name!r} lives on a different basis")

    times = cfg.times
    method = resolve_method(H, psi0, cfg.method)
    h = H.matrix
    psi_init = psi0.amplitudes.astype(np.complex128)
    if method == "dense_expm":
        states = _dense_states(h, psi_init, times)
    elif method == "krylov":
        states = _krylov_states(h, psi_init, times, cfg.tolerance, cfg.krylov_dim)
    elif method == "rk_adaptive":
        states = _rk_states(h, psi_init, times, cfg.tolerance)
    else:
        raise ValueError(f"unknown propagation method {method!r}")

    series = {name: np.empty(times.size) for name in named}
    series.update({name: np.empty(times.size) for name in overlaps})
    masks = _top_level_masks(basis)
    norms = np.empty(times.size)
    energies = np.empty(times.size)
    truncation = 0.0
    psi = psi_init
    for k, psi in enumerate(states):
        pops = np.abs(psi) ** 2
        norms[k] = math.sqrt(pops.sum())
        energies[k] = float(np.vdot(psi, h @ psi).real)
        for mask in masks:
            truncation = max(truncation, float(pops[mask].sum()))
        for name, op in named.items():
            value = np.vdot(psi, op.matrix @ psi)
            scale = max(1.0, op.max_abs())
            if op.is_hermitian and abs(value.imag) > 1e-9 * scale:
                raise NotHermitianError(f"observable {name!r} has imaginary expectation {value.imag:.3g}")
            series[name][k] = value.real
        for name, phi in overlaps.items():
            series[name][k] = abs(np.vdot(phi.amplitudes, psi)) ** 2

    spectral = float(abs(h).sum(axis=1).max()) if h.nnz else 0.0
    traj = Trajectory(
        times=times,
        observables=series,
        final_state=StateVector(basis, psi.copy()),
        truncation_max=truncation,
        norm_drift=float(np.max(np.abs(norms - 1.0))),
        energy_drift=float(np.max(np.abs(energies - energies[0]))),
        energy_scale=abs(energies[0]) + spectral,
        method=method,
        tolerance=cfg.tolerance,
    )
    if not traj.truncation_ok:
        traj.flags.append(f"top Fock level population {truncation:.3g} exceeds {TRUNCATION_LIMIT}")
    if not traj.unitary_ok:
        traj.flags.append(f"norm drift {traj.norm_drift:.3g} exceeds 10x tolerance")
    if not traj.energy_ok:
        traj.flags.append(f"energy drift {traj.energy_drift:.3g} exceeds 10x tolerance x scale")
    return traj


def standard_observables(basis: TensorBasis) -> dict[str, SparseOperator]:
    """Photon numbers, level populations (summed and per atom) and total sigma_z.

    Names: ``n1``, ``n2``, ``pop1``..``pop3`` (summed over atoms),
    ``pop{i}_atom{j}`` and ``sigma_z`` (``sum_j s33 - s11``).
    """
    obs = {"n1": number(basis, 1), "n2": number(basis, 2)}
    for level in (1, 2, 3):
        obs[f"pop{level}"] = level_projector_sum(basis, level)
    for j in range(1, basis.n_atoms + 1):
        for level in (1, 2, 3):
            obs[f"pop{level}_atom{j}"] = level_projector_sum(basis, level, atoms=[j])
    obs["sigma_z"] = obs["pop3"] - obs["pop1"]
    return obs


@dataclass(frozen=True)
class FrequencyEstimate:
    omega: float
    uncertainty: float
    constant: bool = False

    @property
    def relative_uncertainty(self) -> float:
        return math.inf if self.omega == 0 else self.uncertainty / abs(self.omega)


def extract_frequency(series, times, *, pad_factor: int = 16) -> FrequencyEstimate:
    """Dominant angular frequency of a uniformly sampled real series.

    The mean is removed, a Hann window applied and the series zero-padded by
    ``pad_factor`` before taking the spectrum.  The peak bin is refined by a
    parabola through the log-magnitudes of its neighbours.  The uncertainty is
    half the padded bin width.  A constant series returns ``omega = 0`` with
    infinite uncertainty and ``constant=True``.
    """
    y = np.asarray(series, dtype=float)
    t = np.asarray(times, dtype=float)
    if y.shape != t.shape or y.size < 4:
        raise ValueError("series and times must be equal-length arrays with at least 4 samples")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("extract_frequency needs a uniform time grid")
    y = y - y.mean()
    if np.max(np.abs(y)) <= 1e-12 * max(1.0, float(np.max(np.abs(series)))):
        return FrequencyEstimate(0.0, math.inf, constant=True)
    n_fft = 1 << int(math.ceil(math.log2(y.size * pad_factor)))
    spectrum = np.abs(np.fft.rfft(y * np.hanning(y.size), n=n_fft))
    k = int(np.argmax(spectrum[1:])) + 1
    offset = 0.0
    if 1 <= k < spectrum.size - 1:
        lo, mid, hi = np.log(spectrum[k - 1 : k + 2] + 1e-300)
        denom = lo - 2 * mid + hi
        if denom < 0:
            offset = 0.5 * (lo - hi) / denom
    bin_width = 2 * math.pi / (n_fft * dt)
    return FrequencyEstimate((k + offset) * bin_width, 0.5 * bin_width)
