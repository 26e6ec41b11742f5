"""Composite Hilbert space (3 levels)^N x Fock(mode 1) x Fock(mode 2).

Basis ordering is atom-major, then mode 1, then mode 2, in C (row-major)
order: atom 1 is the most significant digit and the mode-2 photon number the
least significant.  Atomic levels are labelled 1, 2, 3 at every public
interface; internally a level ``i`` is stored as digit ``i - 1``.

All operators are kept as canonical CSR matrices (sorted indices, no
duplicate entries) wrapped in :class:`SparseOperator`, which also carries the
basis and the frame the operator was built in.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import BasisMismatchError, CapacityError, FrameMismatchError

ATOM_LEVELS = 3
DEFAULT_DIMENSION_CAP = 2_000_000
ORDERING_TAG = "atom-major/mode1/mode2"

_HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class TensorBasis:
    n_atoms: int
    fock_cutoff_1: int
    fock_cutoff_2: int
    atom_levels: int = ATOM_LEVELS

    @property
    def dimension(self) -> int:
        return self.atom_levels**self.n_atoms * (self.fock_cutoff_1 + 1) * (self.fock_cutoff_2 + 1)

    @property
    def atom_dimension(self) -> int:
        return self.atom_levels**self.n_atoms

    @property
    def shape(self) -> tuple:
        """Factor dimensions in storage order."""
        return (self.atom_levels,) * self.n_atoms + (self.fock_cutoff_1 + 1, self.fock_cutoff_2 + 1)

    def encode(self, levels: Sequence[int], n1: int, n2: int) -> int:
        """Index of the product ket ``|levels; n1, n2>`` (levels are 1-based)."""
        if len(levels) != self.n_atoms:
            raise ValueError(f"expected {self.n_atoms} atomic levels, got {len(levels)}")
        for lev in levels:
            if not 1 <= lev <= self.atom_levels:
                raise ValueError(f"atomic level {lev} out of range 1..{self.atom_levels}")
        if not 0 <= n1 <= self.fock_cutoff_1:
            raise ValueError(f"n1={n1} outside 0..{self.fock_cutoff_1}")
        if not 0 <= n2 <= self.fock_cutoff_2:
            raise ValueError(f"n2={n2} outside 0..{self.fock_cutoff_2}")
        digits = tuple(lev - 1 for lev in levels) + (n1, n2)
        return int(np.ravel_multi_index(digits, self.shape))

    def decode(self, index: int) -> tuple[tuple[int, ...], int, int]:
        if not 0 <= index < self.dimension:
            raise IndexError(f"index {index} outside basis of dimension {self.dimension}")
        digits = np.unravel_index(index, self.shape)
        levels = tuple(int(d) + 1 for d in digits[: self.n_atoms])
        return levels, int(digits[-2]), int(digits[-1])

    @cached_property
    def labels(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised decode of every index.

        Returns ``(levels, n1, n2)`` where ``levels`` has shape
        ``(dimension, n_atoms)`` with 1-based level labels.
        """
        digits = np.unravel_index(np.arange(self.dimension), self.shape)
        levels = np.stack(digits[: self.n_atoms], axis=1).astype(np.int64) + 1
        if self.n_atoms == 0:
            levels = levels.reshape(self.dimension, 0)
        return levels, digits[-2].astype(np.int64), digits[-1].astype(np.int64)


def make_basis(n_atoms: int, cutoff1: int, cutoff2: int, *, max_dimension: int = DEFAULT_DIMENSION_CAP) -> TensorBasis:
    """Build a :class:`TensorBasis`, refusing dimensions above ``max_dimension``."""
    if n_atoms < 1:
        raise ValueError(f"n_atoms must be >= 1, got {n_atoms}")
    if cutoff1 < 0 or cutoff2 < 0:
        raise ValueError(f"Fock cutoffs must be >= 0, got ({cutoff1}, {cutoff2})")
    dim = ATOM_LEVELS**n_atoms * (cutoff1 + 1) * (cutoff2 + 1)
    if dim > max_dimension:
        raise CapacityError(
            f"basis dimension 3^{n_atoms} x {cutoff1 + 1} x {cutoff2 + 1} = {dim} "
            f"exceeds the cap of {max_dimension}"
        )
    return TensorBasis(n_atoms, cutoff1, cutoff2)


class SparseOperator:
    """Complex sparse matrix bound to a :class:`TensorBasis`.

    ``frame`` is ``None`` for frame-agnostic operators (number operators,
    projectors) and ``"lab"`` or ``"interaction"`` for Hamiltonians.
    Instances are treated as immutable.
    """

    __slots__ = ("basis", "matrix", "frame", "_hermitian")

    def __init__(self, basis: TensorBasis, matrix, frame: Optional[str] = None):
        m = sp.csr_matrix(matrix, dtype=np.complex128, copy=True)
        if m.shape != (basis.dimension, basis.dimension):
            raise BasisMismatchError(f"matrix shape {m.shape} does not match basis dimension {basis.dimension}")
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        self.basis = basis
        self.matrix = m
        self.frame = frame
        self._hermitian = None

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def entries(self) -> list[tuple[int, int, complex]]:
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def element(self, row: int, col: int) -> complex:
        return complex(self.matrix[row, col])

    def max_abs(self) -> float:
        return float(np.abs(self.matrix.data).max()) if self.matrix.nnz else 0.0

    def hermitian_residual(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    @property
    def is_hermitian(self) -> bool:
        if self._hermitian is None:
            scale = max(1.0, self.max_abs())
            self._hermitian = self.hermitian_residual() <= _HERMITIAN_ATOL * scale
        return self._hermitian

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.matrix.data)))

    def dag(self) -> "SparseOperator":
        return SparseOperator(self.basis, self.matrix.conj().T, self.frame)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def with_frame(self, frame: Optional[str]) -> "SparseOperator":
        out = SparseOperator.__new__(SparseOperator)
        out.basis, out.matrix, out.frame, out._hermitian = self.basis, self.matrix, frame, self._hermitian
        return out

    def _combine_frame(self, other: "SparseOperator") -> Optional[str]:
        if self.basis != other.basis:
            raise BasisMismatchError(f"operators live on different bases: {self.basis} vs {other.basis}")
        if self.frame and other.frame and self.frame != other.frame:
            raise FrameMismatchError(f"cannot combine {self.frame}-frame and {other.frame}-frame operators")
        return self.frame or other.frame

    def __add__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        return SparseOperator(self.basis, self.matrix + other.matrix, self._combine_frame(other))

    def __sub__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        return SparseOperator(self.basis, self.matrix - other.matrix, self._combine_frame(other))

    def __neg__(self):
        return SparseOperator(self.basis, -self.matrix, self.frame)

    def __mul__(self, scalar):
        if isinstance(scalar, SparseOperator):
            return NotImplemented
        return SparseOperator(self.basis, self.matrix * complex(scalar), self.frame)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            return SparseOperator(self.basis, self.matrix @ other.matrix, self._combine_frame(other))
        if isinstance(other, StateVector):
            return apply(self, other)
        return NotImplemented

    def __repr__(self):
        return f"SparseOperator(dim={self.basis.dimension}, nnz={self.nnz}, frame={self.frame!r})"


def commutator(a: SparseOperator, b: SparseOperator) -> SparseOperator:
    return a @ b - b @ a


@dataclass
class StateVector:
    basis: TensorBasis
    amplitudes: np.ndarray
    normalized: bool = field(default=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.basis.dimension,):
            raise BasisMismatchError(
                f"amplitude vector of shape {self.amplitudes.shape} does not match dimension {self.basis.dimension}"
            )
        if self.normalized and abs(self.norm() - 1.0) > 1e-9:
            raise ValueError(f"state tagged normalized has norm {self.norm():.12g}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / nrm, normalized=True)

    def inner(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        if self.basis != other.basis:
            raise BasisMismatchError("states live on different bases")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expect(self, op: SparseOperator) -> complex:
        if op.basis != self.basis:
            raise BasisMismatchError("operator and state live on different bases")
        return complex(np.vdot(self.amplitudes, op.matrix @ self.amplitudes))

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def apply(op: SparseOperator, state: StateVector) -> StateVector:
    """Exact sparse matrix-vector product; the result is not renormalized."""
    if op.basis != state.basis:
        raise BasisMismatchError(f"operator basis {op.basis} does not match state basis {state.basis}")
    return StateVector(state.basis, op.matrix @ state.amplitudes)


def basis_state(basis: TensorBasis, levels: Sequence[int], n1: int, n2: int) -> StateVector:
    amps = np.zeros(basis.dimension, dtype=np.complex128)
    amps[basis.encode(levels, n1, n2)] = 1.0
    return StateVector(basis, amps, normalized=True)


def ground_state(basis: TensorBasis, n1: int = 0, n2: int = 0) -> StateVector:
    """All atoms in level 1 with the given photon numbers."""
    return basis_state(basis, (1,) * basis.n_atoms, n1, n2)


# -- elementary operators ---------------------------------------------------


def _ladder(cutoff: int) -> sp.csr_matrix:
    n = np.arange(1, cutoff + 1)
    return sp.diags(np.sqrt(n), offsets=1, shape=(cutoff + 1, cutoff + 1), format="csr", dtype=np.complex128)


def _embed_field(basis: TensorBasis, op1=None, op2=None) -> sp.csr_matrix:
    f1 = op1 if op1 is not None else sp.identity(basis.fock_cutoff_1 + 1, format="csr")
    f2 = op2 if op2 is not None else sp.identity(basis.fock_cutoff_2 + 1, format="csr")
    return sp.kron(sp.identity(basis.atom_dimension, format="csr"), sp.kron(f1, f2), format="csr")


def identity(basis: TensorBasis) -> SparseOperator:
    return SparseOperator(basis, sp.identity(basis.dimension, dtype=np.complex128, format="csr"))


def zero(basis: TensorBasis) -> SparseOperator:
    return SparseOperator(basis, sp.csr_matrix((basis.dimension, basis.dimension), dtype=np.complex128))


def _check_mode(mode) -> None:
    if mode not in (1, 2):
        raise ValueError(f"mode must be 1 or 2, got {mode!r}")


def annihilation(basis: TensorBasis, mode: int) -> SparseOperator:
    """Truncated annihilation operator of cavity ``mode`` (1 or 2)."""
    _check_mode(mode)
    if mode == 1:
        return SparseOperator(basis, _embed_field(basis, op1=_ladder(basis.fock_cutoff_1)))
    return SparseOperator(basis, _embed_field(basis, op2=_ladder(basis.fock_cutoff_2)))


def creation(basis: TensorBasis, mode: int) -> SparseOperator:
    return annihilation(basis, mode).dag()


def number(basis: TensorBasis, mode: int) -> SparseOperator:
    _check_mode(mode)
    cutoff = basis.fock_cutoff_1 if mode == 1 else basis.fock_cutoff_2
    n = sp.diags(np.arange(cutoff + 1, dtype=np.complex128), format="csr")
    if mode == 1:
        return SparseOperator(basis, _embed_field(basis, op1=n))
    return SparseOperator(basis, _embed_field(basis, op2=n))


def atomic_sigma(basis: TensorBasis, atom_index: int, bra_level: int, ket_level: int) -> SparseOperator:
    """``|bra_level><ket_level|`` on atom ``atom_index`` (all 1-based)."""
    if not 1 <= atom_index <= basis.n_atoms:
        raise ValueError(f"atom index {atom_index} outside 1..{basis.n_atoms}")
    for lev in (bra_level, ket_level):
        if not 1 <= lev <= ATOM_LEVELS:
            raise ValueError(f"atomic level {lev} outside 1..{ATOM_LEVELS}")
    single = sp.csr_matrix(([1.0 + 0j], ([bra_level - 1], [ket_level - 1])), shape=(ATOM_LEVELS, ATOM_LEVELS))
    left = sp.identity(ATOM_LEVELS ** (atom_index - 1), format="csr")
    right = sp.identity(
        ATOM_LEVELS ** (basis.n_atoms - atom_index) * (basis.fock_cutoff_1 + 1) * (basis.fock_cutoff_2 + 1),
        format="csr",
    )
    return SparseOperator(basis, sp.kron(sp.kron(left, single, format="csr"), right, format="csr"))


def diagonal(basis: TensorBasis, values: np.ndarray, frame: Optional[str] = None) -> SparseOperator:
    return SparseOperator(basis, sp.diags(np.asarray(values, dtype=np.complex128), format="csr"), frame)


def level_projector_sum(basis: TensorBasis, level: int, atoms: Optional[Iterable[int]] = None) -> SparseOperator:
    """``sum_j sigma_{ll,j}`` over the selected atoms (default: all), built as a diagonal."""
    levels, _, _ = basis.labels
    cols = range(basis.n_atoms) if atoms is None else [j - 1 for j in atoms]
    counts = np.zeros(basis.dimension)
    for c in cols:
        counts += levels[:, c] == level
    return diagonal(basis, counts)


# -- StateVector serialization ------------------------------------------------
#
# Layout (all integers and doubles little-endian):
#   offset  size  field
#   0       8     magic b"VQSTATE1"
#   8       1     ordering tag (1 = atom-major/mode1/mode2)
#   9       1     endianness tag (ord('<'))
#   10      1     precision tag (8 = IEEE-754 binary64 per real component)
#   11      1     reserved (0)
#   12      4     n_atoms      (uint32)
#   16      4     fock_cutoff_1 (uint32)
#   20      4     fock_cutoff_2 (uint32)
#   24      8     dimension    (uint64)
#   32      16*d  amplitudes as interleaved (real, imag) float64 pairs

STATE_MAGIC = b"VQSTATE1"
_HEADER = struct.Struct("<8sBBBBIIIQ")


def state_to_bytes(state: StateVector) -> bytes:
    b = state.basis
    header = _HEADER.pack(STATE_MAGIC, 1, ord("<"), 8, 0, b.n_atoms, b.fock_cutoff_1, b.fock_cutoff_2, b.dimension)
    body = np.empty(2 * b.dimension, dtype="<f8")
    body[0::2] = state.amplitudes.real
    body[1::2] = state.amplitudes.imag
    return header + body.tobytes()


def state_from_bytes(data: bytes) -> StateVector:
    if len(data) < _HEADER.size:
        raise ValueError("truncated state header")
    magic, ordering, endian, precision, _, n_atoms, c1, c2, dim = _HEADER.unpack_from(data)
    if magic != STATE_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if ordering != 1 or endian != ord("<") or precision != 8:
        raise ValueError(f"unsupported state encoding (ordering={ordering}, endian={endian}, precision={precision})")
    basis = TensorBasis(n_atoms, c1, c2)
    if basis.dimension != dim:
        raise ValueError(f"header dimension {dim} inconsistent with basis dimension {basis.dimension}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * dim:
        raise ValueError(f"expected {2 * dim} doubles, found {body.size}")
    return StateVector(basis, body[0::2] + 1j * body[1::2])


def save_state(path, state: StateVector) -> None:
    with open(path, "wb") as fh:
        fh.write(state_to_bytes(state))


def load_state(path) -> StateVector:
    with open(path, "rb") as fh:
        return state_from_bytes(fh.read())
