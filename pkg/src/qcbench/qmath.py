"""Core linear-algebra objects for channel and state analysis.

Conventions used across the package:

* Qubit 0 is the slowest-varying (most significant) bit of a basis index,
  so a bitstring reads left to right as qubit 0, qubit 1, ...
* The n-qubit Pauli basis is ordered lexicographically with I < X < Y < Z
  and qubit 0 as the slowest digit (``II, IX, IY, IZ, XI, ...``).
* The Pauli transfer matrix (PTM) of a channel ``Phi`` is
  ``S[i, j] = Tr[P_i Phi(P_j)] / d`` with ``d = 2**n``; it is real for
  Hermiticity-preserving maps and acts on coefficient vectors
  ``c_j = Tr[P_j rho]`` (so ``rho = (1/d) sum_j c_j P_j``).
* The Choi state of ``Phi`` is normalised to unit trace:
  ``C = (1/d^2) sum_ij S_ij conj(P_j) (x) P_i``, equivalently
  ``(id (x) Phi)`` applied to the maximally entangled state
  ``|Omega><Omega|`` with ``|Omega> = sum_i |ii> / sqrt(d)``.  The first
  tensor factor is the input side.  (Much of the literature scales the
  Choi matrix to trace ``d``; this module keeps unit trace so it is a
  density matrix.)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PAULI_I",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "PAULI_LABELS",
    "PauliString",
    "KrausChannel",
    "pauli_matrix",
    "pauli_basis",
    "validate_density_matrix",
    "is_unitary",
    "psd_sqrt",
    "trace_norm",
    "partial_trace",
    "apply_kraus",
    "ptm_from_kraus",
    "ptm_from_unitary",
    "choi_from_kraus",
    "choi_from_ptm",
    "state_fidelity",
    "process_fidelity",
    "depolarizing_ptm_fidelity",
    "haar_random_unitary",
    "haar_random_state",
    "diamond_distance",
]

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)

PAULI_LABELS = "IXYZ"
_PAULI_BY_LETTER = {
    "I": PAULI_I,
    "X": PAULI_X,
    "Y": PAULI_Y,
    "Z": PAULI_Z,
}


def pauli_matrix(label: str) -> np.ndarray:
    """Return the matrix of a multi-qubit Pauli such as ``"XIZ"``.

    Qubit 0 corresponds to the leftmost letter (slowest tensor factor).
    """
    if not label or any(ch not in _PAULI_BY_LETTER for ch in label):
        raise ValueError(f"invalid Pauli label {label!r}")
    mat = _PAULI_BY_LETTER[label[0]]
    for ch in label[1:]:
        mat = np.kron(mat, _PAULI_BY_LETTER[ch])
    return mat


@lru_cache(maxsize=8)
def pauli_basis(num_qubits: int) -> tuple[np.ndarray, ...]:
    """All ``4**n`` Pauli matrices in lexicographic order (I<X<Y<Z, qubit 0 slowest)."""
    if num_qubits < 1:
        raise ValueError("num_qubits must be >= 1")
    mats = []
    for letters in product(PAULI_LABELS, repeat=num_qubits):
        mats.append(pauli_matrix("".join(letters)))
    return tuple(mats)


@lru_cache(maxsize=8)
def pauli_labels(num_qubits: int) -> tuple[str, ...]:
    """All ``4**n`` Pauli labels in the same order as :func:`pauli_basis`."""
    return tuple("".join(ls) for ls in product(PAULI_LABELS, repeat=num_qubits))


@dataclass(frozen=True)
class PauliString:
    """A signless multi-qubit Pauli identified by its letter string."""

    label: str

    def __post_init__(self) -> None:
        if not self.label or any(ch not in _PAULI_BY_LETTER for ch in self.label):
            raise ValueError(f"invalid Pauli label {self.label!r}")

    @property
    def num_qubits(self) -> int:
        return len(self.label)

    @property
    def weight(self) -> int:
        """Number of non-identity letters."""
        return sum(1 for ch in self.label if ch != "I")

    @property
    def index(self) -> int:
        """Position in the lexicographic Pauli ordering (base-4 digits)."""
        idx = 0
        for ch in self.label:
            idx = 4 * idx + PAULI_LABELS.index(ch)
        return idx

    @classmethod
    def from_index(cls, index: int, num_qubits: int) -> "PauliString":
        if not 0 <= index < 4**num_qubits:
            raise ValueError("Pauli index out of range")
        letters = []
        for _ in range(num_qubits):
            letters.append(PAULI_LABELS[index % 4])
            index //= 4
        return cls("".join(reversed(letters)))

    def matrix(self) -> np.ndarray:
        return pauli_matrix(self.label)


def _as_square(mat: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(mat, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    return arr


def validate_density_matrix(rho: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity; return as complex128."""
    arr = _as_square(rho, "density matrix")
    if not np.allclose(arr, arr.conj().T, atol=atol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(arr).real - 1.0) > atol or abs(np.trace(arr).imag) > atol:
        raise ValueError("density matrix does not have unit trace")
    eigvals = np.linalg.eigvalsh(arr)
    if eigvals.min() < -atol:
        raise ValueError(f"density matrix has negative eigenvalue {eigvals.min():.3e}")
    return arr


def is_unitary(mat: np.ndarray, atol: float = 1e-9) -> bool:
    arr = _as_square(mat, "matrix")
    return bool(np.allclose(arr @ arr.conj().T, np.eye(arr.shape[0]), atol=atol))


def psd_sqrt(mat: np.ndarray, neg_tol: float = 1e-9) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in ``[-neg_tol, 0)`` are clipped to zero; anything more
    negative raises, so silent use on indefinite input is impossible.
    """
    arr = _as_square(mat, "matrix")
    eigvals, eigvecs = np.linalg.eigh(arr)
    if eigvals.min() < -neg_tol:
        raise ValueError(f"matrix is not PSD (min eigenvalue {eigvals.min():.3e})")
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.conj().T


def trace_norm(mat: np.ndarray) -> float:
    """Sum of singular values (Schatten 1-norm)."""
    arr = _as_square(mat, "matrix")
    return float(np.linalg.svd(arr, compute_uv=False).sum())


def partial_trace(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out all subsystems not listed in ``keep``.

    ``dims`` are the subsystem dimensions in tensor order; ``keep`` lists the
    subsystem indices to retain (order preserved).
    """
    arr = _as_square(mat, "matrix")
    dims = list(dims)
    if int(np.prod(dims)) != arr.shape[0]:
        raise ValueError("dims do not match matrix size")
    keep = list(keep)
    n = len(dims)
    tensor = arr.reshape(dims + dims)
    # Trace the complement, highest subsystem first so the row-axis positions
    # of the remaining subsystems are unaffected; the matching column axis of
    # row axis `sub` always sits at `sub + (current number of subsystems)`.
    remaining = n
    for sub in sorted(set(range(n)) - set(keep), reverse=True):
        tensor = np.trace(tensor, axis1=sub, axis2=sub + remaining)
        remaining -= 1
    kept_dim = int(np.prod([dims[k] for k in keep])) if keep else 1
    return tensor.reshape(kept_dim, kept_dim)


def apply_kraus(rho: np.ndarray, ops: Iterable[np.ndarray]) -> np.ndarray:
    """Apply ``rho -> sum_k K_k rho K_k^dagger``."""
    arr = _as_square(rho, "density matrix")
    out = np.zeros_like(arr)
    for op in ops:
        out += op @ arr @ op.conj().T
    return out


@dataclass(frozen=True)
class KrausChannel:
    """A CPTP (or general CP) map given by a tuple of Kraus operators."""

    ops: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.ops:
            raise ValueError("KrausChannel needs at least one operator")
        dim = self.ops[0].shape[0]
        cleaned = tuple(np.asarray(op, dtype=np.complex128) for op in self.ops)
        for op in cleaned:
            if op.shape != (dim, dim):
                raise ValueError("all Kraus operators must share one square shape")
        object.__setattr__(self, "ops", cleaned)

    @classmethod
    def from_unitary(cls, unitary: np.ndarray) -> "KrausChannel":
        return cls((np.asarray(unitary, dtype=np.complex128),))

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    @property
    def num_qubits(self) -> int:
        n = int(round(np.log2(self.dim)))
        if 2**n != self.dim:
            raise ValueError("channel dimension is not a power of two")
        return n

    def completeness_defect(self) -> float:
        """``|| sum_k K_k^dagger K_k - I ||_max`` (zero for trace preserving)."""
        acc = sum(op.conj().T @ op for op in self.ops)
        return float(np.abs(acc - np.eye(self.dim)).max())

    def is_trace_preserving(self, atol: float = 1e-10) -> bool:
        return self.completeness_defect() <= atol

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return apply_kraus(rho, self.ops)

    def compose(self, earlier: "KrausChannel") -> "KrausChannel":
        """Channel equal to ``self`` after ``earlier`` (``self o earlier``)."""
        return KrausChannel(tuple(a @ b for a in self.ops for b in earlier.ops))

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        """Tensor product, ``self`` on the slower (first) factor."""
        return KrausChannel(tuple(np.kron(a, b) for a in self.ops for b in other.ops))

    def ptm(self) -> np.ndarray:
        return ptm_from_kraus(self.ops)

    def choi(self) -> np.ndarray:
        return choi_from_kraus(self.ops)


def ptm_from_kraus(ops: Sequence[np.ndarray]) -> np.ndarray:
    """PTM ``S[i, j] = Tr[P_i sum_k K_k P_j K_k^dagger] / d``."""
    first = _as_square(ops[0], "Kraus operator")
    dim = first.shape[0]
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError("Kraus operators must act on qubits (dimension 2**n)")
    basis = pauli_basis(n)
    size = 4**n
    out = np.empty((size, size), dtype=np.float64)
    transformed = []
    for pj in basis:
        acc = np.zeros((dim, dim), dtype=np.complex128)
        for op in ops:
            acc += op @ pj @ op.conj().T
        transformed.append(acc)
    for i, pi in enumerate(basis):
        for j in range(size):
            val = np.trace(pi @ transformed[j]) / dim
            out[i, j] = val.real
    return out


def ptm_from_unitary(unitary: np.ndarray) -> np.ndarray:
    return ptm_from_kraus([np.asarray(unitary, dtype=np.complex128)])


def choi_from_kraus(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Unit-trace Choi state ``(1/d) sum_k vec(K_k^T) vec(K_k^T)^dagger``.

    ``vec`` is row-major flattening; the first tensor factor is the input
    side, so the identity channel maps to the maximally entangled state.
    """
    first = _as_square(ops[0], "Kraus operator")
    dim = first.shape[0]
    out = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    for op in ops:
        vec = np.asarray(op, dtype=np.complex128).T.reshape(-1)
        out += np.outer(vec, vec.conj())
    return out / dim


def choi_from_ptm(ptm: np.ndarray) -> np.ndarray:
    """Choi state ``(1/d^2) sum_ij S_ij conj(P_j) (x) P_i`` (unit trace)."""
    arr = np.asarray(ptm, dtype=np.float64)
    size = arr.shape[0]
    n = int(round(np.log2(size) / 2))
    if 4**n != size or arr.shape != (size, size):
        raise ValueError("PTM must be 4**n x 4**n")
    basis = pauli_basis(n)
    dim = 2**n
    out = np.zeros((dim * dim, dim * dim), dtype=np.complex128)
    for i, pi in enumerate(basis):
        for j, pj in enumerate(basis):
            if arr[i, j] != 0.0:
                out += arr[i, j] * np.kron(pj.conj(), pi)
    return out / (dim * dim)


def state_fidelity(rho: np.ndarray, sigma: np.ndarray, validate: bool = True) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    When either argument is pure (purity within 1e-9 of one) the cheap and
    numerically stable form ``Tr[rho sigma]`` is used instead.
    """
    a = _as_square(rho, "rho")
    b = _as_square(sigma, "sigma")
    if a.shape != b.shape:
        raise ValueError("states must have equal dimension")
    if validate:
        a = validate_density_matrix(a)
        b = validate_density_matrix(b)
    purity_a = float(np.trace(a @ a).real)
    purity_b = float(np.trace(b @ b).real)
    if purity_a > 1.0 - 1e-9 or purity_b > 1.0 - 1e-9:
        return float(min(1.0, max(0.0, np.trace(a @ b).real)))
    root = psd_sqrt(a)
    inner = psd_sqrt(root @ b @ root)
    val = float(np.trace(inner).real)
    return float(min(1.0, max(0.0, val * val)))


def process_fidelity(
    ptm: np.ndarray,
    target_ptm: np.ndarray,
) -> float:
    """Process (entanglement) fidelity between two channels given as PTMs.

    For a unitary target this is ``Tr[S S_target^T] / d^2``; for a general
    target it falls back to the state fidelity of the two Choi states.
    """
    a = np.asarray(ptm, dtype=np.float64)
    b = np.asarray(target_ptm, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("PTMs must be square and of equal shape")
    size = a.shape[0]
    n = int(round(np.log2(size) / 2))
    if 4**n != size:
        raise ValueError("PTM must be 4**n x 4**n")
    d2 = float(size)
    # Unitary PTMs are orthogonal; test target for orthogonality.
    if np.allclose(b @ b.T, np.eye(size), atol=1e-9):
        return float(np.trace(a @ b.T) / d2)
    choi_a = choi_from_ptm(a)
    choi_b = choi_from_ptm(b)
    return state_fidelity(choi_a, choi_b, validate=False)


def depolarizing_ptm_fidelity(gamma: float, num_qubits: int) -> float:
    """Closed form ``F_pro`` of the ``gamma`` depolarizing channel vs identity.

    Equals ``1 - gamma (d^2 - 1) / d^2``: ``1 - 3 gamma / 4`` for one qubit,
    ``1 - 15 gamma / 16`` for two.
    """
    d2 = float(4**num_qubits)
    return 1.0 - gamma * (d2 - 1.0) / d2


def haar_random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix with phase fix."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    ginibre = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(ginibre)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def haar_random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state vector of dimension ``dim``."""
    vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def diamond_distance(*args, **kwargs):
    """Bounded diamond-norm distance; see :func:`qcbench.diamond.diamond_distance`."""
    from . import diamond as _diamond

    return _diamond.diamond_distance(*args, **kwargs)
