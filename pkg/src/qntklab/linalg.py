"""Dense complex linear algebra, Pauli-string algebra, and seeded random sampling.

Everything downstream (circuits, kernels, Monte-Carlo oracles) is built on the
primitives here: Kronecker-product Pauli operators, involution-exploiting Pauli
rotations, Haar-distributed unitaries, and reproducible random streams keyed by
a (master seed, stream index) pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

PAULI_LETTERS = "IXYZ"

PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

UNITARY_ATOL = 1e-10
HERMITIAN_ATOL = 1e-12


class RngStream:
    """Deterministic random stream addressed by (master seed, stream index).

    Two streams with the same address produce bit-identical sample sequences
    regardless of process, thread schedule, or creation order.  Substreams are
    derived by extending the index path, so per-trial / per-sample generators
    can be handed out without any shared mutable state.
    """

    def __init__(self, seed: int, index: int | tuple[int, ...] = 0):
        self.seed = int(seed)
        self.index = (int(index),) if isinstance(index, (int, np.integer)) else tuple(int(i) for i in index)
        self._generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.index))
        )

    def substream(self, index: int) -> "RngStream":
        """Derive an independent child stream at the given index."""
        return RngStream(self.seed, self.index + (int(index),))

    def reset(self) -> "RngStream":
        """Fresh stream at the same address (restarts the sample sequence)."""
        return RngStream(self.seed, self.index)

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def __repr__(self):
        return f"RngStream(seed={self.seed}, index={self.index})"


@lru_cache(maxsize=4096)
def _pauli_action(letters: str):
    """Permutation and phase arrays realizing ``P @ v`` in O(D).

    A Pauli string maps basis state ``|b>`` to ``phase(b) * |b ^ flip_mask>``,
    so the dense product reduces to an index gather plus elementwise phases.
    """
    n = len(letters)
    dim = 1 << n
    idx = np.arange(dim)
    flip = 0
    coef = np.ones(dim, dtype=complex)
    for q, letter in enumerate(letters):
        bitpos = n - 1 - q
        bits = (idx >> bitpos) & 1
        if letter == "X":
            flip |= 1 << bitpos
        elif letter == "Y":
            flip |= 1 << bitpos
            coef = coef * (1j * (1 - 2 * bits))
        elif letter == "Z":
            coef = coef * (1 - 2 * bits)
        elif letter != "I":
            raise ValueError(f"unknown Pauli letter {letter!r}")
    perm = idx ^ flip
    # (P v)[j] = coef[perm[j]] * v[perm[j]]
    return perm, coef[perm]


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit I/X/Y/Z operators, e.g. ``"XZI"``.

    Qubit 0 is the leftmost letter and the most significant index bit, matching
    the Kronecker-product order of :func:`pauli_matrix`.
    """

    letters: str

    def __post_init__(self):
        if not self.letters or any(c not in PAULI_LETTERS for c in self.letters):
            raise ValueError(f"invalid Pauli string {self.letters!r}")

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    @property
    def dim(self) -> int:
        return 1 << len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    def apply(self, arr: np.ndarray) -> np.ndarray:
        """Apply to a statevector (or to each column of a matrix, ``P @ A``)."""
        perm, coef = _pauli_action(self.letters)
        if arr.ndim == 1:
            return coef * arr[perm]
        return coef[:, None] * arr[perm, :]

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.apply(psi))))

    def __str__(self):
        return self.letters


def pauli_matrix(p: PauliString | str) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a Pauli string (Hermitian, unitary)."""
    letters = p.letters if isinstance(p, PauliString) else p
    out = PAULI_1Q[letters[0]]
    for letter in letters[1:]:
        out = np.kron(out, PAULI_1Q[letter])
    return out


def pauli_rotation(p: PauliString | str, theta: float) -> np.ndarray:
    """exp(i*theta*P) = cos(theta) I + i sin(theta) P, using P^2 = I."""
    mat = pauli_matrix(p)
    dim = mat.shape[0]
    return np.cos(theta) * np.eye(dim, dtype=complex) + 1j * np.sin(theta) * mat


def rotate_state(p: PauliString, theta: float, psi: np.ndarray) -> np.ndarray:
    """exp(i*theta*P) applied to a state without forming the dense matrix."""
    return np.cos(theta) * psi + 1j * np.sin(theta) * p.apply(psi)


def haar_unitary(dim: int, rng: RngStream) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The Q factor is phase-fixed by scaling column k with R_kk/|R_kk|, which
    selects the unique QR factorization with positive-diagonal R; that factor
    is exactly Haar regardless of the LAPACK phase convention.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    gen = rng.generator
    z = (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def sample_pauli(n: int, rng: RngStream, exclude_identity: bool = True) -> PauliString:
    """Uniform unsigned Pauli string on n qubits.

    With ``exclude_identity`` (the default for circuit generators) the draw is
    uniform over the 4^n - 1 nontrivial strings; the all-identity string would
    be a dead parameter since it commutes with every observable.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total = 4**n
    if exclude_identity:
        code = int(rng.generator.integers(1, total))
    else:
        code = int(rng.generator.integers(0, total))
    letters = []
    for _ in range(n):
        letters.append(PAULI_LETTERS[code % 4])
        code //= 4
    return PauliString("".join(reversed(letters)))


def zero_state(n: int) -> np.ndarray:
    """|0...0> on n qubits."""
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    return psi


def basis_state(n: int, index: int) -> np.ndarray:
    """Computational basis state |index> on n qubits."""
    dim = 1 << n
    if not 0 <= index < dim:
        raise ValueError(f"basis index {index} out of range for {n} qubits")
    psi = np.zeros(dim, dtype=complex)
    psi[index] = 1.0
    return psi


def is_unitary(mat: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    dim = mat.shape[0]
    return bool(np.max(np.abs(mat.conj().T @ mat - np.eye(dim))) <= atol)


def is_hermitian(mat: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    return bool(np.max(np.abs(mat - mat.conj().T)) <= atol)


def kahan_sum(values) -> float:
    """Compensated (Kahan-Babuska) sum; deterministic for a fixed iteration order."""
    total = 0.0
    carry = 0.0
    for v in values:
        v = float(v)
        t = total + v
        if abs(total) >= abs(v):
            carry += (total - t) + v
        else:
            carry += (v - t) + total
        total = t
    return total + carry
