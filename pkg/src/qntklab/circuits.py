"""Ansatz construction and state evolution.

A circuit is an alternating product of fixed unitaries and single-generator
Pauli exponentials,

    U(theta) = W_L exp(i theta_L X_L) ... W_1 exp(i theta_1 X_1),

with layer 1 applied to the state first.  Prefix/suffix factorizations of this
product are what the analytic gradient and Hessian formulas consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    PauliString,
    RngStream,
    haar_unitary,
    pauli_rotation,
    rotate_state,
    sample_pauli,
    zero_state,
)

FAMILY_RANDOM = "random-haar"
FAMILY_CPHASE = "hardware-efficient-cphase"
FAMILY_CNOT = "hardware-efficient-cnot"


@dataclass(frozen=True)
class AnsatzSpec:
    """Immutable layered-circuit description.

    ``generators[k]`` and ``fixed_unitaries[k]`` define layer k+1; the layer's
    gate is ``fixed_unitaries[k] @ exp(i theta_k generators[k])``.
    """

    num_qubits: int
    generators: tuple[PauliString, ...]
    fixed_unitaries: tuple[np.ndarray, ...] = field(repr=False)
    family: str = FAMILY_RANDOM

    def __post_init__(self):
        if len(self.generators) != len(self.fixed_unitaries):
            raise ValueError("generator and fixed-unitary lists must have equal length")
        dim = 1 << self.num_qubits
        eye = np.eye(dim)
        for w in self.fixed_unitaries:
            if w.shape != (dim, dim):
                raise ValueError("fixed unitary has wrong dimension")
            if np.max(np.abs(w.conj().T @ w - eye)) > 1e-10:
                raise ValueError("fixed layer matrix is not unitary")
            w.setflags(write=False)

    @property
    def num_layers(self) -> int:
        return len(self.generators)

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def check_parameters(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_layers,):
            raise ValueError(
                f"expected {self.num_layers} angles, got shape {theta.shape}"
            )
        return theta

    def fingerprint(self) -> str:
        """Short content hash (generator letters + fixed-unitary bytes)."""
        import hashlib

        h = hashlib.sha256()
        h.update(self.family.encode())
        for g, w in zip(self.generators, self.fixed_unitaries):
            h.update(g.letters.encode())
            h.update(np.ascontiguousarray(w).tobytes())
        return h.hexdigest()[:16]


def build_random_ansatz(
    n: int, layers: int, rng: RngStream, exclude_identity: bool = True
) -> AnsatzSpec:
    """Random circuit family: fresh Haar W_l, fresh uniform Pauli generators.

    Sampled once and immutable afterwards; optimizing the angles never touches
    the W_l or the generators.
    """
    if n < 1 or layers < 0:
        raise ValueError("need n >= 1 and layers >= 0")
    dim = 1 << n
    gens = []
    fixed = []
    for _ in range(layers):
        gens.append(sample_pauli(n, rng, exclude_identity=exclude_identity))
        fixed.append(haar_unitary(dim, rng))
    return AnsatzSpec(n, tuple(gens), tuple(fixed), family=FAMILY_RANDOM)


def _single_qubit_string(n: int, qubit: int, letter: str) -> PauliString:
    s = ["I"] * n
    s[qubit] = letter
    return PauliString("".join(s))


def _two_qubit_string(n: int, q1: int, q2: int, letter: str) -> PauliString:
    s = ["I"] * n
    s[q1] = letter
    s[q2] = letter
    return PauliString("".join(s))


def cnot_chain(n: int) -> np.ndarray:
    """Dense CNOT ladder, control q -> target q+1 for q = 0..n-2."""
    dim = 1 << n
    mat = np.zeros((dim, dim), dtype=complex)
    for b in range(dim):
        out = b
        for q in range(n - 1):
            control = n - 1 - q
            target = n - 2 - q
            if (out >> control) & 1:
                out ^= 1 << target
        mat[out, b] = 1.0
    return mat


def build_hardware_efficient(
    n: int, depth: int, variant: str, rng: RngStream
) -> AnsatzSpec:
    """Hardware-efficient families, unrolled into the single-generator normal form.

    ``cphase-ladder``: each depth block is one parameterized Pauli rotation per
    qubit (axis drawn uniformly from X/Y/Z, independently per qubit per block)
    followed by a linear ladder of parameterized two-qubit phase couplings,
    realized as involutory ZZ generators so every layer is exp(i theta P) with
    P a Pauli string.  Parameter count per block: n + (n - 1).

    ``cnot-su2``: general single-qubit rotations as Z-Y-Z generator triplets on
    each qubit, followed by a fixed CNOT chain carried by the last rotation
    layer of the block.  Parameter count per block: 3n.
    """
    if n < 2:
        raise ValueError("hardware-efficient ansatz needs n >= 2 (no entangler otherwise)")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    dim = 1 << n
    eye = np.eye(dim, dtype=complex)
    gens: list[PauliString] = []
    fixed: list[np.ndarray] = []
    if variant == "cphase-ladder":
        for _ in range(depth):
            for q in range(n):
                axis = "XYZ"[int(rng.generator.integers(0, 3))]
                gens.append(_single_qubit_string(n, q, axis))
                fixed.append(eye)
            for q in range(n - 1):
                gens.append(_two_qubit_string(n, q, q + 1, "Z"))
                fixed.append(eye)
        family = FAMILY_CPHASE
    elif variant == "cnot-su2":
        chain = cnot_chain(n)
        for _ in range(depth):
            for q in range(n):
                for axis in ("Z", "Y", "Z"):
                    gens.append(_single_qubit_string(n, q, axis))
                    fixed.append(eye)
            fixed[-1] = chain
        family = FAMILY_CNOT
    else:
        raise ValueError(f"unknown hardware-efficient variant {variant!r}")
    return AnsatzSpec(n, tuple(gens), tuple(fixed), family=family)


def circuit_unitary(ansatz: AnsatzSpec, theta: np.ndarray) -> np.ndarray:
    """Dense U(theta); layer 1 is the rightmost factor (applied first)."""
    theta = ansatz.check_parameters(theta)
    u = np.eye(ansatz.dim, dtype=complex)
    for gen, w, t in zip(ansatz.generators, ansatz.fixed_unitaries, theta):
        u = w @ (pauli_rotation(gen, t) @ u)
    return u


def prefix_suffix(
    ansatz: AnsatzSpec, theta: np.ndarray, ell: int
) -> tuple[np.ndarray, np.ndarray]:
    """Split U(theta) = suffix @ prefix at layer ``ell`` (1-based).

    The prefix covers layers 1..ell inclusive (the rotation of layer ell is
    inside the prefix); the suffix covers layers ell+1..L.
    """
    theta = ansatz.check_parameters(theta)
    if not 1 <= ell <= ansatz.num_layers:
        raise IndexError(f"layer index {ell} out of range 1..{ansatz.num_layers}")
    dim = ansatz.dim
    prefix = np.eye(dim, dtype=complex)
    suffix = np.eye(dim, dtype=complex)
    for k in range(ansatz.num_layers):
        gate = ansatz.fixed_unitaries[k] @ pauli_rotation(ansatz.generators[k], theta[k])
        if k < ell:
            prefix = gate @ prefix
        else:
            suffix = gate @ suffix
    return prefix, suffix


def evolve_state(ansatz: AnsatzSpec, theta: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Apply U(theta) to a state layer by layer (no dense circuit matrix)."""
    theta = ansatz.check_parameters(theta)
    if psi.shape != (ansatz.dim,):
        raise ValueError("state dimension does not match ansatz")
    out = psi
    for gen, w, t in zip(ansatz.generators, ansatz.fixed_unitaries, theta):
        out = w @ rotate_state(gen, t, out)
    return out


def y_tilted_state(n: int, angle: float = np.pi / 8) -> np.ndarray:
    """Product state (exp(-i angle Y)|0>)^n used by the 4-qubit hardware runs."""
    single = np.array([np.cos(angle), np.sin(angle)], dtype=complex)
    psi = single
    for _ in range(n - 1):
        psi = np.kron(psi, single)
    return psi


def uniform_angles(layers: int, rng: RngStream) -> np.ndarray:
    """Initial angles drawn independently and uniformly from [0, 2*pi)."""
    return rng.generator.uniform(0.0, 2.0 * np.pi, size=layers)


__all__ = [
    "AnsatzSpec",
    "FAMILY_CNOT",
    "FAMILY_CPHASE",
    "FAMILY_RANDOM",
    "build_hardware_efficient",
    "build_random_ansatz",
    "circuit_unitary",
    "cnot_chain",
    "evolve_state",
    "prefix_suffix",
    "uniform_angles",
    "y_tilted_state",
    "zero_state",
]
