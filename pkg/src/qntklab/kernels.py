"""Residual error, exact derivatives, QNTK, meta-kernel, and supervised kernels.

The first derivative of the expectation value with respect to angle ``ell`` is
the commutator sandwich

    d eps / d theta_ell = -i <psi_ell| [Xhat_ell, Otilde_ell] |psi_ell>,

where ``psi_ell`` is the state propagated through layers 1..ell, ``Xhat_ell``
is the generator conjugated by its own fixed unitary, and ``Otilde_ell`` is
the observable pulled back through the remaining layers.  One forward pass and
one backward pass give all L components exactly; no parameter-shift evaluations
or finite differences are involved (those exist only as test oracles).

The second derivative is the nested commutator

    d^2 eps / d theta_a d theta_b = -<psi0| [Y_a, [Y_b, M]] |psi0>,  a <= b,

with ``Y_l`` the generator of layer l conjugated backward to the input frame
and ``M`` the fully Heisenberg-evolved observable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import AnsatzSpec
from .linalg import PauliString, RngStream, basis_state, pauli_matrix, sample_pauli

IMAG_TOL = 1e-10


class NonRealExpectationError(ValueError):
    """Expectation value carried a non-negligible imaginary part.

    Signals a non-Hermitian observable or broken unitarity upstream.
    """


def real_expectation(matrix: np.ndarray, psi: np.ndarray, tol: float = IMAG_TOL) -> float:
    """<psi|M|psi> with a guard on the imaginary residue.

    The tolerance is absolute for order-one expectations and relative above
    that, so rescaling the observable cannot turn floating-point noise into a
    false alarm.  Non-finite values pass through for the training layer to
    report as divergence.
    """
    value = complex(np.vdot(psi, matrix @ psi))
    if abs(value.imag) > tol * max(1.0, abs(value)):
        raise NonRealExpectationError(
            f"expectation has imaginary part {value.imag:.3e} (tol {tol:.0e})"
        )
    return value.real


@dataclass
class Observable:
    """Hermitian operator as a weighted Pauli sum with a cached dense matrix.

    ``target`` is the scalar the expectation value is trained toward.
    """

    terms: tuple[tuple[float, PauliString], ...]
    target: float = 0.0
    _matrix: np.ndarray | None = field(default=None, repr=False, compare=False)
    _eigenvalues: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.terms = tuple((float(c), p) for c, p in self.terms)
        if not self.terms:
            raise ValueError("observable needs at least one term")
        n = self.terms[0][1].num_qubits
        if any(p.num_qubits != n for _, p in self.terms):
            raise ValueError("all terms must act on the same number of qubits")

    @property
    def num_qubits(self) -> int:
        return self.terms[0][1].num_qubits

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            acc = np.zeros((self.dim, self.dim), dtype=complex)
            for coef, pauli in self.terms:
                acc += coef * pauli_matrix(pauli)
            acc.setflags(write=False)
            self._matrix = acc
        return self._matrix

    def trace_power(self, k: int) -> float:
        """Tr(O^k), computed from the dense spectrum (works for any Hermitian O)."""
        if self._eigenvalues is None:
            self._eigenvalues = np.linalg.eigvalsh(self.matrix)
        with np.errstate(over="ignore"):
            return float(np.sum(self._eigenvalues**k))

    def with_target(self, target: float) -> "Observable":
        return Observable(self.terms, target=float(target))

    def as_dict(self) -> dict:
        return {
            "terms": [[c, p.letters] for c, p in self.terms],
            "target": self.target,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Observable":
        terms = tuple((float(c), PauliString(s)) for c, s in data["terms"])
        return cls(terms, target=float(data.get("target", 0.0)))


def random_pauli_sum(
    n: int,
    num_terms: int,
    rng: RngStream,
    coeff_low: float = 0.0,
    coeff_high: float = 1.0,
    target: float = 0.0,
) -> Observable:
    """Observable with uniformly drawn Pauli terms and uniform coefficients.

    Identity strings are allowed among observable terms (they only shift the
    spectrum); coefficients are drawn uniformly from (coeff_low, coeff_high).
    """
    terms = []
    for _ in range(num_terms):
        pauli = sample_pauli(n, rng, exclude_identity=False)
        coef = float(rng.generator.uniform(coeff_low, coeff_high))
        terms.append((coef, pauli))
    return Observable(tuple(terms), target=target)


def _check_dims(ansatz: AnsatzSpec, obs: Observable, psi: np.ndarray):
    if obs.num_qubits != ansatz.num_qubits:
        raise ValueError("observable and ansatz qubit counts differ")
    if psi.shape != (ansatz.dim,):
        raise ValueError("state dimension does not match ansatz")
    norm = np.linalg.norm(psi)
    if np.isfinite(norm) and abs(norm - 1.0) > 1e-10:
        raise ValueError(f"state is not normalized (norm {norm:.6g})")


def _forward_states(ansatz: AnsatzSpec, theta: np.ndarray, psi0: np.ndarray):
    """States after each layer plus the pre-fixed-unitary intermediates."""
    after = [psi0]
    pre_w = []
    psi = psi0
    for gen, w, t in zip(ansatz.generators, ansatz.fixed_unitaries, theta):
        tilted = np.cos(t) * psi + 1j * np.sin(t) * gen.apply(psi)
        pre_w.append(tilted)
        psi = w @ tilted
        after.append(psi)
    return after, pre_w


def _gradient_from_forward(
    ansatz: AnsatzSpec,
    theta: np.ndarray,
    pre_w: list[np.ndarray],
    final_state: np.ndarray,
    obs_matrix: np.ndarray,
) -> np.ndarray:
    """Backward pass: all L derivative components from one observable apply."""
    layers = ansatz.num_layers
    grad = np.empty(layers)
    lam = obs_matrix @ final_state
    for k in range(layers - 1, -1, -1):
        lam_tilde = ansatz.fixed_unitaries[k].conj().T @ lam
        x_lam = ansatz.generators[k].apply(lam_tilde)
        grad[k] = 2.0 * np.vdot(pre_w[k], x_lam).imag
        t = theta[k]
        lam = np.cos(t) * lam_tilde - 1j * np.sin(t) * x_lam
    return grad


def model_output(
    ansatz: AnsatzSpec, theta: np.ndarray, obs: Observable, phi: np.ndarray
) -> float:
    """Expectation of the observable in the circuit-evolved feature state."""
    theta = ansatz.check_parameters(theta)
    _check_dims(ansatz, obs, phi)
    psi = phi
    for gen, w, t in zip(ansatz.generators, ansatz.fixed_unitaries, theta):
        psi = w @ (np.cos(t) * psi + 1j * np.sin(t) * gen.apply(psi))
    return real_expectation(obs.matrix, psi)


def residual_error(
    ansatz: AnsatzSpec, theta: np.ndarray, obs: Observable, psi0: np.ndarray
) -> float:
    """Expectation value minus the observable's target."""
    return model_output(ansatz, theta, obs, psi0) - obs.target


def gradient(
    ansatz: AnsatzSpec, theta: np.ndarray, obs: Observable, psi0: np.ndarray
) -> np.ndarray:
    """Exact derivative of the residual error w.r.t. every angle.

    The target is a constant shift, so this is also the derivative of the raw
    model output.
    """
    theta = ansatz.check_parameters(theta)
    _check_dims(ansatz, obs, psi0)
    if ansatz.num_layers == 0:
        return np.empty(0)
    after, pre_w = _forward_states(ansatz, theta, psi0)
    return _gradient_from_forward(ansatz, theta, pre_w, after[-1], obs.matrix)


def qntk(grad: np.ndarray) -> float:
    """Sum of squared derivative components; non-negative by construction."""
    grad = np.asarray(grad, dtype=float)
    return float(grad @ grad)


def _backpropagated_generators(ansatz: AnsatzSpec, theta: np.ndarray):
    """Y_l = C_{l-1}^dag X_l C_{l-1} for all layers, plus the full circuit C_L."""
    dim = ansatz.dim
    c = np.eye(dim, dtype=complex)
    ys = []
    for gen, w, t in zip(ansatz.generators, ansatz.fixed_unitaries, theta):
        xc = gen.apply(c)
        ys.append(c.conj().T @ xc)
        c = w @ (np.cos(t) * c + 1j * np.sin(t) * xc)
    return ys, c


def hessian_residual(
    ansatz: AnsatzSpec, theta: np.ndarray, obs: Observable, psi0: np.ndarray
) -> np.ndarray:
    """Exact symmetric L x L second-derivative matrix of the residual error."""
    theta = ansatz.check_parameters(theta)
    _check_dims(ansatz, obs, psi0)
    layers = ansatz.num_layers
    if layers == 0:
        return np.empty((0, 0))
    ys, circuit = _backpropagated_generators(ansatz, theta)
    heis = circuit.conj().T @ (obs.matrix @ circuit)
    m_psi = heis @ psi0
    y_psi = np.stack([y @ psi0 for y in ys])
    # u_b = [Y_b, M] |psi0>
    u = np.stack([ys[b] @ m_psi - heis @ y_psi[b] for b in range(layers)])
    pair = -2.0 * np.real(y_psi.conj() @ u.T)
    return np.triu(pair) + np.triu(pair, 1).T


def meta_kernel(grad: np.ndarray, hessian: np.ndarray) -> float:
    """Quadratic form g^T H g controlling the second-order error update."""
    grad = np.asarray(grad, dtype=float)
    hessian = np.asarray(hessian, dtype=float)
    if hessian.shape != (grad.size, grad.size):
        raise ValueError("gradient and hessian shapes disagree")
    return float(grad @ hessian @ grad)


@dataclass
class SupervisedProblem:
    """Feature states, labels, and observables for a squared-loss task.

    ``features`` holds one normalized state per data point (rows);
    ``labels[d, i]`` is the target for observable i on data point d;
    ``train_indices`` selects the training subset.
    """

    features: np.ndarray
    labels: np.ndarray
    observables: tuple[Observable, ...]
    train_indices: tuple[int, ...]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=complex)
        self.labels = np.asarray(self.labels, dtype=float)
        self.observables = tuple(self.observables)
        self.train_indices = tuple(int(i) for i in self.train_indices)
        if self.features.ndim != 2:
            raise ValueError("features must be a (num_data, dim) array")
        if self.labels.shape != (self.features.shape[0], len(self.observables)):
            raise ValueError("labels must have shape (num_data, num_observables)")
        if not self.train_indices:
            raise ValueError("training set is empty")
        norms = np.linalg.norm(self.features, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-10:
            raise ValueError("feature states must be normalized")

    @property
    def num_outputs(self) -> int:
        return len(self.observables)

    @property
    def train_size(self) -> int:
        return len(self.train_indices)

    @classmethod
    def with_basis_features(
        cls,
        n: int,
        labels: np.ndarray,
        observables: tuple[Observable, ...],
    ) -> "SupervisedProblem":
        """Computational-basis feature map |d> for d = 0..size-1.

        Basis features make distinct data points exactly orthogonal, which is
        the regime the closed-form kernel spectrum applies to; it requires the
        training-set size to fit inside the Hilbert space.
        """
        labels = np.asarray(labels, dtype=float)
        if labels.ndim == 1:
            labels = labels[:, None]
        size = labels.shape[0]
        dim = 1 << n
        if size > dim:
            raise ValueError(f"training size {size} exceeds Hilbert dimension {dim}")
        feats = np.stack([basis_state(n, d) for d in range(size)])
        return cls(feats, labels, tuple(observables), tuple(range(size)))


def _train_rows(prob: SupervisedProblem):
    """Joint (data, output) row index, data-major."""
    return [(d, i) for d in prob.train_indices for i in range(prob.num_outputs)]


def outputs_and_gradients(
    ansatz: AnsatzSpec, theta: np.ndarray, prob: SupervisedProblem
) -> tuple[np.ndarray, np.ndarray]:
    """Model outputs z and the (rows x L) matrix of their exact derivatives.

    Shares one forward pass per data point across all observables.
    """
    theta = ansatz.check_parameters(theta)
    rows = _train_rows(prob)
    z = np.empty(len(rows))
    grads = np.empty((len(rows), ansatz.num_layers))
    row = 0
    for d in prob.train_indices:
        phi = prob.features[d]
        _check_dims(ansatz, prob.observables[0], phi)
        after, pre_w = _forward_states(ansatz, theta, phi)
        final = after[-1]
        for obs in prob.observables:
            z[row] = real_expectation(obs.matrix, final)
            grads[row] = _gradient_from_forward(ansatz, theta, pre_w, final, obs.matrix)
            row += 1
    return z, grads


def supervised_kernel(
    ansatz: AnsatzSpec, theta: np.ndarray, prob: SupervisedProblem
) -> np.ndarray:
    """Gram matrix of output gradients over the joint (data, output) index.

    Row ordering is data-major: (d_1, i_1), (d_1, i_2), ..., (d_2, i_1), ...
    The result is symmetric positive semi-definite by construction.
    """
    _, grads = outputs_and_gradients(ansatz, theta, prob)
    return grads @ grads.T


__all__ = [
    "IMAG_TOL",
    "NonRealExpectationError",
    "Observable",
    "SupervisedProblem",
    "gradient",
    "hessian_residual",
    "meta_kernel",
    "model_output",
    "outputs_and_gradients",
    "qntk",
    "random_pauli_sum",
    "real_expectation",
    "residual_error",
    "supervised_kernel",
]
