"""Gradient-descent dynamics with full trajectory recording and decay fitting.

Plain full-batch gradient descent only; the analytic predictions are derived
for the vanilla update and momentum-style optimizers would void them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .circuits import AnsatzSpec, uniform_angles
from .kernels import (
    Observable,
    SupervisedProblem,
    gradient,
    outputs_and_gradients,
    qntk,
    residual_error,
)
from .linalg import RngStream


class TrainingDivergenceError(RuntimeError):
    """Residual error or parameters became non-finite (learning rate too large)."""


@dataclass
class TrainingConfig:
    """Gradient-descent hyperparameters and the initial-angle distribution.

    With ``init_angles=None`` the initial angles are drawn independently and
    uniformly from [0, 2*pi) using the seed; otherwise the given vector is used
    verbatim and the seed only labels the run.
    """

    learning_rate: float
    steps: int
    seed: int = 0
    init_angles: np.ndarray | None = None
    record_parameters: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.init_angles is not None:
            self.init_angles = np.asarray(self.init_angles, dtype=float)

    def fingerprint(self) -> str:
        payload = {
            "learning_rate": self.learning_rate,
            "steps": self.steps,
            "seed": self.seed,
            "init_angles": None if self.init_angles is None else self.init_angles.tolist(),
            "record_parameters": self.record_parameters,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Trajectory:
    """Per-step record of a gradient-descent run.

    ``errors`` holds the residual error (or, for supervised runs, the total
    loss) at steps 0..T; ``kernels`` the matching kernel values.  ``residuals``
    is only populated by supervised runs and holds the per-(sample, output)
    residual at every step.
    """

    errors: np.ndarray
    kernels: np.ndarray
    parameters: np.ndarray | None = None
    residuals: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.errors = np.asarray(self.errors, dtype=float)
        self.kernels = np.asarray(self.kernels, dtype=float)
        if self.errors.shape != self.kernels.shape:
            raise ValueError("errors and kernels must record the same steps")

    @property
    def steps(self) -> int:
        return len(self.errors) - 1


def _initial_angles(layers: int, cfg: TrainingConfig) -> np.ndarray:
    if cfg.init_angles is not None:
        theta = np.asarray(cfg.init_angles, dtype=float)
        if theta.shape != (layers,):
            raise ValueError(f"expected {layers} initial angles, got {theta.shape}")
        return theta.copy()
    return uniform_angles(layers, RngStream(cfg.seed, (0,)))


def _guard_finite(step: int, eps: float, theta: np.ndarray):
    if not np.isfinite(eps) or not np.all(np.isfinite(theta)):
        raise TrainingDivergenceError(
            f"non-finite residual or parameters at step {step}; reduce the learning rate"
        )


def gd_optimize(
    ansatz: AnsatzSpec, obs: Observable, psi0: np.ndarray, cfg: TrainingConfig
) -> Trajectory:
    """Minimize the squared residual error by exact gradient descent.

    Records the residual and kernel at every step including t=0 (T+1 entries
    for T update steps).  A start at exactly zero residual is a valid fixed
    point and yields a flat trajectory.
    """
    theta = _initial_angles(ansatz.num_layers, cfg)
    steps = cfg.steps
    errors = np.empty(steps + 1)
    kernels = np.empty(steps + 1)
    params = np.empty((steps + 1, ansatz.num_layers)) if cfg.record_parameters else None
    # overflow is detected explicitly and raised as divergence, not warned
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(steps):
            eps = residual_error(ansatz, theta, obs, psi0)
            grad = gradient(ansatz, theta, obs, psi0)
            _guard_finite(t, eps, theta)
            errors[t] = eps
            kernels[t] = qntk(grad)
            if params is not None:
                params[t] = theta
            theta = theta - cfg.learning_rate * (eps * grad)
        eps = residual_error(ansatz, theta, obs, psi0)
        grad = gradient(ansatz, theta, obs, psi0)
        _guard_finite(steps, eps, theta)
        errors[steps] = eps
        kernels[steps] = qntk(grad)
        if params is not None:
            params[steps] = theta
    return Trajectory(
        errors,
        kernels,
        parameters=params,
        meta={
            "mode": "single-target",
            "config": cfg.fingerprint(),
            "ansatz": ansatz.fingerprint(),
            "seed": cfg.seed,
        },
    )


def gd_supervised(
    ansatz: AnsatzSpec, prob: SupervisedProblem, cfg: TrainingConfig
) -> Trajectory:
    """Gradient descent on the summed squared residuals of a supervised task.

    ``errors`` records the total loss (which is not guaranteed monotone at
    finite learning rate); ``kernels`` the trace of the supervised kernel,
    which reduces to the scalar kernel for one sample and one output.
    """
    theta = _initial_angles(ansatz.num_layers, cfg)
    steps = cfg.steps
    rows = prob.train_size * prob.num_outputs
    losses = np.empty(steps + 1)
    kernels = np.empty(steps + 1)
    residuals = np.empty((steps + 1, rows))
    params = np.empty((steps + 1, ansatz.num_layers)) if cfg.record_parameters else None
    y = np.array(
        [prob.labels[d, i] for d in prob.train_indices for i in range(prob.num_outputs)]
    )

    def snapshot(t, theta):
        z, grads = outputs_and_gradients(ansatz, theta, prob)
        eps = z - y
        losses[t] = 0.5 * float(eps @ eps)
        # trace of the supervised kernel; reduces bit-exactly to the scalar
        # kernel when there is a single (sample, output) row
        kernels[t] = sum(qntk(g) for g in grads)
        residuals[t] = eps
        if params is not None:
            params[t] = theta
        return eps, grads

    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(steps):
            eps, grads = snapshot(t, theta)
            _guard_finite(t, losses[t], theta)
            total = grads.T @ eps
            theta = theta - cfg.learning_rate * total
        snapshot(steps, theta)
        _guard_finite(steps, losses[steps], theta)
    return Trajectory(
        losses,
        kernels,
        parameters=params,
        residuals=residuals,
        meta={
            "mode": "supervised",
            "config": cfg.fingerprint(),
            "ansatz": ansatz.fingerprint(),
            "seed": cfg.seed,
        },
    )


def fit_decay_rate(
    trajectory: Trajectory | np.ndarray, burn_in: int = 0, floor: float = 1e-12
) -> tuple[float, float]:
    """Least-squares exponential decay rate of |error(t)|.

    Fits log|error| against the step index over points after ``burn_in`` whose
    magnitude exceeds ``floor`` (sign flips dive below the floor and are thereby
    excluded).  Returns (rate, r_squared) where rate is minus the fitted slope.
    """
    values = trajectory.errors if isinstance(trajectory, Trajectory) else np.asarray(trajectory, float)
    t = np.arange(len(values))
    mask = (t >= burn_in) & (np.abs(values) > floor)
    if int(mask.sum()) < 10:
        raise ValueError(
            f"only {int(mask.sum())} usable points above floor {floor:g}; need at least 10"
        )
    x = t[mask].astype(float)
    y = np.log(np.abs(values[mask]))
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res < 1e-20 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return float(-slope), float(r_squared)


__all__ = [
    "Trajectory",
    "TrainingConfig",
    "TrainingDivergenceError",
    "fit_decay_rate",
    "gd_optimize",
    "gd_supervised",
]
