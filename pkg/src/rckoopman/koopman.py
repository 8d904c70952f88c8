"""Least-squares identification of the lifted linear model ``psi+ = A psi + B u``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import InputDataError, NumericError, ShapeError
from .lifting import LiftedSnapshots

DEFAULT_RIDGE = 1e-8
STABILITY_TOL = 1e-9
ROLLOUT_BOUND = 1e6


def output_projection(output_dim: int, lift_dim: int) -> np.ndarray:
    """``C = [I 0]``: the measurement is stored in the leading coordinates of every lift."""
    C = np.zeros((output_dim, lift_dim))
    C[:, :output_dim] = np.eye(output_dim)
    return C


@dataclass(frozen=True)
class KoopmanModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    ridge: float
    dictionary: dict = field(default_factory=dict)
    lineage: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float).reshape(A.shape[0], -1)
        C = np.asarray(self.C, dtype=float)
        if A.shape[0] != A.shape[1] or C.shape[1] != A.shape[0]:
            raise ShapeError(f"inconsistent A {A.shape} / C {C.shape}")
        for arr in (A, B, C):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def lift_dim(self) -> int:
        return self.A.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B.shape[1]

    @property
    def output_dim(self) -> int:
        return self.C.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        cached = self.__dict__.get("_eigenvalues")
        if cached is None:
            cached = np.linalg.eigvals(self.A)
            object.__setattr__(self, "_eigenvalues", cached)
        return cached

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "ridge": self.ridge,
            "lift_dim": self.lift_dim,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "dictionary": self.dictionary,
            "lineage": self.lineage,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> KoopmanModel:
        n = int(payload["lift_dim"])
        B = np.asarray(payload["B"], dtype=float).reshape(n, int(payload["input_dim"]))
        return cls(np.asarray(payload["A"], dtype=float), B, np.asarray(payload["C"], dtype=float),
                   float(payload["ridge"]), payload.get("dictionary", {}), payload.get("lineage", {}))


def pinv_rcond(shape: tuple[int, int]) -> float:
    """Relative singular-value cutoff used for the unregularized solve."""
    return max(shape) * np.finfo(float).eps


def identify(snapshots: LiftedSnapshots, ridge: float = DEFAULT_RIDGE, output_dim: int | None = None,
             dictionary: dict | None = None, lineage: dict | None = None) -> KoopmanModel:
    """Fit ``[A B] = Psi' Z^+`` (ridge 0) or ``Psi' Z^T (Z Z^T + ridge I)^{-1}``, ``Z = [Psi; U]``.

    With ``ridge == 0`` singular values of ``Z`` below
    ``max(Z.shape) * eps * sigma_max`` are dropped, so rank-deficient data
    never raises.
    """
    if ridge < 0:
        raise InputDataError(f"ridge must be non-negative, got {ridge}")
    Psi, Psi_prime, U = snapshots.Psi, snapshots.Psi_prime, snapshots.U
    n_psi, n_u = Psi.shape[0], U.shape[0]
    Z = np.vstack([Psi, U])
    if ridge == 0:
        AB = Psi_prime @ np.linalg.pinv(Z, rcond=pinv_rcond(Z.shape))
    else:
        gram = Z @ Z.T + ridge * np.eye(Z.shape[0])
        AB = scipy.linalg.solve(gram, Z @ Psi_prime.T, assume_a="pos").T
    if not np.all(np.isfinite(AB)):
        raise NumericError("regression produced non-finite coefficients")
    n_y = output_dim if output_dim is not None else int((dictionary or {}).get("output_dim", n_psi))
    return KoopmanModel(AB[:, :n_psi], AB[:, n_psi:n_psi + n_u], output_projection(n_y, n_psi),
                        float(ridge), dictionary or {}, lineage or {})


class OnestepPrediction(NamedTuple):
    psi_next: np.ndarray
    y_hat: np.ndarray


def predict_onestep(model: KoopmanModel, psi_k, u_k=None) -> OnestepPrediction:
    psi = np.asarray(psi_k, dtype=float).reshape(-1)
    if psi.shape != (model.lift_dim,):
        raise ShapeError(f"psi_k must have length {model.lift_dim}")
    u = np.zeros(model.input_dim) if u_k is None else np.asarray(u_k, dtype=float).reshape(-1)
    if u.shape != (model.input_dim,):
        raise ShapeError(f"u_k must have length {model.input_dim}")
    psi_next = model.A @ psi + model.B @ u
    return OnestepPrediction(psi_next, model.C @ psi_next)


class OnestepEvaluation(NamedTuple):
    nrmse: float
    per_step_errors: np.ndarray
    predictions: np.ndarray


def evaluate_onestep(model: KoopmanModel, test: LiftedSnapshots) -> OnestepEvaluation:
    """One-step-ahead error with measurement updates.

    ``nrmse = sqrt(sum_k ||y_hat_k - y_k||^2 / (N n_y))``; ``per_step_errors``
    holds ``||y_hat_k - y_k||`` per column.
    """
    if test.K == 0:
        raise ShapeError("empty test set")
    if test.lift_dim != model.lift_dim or test.input_dim != model.input_dim:
        raise ShapeError(
            f"test snapshots ({test.lift_dim}, {test.input_dim}) do not match model "
            f"({model.lift_dim}, {model.input_dim})"
        )
    y_hat = model.C @ (model.A @ test.Psi + model.B @ test.U)
    truth = model.C @ test.Psi_prime
    residual = y_hat - truth
    errors = np.linalg.norm(residual, axis=0)
    nrmse = float(np.sqrt(np.sum(residual ** 2) / (test.K * model.output_dim)))
    return OnestepEvaluation(nrmse, errors, y_hat.T)


class Rollout(NamedTuple):
    outputs: np.ndarray
    diverged: bool
    divergence_step: int | None


def rollout(model: KoopmanModel, psi_0, inputs=None, n_steps: int | None = None,
            bound: float = ROLLOUT_BOUND) -> Rollout:
    """Free-run the lifted model from ``psi_0`` with no measurement updates.

    Returns the projected outputs ``y_hat_1..y_hat_N``. If the lifted state
    exceeds ``bound`` the sequence is truncated before that step and flagged.
    """
    if inputs is None:
        if n_steps is None:
            raise ShapeError("give either inputs or n_steps")
        u = np.zeros((n_steps, model.input_dim))
    else:
        u = np.asarray(inputs, dtype=float).reshape(-1, model.input_dim) if model.input_dim else \
            np.zeros((len(inputs) if n_steps is None else n_steps, 0))
    psi = np.asarray(psi_0, dtype=float).reshape(-1)
    if psi.shape != (model.lift_dim,):
        raise ShapeError(f"psi_0 must have length {model.lift_dim}")
    out = []
    for k in range(u.shape[0]):
        psi = model.A @ psi + model.B @ u[k]
        if not np.all(np.isfinite(psi)) or np.max(np.abs(psi)) > bound:
            return Rollout(np.array(out).reshape(-1, model.output_dim), True, k + 1)
        out.append(model.C @ psi)
    return Rollout(np.array(out).reshape(-1, model.output_dim), False, None)


class Spectrum(NamedTuple):
    eigenvalues: np.ndarray
    unstable_count: int


def spectrum(model: KoopmanModel, tol: float = STABILITY_TOL) -> Spectrum:
    """Eigenvalues of ``A``; a mode is unstable when ``|lambda| > 1 + tol``."""
    try:
        eig = np.linalg.eigvals(model.A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    return Spectrum(eig, int(np.sum(np.abs(eig) > 1.0 + tol)))
