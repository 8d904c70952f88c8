"""Fixed random reservoirs: construction, driving, echo-state checks and memory."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConstructionError, DomainError, NumericError, ShapeError

Activation = Literal["tanh", "identity"]

# Lipschitz constant of each supported activation.
LIPSCHITZ = {"tanh": 1.0, "identity": 1.0}

DEFAULT_WASHOUT = 100
DEFAULT_EPSILON = 0.01
DEFAULT_INPUT_SCALING = 3.0
DEFAULT_DENSITY = 0.9


@dataclass(frozen=True)
class ReservoirConfig:
    n_r: int
    n_v: int
    spectral_radius: float = 0.9
    input_scaling: float = DEFAULT_INPUT_SCALING
    density: float = DEFAULT_DENSITY
    activation: Activation = "tanh"
    seed: int = 0

    def __post_init__(self):
        if self.n_r < 1 or self.n_v < 1:
            raise DomainError("n_r and n_v must be >= 1")
        if not self.spectral_radius > 0:
            raise DomainError(f"spectral_radius must be positive, got {self.spectral_radius}")
        if not self.input_scaling > 0:
            raise DomainError("input_scaling must be positive")
        if not 0 < self.density <= 1:
            raise DomainError(f"density must lie in (0, 1], got {self.density}")
        if self.activation not in LIPSCHITZ:
            raise DomainError(f"unsupported activation {self.activation!r}")


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    return np.tanh(z) if name == "tanh" else z


def _activate_grad(name: str, z: np.ndarray) -> np.ndarray:
    return 1.0 - np.tanh(z) ** 2 if name == "tanh" else np.ones_like(z)


def spectral_radius(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix)))) if matrix.size else 0.0


@dataclass(frozen=True)
class Reservoir:
    """Immutable weights of ``r_k = sigma(W_res r_{k-1} + W_in v_k)`` (no bias)."""

    W_res: np.ndarray
    W_in: np.ndarray
    config: ReservoirConfig
    actual_spectral_radius: float
    spectral_norm_W_res: float

    def __post_init__(self):
        for name in ("W_res", "W_in"):
            arr = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_matrices(cls, W_res, W_in, activation: Activation = "tanh", seed: int = 0) -> Reservoir:
        """Wrap hand-specified weights, e.g. for analytic test cases."""
        W_res = np.atleast_2d(np.asarray(W_res, dtype=float))
        W_in = np.atleast_2d(np.asarray(W_in, dtype=float))
        n_r = W_res.shape[0]
        if W_res.shape != (n_r, n_r) or W_in.shape[0] != n_r:
            raise ShapeError(f"incompatible shapes W_res {W_res.shape}, W_in {W_in.shape}")
        rho = spectral_radius(W_res)
        config = ReservoirConfig(
            n_r=n_r,
            n_v=W_in.shape[1],
            spectral_radius=rho if rho > 0 else 1.0,
            input_scaling=float(np.max(np.abs(W_in))) or 1.0,
            density=1.0,
            activation=activation,
            seed=seed,
        )
        return cls(W_res, W_in, config, rho, float(np.linalg.norm(W_res, 2)))

    @property
    def n_r(self) -> int:
        return self.W_res.shape[0]

    @property
    def n_v(self) -> int:
        return self.W_in.shape[1]

    @property
    def activation(self) -> str:
        return self.config.activation

    @property
    def lipschitz(self) -> float:
        return LIPSCHITZ[self.config.activation]

    @property
    def input_norm(self) -> float:
        """Spectral norm of ``W_in``."""
        return float(np.linalg.norm(self.W_in, 2))

    def rescaled(self, rho: float) -> Reservoir:
        """Same random structure, recurrent weights rescaled to spectral radius ``rho``."""
        if not rho > 0:
            raise DomainError("rho must be positive")
        W_res = self.W_res * (rho / self.actual_spectral_radius)
        config = ReservoirConfig(**{**self.config.__dict__, "spectral_radius": rho})
        return Reservoir(W_res, self.W_in, config, spectral_radius(W_res),
                         float(np.linalg.norm(W_res, 2)))

    def to_dict(self) -> dict:
        return {
            "config": dict(self.config.__dict__),
            "W_res": self.W_res.tolist(),
            "W_in": self.W_in.tolist(),
            "actual_spectral_radius": self.actual_spectral_radius,
            "spectral_norm_W_res": self.spectral_norm_W_res,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> Reservoir:
        return cls(
            np.asarray(payload["W_res"], dtype=float),
            np.asarray(payload["W_in"], dtype=float),
            ReservoirConfig(**payload["config"]),
            float(payload["actual_spectral_radius"]),
            float(payload["spectral_norm_W_res"]),
        )


def build_reservoir(config: ReservoirConfig) -> Reservoir:
    """Draw sparse uniform recurrent weights and dense uniform input weights.

    ``W_res`` is rescaled so its spectral radius equals
    ``config.spectral_radius``. Identical configs give identical weights.
    """
    rng = np.random.default_rng(config.seed)
    raw = rng.uniform(-1.0, 1.0, size=(config.n_r, config.n_r))
    mask = rng.random((config.n_r, config.n_r)) < config.density
    raw = raw * mask
    W_in = rng.uniform(-config.input_scaling, config.input_scaling, size=(config.n_r, config.n_v))

    rho_raw = spectral_radius(raw)
    if rho_raw <= np.finfo(float).eps:
        raise ConstructionError(
            f"random recurrent matrix has zero spectral radius (seed={config.seed}); re-seed"
        )
    W_res = raw * (config.spectral_radius / rho_raw)
    return Reservoir(W_res, W_in, config, spectral_radius(W_res), float(np.linalg.norm(W_res, 2)))


def _as_inputs(reservoir: Reservoir, inputs) -> np.ndarray:
    v = np.asarray(inputs, dtype=float)
    if v.ndim == 1:
        v = v.reshape(-1, reservoir.n_v)
    if v.ndim != 2 or v.shape[1] != reservoir.n_v:
        raise ShapeError(f"inputs must have shape (T, {reservoir.n_v}), got {v.shape}")
    return v


def _initial_state(reservoir: Reservoir, r0) -> np.ndarray:
    if r0 is None:
        return np.zeros(reservoir.n_r)
    r = np.asarray(r0, dtype=float).reshape(-1)
    if r.shape != (reservoir.n_r,):
        raise ShapeError(f"r0 must have length {reservoir.n_r}, got {r.shape}")
    return r


def _run(reservoir: Reservoir, v: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (states, pre-activations), one row per input."""
    T = v.shape[0]
    drive_terms = v @ reservoir.W_in.T
    states = np.empty((T, reservoir.n_r))
    pre = np.empty((T, reservoir.n_r))
    W = reservoir.W_res
    act = reservoir.activation
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(T):
            z = W @ r + drive_terms[k]
            r = _activate(act, z)
            pre[k] = z
            states[k] = r
    if not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.all(np.isfinite(states), axis=1)))
        raise NumericError(f"reservoir state became non-finite at step {bad}", step=bad)
    return states, pre


def drive(reservoir: Reservoir, inputs, r0=None, washout: int = 0) -> np.ndarray:
    """Iterate the reservoir over ``inputs`` from ``r0`` (default zeros).

    Returns an array of shape ``(T - washout, n_r)``; row ``k`` is the state
    produced by retained input ``k``.
    """
    v = _as_inputs(reservoir, inputs)
    if not 0 <= washout < v.shape[0]:
        raise ShapeError(f"washout must lie in [0, {v.shape[0]}), got {washout}")
    states, _ = _run(reservoir, v, _initial_state(reservoir, r0))
    return states[washout:]


@dataclass(frozen=True)
class ESPReport:
    sufficient: bool
    practical: bool
    gamma: float
    spectral_radius: float


def check_esp(reservoir: Reservoir) -> ESPReport:
    """Contraction test ``L * ||W_res||_2 < 1`` and the practical rule ``rho(W_res) < 1``."""
    gamma = reservoir.lipschitz * float(np.linalg.norm(reservoir.W_res, 2))
    rho = spectral_radius(reservoir.W_res)
    return ESPReport(sufficient=gamma < 1.0, practical=rho < 1.0, gamma=gamma, spectral_radius=rho)


@dataclass(frozen=True)
class MemoryHorizon:
    gamma: float
    epsilon: float
    tau_eps: float
    w_in_norm: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.tau_eps)


def memory_horizon(gamma: float, w_in_norm: float, epsilon: float = DEFAULT_EPSILON) -> MemoryHorizon:
    """Steps until input sensitivity ``gamma**tau * ||W_in||`` falls to ``epsilon``.

    ``gamma >= 1`` yields ``inf``; ``epsilon >= w_in_norm`` yields 0.
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    if not epsilon > 0 or not w_in_norm > 0:
        raise DomainError("epsilon and w_in_norm must be positive")
    if gamma >= 1.0:
        tau = math.inf
    elif epsilon >= w_in_norm:
        tau = 0.0
    else:
        tau = math.log(epsilon / w_in_norm) / math.log(gamma)
    return MemoryHorizon(gamma=gamma, epsilon=epsilon, tau_eps=tau, w_in_norm=w_in_norm)


def input_jacobians(reservoir: Reservoir, inputs, lag_max: int, r0=None) -> list[np.ndarray]:
    """Exact ``d r_k / d v_{k-tau}`` for ``tau = 0..lag_max`` at the final step ``k``.

    Built from the chain of per-step Jacobians ``D_j W_res`` with
    ``D_j = diag(sigma'(z_j))``.
    """
    v = _as_inputs(reservoir, inputs)
    T = v.shape[0]
    if lag_max < 0 or lag_max >= T:
        raise ShapeError(f"need more than lag_max={lag_max} inputs, got {T}")
    _, pre = _run(reservoir, v, _initial_state(reservoir, r0))
    k = T - 1
    act = reservoir.activation
    jacobians = []
    chain = np.eye(reservoir.n_r)
    for tau in range(lag_max + 1):
        d = _activate_grad(act, pre[k - tau])
        jacobians.append(chain @ (d[:, None] * reservoir.W_in))
        chain = chain @ (d[:, None] * reservoir.W_res)
    return jacobians


def sensitivity_profile(reservoir: Reservoir, inputs, lag_max: int, r0=None) -> np.ndarray:
    """Spectral norms of the input Jacobians at lags ``0..lag_max`` (final step reference)."""
    return np.array([np.linalg.norm(J, 2) for J in input_jacobians(reservoir, inputs, lag_max, r0)])
