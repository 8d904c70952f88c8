"""Benchmark systems, forward-Euler stepping and trajectory generation."""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, DomainError, NumericError, ShapeError

DEFAULT_DT = 0.05
DEFAULT_BOUND = 1e6

DUFFING_PARAMS = {"c1": 0.5, "c2": 1.0, "c3": -1.0}

InputGenerator = Callable[[int, np.random.Generator], np.ndarray]


def duffing_step(state, dt: float = DEFAULT_DT, c1: float = 0.5, c2: float = 1.0,
                 c3: float = -1.0) -> np.ndarray:
    """One forward-Euler step of the unforced, damped double-well Duffing oscillator."""
    x1, x2 = np.asarray(state, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        dx = np.array([x2, -c1 * x2 - (c2 * x1 ** 2 + c3) * x1])
        nxt = np.array([x1, x2]) + dt * dx
    if not np.all(np.isfinite(nxt)):
        raise NumericError(f"Duffing step overflowed from state {state!r}")
    return nxt


def diffdrive_step(state, inputs, dt: float = DEFAULT_DT) -> np.ndarray:
    """One forward-Euler step of the unicycle model.

    ``state`` is ``(x, y, theta)`` and ``inputs`` is ``(v, omega)``. The
    heading is left unwrapped.
    """
    x, y, theta = np.asarray(state, dtype=float)
    v, omega = np.asarray(inputs, dtype=float)
    nxt = np.array([x + dt * v * np.cos(theta), y + dt * v * np.sin(theta), theta + dt * omega])
    if not np.all(np.isfinite(nxt)):
        raise NumericError(f"diff-drive step produced non-finite state from {state!r}")
    return nxt


@dataclass(frozen=True)
class SystemSpec:
    """Static description of a discrete-time system ``x+ = f(x, u)``, ``y = h(x)``."""

    name: str
    state_dim: int
    input_dim: int
    output_dim: int
    dt: float
    step: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    params: Mapping[str, float] = field(default_factory=dict)
    output: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.state_dim < 1 or self.output_dim < 1 or self.input_dim < 0:
            raise DomainError("dimensions must be positive (inputs may be zero)")
        if self.output_dim > self.state_dim:
            raise DomainError("output_dim cannot exceed state_dim")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")

    def measure(self, state: np.ndarray) -> np.ndarray:
        if self.output is None:
            return np.asarray(state, dtype=float)[: self.output_dim].copy()
        return np.asarray(self.output(state), dtype=float)


DUFFING = SystemSpec(
    name="duffing",
    state_dim=2,
    input_dim=0,
    output_dim=2,
    dt=DEFAULT_DT,
    step=lambda x, u, dt: duffing_step(x, dt, **DUFFING_PARAMS),
    params=DUFFING_PARAMS,
)

DIFFDRIVE = SystemSpec(
    name="diffdrive",
    state_dim=3,
    input_dim=2,
    output_dim=3,
    dt=DEFAULT_DT,
    step=lambda x, u, dt: diffdrive_step(x, u, dt),
)

SYSTEMS: dict[str, SystemSpec] = {s.name: s for s in (DUFFING, DIFFDRIVE)}


def get_system(name: str) -> SystemSpec:
    try:
        return SYSTEMS[name]
    except KeyError:
        raise DomainError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None


@dataclass(frozen=True)
class TrajectoryData:
    """Measured outputs ``(K+1, n_y)`` and inputs ``(K, n_u)``, time along axis 0."""

    outputs: np.ndarray
    inputs: np.ndarray
    dt: float
    system: str = ""
    seed: int | None = None

    def __post_init__(self):
        outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if outputs.ndim != 2:
            raise ShapeError(f"outputs must be 2-D, got shape {outputs.shape}")
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.size == 0:
            inputs = np.zeros((outputs.shape[0] - 1, 0))
        inputs = inputs.reshape(inputs.shape[0], -1)
        if inputs.shape[0] != outputs.shape[0] - 1:
            raise ShapeError(
                f"expected {outputs.shape[0] - 1} input rows for {outputs.shape[0]} outputs, "
                f"got {inputs.shape[0]}"
            )
        if not (np.all(np.isfinite(outputs)) and np.all(np.isfinite(inputs))):
            raise NumericError("trajectory contains non-finite entries")
        outputs.setflags(write=False)
        inputs.setflags(write=False)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "inputs", inputs)

    @property
    def n_steps(self) -> int:
        return self.outputs.shape[0] - 1

    @property
    def output_dim(self) -> int:
        return self.outputs.shape[1]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.outputs.shape[0]) * self.dt

    @property
    def max_output_norm(self) -> float:
        """Largest measurement norm, the ``M_v`` bound of the conditioning analysis."""
        return float(np.max(np.linalg.norm(self.outputs, axis=1)))


def piecewise_constant_inputs(low, high, hold: int = 1) -> InputGenerator:
    """Random inputs drawn uniformly in ``[low, high]`` and held for ``hold`` steps."""
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)

    def generate(n_steps: int, rng: np.random.Generator) -> np.ndarray:
        n_blocks = -(-n_steps // hold)
        levels = rng.uniform(low, high, size=(n_blocks, low.size))
        return np.repeat(levels, hold, axis=0)[:n_steps]

    return generate


# v in [0, 1], omega in [-1, 1], redrawn every step.
DIFFDRIVE_EXCITATION = piecewise_constant_inputs([0.0, -1.0], [1.0, 1.0], hold=1)


def sample_initial_state(spec: SystemSpec, rng: np.random.Generator) -> np.ndarray:
    """Seeded initial condition covering both Duffing wells or a generic robot pose."""
    if spec.name == "duffing":
        return rng.uniform(-2.0, 2.0, size=2)
    if spec.name == "diffdrive":
        return np.concatenate([rng.uniform(-1.0, 1.0, size=2), rng.uniform(-np.pi, np.pi, size=1)])
    raise DomainError(f"no initial-condition distribution registered for {spec.name!r}")


def generate_trajectory(
    spec: SystemSpec,
    x0,
    n_steps: int,
    inputs: np.ndarray | InputGenerator | None = None,
    seed: int = 0,
    bound: float = DEFAULT_BOUND,
) -> TrajectoryData:
    """Simulate ``n_steps`` steps from ``x0`` and return the ``n_steps + 1`` measurements.

    ``inputs`` is either an ``(n_steps, n_u)`` array or a callable
    ``(n_steps, rng) -> array`` seeded from ``seed``. Raises
    :class:`DivergenceError` if any state component exceeds ``bound``.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (spec.state_dim,):
        raise ShapeError(f"x0 must have shape ({spec.state_dim},), got {x.shape}")
    if n_steps < 1:
        raise DomainError("n_steps must be >= 1")

    rng = np.random.default_rng(seed)
    if callable(inputs):
        u = np.asarray(inputs(n_steps, rng), dtype=float)
    elif inputs is None:
        if spec.input_dim:
            raise ShapeError(f"system {spec.name!r} needs {spec.input_dim} inputs per step")
        u = np.zeros((n_steps, 0))
    else:
        u = np.asarray(inputs, dtype=float)
    u = u.reshape(n_steps, spec.input_dim)
    if not np.all(np.isfinite(u)):
        raise NumericError("input sequence contains non-finite entries")

    ys = np.empty((n_steps + 1, spec.output_dim))
    ys[0] = spec.measure(x)
    for k in range(n_steps):
        x = spec.step(x, u[k], spec.dt)
        if np.max(np.abs(x)) > bound:
            raise DivergenceError(f"trajectory escaped |x| <= {bound:g} at step {k + 1}", step=k + 1)
        ys[k + 1] = spec.measure(x)
    return TrajectoryData(ys, u, spec.dt, system=spec.name, seed=seed)
