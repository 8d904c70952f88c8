"""Dictionaries that lift measurements, and snapshot-matrix assembly.

Every lift places the raw measurement ``y_k`` in the first ``n_y`` rows of
``psi_k``, so the output projection ``C = [I 0]`` is shared by all of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.stats import qmc

from .dynamics import TrajectoryData
from .errors import DomainError, InputDataError, ShapeError
from .reservoir import DEFAULT_WASHOUT, Reservoir, drive

DictionaryKind = Literal["reservoir", "rbf", "hankel"]
DEFAULT_LIFT_DIM = 12
# Kernel width as a multiple of the median pairwise center distance.
DEFAULT_WIDTH_FACTOR = 10.0


@dataclass(frozen=True)
class LiftedSnapshots:
    """Column-major snapshot triple: ``Psi``, ``Psi_prime`` are ``(n_psi, K)``, ``U`` is ``(n_u, K)``."""

    Psi: np.ndarray
    Psi_prime: np.ndarray
    U: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        Psi = np.asarray(self.Psi, dtype=float)
        Psi_prime = np.asarray(self.Psi_prime, dtype=float)
        U = np.asarray(self.U, dtype=float)
        if U.size == 0:
            U = np.zeros((0, Psi.shape[1]))
        if Psi.ndim != 2 or Psi.shape != Psi_prime.shape:
            raise ShapeError(f"Psi {Psi.shape} and Psi_prime {Psi_prime.shape} must match")
        if U.ndim != 2 or U.shape[1] != Psi.shape[1]:
            raise ShapeError(f"U {U.shape} must have {Psi.shape[1]} columns")
        if Psi.shape[1] < 1:
            raise ShapeError("snapshots need at least one column")
        for name, arr in (("Psi", Psi), ("Psi_prime", Psi_prime), ("U", U)):
            if not np.all(np.isfinite(arr)):
                raise InputDataError(f"{name} contains non-finite entries")
        object.__setattr__(self, "Psi", Psi)
        object.__setattr__(self, "Psi_prime", Psi_prime)
        object.__setattr__(self, "U", U)

    @property
    def K(self) -> int:
        return self.Psi.shape[1]

    @property
    def lift_dim(self) -> int:
        return self.Psi.shape[0]

    @property
    def input_dim(self) -> int:
        return self.U.shape[0]

    @property
    def well_posed(self) -> bool:
        return self.K > self.lift_dim + self.input_dim


def _pairs(psi: np.ndarray, inputs: np.ndarray, meta: dict) -> LiftedSnapshots:
    """Time-shifted pairs from lifted rows ``psi`` (time-major) and aligned inputs."""
    return LiftedSnapshots(psi[:-1].T, psi[1:].T, inputs.T, meta)


def lift_reservoir(reservoir: Reservoir, traj: TrajectoryData,
                   washout: int = DEFAULT_WASHOUT) -> LiftedSnapshots:
    """Stack ``[y_k; r_k]`` with the reservoir driven by the measurements from a zero state."""
    if traj.output_dim != reservoir.n_v:
        raise ShapeError(f"reservoir expects {reservoir.n_v} inputs, trajectory has {traj.output_dim}")
    if traj.n_steps - washout < 1:
        raise ShapeError(
            f"washout {washout} leaves no snapshot pairs from a {traj.n_steps}-step trajectory"
        )
    states = drive(reservoir, traj.outputs)
    psi = np.hstack([traj.outputs, states])[washout:]
    return _pairs(psi, traj.inputs[washout:], {"kind": "reservoir", "washout": washout})


def rbf_features(outputs: np.ndarray, centers: np.ndarray, width: float) -> np.ndarray:
    """Gaussian kernels ``exp(-||y - c||^2 / (2 width^2))``, one column per center."""
    if not width > 0:
        raise DomainError(f"RBF width must be positive, got {width}")
    d2 = cdist(np.atleast_2d(outputs), np.atleast_2d(centers), "sqeuclidean")
    return np.exp(-d2 / (2.0 * width ** 2))


def lift_rbf(centers, width: float, traj: TrajectoryData) -> LiftedSnapshots:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] != traj.output_dim:
        raise ShapeError(f"centers have dim {centers.shape[1]}, outputs have {traj.output_dim}")
    psi = np.hstack([traj.outputs, rbf_features(traj.outputs, centers, width)])
    return _pairs(psi, traj.inputs, {"kind": "rbf"})


def hankel_rows(outputs: np.ndarray, delays: int) -> np.ndarray:
    """Row ``j`` is ``[y_{j+d-1}, y_{j+d-2}, ..., y_j]`` (newest block first)."""
    T = outputs.shape[0]
    return np.hstack([outputs[delays - 1 - i: T - i] for i in range(delays)])


def lift_hankel(delays: int, traj: TrajectoryData) -> LiftedSnapshots:
    if delays < 1:
        raise DomainError("delays must be >= 1")
    if traj.outputs.shape[0] < delays + 1:
        raise ShapeError(f"trajectory of {traj.outputs.shape[0]} samples is shorter than d+1={delays + 1}")
    psi = hankel_rows(traj.outputs, delays)
    return _pairs(psi, traj.inputs[delays - 1:], {"kind": "hankel", "delays": delays})


def concat_snapshots(batches: list[LiftedSnapshots]) -> LiftedSnapshots:
    """Join per-trajectory snapshots column-wise without creating cross-trajectory pairs."""
    if not batches:
        raise ShapeError("nothing to concatenate")
    first = batches[0]
    for b in batches[1:]:
        if b.lift_dim != first.lift_dim or b.input_dim != first.input_dim:
            raise ShapeError(
                f"batch dims ({b.lift_dim}, {b.input_dim}) differ from ({first.lift_dim}, {first.input_dim})"
            )
    if len(batches) == 1:
        return first
    return LiftedSnapshots(
        np.hstack([b.Psi for b in batches]),
        np.hstack([b.Psi_prime for b in batches]),
        np.hstack([b.U for b in batches]),
        dict(first.meta),
    )


def latin_hypercube_centers(data: np.ndarray, n_centers: int, seed: int = 0) -> np.ndarray:
    """``n_centers`` Latin-hypercube points inside the bounding box of ``data`` rows."""
    data = np.atleast_2d(data)
    lo, hi = data.min(axis=0), data.max(axis=0)
    sample = qmc.LatinHypercube(d=data.shape[1], seed=seed).random(n_centers)
    return qmc.scale(sample, lo, np.where(hi > lo, hi, lo + 1e-12))


def median_center_distance(centers: np.ndarray) -> float:
    if len(centers) < 2:
        return 1.0
    return float(np.median(pdist(centers)))


# ---------------------------------------------------------------------------
# Dictionary objects: a lift plus everything needed to replay it.
# ---------------------------------------------------------------------------


class Dictionary:
    kind: DictionaryKind
    lift_dim: int
    output_dim: int

    def lift(self, traj: TrajectoryData) -> LiftedSnapshots:
        raise NotImplementedError

    def lift_many(self, trajectories) -> LiftedSnapshots:
        if isinstance(trajectories, TrajectoryData):
            return self.lift(trajectories)
        return concat_snapshots([self.lift(t) for t in trajectories])

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(payload: dict) -> Dictionary:
        kind = payload["kind"]
        if kind == "reservoir":
            return ReservoirDictionary(Reservoir.from_dict(payload["reservoir"]), int(payload["washout"]))
        if kind == "rbf":
            return RBFDictionary(np.asarray(payload["centers"], dtype=float), float(payload["width"]))
        if kind == "hankel":
            return HankelDictionary(int(payload["delays"]), int(payload["output_dim"]))
        raise DomainError(f"unknown dictionary kind {kind!r}")


class ReservoirDictionary(Dictionary):
    kind = "reservoir"

    def __init__(self, reservoir: Reservoir, washout: int = DEFAULT_WASHOUT):
        self.reservoir = reservoir
        self.washout = washout
        self.output_dim = reservoir.n_v
        self.lift_dim = reservoir.n_v + reservoir.n_r

    def lift(self, traj):
        return lift_reservoir(self.reservoir, traj, self.washout)

    def to_dict(self):
        return {"kind": self.kind, "lift_dim": self.lift_dim, "washout": self.washout,
                "reservoir": self.reservoir.to_dict()}


class RBFDictionary(Dictionary):
    kind = "rbf"

    def __init__(self, centers: np.ndarray, width: float):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.width = float(width)
        if not self.width > 0:
            raise DomainError(f"RBF width must be positive, got {width}")
        self.output_dim = self.centers.shape[1]
        self.lift_dim = self.output_dim + self.centers.shape[0]

    @classmethod
    def fit(cls, data: np.ndarray, lift_dim: int = DEFAULT_LIFT_DIM, seed: int = 0,
            width_factor: float = DEFAULT_WIDTH_FACTOR) -> RBFDictionary:
        """Place ``lift_dim - n_y`` centers by Latin hypercube over the data's bounding box.

        The shared kernel width is ``width_factor`` times the median pairwise
        distance between centers.
        """
        n_centers = lift_dim - data.shape[1]
        if n_centers < 1:
            raise DomainError(f"lift_dim {lift_dim} leaves no room for RBF centers")
        centers = latin_hypercube_centers(data, n_centers, seed)
        return cls(centers, width_factor * median_center_distance(centers))

    def lift(self, traj):
        return lift_rbf(self.centers, self.width, traj)

    def to_dict(self):
        return {"kind": self.kind, "lift_dim": self.lift_dim, "centers": self.centers.tolist(),
                "width": self.width}


class HankelDictionary(Dictionary):
    kind = "hankel"

    def __init__(self, delays: int, output_dim: int):
        if delays < 1:
            raise DomainError("delays must be >= 1")
        self.delays = int(delays)
        self.output_dim = int(output_dim)
        self.lift_dim = self.delays * self.output_dim

    @classmethod
    def for_lift_dim(cls, output_dim: int, lift_dim: int = DEFAULT_LIFT_DIM) -> HankelDictionary:
        if lift_dim % output_dim:
            raise DomainError(f"lift_dim {lift_dim} is not a multiple of n_y={output_dim}")
        return cls(lift_dim // output_dim, output_dim)

    def lift(self, traj):
        if traj.output_dim != self.output_dim:
            raise ShapeError(f"expected {self.output_dim} outputs, got {traj.output_dim}")
        return lift_hankel(self.delays, traj)

    def to_dict(self):
        return {"kind": self.kind, "lift_dim": self.lift_dim, "delays": self.delays,
                "output_dim": self.output_dim}
