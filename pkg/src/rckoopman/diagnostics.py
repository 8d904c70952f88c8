"""Conditioning, memory/spectrum observability and correlation-based radius selection."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .dynamics import TrajectoryData
from .errors import DomainError, InputDataError, RCKoopmanError, SelectionError, ShapeError
from .koopman import DEFAULT_RIDGE, identify, spectrum
from .lifting import LiftedSnapshots, ReservoirDictionary
from .reservoir import DEFAULT_EPSILON, DEFAULT_WASHOUT, Reservoir, ReservoirConfig, build_reservoir, memory_horizon

ALPHA_FLOOR = 1e-12
DEFAULT_RHOS = (0.1, 0.3, 0.5, 0.7, 0.9, 0.98, 1.1, 1.5)
E_FOLD = math.exp(-1.0)
# Modes with |lambda| >= 1 - PERSISTENCE_TOL are treated as non-decaying
# (numerically on the unit circle), e.g. the constant mode at a fixed point.
PERSISTENCE_TOL = 1e-3


@dataclass(frozen=True)
class ConditioningReport:
    """Gramian statistics of ``G = Psi Psi^T``.

    ``kappa`` and ``bound`` are only defined when persistent excitation holds
    (``alpha > alpha_floor``); otherwise they are ``inf`` and ``nan``.
    ``kappa_numeric`` is ``(s_max / s_min)**2`` from the singular values of
    ``Psi``, which stays finite for near-singular Gramians whose smallest
    eigenvalue is lost to rounding.
    """

    C_psi: float
    alpha: float
    lambda_max: float
    lambda_min: float
    kappa: float
    kappa_numeric: float
    bound: float
    pe_satisfied: bool
    K: int
    alpha_floor: float

    @property
    def alpha_status(self) -> str:
        return f"{self.alpha:.6e}" if self.pe_satisfied else f"<{self.alpha_floor:g}"

    @property
    def bound_holds(self) -> bool | None:
        if not self.pe_satisfied:
            return None
        return self.kappa <= self.bound * (1.0 + 1e-6)

    def to_dict(self) -> dict:
        return {
            "C_psi": self.C_psi,
            "alpha": self.alpha,
            "alpha_status": self.alpha_status,
            "lambda_max": self.lambda_max,
            "lambda_min": self.lambda_min,
            "kappa": self.kappa,
            "kappa_numeric": self.kappa_numeric,
            "bound": self.bound,
            "pe_satisfied": self.pe_satisfied,
            "K": self.K,
            "alpha_floor": self.alpha_floor,
        }


def conditioning(snapshots: LiftedSnapshots | np.ndarray, alpha_floor: float = ALPHA_FLOOR) -> ConditioningReport:
    Psi = snapshots.Psi if isinstance(snapshots, LiftedSnapshots) else np.atleast_2d(snapshots)
    K = Psi.shape[1]
    if K < 1:
        raise ShapeError("conditioning needs at least one snapshot")
    G = Psi @ Psi.T
    eig = np.linalg.eigvalsh(G)
    lam_min, lam_max = float(eig[0]), float(eig[-1])
    alpha = lam_min / K
    pe = alpha > alpha_floor
    C_psi = float(np.max(np.linalg.norm(Psi, axis=0)))
    sv = np.linalg.svd(Psi, compute_uv=False)
    kappa_numeric = float((sv[0] / sv[-1]) ** 2) if sv[-1] > 0 and sv.size == Psi.shape[0] else math.inf
    return ConditioningReport(
        C_psi=C_psi,
        alpha=alpha,
        lambda_max=lam_max,
        lambda_min=lam_min,
        kappa=lam_max / lam_min if pe else math.inf,
        kappa_numeric=kappa_numeric,
        bound=C_psi ** 2 / alpha if pe else math.nan,
        pe_satisfied=pe,
        K=K,
        alpha_floor=alpha_floor,
    )


def decaying_modes_observable(points: Sequence[ObservabilityPoint]) -> bool:
    """True when every finite-lifetime, non-persistent mode lies inside the memory horizon."""
    return all(p.observable for p in points if not p.persistent and math.isfinite(p.lifetime))


def eigenvalue_lifetimes(eigenvalues) -> np.ndarray:
    """E-folding times ``-1/log|lambda|``; 0 for ``lambda = 0`` and ``inf`` for ``|lambda| >= 1``."""
    mod = np.abs(np.asarray(eigenvalues, dtype=complex)).reshape(-1)
    out = np.full(mod.shape, math.inf)
    zero = mod == 0
    decaying = (mod > 0) & (mod < 1)
    out[zero] = 0.0
    out[decaying] = -1.0 / np.log(mod[decaying])
    return out


def _segments(outputs) -> list[np.ndarray]:
    if isinstance(outputs, TrajectoryData):
        return [outputs.outputs]
    if isinstance(outputs, np.ndarray):
        return [outputs.reshape(outputs.shape[0], -1)]
    if len(outputs) and isinstance(outputs[0], TrajectoryData):
        return [t.outputs for t in outputs]
    if len(outputs) and isinstance(outputs[0], np.ndarray) and outputs[0].ndim == 2:
        return [np.asarray(s, dtype=float) for s in outputs]
    arr = np.asarray(outputs, dtype=float)
    return [arr.reshape(arr.shape[0], -1)]


def autocorrelation(outputs, max_lag: int, demean: bool = False) -> np.ndarray:
    """Normalized raw autocorrelation ``C(tau)`` for ``tau = 0..max_lag``.

    ``C(tau) = sum_k y_k . y_{k+tau} / sum_k y_k . y_k`` with no mean
    removal unless ``demean`` is set. ``outputs`` may also be a list of
    trajectories, whose lagged sums are pooled without crossing boundaries.
    """
    segs = _segments(outputs)
    if demean:
        mean = np.concatenate(segs).mean(axis=0)
        segs = [s - mean for s in segs]
    if max_lag < 0 or any(max_lag >= s.shape[0] for s in segs):
        raise ShapeError(f"max_lag={max_lag} must be smaller than every sequence length")
    energy = sum(float(np.vdot(s, s)) for s in segs)
    if energy == 0.0:
        raise InputDataError("autocorrelation of an all-zero signal is undefined")
    acf = np.empty(max_lag + 1)
    acf[0] = 1.0
    for tau in range(1, max_lag + 1):
        acf[tau] = sum(float(np.vdot(s[:-tau], s[tau:])) for s in segs) / energy
    return acf


@dataclass(frozen=True)
class SpectralRadiusSelection:
    rho: float
    tau_c: int
    acf: np.ndarray


def select_spectral_radius(outputs, max_lag: int, threshold: float = E_FOLD,
                           demean: bool = False) -> SpectralRadiusSelection:
    """Match reservoir memory to the data: ``rho = exp(-1/tau_c)``, ``tau_c`` the first lag with ``C <= threshold``."""
    acf = autocorrelation(outputs, max_lag, demean=demean)
    below = np.flatnonzero(acf[1:] <= threshold)
    if below.size == 0:
        raise SelectionError(
            f"autocorrelation never drops to {threshold:.4g} within {max_lag} lags "
            f"(min {acf[1:].min():.4g}); increase max_lag or supply longer data"
        )
    tau_c = int(below[0]) + 1
    return SpectralRadiusSelection(rho=math.exp(-1.0 / tau_c), tau_c=tau_c, acf=acf)


@dataclass(frozen=True)
class ObservabilityPoint:
    eigenvalue: complex
    lifetime: float
    rho: float
    tau_eps: float
    observable: bool
    persistent: bool = False

    @property
    def modulus(self) -> float:
        return abs(self.eigenvalue)

    @property
    def over_extended(self) -> bool:
        """Memory horizon unbounded (``rho >= 1``), so the bound carries no information."""
        return math.isinf(self.tau_eps)


@dataclass(frozen=True)
class ScanFailure:
    rho: float
    error: str


def observability_scan(
    trajectories,
    rhos: Sequence[float] = DEFAULT_RHOS,
    base_config: ReservoirConfig | None = None,
    epsilon: float = DEFAULT_EPSILON,
    ridge: float = DEFAULT_RIDGE,
    washout: int = DEFAULT_WASHOUT,
    base_reservoir: Reservoir | None = None,
    persistence_tol: float = PERSISTENCE_TOL,
) -> tuple[list[ObservabilityPoint], list[ScanFailure]]:
    """Eigenvalue lifetimes against the memory horizon across spectral radii.

    One reservoir is drawn (``base_config`` seed) and rescaled to each
    ``rho``; the horizon uses ``gamma = rho``. A point is ``observable`` when
    its lifetime does not exceed the horizon, and ``persistent`` when
    ``|lambda| >= 1 - persistence_tol``. Failures at one radius are recorded
    and the scan continues.
    """
    if not rhos or any(r <= 0 for r in rhos):
        raise DomainError("rhos must be non-empty and positive")
    if base_reservoir is None:
        if base_config is None:
            raise DomainError("give base_config or base_reservoir")
        base_reservoir = build_reservoir(base_config)
    if isinstance(trajectories, TrajectoryData):
        trajectories = [trajectories]
    points: list[ObservabilityPoint] = []
    failures: list[ScanFailure] = []
    for rho in rhos:
        try:
            res = base_reservoir.rescaled(rho)
            dictionary = ReservoirDictionary(res, washout)
            model = identify(dictionary.lift_many(trajectories), ridge, output_dim=dictionary.output_dim)
            eig = spectrum(model).eigenvalues
            tau = memory_horizon(rho, res.input_norm, epsilon).tau_eps
        except (RCKoopmanError, np.linalg.LinAlgError, ValueError) as exc:
            failures.append(ScanFailure(rho, f"{type(exc).__name__}: {exc}"))
            continue
        for lam, life in zip(eig, eigenvalue_lifetimes(eig)):
            points.append(ObservabilityPoint(complex(lam), float(life), float(rho), float(tau),
                                             bool(life <= tau), bool(abs(lam) >= 1.0 - persistence_tol)))
    return points, failures
