"""End-to-end experiments: datasets, per-method dictionaries, benchmark cells and tables."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Literal

import numpy as np

from . import serialization as sio
from .diagnostics import (
    DEFAULT_RHOS,
    ConditioningReport,
    ObservabilityPoint,
    SpectralRadiusSelection,
    conditioning,
    decaying_modes_observable,
    observability_scan,
    select_spectral_radius,
)
from .dynamics import DIFFDRIVE_EXCITATION, TrajectoryData, generate_trajectory, get_system, sample_initial_state
from .errors import DomainError, RCKoopmanError
from .koopman import DEFAULT_RIDGE, KoopmanModel, Spectrum, evaluate_onestep, identify, rollout, spectrum
from .lifting import (
    DEFAULT_LIFT_DIM,
    DEFAULT_WIDTH_FACTOR,
    Dictionary,
    HankelDictionary,
    LiftedSnapshots,
    RBFDictionary,
    ReservoirDictionary,
)
from .reservoir import (
    DEFAULT_DENSITY,
    DEFAULT_EPSILON,
    DEFAULT_INPUT_SCALING,
    DEFAULT_WASHOUT,
    ReservoirConfig,
    build_reservoir,
    memory_horizon,
)

Method = Literal["rc", "edmd", "hankel"]
METHODS: tuple[str, ...] = ("rc", "edmd", "hankel")
METHOD_LABELS = {"rc": "RC-Koopman", "edmd": "EDMD", "hankel": "HAVOK"}
SYSTEM_NAMES: tuple[str, ...] = ("duffing", "diffdrive")

# Every stochastic stage draws from master_seed * 1000 + offset.
SEED_OFFSETS = {"train": 1, "test": 2, "reservoir": 3, "rbf": 4}


def derive_seed(master: int, stage: str) -> int:
    return int(master) * 1000 + SEED_OFFSETS[stage]


@dataclass
class ExperimentConfig:
    system: str = "duffing"
    method: str = "rc"
    lift_dim: int = DEFAULT_LIFT_DIM
    ridge: float = DEFAULT_RIDGE
    seed: int = 0
    train_len: int = 200
    test_len: int = 200
    n_train: int = 10
    n_test: int = 10
    washout: int = DEFAULT_WASHOUT
    rho: float | str = "auto"
    epsilon: float = DEFAULT_EPSILON
    max_lag: int | None = None
    threshold: float = math.exp(-1.0)
    demean_acf: bool = False
    input_scaling: float = DEFAULT_INPUT_SCALING
    density: float = DEFAULT_DENSITY
    rbf_width_factor: float = DEFAULT_WIDTH_FACTOR
    output_dir: str = "out"

    def __post_init__(self):
        get_system(self.system)
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; choose from {METHODS}")
        if isinstance(self.rho, str) and self.rho != "auto":
            self.rho = float(self.rho)
        if self.rho != "auto" and not float(self.rho) > 0:
            raise DomainError("rho must be positive or 'auto'")
        for name in ("lift_dim", "train_len", "test_len", "n_train", "n_test"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")
        if self.ridge < 0 or self.washout < 0:
            raise DomainError("ridge and washout must be non-negative")

    @classmethod
    def from_dict(cls, payload: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def acf_max_lag(self) -> int:
        return self.max_lag if self.max_lag is not None else self.train_len - 1


def generate_dataset(system: str, n_traj: int, length: int, seed: int) -> list[TrajectoryData]:
    """``n_traj`` independent trajectories of ``length`` steps from seeded random initial states."""
    spec = get_system(system)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_traj):
        x0 = sample_initial_state(spec, rng)
        inputs = DIFFDRIVE_EXCITATION(length, rng) if spec.input_dim else None
        out.append(generate_trajectory(spec, x0, length, inputs, seed=seed))
    return out


def make_datasets(config: ExperimentConfig) -> tuple[list[TrajectoryData], list[TrajectoryData]]:
    train = generate_dataset(config.system, config.n_train, config.train_len, derive_seed(config.seed, "train"))
    test = generate_dataset(config.system, config.n_test, config.test_len, derive_seed(config.seed, "test"))
    return train, test


@dataclass
class DictionaryChoice:
    dictionary: Dictionary
    selection: SpectralRadiusSelection | None = None

    @property
    def rho(self) -> float | None:
        if isinstance(self.dictionary, ReservoirDictionary):
            return self.dictionary.reservoir.config.spectral_radius
        return None


def reservoir_config(config: ExperimentConfig, n_y: int, rho: float) -> ReservoirConfig:
    return ReservoirConfig(
        n_r=config.lift_dim - n_y,
        n_v=n_y,
        spectral_radius=rho,
        input_scaling=config.input_scaling,
        density=config.density,
        activation="tanh",
        seed=derive_seed(config.seed, "reservoir"),
    )


def select_rho(config: ExperimentConfig, train: list[TrajectoryData]) -> SpectralRadiusSelection:
    return select_spectral_radius(train, config.acf_max_lag, config.threshold, demean=config.demean_acf)


def build_dictionary(config: ExperimentConfig, train: list[TrajectoryData]) -> DictionaryChoice:
    n_y = train[0].output_dim
    if config.method == "rc":
        selection = None
        if config.rho == "auto":
            selection = select_rho(config, train)
            rho = selection.rho
        else:
            rho = float(config.rho)
        if config.lift_dim <= n_y:
            raise DomainError(f"lift_dim {config.lift_dim} leaves no reservoir units")
        res = build_reservoir(reservoir_config(config, n_y, rho))
        return DictionaryChoice(ReservoirDictionary(res, config.washout), selection)
    if config.method == "edmd":
        data = np.vstack([t.outputs for t in train])
        return DictionaryChoice(RBFDictionary.fit(data, config.lift_dim, derive_seed(config.seed, "rbf"),
                                                  config.rbf_width_factor))
    return DictionaryChoice(HankelDictionary.for_lift_dim(n_y, config.lift_dim))


@dataclass
class CellResult:
    system: str
    method: str
    seed: int
    model: KoopmanModel
    choice: DictionaryChoice
    train: LiftedSnapshots
    test: LiftedSnapshots
    train_nrmse: float
    test_nrmse: float
    conditioning: ConditioningReport
    spectrum: Spectrum


def fit_model(config: ExperimentConfig, train: list[TrajectoryData]) -> tuple[KoopmanModel, DictionaryChoice, LiftedSnapshots]:
    choice = build_dictionary(config, train)
    snaps = choice.dictionary.lift_many(train)
    lineage = {"system": config.system, "method": config.method, "seed": config.seed,
               "train_hash": sio.trajectory_hash(*train)}
    if choice.selection is not None:
        lineage.update(rho=choice.selection.rho, tau_c=choice.selection.tau_c)
    model = identify(snaps, config.ridge, output_dim=choice.dictionary.output_dim,
                     dictionary=choice.dictionary.to_dict(), lineage=lineage)
    return model, choice, snaps


def run_cell(config: ExperimentConfig, train=None, test=None) -> CellResult:
    if train is None or test is None:
        train, test = make_datasets(config)
    model, choice, train_snaps = fit_model(config, train)
    test_snaps = choice.dictionary.lift_many(test)
    return CellResult(
        system=config.system,
        method=config.method,
        seed=config.seed,
        model=model,
        choice=choice,
        train=train_snaps,
        test=test_snaps,
        train_nrmse=evaluate_onestep(model, train_snaps).nrmse,
        test_nrmse=evaluate_onestep(model, test_snaps).nrmse,
        conditioning=conditioning(train_snaps),
        spectrum=spectrum(model),
    )


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------


@dataclass
class BenchmarkResult:
    seeds: list[int]
    nrmse: dict[tuple[str, str], list[float]] = field(default_factory=dict)
    errors: dict[tuple[str, str], list[str]] = field(default_factory=dict)
    unstable: dict[tuple[str, str], list[int]] = field(default_factory=dict)
    conditioning: dict[tuple[str, str], list[ConditioningReport]] = field(default_factory=dict)
    selected_rho: dict[str, list[float]] = field(default_factory=dict)
    reference: dict[tuple[str, str], CellResult] = field(default_factory=dict)
    scans: dict[str, list[ObservabilityPoint]] = field(default_factory=dict)
    scan_failures: dict[str, list] = field(default_factory=dict)
    reference_rho: dict[str, float] = field(default_factory=dict)
    test_data: dict[str, list[TrajectoryData]] = field(default_factory=dict)

    def median_nrmse(self, system: str, method: str) -> float:
        vals = self.nrmse.get((system, method), [])
        return float(np.median(vals)) if vals else math.nan


def benchmark_seeds(master: int, n_seeds: int) -> list[int]:
    return [master + i for i in range(n_seeds)]


def run_benchmark(base: ExperimentConfig, n_seeds: int = 10, systems=SYSTEM_NAMES, methods=METHODS,
                  rhos=DEFAULT_RHOS) -> BenchmarkResult:
    """Fit every method on every system for ``n_seeds`` consecutive seeds.

    The first seed is the reference run used for conditioning, spectra,
    reconstructions and the observability scan. Cell failures are recorded
    and do not stop the run.
    """
    seeds = benchmark_seeds(base.seed, n_seeds)
    result = BenchmarkResult(seeds=seeds)
    for system in systems:
        for seed in seeds:
            cfg = replace(base, system=system, seed=seed)
            train, test = make_datasets(cfg)
            if seed == seeds[0]:
                result.test_data[system] = test
            for method in methods:
                key = (system, method)
                try:
                    cell = run_cell(replace(cfg, method=method), train, test)
                except (RCKoopmanError, np.linalg.LinAlgError, ValueError) as exc:
                    result.errors.setdefault(key, []).append(f"seed {seed}: {type(exc).__name__}: {exc}")
                    continue
                result.nrmse.setdefault(key, []).append(cell.test_nrmse)
                result.unstable.setdefault(key, []).append(cell.spectrum.unstable_count)
                result.conditioning.setdefault(key, []).append(cell.conditioning)
                if method == "rc" and cell.choice.rho is not None:
                    result.selected_rho.setdefault(system, []).append(cell.choice.rho)
                if seed == seeds[0]:
                    result.reference[key] = cell

        ref = result.reference.get((system, "rc"))
        if ref is None:
            continue
        reservoir = ref.choice.dictionary.reservoir
        rho_ref = reservoir.config.spectral_radius
        result.reference_rho[system] = rho_ref
        scan_rhos = sorted(set(rhos) | {rho_ref})
        train_ref, _ = make_datasets(replace(base, system=system, seed=seeds[0]))
        points, failures = observability_scan(train_ref, scan_rhos, epsilon=base.epsilon, ridge=base.ridge,
                                              washout=base.washout, base_reservoir=reservoir)
        result.scans[system] = points
        result.scan_failures[system] = failures
    return result


def write_benchmark(result: BenchmarkResult, output_dir, systems=SYSTEM_NAMES, methods=METHODS) -> list[Path]:
    """Write the table/figure CSVs plus ``summary.txt``; returns the written paths."""
    out = Path(output_dir)
    written = []

    rows = []
    for method in methods:
        for system in systems:
            key = (system, method)
            vals = result.nrmse.get(key, [])
            errs = result.errors.get(key, [])
            status = "ok" if not errs else "; ".join(errs)
            rows.append([METHOD_LABELS[method], system, result.median_nrmse(system, method),
                         min(vals) if vals else math.nan, max(vals) if vals else math.nan, len(vals), status])
    written.append(sio.write_csv(out / "table1_nrmse.csv",
                                 ["method", "system", "nrmse_median", "nrmse_min", "nrmse_max", "n_seeds", "status"],
                                 rows))

    rows = []
    for system in systems:
        for method in methods:
            cell = result.reference.get((system, method))
            if cell is None:
                rows.append([METHOD_LABELS[method], system, "error", "error", "error", "error", "error", "error"])
                continue
            c = cell.conditioning
            rows.append([METHOD_LABELS[method], system, c.C_psi, c.alpha_status, c.kappa_numeric,
                         c.bound if c.pe_satisfied else "---", c.lambda_max, c.pe_satisfied])
    written.append(sio.write_csv(out / "table2_conditioning.csv",
                                 ["method", "system", "C_psi", "alpha", "kappa", "bound", "lambda_max", "pe_satisfied"],
                                 rows))

    rows = []
    for system in systems:
        for method in methods:
            cell = result.reference.get((system, method))
            if cell is None:
                continue
            for lam in cell.spectrum.eigenvalues:
                rows.append([METHOD_LABELS[method], system, lam.real, lam.imag, abs(lam),
                             bool(abs(lam) <= 1.0 + 1e-9)])
    written.append(sio.write_csv(out / "fig3_spectra.csv", ["method", "system", "re", "im", "modulus", "stable"], rows))

    rows = []
    for system in systems:
        for p in result.scans.get(system, []):
            rows.append([system, p.rho, p.tau_eps, p.eigenvalue.real, p.eigenvalue.imag, p.lifetime,
                         p.observable, p.persistent])
    written.append(sio.write_csv(out / "fig4_observability.csv",
                                 ["system", "rho", "tau_eps", "re_lambda", "im_lambda", "lifetime", "observable",
                                  "persistent"], rows))

    rows = []
    for system in systems:
        test = result.test_data.get(system)
        if not test:
            continue
        traj = test[0]
        for method in methods:
            cell = result.reference.get((system, method))
            if cell is None:
                continue
            single = cell.choice.dictionary.lift(traj)
            onestep = evaluate_onestep(cell.model, single).predictions
            roll = rollout(cell.model, single.Psi[:, 0], single.U.T, n_steps=single.K)
            truth = single.Psi_prime[: traj.output_dim].T
            offset = traj.n_steps - single.K
            for k in range(single.K):
                for ch in range(traj.output_dim):
                    r = roll.outputs[k, ch] if k < len(roll.outputs) else math.nan
                    rows.append([METHOD_LABELS[method], system, k + offset + 1, f"y{ch + 1}",
                                 truth[k, ch], onestep[k, ch], r])
    written.append(sio.write_csv(out / "fig2_reconstruction.csv",
                                 ["method", "system", "k", "channel", "truth", "onestep", "rollout"], rows))

    written.append(sio.atomic_write_text(out / "summary.txt", format_summary(result, systems, methods)))
    return written


def format_summary(result: BenchmarkResult, systems=SYSTEM_NAMES, methods=METHODS) -> str:
    lines = [f"seeds: {result.seeds[0]}..{result.seeds[-1]} ({len(result.seeds)} runs)", "",
             "One-step NRMSE (median over seeds)"]
    lines.append(f"  {'method':<12}" + "".join(f"{s:>14}" for s in systems))
    for m in methods:
        lines.append(f"  {METHOD_LABELS[m]:<12}" + "".join(f"{result.median_nrmse(s, m):>14.3e}" for s in systems))
    lines += ["", "Conditioning of the training Gramian (reference seed)"]
    for s in systems:
        for m in methods:
            cell = result.reference.get((s, m))
            if cell is None:
                lines.append(f"  {s:<10} {METHOD_LABELS[m]:<12} error")
                continue
            c = cell.conditioning
            bound = f"{c.bound:.2e}" if c.pe_satisfied else "---"
            lines.append(f"  {s:<10} {METHOD_LABELS[m]:<12} C_psi={c.C_psi:.3f} alpha={c.alpha_status:>12} "
                         f"kappa={c.kappa_numeric:.2e} bound={bound}")
    lines += ["", "Unstable eigenvalues |lambda| > 1 (median over seeds)"]
    for s in systems:
        lines.append(f"  {s:<10} " + "  ".join(
            f"{METHOD_LABELS[m]}={np.median(result.unstable.get((s, m), [math.nan])):g}" for m in methods))
    lines += ["", "Observability at the selected spectral radius"]
    for s in systems:
        rho = result.reference_rho.get(s)
        if rho is None:
            continue
        pts = [p for p in result.scans.get(s, []) if p.rho == rho]
        tau = pts[0].tau_eps if pts else math.nan
        lines.append(f"  {s:<10} rho={rho:.4f} tau_eps={tau:.1f} decaying modes inside horizon: "
                     f"{decaying_modes_observable(pts)}")
    for s in systems:
        for m in methods:
            for err in result.errors.get((s, m), []):
                lines.append(f"  error {s}/{m}: {err}")
    return "\n".join(lines) + "\n"


def memory_horizon_for(cell: CellResult, epsilon: float = DEFAULT_EPSILON):
    if not isinstance(cell.choice.dictionary, ReservoirDictionary):
        return None
    res = cell.choice.dictionary.reservoir
    return memory_horizon(res.config.spectral_radius, res.input_norm, epsilon)
