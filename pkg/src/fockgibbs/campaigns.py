"""Temperature-grid experiment campaigns with CSV/JSON/figure reports.

Each campaign walks an ascending temperature grid with coupling
lambda(T) = coupling_constant / T, computes the quantum quantities exactly on
a truncated Fock space whose cutoff is certified by tail mass, estimates the
classical limit objects by Monte Carlo from the free Gaussian measure, and
emits one report row per temperature.  Every row is reproducible
bit-for-bit from the configuration: all sample streams derive from the
config seed through fixed offsets, and all reductions run in a fixed order.

Seed layout (offsets from ``config.seed``):

    +1  relative partition function z_r
    +2+k  classical density matrix gamma^(k)
    +17+i  classical mean of the i-th dictionary test function
    +29  classical tilted moment
    +31  variational identity (uses three consecutive substreams)
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .basis import FockBasis, build_basis
from .classical import (classical_expectation_mc, classical_free_dm,
                        classical_tilted_moment_mc, gamma_k_mc,
                        relative_partition_mc)
from .coherent import anti_wick_gaussian_exact, anti_wick_radial_exact
from .gibbs import (QuantumState, apriori_bound_checks, free_gibbs_state,
                    free_log_partition, choose_cutoff, gibbs_state,
                    interaction_energy_trace, reduced_density_matrix,
                    relative_entropy, tilted_moment, tilted_moment_limit,
                    tilted_number_operator)
from .mc import RNG_ALGORITHM
from .operators import (TwoBodyKernel, delta_kernel, finite_rank_kernel,
                        hamiltonian, pair_basis, pair_h_inv_trace)
from .spectra import OneBodySpectrum, custom_spectrum, dirichlet_spectrum, linear_spectrum

__all__ = [
    "RunConfig",
    "ConvergenceReport",
    "TailCertificateError",
    "default_config",
    "p_campaign_config",
    "test_function_dictionary",
    "run_partition_convergence",
    "run_dm_convergence",
    "run_husimi_convergence",
    "run_proof_step_suite",
    "run_check_battery",
]


class TailCertificateError(RuntimeError):
    """A campaign row's state kept too much mass on the top sector."""


@dataclass(frozen=True)
class RunConfig:
    """One experiment campaign, fully determined by this document.

    ``eigenvalues`` overrides the named spectrum kinds; ``kernel_vector`` is
    the symmetric-pair coefficient vector of a rank-1 kernel.  The cutoff is
    adaptive (free tail below ``free_tail_rtol`` at the largest temperature)
    unless ``n_max`` pins it.
    """

    spectrum_kind: str = "dirichlet"
    modes: int = 2
    slope: float = 1.0
    eigenvalues: tuple | None = None
    kernel_kind: str = "delta"
    kernel_vector: tuple | None = None
    kernel_weight: float = 1.0
    t_grid: tuple = (2.0, 4.0, 8.0, 16.0)
    coupling_constant: float = 1.0
    n_max: int | None = None
    free_tail_rtol: float = 1e-10
    tail_threshold: float = 1e-8
    classical_samples: int = 1_000_000
    husimi_samples: int = 100_000
    dm_orders: tuple = (1,)
    schatten_p: float = 1.0
    clip_radius: float = 4.0
    half_convention: bool = True
    seed: int = 20240811
    threads: int = 1
    out_dir: str = "reports"
    make_figures: bool = True

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("need at least one mode")
        if not self.t_grid or list(self.t_grid) != sorted(self.t_grid):
            raise ValueError("temperature grid must be nonempty and ascending")
        if any(t <= 0 for t in self.t_grid):
            raise ValueError("temperatures must be positive")
        if self.coupling_constant < 0:
            raise ValueError("coupling constant must be nonnegative")

    # -- factories -----------------------------------------------------------
    def spectrum(self) -> OneBodySpectrum:
        if self.eigenvalues is not None:
            return custom_spectrum(self.eigenvalues)
        if self.spectrum_kind == "dirichlet":
            return dirichlet_spectrum(self.modes)
        if self.spectrum_kind == "linear":
            return linear_spectrum(self.modes, self.slope)
        raise ValueError(f"unknown spectrum kind {self.spectrum_kind!r}")

    def kernel(self) -> TwoBodyKernel | None:
        if self.kernel_kind == "none":
            return None
        if self.kernel_kind == "delta":
            return delta_kernel(self.modes)
        if self.kernel_kind == "rank1":
            n_pairs = len(pair_basis(self.modes))
            if self.kernel_vector is None:
                vec = np.zeros(n_pairs)
                vec[0] = 1.0
            else:
                vec = np.asarray(self.kernel_vector, dtype=float)
                if vec.shape != (n_pairs,):
                    raise ValueError("kernel vector length must be J(J+1)/2")
            return finite_rank_kernel(self.modes, [vec], [self.kernel_weight])
        raise ValueError(f"unknown kernel kind {self.kernel_kind!r}")

    def lam(self, T: float) -> float:
        return self.coupling_constant / T

    def cutoff(self, s: OneBodySpectrum) -> int:
        if self.n_max is not None:
            return self.n_max
        return choose_cutoff(s, max(self.t_grid), rtol=self.free_tail_rtol)

    # -- (de)serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("eigenvalues", "kernel_vector", "t_grid", "dm_orders"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        clean = dict(data)
        for key in ("eigenvalues", "kernel_vector", "t_grid", "dm_orders"):
            if key in clean and clean[key] is not None:
                clean[key] = tuple(clean[key])
        return cls(**clean)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def override(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)


def default_config(**overrides) -> RunConfig:
    """The desk-scale default: 2 Dirichlet modes, contact kernel, T doubling."""
    return RunConfig(**overrides)


def p_campaign_config(**overrides) -> RunConfig:
    """Linear spectrum plus a rank-1 kernel; distances in Schatten-2 norm.

    Three modes keep the quantum side tractable: with eigenvalue spacing 1
    the certified cutoff grows linearly in T and sector dimensions
    quadratically, so the grid stops at T = 2.
    """
    base = dict(spectrum_kind="linear", modes=3, kernel_kind="rank1",
                t_grid=(0.5, 1.0, 2.0), schatten_p=2.0, dm_orders=(1,))
    base.update(overrides)
    return RunConfig(**base)


# ---------------------------------------------------------------------------
# Report container
# ---------------------------------------------------------------------------

def _flatten(prefix: str, value, out: dict):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, (list, tuple)):
        out[prefix] = json.dumps(value)
    else:
        out[prefix] = value


@dataclass
class ConvergenceReport:
    """Campaign output: one row per temperature plus shared estimates."""

    campaign: str
    config: dict
    rows: list = field(default_factory=list)
    shared: dict = field(default_factory=dict)

    def column(self, key: str) -> list:
        return [row.get(key) for row in self.rows]

    def to_json_dict(self) -> dict:
        return {"campaign": self.campaign, "config": self.config,
                "rows": self.rows, "shared": self.shared,
                "rng_algorithm": RNG_ALGORITHM}

    def write_json(self, path: str) -> str:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, default=_json_default)
        return path

    def write_csv(self, path: str) -> str:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        flat_rows = []
        columns: list = []
        for row in self.rows:
            flat: dict = {}
            _flatten("", row, flat)
            flat_rows.append(flat)
            for key in flat:
                if key not in columns:
                    columns.append(key)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            for flat in flat_rows:
                writer.writerow(flat)
        return path


def _json_default(obj):
    if isinstance(obj, (np.bool_, np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


# ---------------------------------------------------------------------------
# Per-temperature quantum rows
# ---------------------------------------------------------------------------

@dataclass
class _QuantumRow:
    T: float
    lam: float
    state: QuantumState
    free: QuantumState
    log_z_lambda: float
    log_z0_truncated: float
    log_z0_closed: float

    @property
    def log_ratio(self) -> float:
        return self.log_z_lambda - self.log_z0_truncated

    @property
    def ratio(self) -> float:
        return math.exp(self.log_ratio)


def _build_quantum_row(cfg: RunConfig, s: OneBodySpectrum,
                       kern: TwoBodyKernel | None, basis: FockBasis,
                       T: float) -> _QuantumRow:
    lam = cfg.lam(T)
    H = hamiltonian(basis, s, kern, lam)
    state = gibbs_state(basis, H, T)
    free = free_gibbs_state(basis, s, T)
    if state.tail_mass > cfg.tail_threshold:
        raise TailCertificateError(
            f"row T={T}: interacting tail mass {state.tail_mass:.3e} exceeds "
            f"{cfg.tail_threshold:.1e} at N_max={basis.N_max}; raise the "
            f"cutoff or lower the temperature")
    return _QuantumRow(T=T, lam=lam, state=state, free=free,
                       log_z_lambda=state.log_partition,
                       log_z0_truncated=free.log_partition,
                       log_z0_closed=free_log_partition(s, T))


def _map_rows(cfg: RunConfig, fn, items) -> list:
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _write_outputs(cfg: RunConfig, report: ConvergenceReport) -> dict:
    paths = {}
    base = os.path.join(cfg.out_dir, report.campaign)
    paths["csv"] = report.write_csv(base + ".csv")
    paths["json"] = report.write_json(base + ".json")
    if cfg.make_figures:
        from . import plots
        paths["figures"] = plots.render_report(report, cfg.out_dir)
    report.shared["output_paths"] = paths
    return paths


# ---------------------------------------------------------------------------
# Campaign: partition-function convergence
# ---------------------------------------------------------------------------

def run_partition_convergence(cfg: RunConfig, write: bool = True) -> ConvergenceReport:
    """Z_lambda/Z_0 against the classical relative partition function.

    The limit value z_r is estimated once (it does not depend on T when
    lambda*T is held fixed) and shared by every row, so the per-row gap
    |ratio - z_r| carries a single common standard error.
    """
    s = cfg.spectrum()
    kern = cfg.kernel()
    basis = build_basis(cfg.modes, cfg.cutoff(s))
    c_trace = pair_h_inv_trace(s, kern) if kern is not None else 0.0

    if kern is None:
        zr_value, zr_err = 1.0, 0.0
    else:
        zr = relative_partition_mc(s, kern, cfg.classical_samples,
                                   seed=cfg.seed + 1,
                                   coupling=cfg.coupling_constant,
                                   half=cfg.half_convention)
        zr_value, zr_err = zr.value, zr.stderr

    def one_row(T: float) -> dict:
        q = _build_quantum_row(cfg, s, kern, basis, T)
        rdm1 = reduced_density_matrix(q.state, 1)
        rdm2 = reduced_density_matrix(q.state, 2)
        w_gamma2 = interaction_energy_trace(kern, rdm2) if kern else 0.0
        checks = apriori_bound_checks(
            s, kern, T, q.lam, log_ratio=q.log_ratio, rdm1=rdm1,
            w_gamma2=w_gamma2, state=q.state, free_state=q.free,
            number_powers=(1, 2, 3, 4)) if kern is not None else {}
        row = {
            "T": T,
            "lambda": q.lam,
            "n_max": basis.N_max,
            "log_z_lambda": q.log_z_lambda,
            "log_z0_truncated": q.log_z0_truncated,
            "log_z0_closed": q.log_z0_closed,
            "ratio": q.ratio,
            "z_r": zr_value,
            "z_r_stderr": zr_err,
            "abs_gap": abs(q.ratio - zr_value),
            "sandwich_lower": math.exp(-q.lam * T * c_trace),
            "sandwich_passed": (-q.lam * T * c_trace - 1e-12
                                <= q.log_ratio <= 1e-12),
            "tail_interacting": q.state.tail_mass,
            "tail_free": q.free.tail_mass,
            "domination_passed": q.state.tail_mass
            <= q.free.tail_mass / max(q.ratio, 1e-300) + 1e-15,
            "bounds": {name: chk.describe() for name, chk in checks.items()},
            "bounds_all_passed": all(chk.passed for chk in checks.values()),
        }
        return row

    report = ConvergenceReport(
        campaign="partition", config=cfg.to_dict(),
        rows=_map_rows(cfg, one_row, cfg.t_grid),
        shared={
            "z_r": zr_value, "z_r_stderr": zr_err,
            "pair_h_inv_trace": c_trace,
            "n_max": basis.N_max,
        })
    gaps = report.column("abs_gap")
    report.shared["gap_strictly_decreasing"] = all(
        b < a for a, b in zip(gaps, gaps[1:]))
    report.shared["gap_final_over_initial"] = (gaps[-1] / gaps[0]
                                               if gaps[0] > 0 else 0.0)
    if write:
        _write_outputs(cfg, report)
    return report


# ---------------------------------------------------------------------------
# Campaign: density-matrix convergence
# ---------------------------------------------------------------------------

def run_dm_convergence(cfg: RunConfig, k=None, write: bool = True) -> ConvergenceReport:
    """Schatten distance of k! T^{-k} Gamma^(k) to the classical gamma^(k).

    ``k`` (an order or a sequence of orders) overrides ``cfg.dm_orders``.
    The classical matrices are estimated once per order and shared across
    the grid; for a trivial kernel the exact free limit is used instead of
    Monte Carlo.
    """
    if k is not None:
        orders = (int(k),) if np.isscalar(k) else tuple(int(x) for x in k)
        cfg = cfg.override(dm_orders=orders)
    s = cfg.spectrum()
    kern = cfg.kernel()
    basis = build_basis(cfg.modes, cfg.cutoff(s))
    if any(k > basis.N_max for k in cfg.dm_orders):
        raise ValueError("density-matrix order exceeds the particle cutoff")

    targets = {}
    for k in cfg.dm_orders:
        if kern is None:
            closed = classical_free_dm(s, k)
            targets[k] = {"matrix": closed.matrix, "stderr_scale": 0.0,
                          "labels": closed.labels, "route": "closed_form"}
        else:
            est = gamma_k_mc(s, kern, k, cfg.classical_samples,
                             seed=cfg.seed + 2 + k,
                             coupling=cfg.coupling_constant,
                             half=cfg.half_convention)
            targets[k] = {"matrix": est.matrix,
                          "stderr_scale": float(np.linalg.norm(est.stderr)),
                          "labels": est.labels, "route": "mc", "ess": est.ess,
                          "flags": list(est.flags)}

    lam_inv_trace = float(np.sum(1.0 / s.as_array()))

    def one_row(T: float) -> dict:
        q = _build_quantum_row(cfg, s, kern, basis, T)
        row = {"T": T, "lambda": q.lam, "n_max": basis.N_max,
               "tail_interacting": q.state.tail_mass,
               "schatten_p": cfg.schatten_p}
        for k in cfg.dm_orders:
            rdm = reduced_density_matrix(q.state, k)
            scaled = math.factorial(k) * T ** (-k) * rdm.matrix
            diff = scaled - targets[k]["matrix"]
            sv = np.linalg.svd(diff, compute_uv=False)
            if math.isinf(cfg.schatten_p):
                dist = float(sv[0])
            else:
                dist = float(np.sum(sv ** cfg.schatten_p) ** (1 / cfg.schatten_p))
            row[f"dm{k}_distance"] = dist
            row[f"dm{k}_mc_noise"] = targets[k]["stderr_scale"]
        free_number = float(np.trace(
            reduced_density_matrix(q.free, 1).matrix).real)
        row["free_number_over_t"] = free_number / T
        row["h_inv_trace"] = lam_inv_trace
        return row

    report = ConvergenceReport(
        campaign="dm", config=cfg.to_dict(),
        rows=_map_rows(cfg, one_row, cfg.t_grid),
        shared={"n_max": basis.N_max,
                "targets": {str(k): {kk: vv for kk, vv in t.items()
                                     if kk != "matrix"}
                            for k, t in targets.items()}})
    for k in cfg.dm_orders:
        dist = report.column(f"dm{k}_distance")
        report.shared[f"dm{k}_final_over_initial"] = (
            dist[-1] / dist[0] if dist[0] > 0 else 0.0)
        report.shared[f"dm{k}_decreasing"] = all(
            b < a for a, b in zip(dist, dist[1:]))
    if write:
        _write_outputs(cfg, report)
    return report


# ---------------------------------------------------------------------------
# Campaign: Husimi / anti-Wick convergence
# ---------------------------------------------------------------------------

def test_function_dictionary(J: int, clip_radius: float = 4.0) -> list:
    """Bounded observables with exact quantum anti-Wick evaluations.

    Each entry is (name, callable on (B, J) complex samples, sup bound,
    exact quantum evaluator (state, eps) -> float).
    """

    def b_one(U):
        return np.ones(U.shape[0])

    def b_gauss(U):
        return np.exp(-np.sum(np.abs(U) ** 2, axis=1))

    def b_clip(U):
        return np.minimum(np.abs(U[:, 0]) ** 2, clip_radius)

    return [
        ("const_one", b_one, 1.0, lambda state, eps: 1.0),
        ("gauss", b_gauss, 1.0,
         lambda state, eps: anti_wick_gaussian_exact(state, eps, 1.0)),
        ("clip_mode1", b_clip, clip_radius,
         lambda state, eps: anti_wick_radial_exact(
             state, eps, lambda x: min(x, clip_radius), mode=0)),
    ]


def run_husimi_convergence(cfg: RunConfig, write: bool = True) -> ConvergenceReport:
    """Anti-Wick expectations at eps = 1/T against nonlinear-measure means.

    The quantum side is evaluated exactly (closed sector sums and radial
    quadratures — the dictionary is built so this is possible); the classical
    side is one importance-sampled mean per test function, shared by all
    temperatures.
    """
    s = cfg.spectrum()
    kern = cfg.kernel()
    basis = build_basis(cfg.modes, cfg.cutoff(s))
    dictionary = test_function_dictionary(cfg.modes, cfg.clip_radius)

    classical = {}
    for i, (name, fn, bound, _) in enumerate(dictionary):
        est = classical_expectation_mc(
            s, kern, fn, cfg.classical_samples, seed=cfg.seed + 17 + i,
            coupling=cfg.coupling_constant, half=cfg.half_convention)
        classical[name] = est

    def one_row(T: float) -> dict:
        q = _build_quantum_row(cfg, s, kern, basis, T)
        eps = 1.0 / T
        row = {"T": T, "lambda": q.lam, "eps": eps,
               "tail_interacting": q.state.tail_mass,
               "quantum_route": "exact"}
        for name, _fn, _bound, exact in dictionary:
            qval = exact(q.state, eps)
            cval = classical[name]
            row[f"quantum_{name}"] = qval
            row[f"classical_{name}"] = cval.value
            row[f"classical_{name}_stderr"] = cval.stderr
            row[f"gap_{name}"] = abs(qval - cval.value)
        return row

    report = ConvergenceReport(
        campaign="husimi", config=cfg.to_dict(),
        rows=_map_rows(cfg, one_row, cfg.t_grid),
        shared={"n_max": basis.N_max,
                "classical_flags": {name: list(est.flags)
                                    for name, est in classical.items()}})
    for name, _fn, _bound, _exact in dictionary:
        gaps = report.column(f"gap_{name}")
        sigma = classical[name].stderr
        report.shared[f"gap_{name}_final_over_initial"] = (
            gaps[-1] / gaps[0] if gaps[0] > 0 else 0.0)
        report.shared[f"gap_{name}_decreasing_within_noise"] = (
            gaps[-1] <= gaps[0] + 3.0 * sigma)
    if write:
        _write_outputs(cfg, report)
    return report


# ---------------------------------------------------------------------------
# Campaign: proof-step suite
# ---------------------------------------------------------------------------

def run_proof_step_suite(cfg: RunConfig, write: bool = True) -> ConvergenceReport:
    """Numerical audits of the inequalities used along the convergence proof.

    Per temperature: (i) the coherent-state lower bound on the partition
    function, (ii) free-state semiclassics, (iii) the relative-entropy
    decomposition of -log(Z_lambda/Z_0), (iv) the tilted free moments by two
    routes plus their classical limit.
    """
    s = cfg.spectrum()
    kern = cfg.kernel()
    basis = build_basis(cfg.modes, cfg.cutoff(s))
    lam_arr = s.as_array()

    if kern is None:
        zr_value, zr_err = 1.0, 0.0
    else:
        zr = relative_partition_mc(s, kern, cfg.classical_samples,
                                   seed=cfg.seed + 1,
                                   coupling=cfg.coupling_constant,
                                   half=cfg.half_convention)
        zr_value, zr_err = zr.value, zr.stderr

    tilt_pattern = tuple([1] + [0] * (cfg.modes - 1))
    tilt_k = 1
    tilt_limit = tilted_moment_limit(s, tilt_pattern, tilt_k)
    tilt_mc = classical_tilted_moment_mc(s, tilt_pattern, tilt_k,
                                         cfg.classical_samples,
                                         seed=cfg.seed + 29)
    # The trace route multiplies sector weights by a degree-(k + sum pattern)
    # polynomial, which amplifies the truncation tail; the free state stores
    # diagonal blocks, so a deeper dedicated cutoff costs almost nothing.
    tilt_basis = build_basis(cfg.modes, choose_cutoff(
        s, max(cfg.t_grid), rtol=min(cfg.free_tail_rtol, 1e-14)))
    tilt_op = tilted_number_operator(tilt_basis, tilt_pattern, tilt_k, 1.0)

    def one_row(T: float) -> dict:
        q = _build_quantum_row(cfg, s, kern, basis, T)
        # (i) coherent-state lower bound via scaled fields
        rhs_log = (cfg.modes * math.log(T) - float(np.sum(np.log(lam_arr)))
                   + math.log(zr_value))
        pb_sigma = zr_err / zr_value
        pb_margin = q.log_z_lambda - rhs_log
        # (ii) free semiclassics against the product formula
        semi_value = math.exp(q.log_z0_closed - cfg.modes * math.log(T)
                              + float(np.sum(np.log(lam_arr))))
        semi_bound = float(np.sum(lam_arr)) / T
        # (iii) relative-entropy decomposition
        rdm2 = reduced_density_matrix(q.state, 2)
        w_gamma2 = interaction_energy_trace(kern, rdm2) if kern else 0.0
        entropy_term = relative_entropy(q.state, q.free)
        decomposition = entropy_term + q.lam / T * w_gamma2
        decomp_residual = abs(-q.log_ratio - decomposition)
        decomp_scale = max(1.0, abs(q.log_ratio))
        # (iv) tilted moments, both routes; the T = 1 operator rescales by
        # T^-(|pattern| + k)
        closed = tilted_moment(s, T, tilt_pattern, tilt_k)
        free_deep = free_gibbs_state(tilt_basis, s, T)
        degree = sum(tilt_pattern) + tilt_k
        traced = float(free_deep.expectation(tilt_op).real) / T ** degree
        tilt_rel = abs(closed - traced) / max(abs(closed), 1e-300)
        return {
            "T": T,
            "lambda": q.lam,
            "pb_lower_bound_log": rhs_log,
            "pb_margin": pb_margin,
            "pb_sigma": pb_sigma,
            "pb_passed": pb_margin >= -3.0 * pb_sigma,
            "semiclassics_value": semi_value,
            "semiclassics_bound": semi_bound,
            "semiclassics_passed": abs(semi_value - 1.0) <= semi_bound,
            "decomp_relative_entropy": entropy_term,
            "decomp_interaction": q.lam / T * w_gamma2,
            "decomp_residual": decomp_residual,
            "decomp_passed": decomp_residual <= 1e-8 * decomp_scale,
            "tilted_closed": closed,
            "tilted_trace": traced,
            "tilted_rel_gap": tilt_rel,
            "tilted_passed": tilt_rel <= 1e-10,
            "tail_interacting": q.state.tail_mass,
        }

    report = ConvergenceReport(
        campaign="proofsteps", config=cfg.to_dict(),
        rows=_map_rows(cfg, one_row, cfg.t_grid),
        shared={
            "n_max": basis.N_max,
            "n_max_tilt": tilt_basis.N_max,
            "z_r": zr_value, "z_r_stderr": zr_err,
            "tilted_pattern": list(tilt_pattern), "tilted_k": tilt_k,
            "tilted_limit_closed": tilt_limit,
            "tilted_limit_mc": tilt_mc.value,
            "tilted_limit_mc_stderr": tilt_mc.stderr,
            "tilted_limit_passed": abs(tilt_limit - tilt_mc.value)
            <= 3.0 * tilt_mc.stderr,
        })
    if write:
        _write_outputs(cfg, report)
    return report


# ---------------------------------------------------------------------------
# Fast invariant battery (the `check` subcommand)
# ---------------------------------------------------------------------------

def run_check_battery(seed: int = 7) -> list:
    """Small-cutoff identity checks; returns (name, passed, detail) triples.

    Runs in seconds: ladder-operator algebra, closed forms against
    diagonalization, the two reduced-density-matrix routes, and the tilted
    moments.
    """
    from .coherent import eigenrelation_deviation, husimi_identity_rhs
    from .operators import ccr_defect, dGamma_op, wick_identity_check

    results = []

    def record(name, passed, detail):
        results.append((name, bool(passed), detail))

    s = dirichlet_spectrum(2)
    basis = build_basis(2, 10)

    dev = ccr_defect(basis)
    record("ccr", dev <= 1e-12, f"max deviation {dev:.3e}")

    rng = np.random.default_rng(seed)
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    wick = max(wick_identity_check(basis, v, k) for k in (1, 2, 3))
    record("wick_k<=3", wick <= 1e-10, f"max deviation {wick:.3e}")

    T = 0.35
    free = free_gibbs_state(basis, s, T)
    g0 = gibbs_state(basis, dGamma_op(basis, s), T)
    gap_z = abs(g0.log_partition - free_log_partition(s, T))
    record("free_partition", gap_z <= 1e-8 and free.tail_mass < 1e-10,
           f"logZ gap {gap_z:.3e}, tail {free.tail_mass:.3e}")

    r_c = reduced_density_matrix(g0, 2, route="creation")
    r_p = reduced_density_matrix(g0, 2, route="partial_trace")
    two_route = float(np.max(np.abs(r_c.matrix - r_p.matrix)))
    record("rdm_two_route", two_route <= 1e-9, f"max gap {two_route:.3e}")

    u = np.array([0.5 + 0.2j, -0.4 + 0.1j])
    eig = eigenrelation_deviation(basis, u)
    record("coherent_eigenrelation", eig <= 1e-10, f"deviation {eig:.3e}")

    rhs = husimi_identity_rhs(g0, 0.5, 1).matrix
    lhs = 0.5 * (reduced_density_matrix(g0, 1).matrix + np.eye(2))
    husimi_gap = float(np.max(np.abs(rhs - lhs)))
    record("husimi_identity_k1", husimi_gap <= 1e-12,
           f"max gap {husimi_gap:.3e}")

    deep = build_basis(2, 80)
    closed = tilted_moment(s, 2.0, (1, 0), 1)
    traced = float(free_gibbs_state(deep, s, 2.0).expectation(
        tilted_number_operator(deep, (1, 0), 1, 2.0)).real)
    tilt_gap = abs(closed - traced) / closed
    record("tilted_moment", tilt_gap <= 1e-10, f"relative gap {tilt_gap:.3e}")

    return results
