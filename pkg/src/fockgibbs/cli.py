"""Command-line interface.

Usage follows one pattern: read a JSON config (or fall back to the default
desk-scale campaign), apply flag overrides, run the requested action, print a
short human-readable summary, and write machine-readable reports under the
output directory.

    python -m fockgibbs check
    python -m fockgibbs spectrum --config cfg.json
    python -m fockgibbs converge partition --out reports --threads 4
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .basis import build_basis
from .campaigns import (ConvergenceReport, RunConfig, default_config,
                        run_check_battery, run_dm_convergence,
                        run_husimi_convergence, run_partition_convergence,
                        run_proof_step_suite)
from .classical import classical_variational_identity, relative_partition_mc
from .gibbs import (free_log_partition, gibbs_state, mean_occupations,
                    reduced_density_matrix)
from .operators import hamiltonian, kernel_symmetric_matrix, pair_basis, pair_h_inv_trace

__all__ = ["main", "build_parser"]

_CAMPAIGNS = {
    "partition": run_partition_convergence,
    "dm": run_dm_convergence,
    "husimi": run_husimi_convergence,
    "proofsteps": run_proof_step_suite,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fockgibbs",
        description="Gibbs states of truncated Bose gases and their "
                    "high-temperature classical limits.")
    parser.add_argument("--config", metavar="PATH",
                        help="JSON config document (defaults embedded)")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--out", metavar="DIR", help="override output directory")
    parser.add_argument("--threads", type=int,
                        help="override row-level parallelism")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", help="describe the one-body spectrum")
    sub.add_parser("kernel", help="describe the two-body kernel")

    p_gibbs = sub.add_parser("gibbs", help="build one interacting Gibbs state")
    p_gibbs.add_argument("--T", type=float, default=None,
                         help="temperature (default: largest grid value)")

    p_cls = sub.add_parser("classical",
                           help="estimate the nonlinear classical measure")
    p_cls.add_argument("--samples", type=int, default=None,
                       help="override the Monte Carlo budget")

    p_conv = sub.add_parser("converge", help="run a temperature-grid campaign")
    p_conv.add_argument("campaign", choices=sorted(_CAMPAIGNS))

    sub.add_parser("check", help="fast invariant battery")
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else default_config()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    return cfg.override(**overrides) if overrides else cfg


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, default=_np_default)
    sys.stdout.write("\n")


def _np_default(obj):
    if isinstance(obj, (np.bool_, np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def _cmd_spectrum(cfg: RunConfig) -> int:
    s = cfg.spectrum()
    lam = s.as_array()
    _emit({
        "kind": cfg.spectrum_kind if cfg.eigenvalues is None else "custom",
        "modes": s.mode_count,
        "eigenvalues": lam,
        "h_inv_trace": float(np.sum(1.0 / lam)),
        "h_inv_sq_trace": float(np.sum(1.0 / lam ** 2)),
    })
    return 0


def _cmd_kernel(cfg: RunConfig) -> int:
    kern = cfg.kernel()
    if kern is None:
        _emit({"kind": "none"})
        return 0
    _emit({
        "kind": cfg.kernel_kind,
        "psd": kern.psd_certificate,
        "pair_basis": [list(p) for p in pair_basis(cfg.modes)],
        "symmetric_matrix": kernel_symmetric_matrix(kern),
        "pair_h_inv_trace": pair_h_inv_trace(cfg.spectrum(), kern),
    })
    return 0


def _cmd_gibbs(cfg: RunConfig, T: float | None) -> int:
    T = T if T is not None else max(cfg.t_grid)
    s = cfg.spectrum()
    kern = cfg.kernel()
    basis = build_basis(cfg.modes, cfg.cutoff(s))
    state = gibbs_state(basis, hamiltonian(basis, s, kern, cfg.lam(T)), T)
    rdm1 = reduced_density_matrix(state, 1)
    _emit({
        "T": T,
        "lambda": cfg.lam(T),
        "n_max": basis.N_max,
        "dim": basis.total_dim,
        "log_z_lambda": state.log_partition,
        "log_z0_closed": free_log_partition(s, T),
        "tail_mass": state.tail_mass,
        "occupations_free": mean_occupations(s, T),
        "rdm1_diagonal": np.diag(rdm1.matrix).real,
        "rdm1_min_eigenvalue": rdm1.min_eigenvalue(),
    })
    return 0


def _cmd_classical(cfg: RunConfig, samples: int | None) -> int:
    n = samples if samples is not None else cfg.classical_samples
    s = cfg.spectrum()
    kern = cfg.kernel()
    if kern is None:
        _emit({"z_r": 1.0, "z_r_stderr": 0.0, "note": "trivial kernel"})
        return 0
    zr = relative_partition_mc(s, kern, n, seed=cfg.seed + 1,
                               coupling=cfg.coupling_constant,
                               half=cfg.half_convention)
    breakdown = classical_variational_identity(
        s, kern, n, seed=cfg.seed + 31, coupling=cfg.coupling_constant,
        half=cfg.half_convention)
    _emit({
        "samples": n,
        "z_r": zr.value,
        "z_r_stderr": zr.stderr,
        "variational": dataclasses.asdict(breakdown),
        "identity_within_noise": breakdown.within_noise(),
    })
    return 0


def _cmd_converge(cfg: RunConfig, campaign: str) -> int:
    report: ConvergenceReport = _CAMPAIGNS[campaign](cfg)
    paths = report.shared.get("output_paths", {})
    print(f"campaign {campaign}: {len(report.rows)} rows")
    for key in ("csv", "json"):
        if key in paths:
            print(f"  {key}: {paths[key]}")
    for fig in paths.get("figures", []):
        print(f"  figure: {fig}")
    flagged = [key for key, val in report.shared.items()
               if key.endswith("_passed") and val is False]
    for row in report.rows:
        for key, val in row.items():
            if key.endswith("_passed") and val is False:
                flagged.append(f"T={row['T']}:{key}")
    if flagged:
        print("FAILED checks: " + ", ".join(sorted(set(flagged))))
        return 1
    print("all row checks passed")
    return 0


def _cmd_check(cfg: RunConfig) -> int:
    results = run_check_battery(seed=cfg.seed)
    worst = 0
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        print(f"{status} {name}: {detail}")
        worst = max(worst, 0 if passed else 1)
    return worst


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _load_config(args)
    if args.command == "spectrum":
        return _cmd_spectrum(cfg)
    if args.command == "kernel":
        return _cmd_kernel(cfg)
    if args.command == "gibbs":
        return _cmd_gibbs(cfg, args.T)
    if args.command == "classical":
        return _cmd_classical(cfg, args.samples)
    if args.command == "converge":
        return _cmd_converge(cfg, args.campaign)
    if args.command == "check":
        return _cmd_check(cfg)
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
