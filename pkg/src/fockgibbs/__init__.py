"""Truncated bosonic Fock spaces, quantum Gibbs states, and their
classical-field limits.

The package is organized bottom-up:

- :mod:`fockgibbs.spectra` — one-body spectra (harmonic, Dirichlet, linear).
- :mod:`fockgibbs.basis` — occupation-number bases per particle sector.
- :mod:`fockgibbs.operators` — ladder operators, two-body kernels,
  Hamiltonians.
- :mod:`fockgibbs.gibbs` — Gibbs states, reduced density matrices, entropies,
  localization, rigorous a-priori bound checks.
- :mod:`fockgibbs.coherent` — coherent states, Husimi measures, anti-Wick
  quantization, Berezin-Lieb comparisons.
- :mod:`fockgibbs.classical` — the Gaussian free field and its quartic
  reweighting, classical density matrices by importance sampling.
- :mod:`fockgibbs.campaigns` — temperature-grid convergence experiments with
  CSV/JSON/figure reports (also the CLI backend, ``python -m fockgibbs``).
"""

from .spectra import OneBodySpectrum, custom_spectrum, dirichlet_spectrum, linear_spectrum, schatten_trace
from .basis import FockBasis, build_basis, sector_dimension, symmetric_norm_factor
from .operators import (FockOperator, TwoBodyKernel, annihilation_op,
                        ccr_defect, creation_op, dGamma_op, delta_kernel,
                        finite_rank_kernel, hamiltonian, identity_op,
                        kernel_symmetric_matrix, mode_annihilator,
                        mode_creator, number_op, pair_basis,
                        pair_h_inv_trace, two_body_op, wick_identity_check)
from .gibbs import (BoundCheck, QuantumState, ReducedDensityMatrix,
                    apriori_bound_checks, binomial_number_moment,
                    choose_cutoff, entropy_trace, free_energy_functional,
                    free_gibbs_state, free_log_partition, free_rdm,
                    free_sector_law, gibbs_state, interaction_energy_trace,
                    localize, mean_occupations, occupation_marginal,
                    rdm_labels, reduced_density_matrix, relative_entropy,
                    scaled_number_moment, tilted_moment, tilted_moment_limit,
                    tilted_number_operator)
from .mc import (RNG_ALGORITHM, MCEstimate, MomentEstimate, RatioAccumulator,
                 StreamingMoments, complex_gaussian, substream)
from .coherent import (BerezinLiebResult, CoherentVector,
                       anti_wick_expectation, anti_wick_gaussian_exact,
                       anti_wick_radial_exact, berezin_lieb_check,
                       coherent_state, coherent_vector,
                       cylindrical_moment_gap, eigenrelation_deviation,
                       free_husimi_variances, husimi_density,
                       husimi_density_batch, husimi_identity_rhs,
                       husimi_moment_mc, husimi_normalization_mc,
                       husimi_proposal_variances, husimi_psd_gap,
                       resolution_identity_mc, symmetric_embedding,
                       tensor_power_matrix, weyl_action_check)
from .classical import (GaussianCompetitor, VariationalBreakdown,
                        classical_expectation_mc, classical_free_dm,
                        classical_tilted_moment_mc,
                        classical_variational_identity, competitor_objective,
                        default_competitors, f_nl, f_nl_batch, gamma_k_mc,
                        gaussian_moment_mc, relative_partition_mc, sample_mu0)
from .campaigns import (ConvergenceReport, RunConfig, TailCertificateError,
                        default_config, p_campaign_config, run_check_battery,
                        run_dm_convergence, run_husimi_convergence,
                        run_partition_convergence, run_proof_step_suite,
                        test_function_dictionary)

__version__ = "0.1.0"
