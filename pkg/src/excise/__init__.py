"""Brownian bridge excision transforms and Monte Carlo identity checks."""

__version__ = "0.1.0"

from ._kernels import USING_NUMBA, first_crossing, scan_excursions
from .path_core import (ArgmaxTieError, ExtensionLimitError, Path,
                        PathInvariantError, ResampleLimitError, RngStream,
                        TimeGrid, argmax_unique, hitting_time, path_from_csv,
                        path_from_json_dict, path_to_csv, path_to_json,
                        path_to_json_dict, sample_bes3, sample_bm,
                        sample_bridge, sample_excursion,
                        sample_first_passage_bridge, sample_meander_reversed)
from .transforms import (ClockMap, ExcursionRecord, TransformOutput,
                         brownian_scale, excise_bridge, excise_meander,
                         excise_to_level, excursion_margin, g_br, g_me,
                         regularity_check, t_br, t_me, two_sided_max)
from .subgrid import (augment_maxima, augmented_max_path,
                      excise_bridge_corrected, excise_meander_corrected,
                      excise_to_level_corrected, piece_log_no_dip,
                      sample_argmax_fraction)
from .analytics import (F1Table, PhiTable, QuadratureSpec, T_density,
                        f1_table, g_density, laplace_T, laplace_hitting,
                        laplace_tau, laplace_tau_e, phi, phi_direct,
                        phi_integral_over_x, phi_table, rayleigh_density,
                        tau_e_density)
from .excursion_ppp import (BesselPair, ExcisionSummary, PppRecord,
                            cap_horizon, cap_tail_probability, excise_bm_to_x,
                            lemma1_two_sample, path_functionals,
                            sample_bessel_pair, summarize_excision,
                            x_bridge_tilde)
from .montecarlo import (EstimationError, EstimatorSummary, FunctionalSpec,
                         estimate, functional, ks_distance, median_of_means,
                         report_to_json, verify_corollary2, verify_counts,
                         verify_eq22, verify_laplace, verify_lemma2,
                         verify_lemma3, verify_lemma4, verify_theorem1)
