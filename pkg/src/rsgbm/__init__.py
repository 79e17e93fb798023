"""Regime-switching geometric Brownian motion: moment exponents,
classification, log-price moments, barrier bounds and their Monte Carlo
oracles."""
from .ctmc import (RegimeModel, TwoStateModel, SeriesConfig, stationary_distribution,
                   fredholm_solve, sample_path, occupation_times, sojourn_density,
                   load_model, model_from_dict)
from .spectral import build_Ap, eta_p, lyapunov_curve, almost_sure_growth, classify
from .moments import (mean_lnX, second_moment_lnX, lnx_moments, closed_form_lambda_equal,
                      asymptotic_rates)
from .firstpassage import (FirstPassageQuery, BarrierEnvelope, bounds, bm_no_cross,
                           bridge_no_cross, phi, F_u, F_l, slepian_upper)
from .montecarlo import (MCConfig, MCEstimate, simulate_Yt, estimate_moment_Xp,
                         estimate_first_passage, estimate_occupation_histogram)

__version__ = "0.1.0"
