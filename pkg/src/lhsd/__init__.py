"""Local intrinsic dimension from the filtered spectrum of the log-density Hessian."""
from .baselines import NbConfig, flipd, flipd_hutch, lidl, lpca, nb
from .datasets import (FunnelParams, LabeledDataset, MixtureSpec, MoonParams,
                       generate_funnel, generate_mixture, generate_moon, idr_embed, mae)
from .diagnostics import (SpectrumSummary, TransitionMassCurve, collapse_flag,
                          collect_spectrum, safe_zone, select_t, sweep, transition_mass)
from .errors import CapacityError, ConfigError, DomainError, LHSDError, NumericError
from .estimator import EstimateRecord, lhsd_estimate, lhsd_exact
from .schedule import NoiseSchedule
from .score_field import (AffineGaussianScoreField, MixtureScoreField,
                          PerturbedScoreField, ScoreField)
from .slq import SlqConfig, lanczos, trace_of_function, tridiag_eigen
from .spectral_filter import FilterParams

__version__ = "0.1.0"
