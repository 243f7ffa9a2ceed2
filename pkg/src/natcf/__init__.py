"""natcf: structural causal models with non-backtracking and natural counterfactuals."""

from .data import Dataset, read_csv, write_csv
from .distance import StandardizationStats, endogenous_l1, mechanism_cdf_distance
from .engine import CounterfactualAnswer, natural_cf, nonbacktracking_cf
from .errors import NatcfError
from .estimator import FitConfig, column_stats, fit_location_scale
from .fio import ChangeRequest, FioConfig, FioResult, extract_lbf, fio_loss, solve, solve_batch
from .graph import CausalGraph, ancestors_including, descendant_weights, topological_order
from .mechanisms import Mechanism, parse_mechanism
from .naturalness import global_naturalness, is_epsilon_natural, local_naturalness
from .oracle import GridSpec, grid_solve
from .scm import (
    Scm,
    abduct,
    complete_partial_evidence,
    evaluate,
    intervene,
    sample,
)
from .specfile import read_scm, write_scm

__version__ = "0.1.0"
