"""Sigma-Delta quantization of compressed-sensing measurements and l1 decoding."""

from .decode import (ConstraintNorm, DecodeContext, DecodeProblem, DecodeResult, NotConverged,
                     SolverConfig, decode_bpdn, decode_onestage, decode_twostage, sobolev_dual)
from .harness import ExperimentSpec, Scenario, fit_slope, load_spec, run_experiment
from .linops import DiffOperator, apply_Dr, apply_Dr_inv, check_sigma_bound
from .measure import gen_compressible, gen_matrix, gen_noise, gen_sparse
from .quantize import ONE_BIT, MidriseAlphabet, QuantizerSpec, Rule, sigma_delta, stability_report

__version__ = "0.1.0"

__all__ = [
    "ConstraintNorm", "DecodeContext", "DecodeProblem", "DecodeResult", "NotConverged",
    "SolverConfig", "decode_bpdn", "decode_onestage", "decode_twostage", "sobolev_dual",
    "ExperimentSpec", "Scenario", "fit_slope", "load_spec", "run_experiment",
    "DiffOperator", "apply_Dr", "apply_Dr_inv", "check_sigma_bound",
    "gen_compressible", "gen_matrix", "gen_noise", "gen_sparse",
    "ONE_BIT", "MidriseAlphabet", "QuantizerSpec", "Rule", "sigma_delta", "stability_report",
]
