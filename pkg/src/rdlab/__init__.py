"""Rate-distortion numerics: lower bounds, test channels, Blahut-Arimoto curves,
uniform quantizers and information-dimension estimates."""

__version__ = "0.1.0"

from .geometry import NormSpec, log_unit_ball_volume, norm_eval, unit_ball_volume
from .sources import SourceModel, make_pathological, make_source
from .entropy import EntropyEstimate, EstimatorError
from .shannon_bound import (DistortionSpec, GapSettings, NoiseChannel, gap_sweep,
                            gap_upper_bound, noise_entropy, slb)
from .rd_solver import blahut_arimoto_point, discretize, rate_at_distortion, rd_curve
from .quantizer import GISH_PIERCE, uniform_quantizer_report
from .infodim import info_dimension

__all__ = [
    "NormSpec", "log_unit_ball_volume", "norm_eval", "unit_ball_volume",
    "SourceModel", "make_pathological", "make_source",
    "EntropyEstimate", "EstimatorError",
    "DistortionSpec", "GapSettings", "NoiseChannel", "gap_sweep", "gap_upper_bound",
    "noise_entropy", "slb",
    "blahut_arimoto_point", "discretize", "rate_at_distortion", "rd_curve",
    "GISH_PIERCE", "uniform_quantizer_report", "info_dimension",
]
