"""Monte Carlo simulator and fronthaul optimizer for uplink cell-free MIMO
perceptive mobile networks.

The package evaluates four functional splits of a joint communication and
radar-sensing uplink, named by where decoding and sensing run:

- CDCS: cloud decoding, cloud sensing
- CDES: cloud decoding, edge sensing
- EDCS: edge decoding, cloud sensing
- EDES: edge decoding, edge sensing

Each access point (AP) is connected to a central processor by a
capacity-limited fronthaul link; quantization of the forwarded streams is
modeled by rate-distortion test channels. The simulator produces detection
statistics (ROC curves, sensing accuracy, Bhattacharyya distances) and
ergodic communication rates, and solves the per-split fronthaul allocation
problems by line search.
"""

from .fronthaul import (
    QuantizationPlan,
    invert_rate_bound,
    quantize_additive,
    quantize_reverse,
    rate_bound,
)
from .model import SystemConfig, build_profiles, sample_block, sample_channel
from .optimizer import OptimizerResult, OptimizerSpec, optimize_scheme
from .schemes import (
    MonteCarloSpec,
    SchemeResult,
    rate_cdcs,
    rate_cdes,
    rate_edge,
    run_scheme,
    select_best_ap,
    simulate_sensing,
)
from .sensing import (
    bhattacharyya_cdcs,
    bhattacharyya_edcs,
    build_detector,
    calibrate_threshold,
    roc_curve,
    sensing_accuracy,
)

SCHEMES = ("CDCS", "CDES", "EDCS", "EDES")

__all__ = [
    "SCHEMES",
    "MonteCarloSpec",
    "OptimizerResult",
    "OptimizerSpec",
    "QuantizationPlan",
    "SchemeResult",
    "SystemConfig",
    "bhattacharyya_cdcs",
    "bhattacharyya_edcs",
    "build_detector",
    "build_profiles",
    "calibrate_threshold",
    "invert_rate_bound",
    "optimize_scheme",
    "quantize_additive",
    "quantize_reverse",
    "rate_bound",
    "rate_cdcs",
    "rate_cdes",
    "rate_edge",
    "roc_curve",
    "run_scheme",
    "sample_block",
    "sample_channel",
    "select_best_ap",
    "sensing_accuracy",
    "simulate_sensing",
]
