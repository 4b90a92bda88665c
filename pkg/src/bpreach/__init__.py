"""Backward reachability for linear systems under neural-network control.

Computes backprojection set over-approximations (BPOAs): per-timestep
rectangular bounds on every state that can reach a target set within a
horizon, certified through affine policy relaxations and trajectory LPs,
with hybrid target/backreachable-set partitioning to control conservatism.
"""

from .dynamics import LtiSystem, closed_loop_step, rollout, step
from .geometry import (
    HyperRect,
    RotatedRect,
    bounding_rect,
    contains,
    min_area_rotated_rect,
    uniform_partition,
    volume,
)
from .network import FeedforwardNetwork, Layer, evaluate, load_network, save_network
from .oracle import BpEstimate, error_metric, grid_soundness_check, mc_true_bp
from .reach import (
    BpoaRun,
    ElementHistory,
    PartitionParams,
    backreach,
    backreach_chain,
    bpoa_element_step,
    brsp,
    hybreach_lp_plus,
    lp_count,
    tsp,
)
from .relaxation import AffineBounds, PreActBounds, crown_bounds, interval_propagate, relu_relaxation

__version__ = "0.1.0"

__all__ = [
    "AffineBounds",
    "BpEstimate",
    "BpoaRun",
    "ElementHistory",
    "FeedforwardNetwork",
    "HyperRect",
    "Layer",
    "LtiSystem",
    "PartitionParams",
    "PreActBounds",
    "RotatedRect",
    "backreach",
    "backreach_chain",
    "bounding_rect",
    "bpoa_element_step",
    "brsp",
    "closed_loop_step",
    "contains",
    "crown_bounds",
    "error_metric",
    "evaluate",
    "grid_soundness_check",
    "hybreach_lp_plus",
    "interval_propagate",
    "load_network",
    "lp_count",
    "mc_true_bp",
    "min_area_rotated_rect",
    "relu_relaxation",
    "rollout",
    "save_network",
    "step",
    "tsp",
    "uniform_partition",
    "volume",
]
