"""Monte-Carlo estimation of true backprojection sets and the approximation-error metric.

Membership is decided by independent closed-loop rollouts: a sampled state
belongs to the true set at timestep t when its trajectory lands in the target
exactly -t steps later while staying inside the operating region (the regime
the reachability guarantee covers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import LtiSystem, rollout_batch
from .errors import UndefinedMetricError
from .geometry import HyperRect, RotatedRect, min_area_rotated_rect, volume
from .network import FeedforwardNetwork


@dataclass
class BpEstimate:
    """Sampled members of a true backprojection set and their tightest hulls."""

    member_points: np.ndarray
    tight_box: HyperRect | None
    tight_rotated: RotatedRect | None
    area_axis: float
    area_rotated: float
    samples_used: int
    seed: int

    @property
    def empty(self) -> bool:
        return self.member_points.shape[0] == 0


def _hit_mask(
    sys: LtiSystem,
    net: FeedforwardNetwork,
    target: HyperRect,
    steps: int,
    points: np.ndarray,
) -> np.ndarray:
    """True for points whose rollout enters the target at exactly `steps`, staying in X."""
    traj = rollout_batch(sys, net, points, steps)
    inside_x = np.ones(points.shape[0], dtype=bool)
    for k in range(steps):
        inside_x &= np.all(traj[k] >= sys.X.lower, axis=1) & np.all(traj[k] <= sys.X.upper, axis=1)
    final = traj[steps]
    in_target = np.all(final >= target.lower, axis=1) & np.all(final <= target.upper, axis=1)
    return inside_x & in_target


def mc_true_bp(
    sys: LtiSystem,
    net: FeedforwardNetwork,
    target: HyperRect,
    t: int,
    sample_region: HyperRect,
    n_samples: int,
    seed: int,
) -> BpEstimate:
    """Uniformly sample `sample_region` and keep states that truly reach the target at step -t.

    The caller must pass a region covering the true set (the pure backreach
    chain box does). Reproducible: a fixed seed yields a fixed member set, and
    doubling n_samples extends the same sample stream.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if t >= 0:
        raise ValueError("t must be negative")
    rng = np.random.default_rng(seed)
    points = rng.uniform(sample_region.lower, sample_region.upper, size=(n_samples, sample_region.dim))
    hits = _hit_mask(sys, net, target, -t, points)
    members = points[hits]
    if members.shape[0] == 0:
        return BpEstimate(members, None, None, 0.0, 0.0, n_samples, seed)
    box = HyperRect(members.min(axis=0), members.max(axis=0))
    rotated = min_area_rotated_rect(members) if sample_region.dim == 2 else None
    return BpEstimate(
        member_points=members,
        tight_box=box,
        tight_rotated=rotated,
        area_axis=volume(box),
        area_rotated=rotated.area if rotated is not None else 0.0,
        samples_used=n_samples,
        seed=seed,
    )


def _covered_mask(points: np.ndarray, bpoa: list, tol: float) -> np.ndarray:
    covered = np.zeros(points.shape[0], dtype=bool)
    for region in bpoa:
        if isinstance(region, RotatedRect):
            local = (points - region.center) @ region.axes().T
            inside = np.all(np.abs(local) <= region.half_extents + tol, axis=1)
        else:
            inside = np.all(points >= region.lower - tol, axis=1) & np.all(
                points <= region.upper + tol, axis=1
            )
        covered |= inside
    return covered


def grid_soundness_check(
    sys: LtiSystem,
    net: FeedforwardNetwork,
    target: HyperRect,
    t: int,
    region: HyperRect,
    pitch: float,
    bpoa: list,
    tol: float = 1e-6,
) -> np.ndarray:
    """Every grid state that truly reaches the target at step -t must lie in some BPOA set.

    Returns the violating grid points (expected empty for a sound run).
    """
    if pitch <= 0:
        raise ValueError("pitch must be positive")
    if t >= 0:
        raise ValueError("t must be negative")
    axes = [
        np.arange(region.lower[k] + 0.5 * pitch, region.upper[k], pitch)
        for k in range(region.dim)
    ]
    if any(a.size == 0 for a in axes):
        return np.empty((0, region.dim))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    hits = _hit_mask(sys, net, target, -t, points)
    reaching = points[hits]
    if reaching.shape[0] == 0:
        return np.empty((0, region.dim))
    covered = _covered_mask(reaching, bpoa, tol)
    return reaching[~covered]


def error_metric(area_bpoa: float, area_true: float) -> float:
    """Relative over-approximation error (area_bpoa - area_true) / area_true."""
    if area_true <= 0.0:
        raise UndefinedMetricError("reference area must be positive")
    return (area_bpoa - area_true) / area_true
