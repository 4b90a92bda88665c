"""Backward reachability core.

Given a target box and a policy network, computes per-timestep backprojection
over-approximations (BPOAs): axis-aligned (or optionally rotated) rectangles
guaranteed to contain every state whose closed-loop trajectory enters the
target within the horizon. The hybrid scheme partitions the target once up
front and the backreachable box at every step, solving one trajectory LP per
partition cell and state-coordinate extreme.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import LtiSystem
from .errors import DimensionMismatchError, LpSolverError
from .geometry import (
    HyperRect,
    RotatedRect,
    bounding_rect,
    min_area_rotated_rect,
    uniform_partition,
    volume,
)
from .lp_backend import EQ, GEQ, INFEASIBLE, LEQ, MAX, MIN, OPTIMAL, LpProblem, solve
from .network import FeedforwardNetwork
from .relaxation import AffineBounds, crown_bounds

UNIFORM = "uniform"
GUIDED = "guided"

_FACE_TOL = 1e-9
_EDGE_EPS = 1e-12


@dataclass(frozen=True)
class PartitionParams:
    """Partitioning configuration: target grid counts, BR budget, refinement strategy."""

    tsp_counts: tuple[int, ...]
    brsp_budget: int = 1
    min_cell_volume: float = 0.0
    brsp_strategy: str = GUIDED

    def __post_init__(self):
        counts = tuple(int(c) for c in self.tsp_counts)
        if not counts or any(c < 1 for c in counts):
            raise ValueError(f"target partition counts must be >= 1, got {counts}")
        if self.brsp_budget < 1:
            raise ValueError("backreach partition budget must be >= 1")
        if self.min_cell_volume < 0:
            raise ValueError("minimum cell volume must be >= 0")
        if self.brsp_strategy not in (UNIFORM, GUIDED):
            raise ValueError(f"unknown strategy {self.brsp_strategy!r}")
        object.__setattr__(self, "tsp_counts", counts)


@dataclass
class ElementHistory:
    """Per-target-element record of the backward chain.

    Keys are timesteps t <= 0; `bpoa[0]` is the target element itself.
    `empty_from` marks the first timestep at which the chain became empty.
    """

    element: HyperRect
    bpoa: dict = field(default_factory=dict)
    omegas: dict = field(default_factory=dict)
    br_sets: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)
    cell_boxes: dict = field(default_factory=dict)
    empty_from: int | None = None

    def __post_init__(self):
        self.bpoa.setdefault(0, self.element)

    def alive_at(self, t: int) -> bool:
        return t in self.bpoa


@dataclass
class BpoaRun:
    """Full algorithm output across all target elements and timesteps."""

    target: HyperRect
    horizon: int
    params: PartitionParams
    rotated: bool
    histories: list[ElementHistory]
    lp_count: int
    aux_lp_count: int
    wall_time_s: float

    def aggregate(self, t: int) -> list:
        """Per-element BPOA sets still alive at timestep t (stored as a union, never merged)."""
        return [h.bpoa[t] for h in self.histories if t in h.bpoa]

    def bounding_box(self, t: int) -> HyperRect | None:
        sets = self.aggregate(t)
        if not sets:
            return None
        return bounding_rect([s.aabb() if isinstance(s, RotatedRect) else s for s in sets])

    def bounding_rotated(self, t: int) -> RotatedRect | None:
        sets = self.aggregate(t)
        if not sets:
            return None
        pts = np.vstack([s.corners() for s in sets])
        return min_area_rotated_rect(pts)

    def bound_area(self, t: int) -> float:
        """Area of the aggregate bound in the run's set representation (0 if empty)."""
        if self.rotated:
            rect = self.bounding_rotated(t)
            return 0.0 if rect is None else rect.area
        box = self.bounding_box(t)
        return 0.0 if box is None else volume(box)


@dataclass
class _LpCounter:
    main: int = 0
    aux: int = 0

    def tick(self, kind: str) -> None:
        setattr(self, kind, getattr(self, kind) + 1)


def lp_count(n_x: int, s: int, q: int, tau: int) -> int:
    """Trajectory-LP budget: two extremes per state coordinate, BR cell, target element, step."""
    if min(n_x, s, q, tau) < 1:
        raise ValueError("all arguments must be >= 1")
    return 2 * n_x * s * q * tau


def _sanitize_interval(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gap = lo - hi
    if np.any(gap > 1e-5):
        raise LpSolverError(f"inconsistent LP extremes: lower {lo} above upper {hi}")
    mid = 0.5 * (lo + hi)
    return np.minimum(lo, mid), np.maximum(hi, mid)


def _box_bounds(box: HyperRect) -> list[tuple[float, float]]:
    return [(float(lo), float(hi)) for lo, hi in zip(box.lower, box.upper)]


def backreach(sys: LtiSystem, p_next, *, _counter: _LpCounter | None = None) -> HyperRect | None:
    """Box of all states that can reach `p_next` in one step under some admissible control.

    Solves min/max of each state coordinate over {(x, u) | A x + B u + c in p_next,
    u in U, x in X}. Returns None when no admissible state reaches `p_next`.
    """
    counter = _counter if _counter is not None else _LpCounter()
    n_x, n_u = sys.n_x, sys.n_u
    n = n_x + n_u
    ab = np.hstack([sys.A, sys.B])
    problem_rows: list = []
    if isinstance(p_next, RotatedRect):
        H, h = p_next.halfspaces()
        M = H @ ab
        rhs = h - H @ sys.c
        for i in range(M.shape[0]):
            problem_rows.append((M[i], LEQ, rhs[i]))
    else:
        if p_next.dim != n_x:
            raise DimensionMismatchError("next set must live in the state space")
        for k in range(n_x):
            problem_rows.append((ab[k], LEQ, p_next.upper[k] - sys.c[k]))
            problem_rows.append((ab[k], GEQ, p_next.lower[k] - sys.c[k]))
    var_bounds = _box_bounds(sys.X) + _box_bounds(sys.U)
    lo = np.empty(n_x)
    hi = np.empty(n_x)
    for k in range(n_x):
        for sense, dest in ((MIN, lo), (MAX, hi)):
            obj = np.zeros(n)
            obj[k] = 1.0
            sol = solve(LpProblem(n, obj, sense, list(problem_rows), var_bounds))
            counter.tick("aux")
            if sol.status == INFEASIBLE:
                return None
            if sol.status != OPTIMAL:
                raise LpSolverError("backreach LP unbounded: X and U must be bounded boxes")
            dest[k] = sol.value
    return HyperRect(*_sanitize_interval(lo, hi))


def tsp(target: HyperRect, r1) -> list[HyperRect]:
    """Uniform target-set partition into prod(r1) elements."""
    return uniform_partition(target, r1)


def _chain_lp_box(
    sys: LtiSystem,
    head_box: HyperRect,
    head_bounds: AffineBounds,
    chain_sets: list,
    chain_bounds: list[AffineBounds],
    counter: _LpCounter,
    kind: str,
) -> HyperRect | None:
    """Extreme head-state coordinates over the suffix-trajectory constraint set.

    Variables are the full trajectory (x_0..x_m, u_0..u_{m-1}) with x_0 in
    `head_box`; x_i must lie in chain_sets[i-1], controls obey the affine
    policy envelopes (head bounds at step 0, chain_bounds upstream), and
    consecutive states are linked by the dynamics. Returns None if infeasible.
    """
    m = len(chain_sets)
    n_x, n_u = sys.n_x, sys.n_u
    n = (m + 1) * n_x + m * n_u

    def xoff(i: int) -> int:
        return i * n_x

    def uoff(i: int) -> int:
        return (m + 1) * n_x + i * n_u

    var_bounds: list[tuple[float, float] | tuple[None, None]] = [(None, None)] * n
    rows: list = []

    var_bounds[xoff(0) : xoff(0) + n_x] = _box_bounds(head_box)
    for i, cs in enumerate(chain_sets, start=1):
        if isinstance(cs, RotatedRect):
            var_bounds[xoff(i) : xoff(i) + n_x] = _box_bounds(cs.aabb())
            H, h = cs.halfspaces()
            for r in range(H.shape[0]):
                row = np.zeros(n)
                row[xoff(i) : xoff(i) + n_x] = H[r]
                rows.append((row, LEQ, h[r]))
        else:
            var_bounds[xoff(i) : xoff(i) + n_x] = _box_bounds(cs)

    for i in range(m):
        ab = head_bounds if i == 0 else chain_bounds[i - 1]
        for j in range(n_u):
            row = np.zeros(n)
            row[xoff(i) : xoff(i) + n_x] = ab.Phi[j]
            row[uoff(i) + j] = -1.0
            rows.append((row, LEQ, -ab.beta[j]))
            row = np.zeros(n)
            row[xoff(i) : xoff(i) + n_x] = -ab.Psi[j]
            row[uoff(i) + j] = 1.0
            rows.append((row, LEQ, ab.alpha[j]))

    for i in range(m):
        for k in range(n_x):
            row = np.zeros(n)
            row[xoff(i) : xoff(i) + n_x] = sys.A[k]
            row[uoff(i) : uoff(i) + n_u] = sys.B[k]
            row[xoff(i + 1) + k] = -1.0
            rows.append((row, EQ, -sys.c[k]))

    lo = np.empty(n_x)
    hi = np.empty(n_x)
    feasible = True
    for k in range(n_x):
        for sense, dest in ((MIN, lo), (MAX, hi)):
            obj = np.zeros(n)
            obj[k] = 1.0
            sol = solve(LpProblem(n, obj, sense, list(rows), list(var_bounds)))
            counter.tick(kind)
            if sol.status == INFEASIBLE:
                feasible = False
            elif sol.status != OPTIMAL:
                raise LpSolverError("trajectory LP unbounded: chain sets must be bounded")
            elif feasible:
                dest[k] = sol.value
    if not feasible:
        return None
    return HyperRect(*_sanitize_interval(lo, hi))


def _one_step_box(sys, net, cell: HyperRect, goal, counter: _LpCounter) -> HyperRect | None:
    """Guide box for refinement: states in `cell` that can reach `goal` in one step."""
    bounds = crown_bounds(net, cell)
    return _chain_lp_box(sys, cell, bounds, [goal], [], counter, kind="aux")


def _attains_face(box: HyperRect, agg: HyperRect, tol: float = _FACE_TOL) -> bool:
    return bool(
        np.any(box.lower <= agg.lower + tol) or np.any(box.upper >= agg.upper - tol)
    )


def brsp(
    br_set: HyperRect,
    target_elem: HyperRect,
    sys: LtiSystem,
    net: FeedforwardNetwork,
    t: int,
    r2: int,
    v_m: float,
    strategy: str = GUIDED,
    *,
    next_set=None,
    _counter: _LpCounter | None = None,
) -> list[HyperRect]:
    """Partition the backreachable box into at most r2 cells covering it.

    Uniform: largest grid m^n with m^n <= r2. Guided: repeatedly bisect, along
    its longest edge, the largest cell whose one-step reach box toward the
    upstream set attains a face of the aggregate bounding box; cells below
    volume v_m are never split. `next_set` is the set one forward step must
    enter (the target element itself at t = -1).
    """
    if r2 < 1:
        raise ValueError("partition budget must be >= 1")
    if r2 == 1:
        return [br_set]
    if strategy == UNIFORM:
        dim = br_set.dim
        m = 1
        while (m + 1) ** dim <= r2:
            m += 1
        return uniform_partition(br_set, [m] * dim)
    if strategy != GUIDED:
        raise ValueError(f"unknown strategy {strategy!r}")

    counter = _counter if _counter is not None else _LpCounter()
    goal = next_set if next_set is not None else target_elem
    cells = [br_set]
    guides = [_one_step_box(sys, net, br_set, goal, counter)]
    while len(cells) < r2:
        live = [i for i, g in enumerate(guides) if g is not None]
        if not live:
            break
        agg = bounding_rect([guides[i] for i in live])
        candidates = [
            i
            for i in live
            if _attains_face(guides[i], agg)
            and volume(cells[i]) >= v_m
            and float(np.max(cells[i].widths)) > _EDGE_EPS
        ]
        if not candidates:
            break
        pick = max(candidates, key=lambda i: (volume(cells[i]), -i))
        cell = cells[pick]
        axis = int(np.argmax(cell.widths))
        mid = 0.5 * (cell.lower[axis] + cell.upper[axis])
        lo_half = HyperRect(cell.lower, _replace_at(cell.upper, axis, mid))
        hi_half = HyperRect(_replace_at(cell.lower, axis, mid), cell.upper)
        cells[pick : pick + 1] = [lo_half, hi_half]
        guides[pick : pick + 1] = [
            _one_step_box(sys, net, lo_half, goal, counter),
            _one_step_box(sys, net, hi_half, goal, counter),
        ]
    return cells


def _replace_at(vec: np.ndarray, k: int, value: float) -> np.ndarray:
    out = vec.copy()
    out[k] = value
    return out


def bpoa_element_step(
    sys: LtiSystem,
    net: FeedforwardNetwork,
    hist: ElementHistory,
    t: int,
    cells: list[HyperRect],
    *,
    rotated: bool = False,
    _counter: _LpCounter | None = None,
) -> ElementHistory:
    """One backward step for one target element.

    Relaxes the policy over each BR cell, solves the suffix-trajectory LPs,
    unions the contributing boxes into the element's BPOA at t, and refreshes
    the upstream policy envelope over the new set.
    """
    counter = _counter if _counter is not None else _LpCounter()
    if (t + 1) not in hist.bpoa:
        raise ValueError(f"history lacks the upstream set at t={t + 1}")
    chain_sets = [hist.bpoa[s] for s in range(t + 1, 1)]
    chain_bounds = [hist.omegas[s] for s in range(t + 1, 0)]
    boxes = []
    for cell in cells:
        cell_bounds = crown_bounds(net, cell)
        boxes.append(
            _chain_lp_box(sys, cell, cell_bounds, chain_sets, chain_bounds, counter, "main")
        )
    hist.cells[t] = list(cells)
    hist.cell_boxes[t] = boxes
    contributing = [b for b in boxes if b is not None]
    if not contributing:
        hist.empty_from = t
        return hist
    if rotated:
        pts = np.vstack([b.corners() for b in contributing])
        rect = min_area_rotated_rect(pts)
        hist.bpoa[t] = rect
        domain = rect.aabb()
    else:
        box = bounding_rect(contributing)
        hist.bpoa[t] = box
        domain = box
    hist.omegas[t] = crown_bounds(net, domain)
    return hist


def hybreach_lp_plus(
    sys: LtiSystem,
    net: FeedforwardNetwork,
    target: HyperRect,
    horizon: int,
    params: PartitionParams,
    *,
    rotated: bool = False,
) -> BpoaRun:
    """Hybrid-partitioning BPOA computation over the whole horizon.

    Partitions the target once, then walks each element backward through time,
    at each step recomputing the backreachable box, refining it into cells,
    and bounding the feasible head states of the suffix-trajectory LPs.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if len(params.tsp_counts) != sys.n_x:
        raise DimensionMismatchError("target partition counts must match the state dimension")
    if target.dim != sys.n_x:
        raise DimensionMismatchError("target must live in the state space")
    if rotated and sys.n_x != 2:
        raise ValueError("rotated-rectangle mode requires a 2-D state space")
    if net.input_dim != sys.n_x or net.output_dim != sys.n_u:
        raise DimensionMismatchError("policy network does not match the system dimensions")

    counter = _LpCounter()
    start = time.perf_counter()
    elements = tsp(target, params.tsp_counts)
    histories = []
    for elem in elements:
        hist = ElementHistory(element=elem)
        for t in range(-1, -horizon - 1, -1):
            br = backreach(sys, hist.bpoa[t + 1], _counter=counter)
            if br is None:
                hist.empty_from = t
                break
            hist.br_sets[t] = br
            cells = brsp(
                br,
                elem,
                sys,
                net,
                t,
                params.brsp_budget,
                params.min_cell_volume,
                params.brsp_strategy,
                next_set=hist.bpoa[t + 1],
                _counter=counter,
            )
            bpoa_element_step(sys, net, hist, t, cells, rotated=rotated, _counter=counter)
            if hist.empty_from is not None:
                break
        histories.append(hist)
    wall = time.perf_counter() - start
    return BpoaRun(
        target=target,
        horizon=horizon,
        params=params,
        rotated=rotated,
        histories=histories,
        lp_count=counter.main,
        aux_lp_count=counter.aux,
        wall_time_s=wall,
    )


def backreach_chain(sys: LtiSystem, target: HyperRect, steps: int) -> list[HyperRect]:
    """Pure backreach iterates (controls relaxed to U) for t = -1 .. -steps.

    The k-th entry contains every state that can possibly reach the target in
    k + 1 steps, so it always covers the true backprojection set there. Stops
    early if an iterate is empty.
    """
    chain: list[HyperRect] = []
    current: HyperRect | None = target
    for _ in range(steps):
        current = backreach(sys, current)
        if current is None:
            break
        chain.append(current)
    return chain
