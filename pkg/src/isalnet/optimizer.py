"""Power allocation: minimize a parameter group's error bound under caps.

The problem family is min tr((F(P)^-1) on a group) subject to a total
energy budget and per-node power caps, where F(P) is affine in P with PSD
coefficients. That objective is convex on the feasible box, so projected
gradient descent with an Armijo line search finds the global optimum; an
exhaustive lattice oracle provides independent verification.

Objectives spread over ~20 orders of magnitude across parameter groups
(position bounds are ~1e-2 m^2, clock bounds ~1e-22 s^2), so the solver
normalizes the objective by its value at the initial point; thresholds then
mean the same thing for every group.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams
from .errors import InfeasibleError, NonIdentifiableError, NumericError, ValidationError
from .fim import single_slot_components, sym_solve
from .model import (
    NetworkScene,
    NodeId,
    NodeKind,
    ParameterLayout,
    slot_layout_entries,
)

GRADIENT_RTOL = 1e-7
MAX_ITERATIONS = 10_000
FEASIBILITY_ATOL = 1e-9
EIGENVALUE_RTOL = 1e-12


@dataclass(frozen=True)
class PowerAllocation:
    """Per-active-node transmit powers for one transmission round.

    The flat vector ordering is anchors first, then radars, each 1-based in
    index order.
    """

    anchor_powers: tuple[float, ...]
    radar_powers: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "anchor_powers", tuple(float(p) for p in self.anchor_powers))
        object.__setattr__(self, "radar_powers", tuple(float(p) for p in self.radar_powers))
        for p in self.anchor_powers + self.radar_powers:
            if not (np.isfinite(p) and p >= 0):
                raise ValidationError(f"powers must be finite and nonnegative, got {p}")

    @classmethod
    def from_vector(cls, n_anchors: int, vector) -> "PowerAllocation":
        vector = list(float(v) for v in vector)
        return cls(anchor_powers=tuple(vector[:n_anchors]), radar_powers=tuple(vector[n_anchors:]))

    @classmethod
    def zeros(cls, n_anchors: int, n_radars: int) -> "PowerAllocation":
        return cls(anchor_powers=(0.0,) * n_anchors, radar_powers=(0.0,) * n_radars)

    @classmethod
    def uniform(cls, n_anchors: int, n_radars: int, power: float) -> "PowerAllocation":
        return cls(anchor_powers=(power,) * n_anchors, radar_powers=(power,) * n_radars)

    def vector(self) -> np.ndarray:
        return np.array(self.anchor_powers + self.radar_powers)

    def power_of(self, node: NodeId) -> float:
        if node.kind is NodeKind.ANCHOR:
            return self.anchor_powers[node.index - 1]
        if node.kind is NodeKind.RADAR:
            return self.radar_powers[node.index - 1]
        raise ValidationError(f"{node.label()} is not an active node")

    def total(self) -> float:
        return float(sum(self.anchor_powers) + sum(self.radar_powers))


@dataclass(frozen=True)
class AllocationProblem:
    """min tr(((prior + sum_j P_j components[j])[sub, sub])^-1 on group).

    components and caps are ordered anchors-then-radars to match
    PowerAllocation. sub_indices selects the principal submatrix the
    objective lives on (None means the full layout); group_indices are
    relative to that submatrix.
    """

    components: tuple
    prior: np.ndarray
    group_indices: tuple[int, ...]
    budget: float
    caps: tuple[float, ...]
    n_anchors: int
    sub_indices: tuple[int, ...] | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.caps) != len(self.components):
            raise ValidationError("one cap per component is required")
        if not self.group_indices:
            raise ValidationError("objective group must be nonempty")
        if not np.isfinite(self.budget) or self.budget < 0:
            raise InfeasibleError(f"energy budget must be nonnegative, got {self.budget}")
        for cap in self.caps:
            if not (np.isfinite(cap) and cap >= 0):
                raise InfeasibleError(f"power caps must be nonnegative, got {cap}")

    def restricted(self):
        """Prior, components and labels cut down to the working submatrix."""
        if self.sub_indices is None:
            return self.prior, list(self.components), self.labels
        ix = np.ix_(self.sub_indices, self.sub_indices)
        prior = self.prior[ix]
        comps = [c[ix] for c in self.components]
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[i] for i in self.sub_indices)
        return prior, comps, labels


@dataclass(frozen=True)
class AllocationSolution:
    powers: PowerAllocation
    objective: float
    iterations: int
    gradient_norm: float
    converged: bool
    active_constraints: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)


def ordered_slot_components(scene: NetworkScene, slot: int, params: ChannelParams):
    """Per-node unit-power FIMs and caps, ordered anchors-then-radars.

    Returns (nodes, components, caps) over the slot's own layout.
    """
    comps_radar_first = single_slot_components(scene, slot, params)
    by_node = dict(zip(scene.active_nodes(), comps_radar_first))
    order = tuple(
        [NodeId(NodeKind.ANCHOR, i + 1) for i in range(scene.n_anchors)]
        + [NodeId(NodeKind.RADAR, i + 1) for i in range(scene.n_radars)]
    )
    comps = tuple(by_node[node] for node in order)
    caps = tuple(
        params.anchor_power_cap if node.kind is NodeKind.ANCHOR else params.radar_power_cap
        for node in order
    )
    return order, comps, caps


def single_slot_problem(
    scene: NetworkScene,
    slot: int,
    params: ChannelParams,
    group_roles,
    sub_roles=None,
    prior: np.ndarray | None = None,
    budget: float | None = None,
) -> AllocationProblem:
    """Allocation problem over one slot's own FIM.

    group_roles picks the objective parameters, sub_roles optionally
    restricts the working matrix to a principal block (the objective group
    must lie inside it). The prior is a constant information addend over the
    slot layout, e.g. carried over from an earlier transmission round.
    """
    layout = ParameterLayout(tuple(slot_layout_entries(scene, slot)))
    _, comps, caps = ordered_slot_components(scene, slot, params)
    if prior is None:
        prior = np.zeros((len(layout), len(layout)))
    if budget is None:
        budget = params.total_energy
    sub = None
    group_base = layout.indices(roles=group_roles, slot=slot)
    if sub_roles is not None:
        sub = tuple(layout.indices(roles=sub_roles, slot=slot))
        pos = {j: k for k, j in enumerate(sub)}
        missing = [j for j in group_base if j not in pos]
        if missing:
            raise ValidationError("objective group must lie inside the working submatrix")
        group = tuple(pos[j] for j in group_base)
    else:
        group = tuple(group_base)
    return AllocationProblem(
        components=comps,
        prior=prior,
        group_indices=group,
        budget=float(budget),
        caps=caps,
        n_anchors=scene.n_anchors,
        sub_indices=sub,
        labels=tuple(layout.labels()),
    )


def project_capped_box(x: np.ndarray, caps: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto {0 <= p <= caps, sum(p) <= budget}.

    Clip to the box; if the budget still overflows, shift by the multiplier
    mu that restores it (bisection; the shifted clip is the exact KKT form
    of the projection).
    """
    y = np.clip(x, 0.0, caps)
    if y.sum() <= budget:
        return y
    lo, hi = 0.0, float(np.max(x))
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        if np.clip(x - mu, 0.0, caps).sum() > budget:
            lo = mu
        else:
            hi = mu
    return np.clip(x - hi, 0.0, caps)  # hi side keeps the sum under budget


def objective_and_gradient(problem: AllocationProblem, powers) -> tuple[float, np.ndarray]:
    """Group-bound objective and its exact gradient at the given powers.

    The gradient of tr(S F^-1 S^T) in P_j is -tr(Y^T F_j Y) with
    Y = F^-1 S^T, so every component is nonpositive: information never
    hurts.
    """
    p = powers.vector() if isinstance(powers, PowerAllocation) else np.asarray(powers, dtype=float)
    prior, comps, labels = problem.restricted()
    a = prior + sum(pj * cj for pj, cj in zip(p, comps))
    g_idx = np.asarray(problem.group_indices, dtype=int)
    rhs = np.zeros((a.shape[0], g_idx.size))
    rhs[g_idx, np.arange(g_idx.size)] = 1.0
    y = sym_solve(a, rhs, labels=labels)
    obj = float(np.trace(y[g_idx, :]))
    grad = np.array([-float(np.sum(y * (cj @ y))) for cj in comps])
    return obj, grad


def _objective_or_inf(problem, prior, comps, labels, g_idx, p):
    a = prior + sum(pj * cj for pj, cj in zip(p, comps))
    rhs = np.zeros((a.shape[0], g_idx.size))
    rhs[g_idx, np.arange(g_idx.size)] = 1.0
    try:
        y = sym_solve(a, rhs, labels=labels)
    except NonIdentifiableError:
        return np.inf, None
    return float(np.trace(y[g_idx, :])), y


def solve_allocation(problem: AllocationProblem, max_iterations: int = MAX_ITERATIONS) -> AllocationSolution:
    """Globally minimize the group bound over the capped budget box."""
    caps = np.asarray(problem.caps, dtype=float)
    n = caps.size
    prior, comps, labels = problem.restricted()
    g_idx = np.asarray(problem.group_indices, dtype=int)

    p = project_capped_box(np.minimum(caps, problem.budget / max(n, 1)), caps, problem.budget)
    f, y = _objective_or_inf(problem, prior, comps, labels, g_idx, p)
    if not np.isfinite(f):
        raise NonIdentifiableError(
            "objective group is not identifiable at the initial feasible point; "
            "the budget or the geometry provides it no information",
            parameters=tuple(problem.labels[i] for i in _group_in_layout(problem)) if problem.labels else (),
        )
    if problem.budget == 0.0 or float(caps.sum()) == 0.0:
        return _finish(problem, p, f, 0, 0.0, True, caps)

    scale = 1.0 / f if f > 0 else 1.0

    def grad_scaled(y_cur):
        return scale * np.array([-float(np.sum(y_cur * (cj @ y_cur))) for cj in comps])

    g = grad_scaled(y)
    t = 0.1 * (1.0 + float(np.max(caps))) / (1.0 + float(np.linalg.norm(g)))
    iterations = 0
    pg_norm = np.inf
    converged = False
    for iterations in range(1, max_iterations + 1):
        pg = p - project_capped_box(p - g, caps, problem.budget)
        pg_norm = float(np.linalg.norm(pg))
        if pg_norm <= GRADIENT_RTOL * (1.0 + abs(f * scale)):
            converged = True
            break
        t = min(t * 2.0, 1e12)
        accepted = False
        f_new = f
        while t >= 1e-18:
            p_new = project_capped_box(p - t * g, caps, problem.budget)
            move = p_new - p
            if float(np.linalg.norm(move)) == 0.0:
                break
            f_new, y_new = _objective_or_inf(problem, prior, comps, labels, g_idx, p_new)
            if np.isfinite(f_new) and scale * f_new <= scale * f + 1e-4 * float(g @ move):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = pg_norm <= np.sqrt(GRADIENT_RTOL)  # stalled on rounding
            break
        p, f, y = p_new, f_new, y_new
        g = grad_scaled(y)
    return _finish(problem, p, f, iterations, pg_norm, converged, caps)


def _group_in_layout(problem):
    if problem.sub_indices is None:
        return problem.group_indices
    return tuple(problem.sub_indices[i] for i in problem.group_indices)


def _finish(problem, p, f, iterations, pg_norm, converged, caps) -> AllocationSolution:
    if p.sum() > problem.budget + FEASIBILITY_ATOL or np.any(p > caps + FEASIBILITY_ATOL):
        raise NumericError(
            f"solver produced an infeasible point (sum {p.sum():.3e} vs budget {problem.budget:.3e})"
        )
    active = []
    if p.sum() >= problem.budget - FEASIBILITY_ATOL:
        active.append("budget")
    names = _node_names(problem)
    for j in range(caps.size):
        if p[j] >= caps[j] - FEASIBILITY_ATOL:
            active.append(f"cap:{names[j]}")
        elif p[j] <= FEASIBILITY_ATOL:
            active.append(f"zero:{names[j]}")
    return AllocationSolution(
        powers=PowerAllocation.from_vector(problem.n_anchors, p),
        objective=f,
        iterations=iterations,
        gradient_norm=pg_norm,
        converged=converged,
        active_constraints=tuple(active),
    )


def _node_names(problem):
    n_a = problem.n_anchors
    return [f"anchor{i + 1}" for i in range(n_a)] + [
        f"radar{i + 1}" for i in range(len(problem.caps) - n_a)
    ]


def grid_oracle(problem: AllocationProblem, step: float, max_nodes: int = 5) -> AllocationSolution:
    """Exhaustive lattice search over the feasible box; independent of the solver.

    Enumerated lattice: every node's power runs over {0, step, 2 step, ...}
    up to its cap (the cap itself always included), filtered by the budget.
    The lattice index is row-major with the first node's power varying
    slowest, and ties resolve to the lowest index.
    """
    if step <= 0:
        raise ValidationError(f"lattice step must be positive, got {step}")
    caps = np.asarray(problem.caps, dtype=float)
    n = caps.size
    if n > max_nodes:
        raise ValidationError(f"grid oracle is limited to {max_nodes} nodes, got {n}")
    axes = []
    for cap in caps:
        vals = list(np.arange(0.0, cap + 1e-12 * max(cap, 1.0), step))
        if not vals or vals[-1] < cap - 1e-12 * max(cap, 1.0):
            vals.append(cap)
        axes.append(np.array(vals))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    feasible = mesh.sum(axis=1) <= problem.budget + FEASIBILITY_ATOL
    points = mesh[feasible]
    if points.shape[0] == 0:
        raise InfeasibleError("no lattice point satisfies the budget")
    prior, comps, _ = problem.restricted()
    g_idx = np.asarray(problem.group_indices, dtype=int)
    comp_stack = np.stack(comps)
    best_obj = np.inf
    best_row = 0
    chunk = 65536
    for start in range(0, points.shape[0], chunk):
        batch = points[start : start + chunk]
        objs = _batched_group_trace(prior, comp_stack, batch, g_idx)
        row = int(np.argmin(objs))
        if objs[row] < best_obj:
            best_obj = float(objs[row])
            best_row = start + row
    if not np.isfinite(best_obj):
        raise NonIdentifiableError("objective group is not identifiable anywhere on the lattice")
    p_best = points[best_row]
    return AllocationSolution(
        powers=PowerAllocation.from_vector(problem.n_anchors, p_best),
        objective=best_obj,
        iterations=int(points.shape[0]),
        gradient_norm=np.nan,
        converged=True,
        active_constraints=(),
        diagnostics={"lattice_points": int(points.shape[0]), "step": float(step)},
    )


def _batched_group_trace(prior, comp_stack, batch, g_idx):
    """tr((A^-1) on group) for a batch of power vectors; inf where singular."""
    a = prior[None, :, :] + np.einsum("bm,mij->bij", batch, comp_stack)
    d = np.sqrt(np.abs(np.einsum("bii->bi", a)))
    d[d == 0.0] = 1.0
    a_s = a / d[:, :, None] / d[:, None, :]
    w, v = np.linalg.eigh(a_s)
    w_max = np.max(np.abs(w), axis=1)
    valid = w[:, 0] > EIGENVALUE_RTOL * np.maximum(w_max, 1e-300)
    w_safe = np.where(w > 0, w, 1.0)
    # scaled inverse diagonal on the group, then undo the equilibration
    v_g = v[:, g_idx, :]
    diag_scaled = np.einsum("bgk,bk->bg", v_g**2, 1.0 / w_safe)
    traces = np.sum(diag_scaled / d[:, g_idx] ** 2, axis=1)
    return np.where(valid, traces, np.inf)
