"""Energy deployment schemes over one or two transmission slots.

Two schemes are compared. The integrated scheme allocates a slot's whole
energy budget in one joint optimization of the sensing bound. The
step-by-step scheme splits the budget across successive rounds (localize
the radars, then synchronize them when needed, then sense), where each
round optimizes its own goal and hands the next round a restricted
information prior: the localization round carries only its radar-position
block, the synchronization round the radar-plus-clock block, the sensing
round everything. The split across rounds (and across slots, for two-slot
scenes) is chosen by exhaustive search on an energy lattice.

All traversals are deterministic: lattices are enumerated in ascending
lexicographic order and ties resolve to the earliest split.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams
from .errors import NonIdentifiableError, ValidationError
from .fim import FimMatrix, target_speb, temporal_prior
from .model import (
    NetworkScene,
    ParamRole,
    RADAR_POSITION_ROLES,
    SyncMode,
    TARGET_POSITION_ROLES,
    build_layout,
)
from .optimizer import (
    AllocationProblem,
    AllocationSolution,
    PowerAllocation,
    ordered_slot_components,
    solve_allocation,
)

INTEGRATED = "integrated"
STEPWISE = "stepwise"

STAGE_LOCALIZATION = "localization"
STAGE_SYNCHRONIZATION = "synchronization"
STAGE_SENSING = "sensing"


@dataclass(frozen=True)
class StageSpec:
    """One transmission round: which slot transmits, what it optimizes."""

    name: str
    slot: int


@dataclass(frozen=True)
class SplitResult:
    """Outcome of one enumerated energy split.

    energies is the enumerated split (per stage for one-slot scenes, per
    slot for two-slot scenes); stage_energies is the realized budget of
    every transmission round in order. objective is the recorded traversal
    score: the final sensing bound, summed over slots for two-slot scenes.
    """

    energies: tuple[float, ...]
    stage_energies: tuple[float, ...]
    objective: float
    stage_solutions: tuple[AllocationSolution, ...]


@dataclass(frozen=True)
class AllocationReport:
    scheme: str
    sync_mode: SyncMode
    n_slots: int
    stage_names: tuple[str, ...]
    trace: tuple[SplitResult, ...]
    best_index: int
    target_spebs: tuple[float, ...]
    final_matrix: np.ndarray
    parameter_labels: tuple[str, ...]

    @property
    def best(self) -> SplitResult:
        return self.trace[self.best_index]


def _stage_names(mode: SyncMode):
    if mode is SyncMode.ASYNCHRONOUS:
        return (STAGE_LOCALIZATION, STAGE_SYNCHRONIZATION, STAGE_SENSING)
    return (STAGE_LOCALIZATION, STAGE_SENSING)


def _energy_axis(total: float, step: float):
    if step <= 0 or not np.isfinite(step):
        raise ValidationError(f"energy lattice step must be positive, got {step}")
    vals = list(np.arange(0.0, total + 1e-9 * max(total, 1.0), step))
    if not vals or vals[-1] < total - 1e-9 * max(total, 1.0):
        vals.append(total)
    vals[-1] = total
    return vals


def _split_lattice(total: float, step: float, parts: int):
    """Splits of `total` into `parts` nonnegative stage energies on the grid.

    Leading parts run over lattice values in ascending lexicographic order;
    the last part takes the remainder, so every split sums to total exactly.
    """
    axis = _energy_axis(total, step)
    if parts == 1:
        return [(total,)]
    splits = []
    if parts == 2:
        for e1 in axis:
            splits.append((e1, total - e1))
        return splits
    if parts == 3:
        for e1 in axis:
            for e2 in axis:
                rest = total - e1 - e2
                if rest < -1e-9:
                    continue
                splits.append((e1, e2, max(rest, 0.0)))
        return splits
    raise ValidationError(f"unsupported split arity {parts}")


def _prune_ordered(splits, names):
    """Keep splits obeying synchronization <= localization <= sensing."""
    order = {STAGE_SYNCHRONIZATION: 0, STAGE_LOCALIZATION: 1, STAGE_SENSING: 2}
    ranked = sorted(range(len(names)), key=lambda i: order[names[i]])
    kept = []
    for split in splits:
        seq = [split[i] for i in ranked]
        if all(a <= b + 1e-12 for a, b in zip(seq, seq[1:])):
            kept.append(split)
    return kept


class _SceneWorkspace:
    """Layout, embedded per-node components and index maps for one scene."""

    def __init__(self, scene: NetworkScene, params: ChannelParams, offdiag_sign: float = 1.0):
        self.scene = scene
        self.params = params
        self.layout = build_layout(scene)
        n = len(self.layout)
        self.slot_indices = {
            k: tuple(self.layout.indices(slot=k)) for k in range(1, scene.n_slots + 1)
        }
        self.components = {}
        self.caps = None
        for k in range(1, scene.n_slots + 1):
            _, comps, caps = ordered_slot_components(scene, k, params)
            idx = np.asarray(self.slot_indices[k], dtype=int)
            embedded = []
            for comp in comps:
                z = np.zeros((n, n))
                z[np.ix_(idx, idx)] = comp
                embedded.append(z)
            self.components[k] = tuple(embedded)
            self.caps = caps
        self.base_prior = (
            temporal_prior(scene, params, offdiag_sign=offdiag_sign)
            if scene.n_slots == 2
            else np.zeros((n, n))
        )
        self.grid_step = params.total_energy / 20.0

    def stage_sub_indices(self, stage: StageSpec, informed_targets):
        """Principal submatrix a round works on.

        Radar positions (and clocks, asynchronous) span every slot so the
        temporal coupling is marginalized instead of double counted; target
        blocks join only once their slot has been sensed.
        """
        roles = set(RADAR_POSITION_ROLES)
        if self.scene.sync_mode is SyncMode.ASYNCHRONOUS and stage.name in (
            STAGE_SYNCHRONIZATION,
            STAGE_SENSING,
        ):
            roles.add(ParamRole.CLOCK_OFFSET)
        idx = list(self.layout.indices(roles=frozenset(roles)))
        targets = set(informed_targets)
        if stage.name == STAGE_SENSING:
            targets.add(stage.slot)
        for k in sorted(targets):
            idx.extend(self.layout.indices(roles=TARGET_POSITION_ROLES, slot=k))
        return tuple(sorted(idx))

    def stage_group_indices(self, stage: StageSpec):
        if stage.name == STAGE_LOCALIZATION:
            roles = RADAR_POSITION_ROLES
        elif stage.name == STAGE_SYNCHRONIZATION:
            roles = frozenset({ParamRole.CLOCK_OFFSET})
        else:
            roles = TARGET_POSITION_ROLES
        return tuple(self.layout.indices(roles=roles, slot=stage.slot))

    def stage_problem(self, stage: StageSpec, prior, budget, informed_targets):
        sub = self.stage_sub_indices(stage, informed_targets)
        pos = {j: k for k, j in enumerate(sub)}
        group = tuple(pos[j] for j in self.stage_group_indices(stage))
        return AllocationProblem(
            components=self.components[stage.slot],
            prior=prior,
            group_indices=group,
            budget=budget,
            caps=self.caps,
            n_anchors=self.scene.n_anchors,
            sub_indices=sub,
            labels=tuple(self.layout.labels()),
        )

    def failed_solution(self) -> AllocationSolution:
        return AllocationSolution(
            powers=PowerAllocation.zeros(self.scene.n_anchors, self.scene.n_radars),
            objective=np.inf,
            iterations=0,
            gradient_norm=np.nan,
            converged=False,
        )

    def realized_fim(self, slot: int, powers: PowerAllocation):
        vec = powers.vector()
        out = np.zeros_like(self.components[slot][0])
        for p, comp in zip(vec, self.components[slot]):
            out += p * comp
        return out

    def final_spebs(self, matrix):
        fim = FimMatrix(matrix, self.layout)
        spebs = []
        for k in range(1, self.scene.n_slots + 1):
            try:
                spebs.append(target_speb(fim, slot=k))
            except NonIdentifiableError:
                spebs.append(np.inf)
        return tuple(spebs)


def _run_stage_sequence(ws: _SceneWorkspace, stages, budgets, prior, informed_targets):
    """Run rounds in order, carrying block-restricted information forward.

    Returns the solutions, the updated prior, the updated informed-target
    set and the last round's objective. A round whose working matrix is
    singular at every feasible point scores inf and carries nothing, and
    the traversal continues.
    """
    a = prior.copy()
    informed = set(informed_targets)
    solutions = []
    last_obj = np.inf
    for stage, budget in zip(stages, budgets):
        problem = ws.stage_problem(stage, a, budget, informed)
        try:
            sol = solve_allocation(problem)
        except NonIdentifiableError:
            sol = ws.failed_solution()
        solutions.append(sol)
        last_obj = sol.objective
        if np.isfinite(sol.objective):
            sub = np.asarray(problem.sub_indices, dtype=int)
            updated = a + ws.realized_fim(stage.slot, sol.powers)
            a[np.ix_(sub, sub)] = updated[np.ix_(sub, sub)]
            if stage.name == STAGE_SENSING:
                informed.add(stage.slot)
    return solutions, a, informed, last_obj


def _map_splits(evaluate, splits, max_workers):
    if max_workers is not None and max_workers > 1 and len(splits) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(evaluate, splits))
    return [evaluate(split) for split in splits]


def _best_index(trace):
    objectives = [r.objective for r in trace]
    best = 0
    for i, obj in enumerate(objectives):
        if obj < objectives[best]:
            best = i
    return best


def _require_slots(scene: NetworkScene, n: int, what: str):
    if scene.n_slots != n:
        raise ValidationError(f"{what} requires a {n}-slot scene, got {scene.n_slots}")


def run_integrated_single_slot(
    scene: NetworkScene, params: ChannelParams, max_workers: int | None = None
) -> AllocationReport:
    """One joint allocation of the whole budget against the sensing bound."""
    _require_slots(scene, 1, "integrated single-slot scheme")
    ws = _SceneWorkspace(scene, params)
    stage = StageSpec(STAGE_SENSING, 1)
    problem = ws.stage_problem(stage, ws.base_prior, params.total_energy, informed_targets=())
    try:
        sol = solve_allocation(problem)
    except NonIdentifiableError:
        sol = ws.failed_solution()
    final = ws.base_prior + ws.realized_fim(1, sol.powers)
    spebs = ws.final_spebs(final)
    result = SplitResult(
        energies=(params.total_energy,),
        stage_energies=(params.total_energy,),
        objective=spebs[0],
        stage_solutions=(sol,),
    )
    return AllocationReport(
        scheme=INTEGRATED,
        sync_mode=scene.sync_mode,
        n_slots=1,
        stage_names=(STAGE_SENSING,),
        trace=(result,),
        best_index=0,
        target_spebs=spebs,
        final_matrix=final,
        parameter_labels=tuple(ws.layout.labels()),
    )


def run_stepwise_single_slot(
    scene: NetworkScene,
    params: ChannelParams,
    grid_step: float | None = None,
    prune: bool = False,
    max_workers: int | None = None,
) -> AllocationReport:
    """Enumerate budget splits across rounds; each round optimizes its own goal.

    prune drops splits that put more energy into synchronization than
    localization or more into localization than sensing, shrinking the
    asynchronous traversal.
    """
    _require_slots(scene, 1, "stepwise single-slot scheme")
    ws = _SceneWorkspace(scene, params)
    step = ws.grid_step if grid_step is None else float(grid_step)
    names = _stage_names(scene.sync_mode)
    stages = [StageSpec(name, 1) for name in names]
    splits = _split_lattice(params.total_energy, step, len(stages))
    if prune:
        splits = _prune_ordered(splits, names)

    def evaluate(split):
        sols, a, _, last = _run_stage_sequence(ws, stages, split, ws.base_prior, set())
        return SplitResult(
            energies=split, stage_energies=split, objective=last, stage_solutions=tuple(sols)
        )

    trace = tuple(_map_splits(evaluate, splits, max_workers))
    best = _best_index(trace)
    _, final, _, _ = _run_stage_sequence(
        ws, stages, trace[best].energies, ws.base_prior, set()
    )
    spebs = ws.final_spebs(final)
    return AllocationReport(
        scheme=STEPWISE,
        sync_mode=scene.sync_mode,
        n_slots=1,
        stage_names=names,
        trace=trace,
        best_index=best,
        target_spebs=spebs,
        final_matrix=final,
        parameter_labels=tuple(ws.layout.labels()),
    )


def run_integrated_dual_slot(
    scene: NetworkScene,
    params: ChannelParams,
    grid_step: float | None = None,
    max_workers: int | None = None,
    temporal_offdiag_sign: float = 1.0,
) -> AllocationReport:
    """Enumerate slot splits; each slot gets one joint allocation.

    The first slot is solved on its own information alone; the second sees
    the first slot's realized information through the temporal prior. The
    recorded objective is the sum of both sensing bounds on the final
    two-slot matrix.
    """
    _require_slots(scene, 2, "integrated dual-slot scheme")
    ws = _SceneWorkspace(scene, params, offdiag_sign=temporal_offdiag_sign)
    step = ws.grid_step if grid_step is None else float(grid_step)
    splits = _split_lattice(params.total_energy, step, 2)

    def evaluate(split):
        e1, e2 = split
        # slot 1 stands alone: nothing earlier to cooperate with, so its
        # working matrix must not span the other slot's empty blocks
        sub1 = ws.slot_indices[1]
        pos1 = {j: k for k, j in enumerate(sub1)}
        group1 = tuple(
            pos1[j] for j in ws.layout.indices(roles=TARGET_POSITION_ROLES, slot=1)
        )
        problem1 = AllocationProblem(
            components=ws.components[1],
            prior=np.zeros_like(ws.base_prior),
            group_indices=group1,
            budget=e1,
            caps=ws.caps,
            n_anchors=scene.n_anchors,
            sub_indices=sub1,
            labels=tuple(ws.layout.labels()),
        )
        try:
            sol1 = solve_allocation(problem1)
        except NonIdentifiableError:
            sol1 = ws.failed_solution()
        prior2 = ws.base_prior + ws.realized_fim(1, sol1.powers)
        problem2 = ws.stage_problem(
            StageSpec(STAGE_SENSING, 2), prior2, e2, informed_targets=(1,)
        )
        try:
            sol2 = solve_allocation(problem2)
        except NonIdentifiableError:
            sol2 = ws.failed_solution()
        final = prior2 + ws.realized_fim(2, sol2.powers)
        spebs = ws.final_spebs(final)
        return SplitResult(
            energies=split,
            stage_energies=split,
            objective=spebs[0] + spebs[1],
            stage_solutions=(sol1, sol2),
        )

    trace = tuple(_map_splits(evaluate, splits, max_workers))
    best = _best_index(trace)
    sol1, sol2 = trace[best].stage_solutions
    final = ws.base_prior + ws.realized_fim(1, sol1.powers) + ws.realized_fim(2, sol2.powers)
    spebs = ws.final_spebs(final)
    return AllocationReport(
        scheme=INTEGRATED,
        sync_mode=scene.sync_mode,
        n_slots=2,
        stage_names=(f"s1.{STAGE_SENSING}", f"s2.{STAGE_SENSING}"),
        trace=trace,
        best_index=best,
        target_spebs=spebs,
        final_matrix=final,
        parameter_labels=tuple(ws.layout.labels()),
    )


def run_stepwise_dual_slot(
    scene: NetworkScene,
    params: ChannelParams,
    grid_step: float | None = None,
    prune: bool = False,
    max_workers: int | None = None,
    temporal_offdiag_sign: float = 1.0,
) -> AllocationReport:
    """Enumerate slot splits; within a slot, rounds split greedily.

    For each slot budget the inner round split is chosen by the slot's own
    final sensing bound, then committed before the next slot runs. The
    recorded objective sums both sensing bounds on the final matrix.
    """
    _require_slots(scene, 2, "stepwise dual-slot scheme")
    ws = _SceneWorkspace(scene, params, offdiag_sign=temporal_offdiag_sign)
    step = ws.grid_step if grid_step is None else float(grid_step)
    names = _stage_names(scene.sync_mode)
    outer = _split_lattice(params.total_energy, step, 2)

    def run_slot(slot, budget, prior, informed):
        stages = [StageSpec(name, slot) for name in names]
        inner = _split_lattice(budget, step, len(stages))
        if prune:
            inner = _prune_ordered(inner, names)
        best_run = None
        best_split = None
        for split in inner:
            sols, a, inf_next, last = _run_stage_sequence(ws, stages, split, prior, informed)
            if best_run is None or last < best_run[3]:
                best_run = (sols, a, inf_next, last)
                best_split = split
        sols, a, inf_next, last = best_run
        return best_split, sols, a, inf_next

    def evaluate(split):
        e1, e2 = split
        split1, sols1, a, informed = run_slot(1, e1, ws.base_prior, set())
        split2, sols2, a, informed = run_slot(2, e2, a, informed)
        spebs = ws.final_spebs(a)
        return SplitResult(
            energies=split,
            stage_energies=tuple(split1) + tuple(split2),
            objective=spebs[0] + spebs[1],
            stage_solutions=tuple(sols1) + tuple(sols2),
        )

    trace = tuple(_map_splits(evaluate, outer, max_workers))
    best = _best_index(trace)
    best_e1, best_e2 = trace[best].energies
    _, _, a, informed = run_slot(1, best_e1, ws.base_prior, set())
    _, _, a, _ = run_slot(2, best_e2, a, informed)
    spebs = ws.final_spebs(a)
    stage_names = tuple(f"s{k}.{name}" for k in (1, 2) for name in names)
    return AllocationReport(
        scheme=STEPWISE,
        sync_mode=scene.sync_mode,
        n_slots=2,
        stage_names=stage_names,
        trace=trace,
        best_index=best,
        target_spebs=spebs,
        final_matrix=a,
        parameter_labels=tuple(ws.layout.labels()),
    )


def run_scheme(
    scene: NetworkScene,
    params: ChannelParams,
    scheme: str,
    grid_step: float | None = None,
    prune: bool = False,
    max_workers: int | None = None,
    temporal_offdiag_sign: float = 1.0,
) -> AllocationReport:
    """Dispatch on scheme name and slot count."""
    if scheme == INTEGRATED:
        if scene.n_slots == 1:
            return run_integrated_single_slot(scene, params, max_workers=max_workers)
        return run_integrated_dual_slot(
            scene,
            params,
            grid_step=grid_step,
            max_workers=max_workers,
            temporal_offdiag_sign=temporal_offdiag_sign,
        )
    if scheme == STEPWISE:
        if scene.n_slots == 1:
            return run_stepwise_single_slot(
                scene, params, grid_step=grid_step, prune=prune, max_workers=max_workers
            )
        return run_stepwise_dual_slot(
            scene,
            params,
            grid_step=grid_step,
            prune=prune,
            max_workers=max_workers,
            temporal_offdiag_sign=temporal_offdiag_sign,
        )
    raise ValidationError(f"unknown scheme {scheme!r}; expected {INTEGRATED!r} or {STEPWISE!r}")


def ordering_heuristic(report: AllocationReport) -> tuple[str, ...]:
    """Suggested round order for a one-slot step-by-step result.

    Rounds sorted by how much energy the best split gave them, ascending,
    with the original round order breaking ties: cheap goals are worth
    settling before expensive ones refine them.
    """
    if report.scheme != STEPWISE:
        raise ValidationError("ordering heuristic applies to stepwise reports")
    if report.n_slots != 1:
        raise ValidationError("ordering heuristic applies to one-slot reports")
    best = report.best
    ranked = sorted(
        range(len(report.stage_names)),
        key=lambda i: (best.stage_energies[i], i),
    )
    return tuple(report.stage_names[i] for i in ranked)
