"""Fisher information assembly and position error bounds.

The measurement model lives in the delay domain: every link contributes an
independent delay observation whose information content is c^2 times its
range information intensity. A Jacobian maps delays onto the unknown
parameters (radar positions, clock offsets, target position), so the
parameter-domain FIM is J^T diag(c^2 lambda) J. Dual-slot scenes add
inter-slot priors from the velocity and clock-drift variances.

Numerics note: asynchronous FIMs mix position information (~1e4 1/m^2) with
clock information (~1e21 1/s^2), so raw condition numbers reach 1e17. Every
solve, inverse and Schur complement here therefore goes through a symmetric
Jacobi equilibration that makes the working matrix's conditioning purely
geometric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SPEED_OF_LIGHT, ChannelParams, rii_localization, rii_sensing
from .errors import ModeError, NonIdentifiableError, ValidationError
from .model import (
    NetworkScene,
    NodeId,
    NodeKind,
    ParamRole,
    ParameterLayout,
    RADAR_POSITION_ROLES,
    SyncMode,
    TARGET_POSITION_ROLES,
    angle,
    build_layout,
    distance,
    slot_layout_entries,
)

# A pivot below this fraction of the largest (equilibrated) diagonal entry
# means the parameter carries no usable information; we refuse to invert
# rather than regularize, because a bound must not be silently biased.
PIVOT_RTOL = 1e-12


# ---------------------------------------------------------------------------
# equilibrated symmetric linear algebra


def _equilibration(a: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.abs(np.diag(a)))
    d[d == 0.0] = 1.0
    return d


def _cholesky_pivot_index(a: np.ndarray) -> int:
    """Index of the first collapsing pivot of an unpivoted Cholesky, or -1."""
    n = a.shape[0]
    tol = PIVOT_RTOL * max(float(np.max(np.diag(a))), 0.0)
    L = np.zeros_like(a)
    for j in range(n):
        s = a[j, j] - L[j, :j] @ L[j, :j]
        if not np.isfinite(s) or s <= tol:
            return j
        L[j, j] = np.sqrt(s)
        if j + 1 < n:
            L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return -1


def _check_spd(a_scaled: np.ndarray, labels) -> None:
    """Gate a (pre-equilibrated) matrix through the pivot-tolerance rule."""
    ok = False
    try:
        L = np.linalg.cholesky(a_scaled)
        ok = float(np.min(np.diag(L))) ** 2 > PIVOT_RTOL * max(
            float(np.max(np.diag(a_scaled))), 0.0
        )
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        j = _cholesky_pivot_index(a_scaled)
        if j < 0:
            j = int(np.argmin(np.diag(a_scaled)))
        name = labels[j] if labels is not None else f"parameter {j}"
        raise NonIdentifiableError(
            f"information matrix is singular at pivot {j} ({name}); "
            "the parameter group is not identifiable",
            parameters=(name,),
        )


def sym_solve(a: np.ndarray, b: np.ndarray, labels=None) -> np.ndarray:
    """Solve a @ x = b for symmetric positive definite a, with equilibration."""
    d = _equilibration(a)
    a_s = a / d[:, None] / d[None, :]
    _check_spd(a_s, labels)
    b_s = b / d[:, None] if b.ndim == 2 else b / d
    x_s = np.linalg.solve(a_s, b_s)
    return x_s / d[:, None] if b.ndim == 2 else x_s / d


def sym_inverse(a: np.ndarray, labels=None) -> np.ndarray:
    d = _equilibration(a)
    a_s = a / d[:, None] / d[None, :]
    _check_spd(a_s, labels)
    inv_s = np.linalg.inv(a_s)
    inv = inv_s / d[:, None] / d[None, :]
    return 0.5 * (inv + inv.T)


def trace_of_inverse_block(a: np.ndarray, block: list[int] | np.ndarray, labels=None) -> float:
    """tr of the [block, block] sub-matrix of a^-1."""
    block = np.asarray(block, dtype=int)
    rhs = np.zeros((a.shape[0], block.size))
    rhs[block, np.arange(block.size)] = 1.0
    x = sym_solve(a, rhs, labels)
    return float(np.trace(x[block, :]))


# ---------------------------------------------------------------------------
# links and Jacobians


@dataclass(frozen=True)
class LinkSet:
    """Ordered link enumeration for one slot: sensing first, then ranging.

    Sensing links run over all ordered active-node pairs including the
    monostatic m = n case; ranging links run over ordered pairs of distinct
    active nodes with at least one radar endpoint (anchors already know
    their mutual geometry).
    """

    sensing: tuple[tuple[NodeId, NodeId], ...]
    ranging: tuple[tuple[NodeId, NodeId], ...]

    def __len__(self) -> int:
        return len(self.sensing) + len(self.ranging)


def enumerate_links(scene: NetworkScene, slot: int) -> LinkSet:
    active = scene.active_nodes()
    sensing = tuple((m, n) for m in active for n in active)
    ranging = tuple(
        (m, n)
        for m in active
        for n in active
        if m != n and (m.kind is NodeKind.RADAR or n.kind is NodeKind.RADAR)
    )
    return LinkSet(sensing=sensing, ranging=ranging)


def jacobian_positions(scene: NetworkScene, slot: int, links: LinkSet) -> np.ndarray:
    """Columns of the delay Jacobian for radar positions and the target position.

    Layout: [radar1.x, radar1.y, ..., radarN.x, radarN.y, target.x, target.y].
    A sensing link (m, tar, n) differentiates d(m,tar) + d(tar,n); a ranging
    link differentiates d(m,n). All entries are direction cosines over c.
    """
    c = SPEED_OF_LIGHT
    n_r = scene.n_radars
    target = scene.position_of(NodeId(NodeKind.TARGET, 1), slot)
    rows = []
    for m, n in links.sensing:
        row = np.zeros(2 * n_r + 2)
        for node in (m, n):
            pos = scene.position_of(node, slot)
            phi = angle(target, pos)  # leg direction seen from the target
            if node.kind is NodeKind.RADAR:
                col = 2 * (node.index - 1)
                row[col] += np.cos(phi) / c
                row[col + 1] += np.sin(phi) / c
            # the same leg length also grows with the target moving away
            phi_t = angle(pos, target)
            row[2 * n_r] += np.cos(phi_t) / c
            row[2 * n_r + 1] += np.sin(phi_t) / c
        rows.append(row)
    for m, n in links.ranging:
        row = np.zeros(2 * n_r + 2)
        pm = scene.position_of(m, slot)
        pn = scene.position_of(n, slot)
        if m.kind is NodeKind.RADAR:
            phi = angle(pn, pm)
            col = 2 * (m.index - 1)
            row[col] = np.cos(phi) / c
            row[col + 1] = np.sin(phi) / c
        if n.kind is NodeKind.RADAR:
            phi = angle(pm, pn)
            col = 2 * (n.index - 1)
            row[col] = np.cos(phi) / c
            row[col + 1] = np.sin(phi) / c
        rows.append(row)
    return np.array(rows)


def jacobian_clocks(scene: NetworkScene, slot: int, links: LinkSet) -> np.ndarray:
    """Clock-offset columns of the delay Jacobian, one per radar.

    Convention: anchors share one reference clock; radar r's offset enters a
    link's delay as +1 when r transmits and -1 when r receives, so a
    monostatic link cancels its own offset.
    """
    if scene.sync_mode is not SyncMode.ASYNCHRONOUS:
        raise ModeError("clock-offset Jacobian only exists in asynchronous mode")
    n_r = scene.n_radars
    rows = []
    for m, n in list(links.sensing) + list(links.ranging):
        row = np.zeros(n_r)
        if m.kind is NodeKind.RADAR:
            row[m.index - 1] += 1.0
        if n.kind is NodeKind.RADAR:
            row[n.index - 1] -= 1.0
        rows.append(row)
    return np.array(rows)


def _full_jacobian(scene: NetworkScene, slot: int, links: LinkSet) -> np.ndarray:
    """Delay Jacobian over one slot's layout block."""
    pos = jacobian_positions(scene, slot, links)
    n_r = scene.n_radars
    if scene.sync_mode is SyncMode.ASYNCHRONOUS:
        clocks = jacobian_clocks(scene, slot, links)
        return np.hstack([pos[:, : 2 * n_r], clocks, pos[:, 2 * n_r :]])
    return pos


# ---------------------------------------------------------------------------
# FIM assembly


@dataclass(frozen=True)
class FimMatrix:
    """Symmetric PSD information matrix over an explicit parameter layout."""

    matrix: np.ndarray
    layout: ParameterLayout

    def __post_init__(self):
        if self.matrix.shape != (len(self.layout), len(self.layout)):
            raise ValidationError(
                f"matrix shape {self.matrix.shape} does not match layout length {len(self.layout)}"
            )


def _power_of(powers, node: NodeId) -> float:
    if hasattr(powers, "power_of"):
        return float(powers.power_of(node))
    try:
        return float(powers[node])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"no power given for active node {node.label()}") from exc


def _link_weights(scene: NetworkScene, slot: int, links: LinkSet, powers, params: ChannelParams) -> np.ndarray:
    """Per-link information weight c^2 * lambda, ordered like the LinkSet."""
    target = scene.position_of(NodeId(NodeKind.TARGET, 1), slot)
    c2 = params.speed_of_light**2
    weights = []
    for m, n in links.sensing:
        p = _power_of(powers, m)
        d_in = distance(scene.position_of(m, slot), target)
        d_out = distance(target, scene.position_of(n, slot))
        weights.append(c2 * rii_sensing(params, p, d_in, d_out))
    for m, n in links.ranging:
        p = _power_of(powers, m)
        d = distance(scene.position_of(m, slot), scene.position_of(n, slot))
        weights.append(c2 * rii_localization(params, p, d))
    return np.array(weights)


def assemble_single_slot_fim(scene: NetworkScene, slot: int, powers, params: ChannelParams) -> FimMatrix:
    """FIM of one slot's unknowns at the given transmit powers."""
    links = enumerate_links(scene, slot)
    jac = _full_jacobian(scene, slot, links)
    w = _link_weights(scene, slot, links, powers, params)
    fim = (jac.T * w) @ jac
    fim = 0.5 * (fim + fim.T)
    layout = ParameterLayout(tuple(slot_layout_entries(scene, slot)))
    return FimMatrix(matrix=fim, layout=layout)


def single_slot_components(scene: NetworkScene, slot: int, params: ChannelParams) -> list[np.ndarray]:
    """Per-node unit-power FIM contributions, ordered like scene.active_nodes().

    The FIM is linear in the power vector: F(P) = sum_j P_j * F_j. Each F_j
    collects the links node j transmits on, evaluated at 1 W.
    """
    links = enumerate_links(scene, slot)
    jac = _full_jacobian(scene, slot, links)
    unit = {node: 1.0 for node in scene.active_nodes()}
    w = _link_weights(scene, slot, links, unit, params)
    transmitters = [m for m, _ in links.sensing] + [m for m, _ in links.ranging]
    comps = []
    for node in scene.active_nodes():
        mask = np.array([tx == node for tx in transmitters])
        wj = np.where(mask, w, 0.0)
        fj = (jac.T * wj) @ jac
        comps.append(0.5 * (fj + fj.T))
    return comps


def temporal_prior(scene: NetworkScene, params: ChannelParams, offdiag_sign: float = 1.0) -> np.ndarray:
    """Inter-slot cooperation prior over the dual-slot layout.

    Radar positions couple through the velocity variance, clock offsets
    through the drift-rate variance. The prior fills both slots' diagonal
    blocks; the cross-slot blocks take the configured sign (printed-form
    positive by default).

    The diagonal weight 1/velocity_variance carries s^2/m^2 where a position
    information block carries 1/m^2; the mismatch is in the source model and
    is reproduced here, not corrected.
    """
    if offdiag_sign not in (1.0, -1.0, 1, -1):
        raise ValidationError(f"offdiag_sign must be +1 or -1, got {offdiag_sign}")
    if scene.n_slots != 2:
        raise ValidationError("temporal prior needs a dual-slot scene")
    layout = build_layout(scene)
    n = len(layout)
    prior = np.zeros((n, n))
    groups = [(RADAR_POSITION_ROLES, 1.0 / params.velocity_variance)]
    if scene.sync_mode is SyncMode.ASYNCHRONOUS:
        groups.append(({ParamRole.CLOCK_OFFSET}, 1.0 / params.drift_rate_variance))
    for roles, weight in groups:
        idx0 = layout.indices(roles=roles, slot=1)
        idx1 = layout.indices(roles=roles, slot=2)
        for i0, i1 in zip(idx0, idx1):
            prior[i0, i0] += weight
            prior[i1, i1] += weight
            prior[i0, i1] += offdiag_sign * weight
            prior[i1, i0] += offdiag_sign * weight
    return prior


def assemble_dual_slot_fim(
    scene: NetworkScene,
    powers_per_slot,
    params: ChannelParams,
    offdiag_sign: float = 1.0,
    include_temporal: bool = True,
) -> FimMatrix:
    """Dual-slot FIM: per-slot blocks on the diagonal plus the temporal prior."""
    if scene.n_slots != 2:
        raise ValidationError(f"dual-slot assembly needs exactly 2 slots, got {scene.n_slots}")
    if len(powers_per_slot) != 2:
        raise ValidationError("one power allocation per slot is required")
    layout = build_layout(scene)
    n = len(layout)
    fim = np.zeros((n, n))
    offset = 0
    for slot in (1, 2):
        block = assemble_single_slot_fim(scene, slot, powers_per_slot[slot - 1], params).matrix
        k = block.shape[0]
        fim[offset : offset + k, offset : offset + k] = block
        offset += k
    if include_temporal:
        fim = fim + temporal_prior(scene, params, offdiag_sign)
    return FimMatrix(matrix=fim, layout=layout)


# ---------------------------------------------------------------------------
# bounds


def efim(fim: FimMatrix, keep: list[int] | np.ndarray) -> FimMatrix:
    """Schur complement onto the kept parameters.

    Marginalizes the discarded parameters: the result is the information
    about the kept group once the rest must be estimated too.
    """
    keep = sorted(set(int(i) for i in keep))
    n = len(fim.layout)
    if not keep:
        raise ValidationError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValidationError(f"keep indices out of range for layout of length {n}")
    drop = [i for i in range(n) if i not in set(keep)]
    sub_layout = ParameterLayout(tuple(fim.layout.entries[i] for i in keep))
    a = fim.matrix
    if not drop:
        return FimMatrix(matrix=a.copy(), layout=sub_layout)
    f_aa = a[np.ix_(keep, keep)]
    f_ab = a[np.ix_(keep, drop)]
    f_bb = a[np.ix_(drop, drop)]
    drop_labels = [fim.layout.entries[i].label() for i in drop]
    x = sym_solve(f_bb, f_ab.T, labels=drop_labels)
    out = f_aa - f_ab @ x
    return FimMatrix(matrix=0.5 * (out + out.T), layout=sub_layout)


def speb(fim: FimMatrix, roles=None, slot=None, node=None, indices=None) -> float:
    """Squared position error bound of a parameter group: tr((F^-1) on the group).

    Select the group either by explicit indices or by role/slot/node filters
    (e.g. target positions of slot 2).
    """
    if indices is None:
        indices = fim.layout.indices(roles=roles, slot=slot, node=node)
    indices = list(indices)
    if not indices:
        raise ValidationError("parameter group is empty")
    labels = fim.layout.labels()
    return trace_of_inverse_block(fim.matrix, indices, labels=labels)


def target_speb(fim: FimMatrix, slot: int) -> float:
    return speb(fim, roles=TARGET_POSITION_ROLES, slot=slot)


def fim_to_text(fim: FimMatrix) -> str:
    """Row-major dump with a header naming the layout entries."""
    lines = ["# " + "\t".join(fim.layout.labels())]
    for row in fim.matrix:
        lines.append("\t".join(format(v, ".17e") for v in row))
    return "\n".join(lines) + "\n"
