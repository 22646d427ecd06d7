"""Nodes, scenes and parameter layouts.

All geometry is two-dimensional. A scene holds anchor positions, which are
fixed, plus one or two slots of radar/target positions. Anchors know where
they are; radar positions, per-radar clock offsets (asynchronous mode) and
the target position are the unknowns, and the parameter layout fixes the
order in which they appear in Jacobians and information matrices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import GeometryError, ValidationError


class NodeKind(enum.Enum):
    ANCHOR = "anchor"
    RADAR = "radar"
    TARGET = "target"


class SyncMode(enum.Enum):
    SYNCHRONOUS = "sync"
    ASYNCHRONOUS = "async"


class ParamRole(enum.Enum):
    RADAR_X = "radar-x"
    RADAR_Y = "radar-y"
    CLOCK_OFFSET = "clock-offset"
    TARGET_X = "target-x"
    TARGET_Y = "target-y"


POSITION_ROLES = frozenset(
    {ParamRole.RADAR_X, ParamRole.RADAR_Y, ParamRole.TARGET_X, ParamRole.TARGET_Y}
)
RADAR_POSITION_ROLES = frozenset({ParamRole.RADAR_X, ParamRole.RADAR_Y})
TARGET_POSITION_ROLES = frozenset({ParamRole.TARGET_X, ParamRole.TARGET_Y})


@dataclass(frozen=True)
class NodeId:
    """Kind plus 1-based ordinal within that kind."""

    kind: NodeKind
    index: int

    def __post_init__(self):
        if not isinstance(self.index, int) or self.index < 1:
            raise ValidationError(f"node index must be a positive integer, got {self.index!r}")

    def label(self) -> str:
        return f"{self.kind.value}{self.index}"


@dataclass(frozen=True)
class Position2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError(f"position coordinates must be finite, got ({self.x}, {self.y})")


def distance(a: Position2D, b: Position2D) -> float:
    """Euclidean distance in meters. Total; zero for coincident points."""
    return math.hypot(b.x - a.x, b.y - a.y)


def angle(a: Position2D, b: Position2D) -> float:
    """Direction of b as seen from a, in (-pi, pi].

    Quadrant-aware on purpose: the cos/sin entries in the Jacobians carry
    sign information that a bare arctangent of the slope would lose.
    """
    if a.x == b.x and a.y == b.y:
        raise GeometryError(f"angle undefined for coincident points ({a.x}, {a.y})")
    return math.atan2(b.y - a.y, b.x - a.x)


@dataclass(frozen=True)
class SlotState:
    """Radar and target positions for one time slot."""

    radars: tuple[Position2D, ...]
    targets: tuple[Position2D, ...]

    def __post_init__(self):
        object.__setattr__(self, "radars", tuple(self.radars))
        object.__setattr__(self, "targets", tuple(self.targets))
        if not self.radars:
            raise ValidationError("slot needs at least one radar")
        if len(self.targets) != 1:
            raise ValidationError(f"exactly one target per slot is supported, got {len(self.targets)}")


@dataclass(frozen=True)
class NetworkScene:
    """Anchors (fixed across slots), per-slot radar/target states, sync mode."""

    anchors: tuple[Position2D, ...]
    slots: tuple[SlotState, ...]
    sync_mode: SyncMode

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(self.anchors))
        object.__setattr__(self, "slots", tuple(self.slots))
        if not self.anchors:
            raise ValidationError("scene needs at least one anchor")
        if len(self.slots) not in (1, 2):
            raise ValidationError(f"scene must have 1 or 2 slots, got {len(self.slots)}")
        n_r = len(self.slots[0].radars)
        n_t = len(self.slots[0].targets)
        for s in self.slots[1:]:
            if len(s.radars) != n_r or len(s.targets) != n_t:
                raise ValidationError("all slots must have identical radar and target counts")
        for si, slot in enumerate(self.slots):
            pts = list(self.anchors) + list(slot.radars) + list(slot.targets)
            for i in range(len(pts)):
                for j in range(i + 1, len(pts)):
                    if pts[i].x == pts[j].x and pts[i].y == pts[j].y:
                        raise ValidationError(
                            f"slot {si}: two nodes share position ({pts[i].x}, {pts[i].y})"
                        )

    @property
    def n_anchors(self) -> int:
        return len(self.anchors)

    @property
    def n_radars(self) -> int:
        return len(self.slots[0].radars)

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    def active_nodes(self) -> tuple[NodeId, ...]:
        """Active (transmitting) nodes, radars first then anchors.

        This is the numbering the link enumeration uses: radars take
        ordinals 1..N_r and anchors follow as N_r+1..N_r+N_a.
        """
        radars = tuple(NodeId(NodeKind.RADAR, i + 1) for i in range(self.n_radars))
        anchors = tuple(NodeId(NodeKind.ANCHOR, i + 1) for i in range(self.n_anchors))
        return radars + anchors

    def position_of(self, node: NodeId, slot: int) -> Position2D:
        """Node position in a slot; slots are numbered from 1."""
        if not 1 <= slot <= self.n_slots:
            raise ValidationError(f"slot must be in 1..{self.n_slots}, got {slot}")
        if node.kind is NodeKind.ANCHOR:
            return self.anchors[node.index - 1]
        if node.kind is NodeKind.RADAR:
            return self.slots[slot - 1].radars[node.index - 1]
        return self.slots[slot - 1].targets[node.index - 1]


@dataclass(frozen=True)
class ParamEntry:
    role: ParamRole
    node: NodeId
    slot: int

    def label(self) -> str:
        suffix = {
            ParamRole.RADAR_X: "x",
            ParamRole.RADAR_Y: "y",
            ParamRole.CLOCK_OFFSET: "clk",
            ParamRole.TARGET_X: "x",
            ParamRole.TARGET_Y: "y",
        }[self.role]
        return f"s{self.slot}.{self.node.label()}.{suffix}"


@dataclass(frozen=True)
class ParameterLayout:
    """Ordered unknowns: per slot, radar positions, clock offsets (async), target."""

    entries: tuple[ParamEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def labels(self) -> list[str]:
        return [e.label() for e in self.entries]

    def indices(self, roles=None, slot=None, node=None) -> list[int]:
        """Positions of entries matching every given filter."""
        out = []
        for i, e in enumerate(self.entries):
            if roles is not None and e.role not in roles:
                continue
            if slot is not None and e.slot != slot:
                continue
            if node is not None and e.node != node:
                continue
            out.append(i)
        return out


def slot_layout_entries(scene: NetworkScene, slot: int) -> list[ParamEntry]:
    """Layout block for one slot: radar x/y pairs, clock offsets (async), target x/y."""
    entries = []
    for r in range(scene.n_radars):
        node = NodeId(NodeKind.RADAR, r + 1)
        entries.append(ParamEntry(ParamRole.RADAR_X, node, slot))
        entries.append(ParamEntry(ParamRole.RADAR_Y, node, slot))
    if scene.sync_mode is SyncMode.ASYNCHRONOUS:
        for r in range(scene.n_radars):
            entries.append(ParamEntry(ParamRole.CLOCK_OFFSET, NodeId(NodeKind.RADAR, r + 1), slot))
    target = NodeId(NodeKind.TARGET, 1)
    entries.append(ParamEntry(ParamRole.TARGET_X, target, slot))
    entries.append(ParamEntry(ParamRole.TARGET_Y, target, slot))
    return entries


def build_layout(scene: NetworkScene) -> ParameterLayout:
    """Deterministic parameter layout; slot blocks are concatenated in order."""
    entries = []
    for slot in range(1, scene.n_slots + 1):
        entries.extend(slot_layout_entries(scene, slot))
    return ParameterLayout(tuple(entries))
