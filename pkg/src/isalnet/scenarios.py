"""Built-in network fixtures and sensing-resource regime classification.

Fixtures live in a 200 m by 200 m field with 2 anchors, 2 radars and 1
target per slot. Compact layouts put the target within a few meters of
the active nodes, so echo links carry information on the same order as
the direct ranging links (sensing-resource abundant). Spread layouts
stretch the echo path to the field scale, where the two-leg path loss
buries the echo links (sensing-resource deficient). Dual-slot fixtures
pair matched or mismatched regimes across the two slots.

The regime is decided by the ratio of echo to ranging information at unit
power, which is a pure geometry quantity: for an echo with legs u and v
against a ranging link of length d it equals (sigma / 4 pi) d^2 / (u^2
v^2), independent of every other channel parameter.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .channel import ChannelParams, rii_localization, rii_sensing
from .fim import enumerate_links
from .model import NetworkScene, Position2D, SlotState, SyncMode, distance

FIELD_SIZE = 200.0

# classification thresholds on max echo RII / max ranging RII
ABUNDANT_RATIO = 1e-3
DEFICIENT_RATIO = 1e-4

# stricter bounds the built-in fixtures are constructed to respect,
# on min echo RII / max ranging RII
FIXTURE_ABUNDANT_RATIO = 1e-2
FIXTURE_DEFICIENT_RATIO = 1e-4


class Regime(enum.Enum):
    SENSING_ABUNDANT = "sensing-abundant"
    SENSING_DEFICIENT = "sensing-deficient"
    MIXED = "mixed"


@dataclass(frozen=True)
class ScenarioFixture:
    name: str
    scene: NetworkScene
    regime: Regime
    note: str


def _pos(xy) -> Position2D:
    return Position2D(float(xy[0]), float(xy[1]))


def _single(anchors, radars, target, mode=SyncMode.SYNCHRONOUS) -> NetworkScene:
    return NetworkScene(
        anchors=tuple(_pos(a) for a in anchors),
        slots=(SlotState(radars=tuple(_pos(r) for r in radars), targets=(_pos(target),)),),
        sync_mode=mode,
    )


def _dual(anchors, slot1, slot2, mode=SyncMode.SYNCHRONOUS) -> NetworkScene:
    return NetworkScene(
        anchors=tuple(_pos(a) for a in anchors),
        slots=(
            SlotState(radars=tuple(_pos(r) for r in slot1[0]), targets=(_pos(slot1[1]),)),
            SlotState(radars=tuple(_pos(r) for r in slot2[0]), targets=(_pos(slot2[1]),)),
        ),
        sync_mode=mode,
    )


# compact cluster at field center: 7 m sensing legs vs ~10-14 m ranging links
_COMPACT_A = dict(
    anchors=[(100.0, 93.0), (100.0, 107.0)],
    radars=[(93.0, 100.0), (107.0, 100.0)],
    target=(100.0, 100.0),
)
# compact cluster off-center, slightly tighter
_COMPACT_B = dict(
    anchors=[(60.0, 134.0), (60.0, 146.0)],
    radars=[(54.0, 140.0), (66.0, 140.0)],
    target=(60.0, 140.0),
)
# infrastructure in one corner, target in the opposite one: ~200 m echo legs
_SPREAD_CORNER = dict(
    anchors=[(10.0, 10.0), (60.0, 10.0)],
    radars=[(10.0, 60.0), (50.0, 50.0)],
    target=(190.0, 190.0),
)
# nodes at the corners, target in the middle: ~127 m echo legs everywhere
_SPREAD_UNIFORM = dict(
    anchors=[(10.0, 10.0), (190.0, 10.0)],
    radars=[(10.0, 190.0), (190.0, 190.0)],
    target=(100.0, 100.0),
)
# second slot of the mismatched dual fixtures: radars pulled to the far
# edge, target near the near edge, anchors shared with the compact layout
_SHIFT_SLOT2 = ([(20.0, 180.0), (180.0, 180.0)], (100.0, 20.0))


def builtin_fixtures() -> tuple[ScenarioFixture, ...]:
    """Version-pinned fixtures; coordinates are constants of this package."""
    compact_slot = (_COMPACT_A["radars"], _COMPACT_A["target"])
    spread_slot = (_SPREAD_UNIFORM["radars"], _SPREAD_UNIFORM["target"])
    return (
        ScenarioFixture(
            name="compact-a",
            scene=_single(**_COMPACT_A),
            regime=Regime.SENSING_ABUNDANT,
            note="tight cross of actives around a central target",
        ),
        ScenarioFixture(
            name="compact-b",
            scene=_single(**_COMPACT_B),
            regime=Regime.SENSING_ABUNDANT,
            note="tight cluster away from the field center",
        ),
        ScenarioFixture(
            name="spread-corner",
            scene=_single(**_SPREAD_CORNER),
            regime=Regime.SENSING_DEFICIENT,
            note="infrastructure corner, target in the opposite corner",
        ),
        ScenarioFixture(
            name="spread-uniform",
            scene=_single(**_SPREAD_UNIFORM),
            regime=Regime.SENSING_DEFICIENT,
            note="corner nodes, central target, all echo legs long",
        ),
        ScenarioFixture(
            name="dual-compact",
            scene=_dual(_COMPACT_A["anchors"], compact_slot, compact_slot),
            regime=Regime.SENSING_ABUNDANT,
            note="same compact layout in both slots",
        ),
        ScenarioFixture(
            name="dual-shift",
            scene=_dual(_COMPACT_A["anchors"], compact_slot, _SHIFT_SLOT2),
            regime=Regime.MIXED,
            note="compact first slot, far radars and target in the second",
        ),
        ScenarioFixture(
            name="dual-shift-reverse",
            scene=_dual(_COMPACT_A["anchors"], _SHIFT_SLOT2, compact_slot),
            regime=Regime.MIXED,
            note="far first slot, compact second",
        ),
        ScenarioFixture(
            name="dual-spread",
            scene=_dual(_SPREAD_UNIFORM["anchors"], spread_slot, spread_slot),
            regime=Regime.SENSING_DEFICIENT,
            note="same spread layout in both slots",
        ),
    )


def fixture_by_name(name: str) -> ScenarioFixture:
    for fixture in builtin_fixtures():
        if fixture.name == name:
            return fixture
    known = ", ".join(f.name for f in builtin_fixtures())
    raise KeyError(f"unknown fixture {name!r}; known fixtures: {known}")


def with_sync_mode(scene: NetworkScene, mode: SyncMode) -> NetworkScene:
    return replace(scene, sync_mode=mode)


def _slot_rii_extremes(scene: NetworkScene, slot: int, params: ChannelParams):
    """(min echo, max echo, max ranging) RII at unit power for one slot."""
    links = enumerate_links(scene, slot)
    target = scene.slots[slot - 1].targets[0]
    echo = []
    for tx, rx in links.sensing:
        d_to = distance(scene.position_of(tx, slot), target)
        d_back = distance(target, scene.position_of(rx, slot))
        echo.append(rii_sensing(params, 1.0, d_to, d_back))
    ranging = []
    for tx, rx in links.ranging:
        d = distance(scene.position_of(tx, slot), scene.position_of(rx, slot))
        ranging.append(rii_localization(params, 1.0, d))
    return min(echo), max(echo), max(ranging)


def _slot_regime(scene: NetworkScene, slot: int, params: ChannelParams) -> Regime:
    _, max_echo, max_ranging = _slot_rii_extremes(scene, slot, params)
    ratio = max_echo / max_ranging
    if ratio >= ABUNDANT_RATIO:
        return Regime.SENSING_ABUNDANT
    if ratio <= DEFICIENT_RATIO:
        return Regime.SENSING_DEFICIENT
    return Regime.MIXED


def classify_regime(scene: NetworkScene, params: ChannelParams) -> Regime:
    """Regime from the echo-to-ranging information ratio, per slot.

    A two-slot scene whose slots disagree is mixed.
    """
    tags = {_slot_regime(scene, k, params) for k in range(1, scene.n_slots + 1)}
    if len(tags) == 1:
        return tags.pop()
    return Regime.MIXED


def fixture_ratio(fixture: ScenarioFixture, params: ChannelParams, slot: int = 1) -> float:
    """min echo RII / max ranging RII, the construction bound for fixtures."""
    min_echo, _, max_ranging = _slot_rii_extremes(fixture.scene, slot, params)
    return min_echo / max_ranging


def to_config(fixture: ScenarioFixture, scheme: str = "both") -> dict:
    """Fixture as a scenario config document (see the cli module)."""
    scene = fixture.scene
    nodes = []
    for i, anchor in enumerate(scene.anchors, start=1):
        nodes.append({"kind": "anchor", "id": i, "position": [anchor.x, anchor.y]})
    for i in range(scene.n_radars):
        nodes.append(
            {
                "kind": "radar",
                "id": i + 1,
                "positions": [
                    [slot.radars[i].x, slot.radars[i].y] for slot in scene.slots
                ],
            }
        )
    nodes.append(
        {
            "kind": "target",
            "id": 1,
            "positions": [[slot.targets[0].x, slot.targets[0].y] for slot in scene.slots],
        }
    )
    return {
        "schema": 1,
        "mode": scene.sync_mode.value,
        "slots": scene.n_slots,
        "nodes": nodes,
        "channel": {},
        "solver": {},
        "scheme": scheme,
    }
