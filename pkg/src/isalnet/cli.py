"""Command line interface: scenario ingestion, runs, CSV emission.

Config documents are JSON with a versioned `schema: 1` field. Outputs are
plot-ready CSV (UTF-8, header row, scientific notation); matrices dump as
tab-separated text on request. All runs are deterministic for a given
config: lattices enumerate in a fixed order and every file is written
atomically (temp file, then rename), with partial outputs removed if a run
fails midway.

Exit codes: 0 success, 2 config or validation error, 3 infeasible or
non-identifiable problem (also bad geometry or mode misuse), 4 numeric or
other internal failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, db_to_linear, dbm_per_hz_to_watt_per_hz, default_params
from .errors import (
    ConfigError,
    GeometryError,
    InfeasibleError,
    IsalError,
    ModeError,
    NonIdentifiableError,
    ValidationError,
)
from .fim import FimMatrix, fim_to_text
from .model import NetworkScene, Position2D, SlotState, SyncMode, build_layout
from .rlm_owr import (
    ClockModel,
    drift_variance_estimate,
    estimate_drift,
    simulate_exchange,
)
from .scenarios import builtin_fixtures, classify_regime, fixture_by_name, to_config
from .schemes import INTEGRATED, STEPWISE, AllocationReport, run_scheme

SCHEMA_VERSION = 1
FLOAT_FORMAT = ".12e"


def _fmt(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


@dataclass(frozen=True)
class RunOptions:
    scheme: str = "both"
    grid_step: float | None = None
    prune: bool = False
    temporal_offdiag_sign: float = 1.0


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _number(v, path: str, positive: bool = False) -> float:
    if not _is_number(v):
        raise ConfigError(f"{path} must be a number, got {v!r}")
    v = float(v)
    if not np.isfinite(v):
        raise ConfigError(f"{path} must be finite, got {v}")
    if positive and v <= 0:
        raise ConfigError(f"{path} must be positive, got {v}")
    return v


def _position(v, path: str) -> Position2D:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{path} must be a pair [x, y]")
    return Position2D(_number(v[0], f"{path}[0]"), _number(v[1], f"{path}[1]"))


def _check_keys(doc: dict, allowed, path: str):
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown field {path}.{key}" if path else f"unknown field {key}")


# config key -> (ChannelParams field, converter, must raw value be positive)
_CHANNEL_KEYS = {
    "carrier_frequency_hz": ("carrier_frequency", float, True),
    "bandwidth_hz": ("bandwidth", float, True),
    "antenna_gain_db": ("antenna_gain", db_to_linear, False),
    "noise_psd_dbm_per_hz": ("noise_psd", dbm_per_hz_to_watt_per_hz, False),
    "system_loss_db": ("system_loss", db_to_linear, False),
    "radar_cross_section_m2": ("radar_cross_section", float, True),
    "anchor_power_cap_w": ("anchor_power_cap", float, True),
    "radar_power_cap_w": ("radar_power_cap", float, True),
    "total_energy_j": ("total_energy", float, True),
    "velocity_variance_m2_per_s2": ("velocity_variance", float, True),
    "drift_rate_variance": ("drift_rate_variance", float, True),
}


def _parse_channel(doc: dict) -> ChannelParams:
    _check_keys(doc, _CHANNEL_KEYS, "channel")
    overrides = {}
    for key, raw in doc.items():
        field, convert, positive = _CHANNEL_KEYS[key]
        overrides[field] = convert(_number(raw, f"channel.{key}", positive=positive))
    try:
        return default_params().with_overrides(**overrides)
    except ValidationError as exc:
        raise ConfigError(f"channel: {exc}") from exc


def _parse_nodes(nodes, n_slots: int, mode: SyncMode) -> NetworkScene:
    if not isinstance(nodes, list) or not nodes:
        raise ConfigError("nodes must be a nonempty list")
    anchors, radars, targets = {}, {}, {}
    for i, node in enumerate(nodes):
        path = f"nodes[{i}]"
        if not isinstance(node, dict):
            raise ConfigError(f"{path} must be an object")
        kind = node.get("kind")
        if kind not in ("anchor", "radar", "target"):
            raise ConfigError(f"{path}.kind must be anchor, radar or target, got {kind!r}")
        node_id = node.get("id")
        if isinstance(node_id, bool) or not isinstance(node_id, int) or node_id < 1:
            raise ConfigError(f"{path}.id must be a positive integer, got {node_id!r}")
        if kind == "anchor":
            _check_keys(node, ("kind", "id", "position"), path)
            if "position" not in node:
                raise ConfigError(f"{path}.position is required for anchors")
            bucket, value = anchors, _position(node["position"], f"{path}.position")
        else:
            _check_keys(node, ("kind", "id", "positions"), path)
            raw = node.get("positions")
            if not isinstance(raw, list) or len(raw) != n_slots:
                raise ConfigError(
                    f"{path}.positions must list one [x, y] per slot ({n_slots})"
                )
            value = tuple(
                _position(p, f"{path}.positions[{j}]") for j, p in enumerate(raw)
            )
            bucket = radars if kind == "radar" else targets
        if node_id in bucket:
            raise ConfigError(f"{path}: duplicate {kind} id {node_id}")
        bucket[node_id] = value

    for kind, bucket in (("anchor", anchors), ("radar", radars), ("target", targets)):
        if not bucket:
            raise ConfigError(f"at least one {kind} is required")
        if sorted(bucket) != list(range(1, len(bucket) + 1)):
            raise ConfigError(f"{kind} ids must be contiguous from 1, got {sorted(bucket)}")
    if len(targets) != 1:
        raise ConfigError(f"exactly one target is required, got {len(targets)}")

    slots = []
    for k in range(n_slots):
        slots.append(
            SlotState(
                radars=tuple(radars[i][k] for i in sorted(radars)),
                targets=(targets[1][k],),
            )
        )
    return NetworkScene(
        anchors=tuple(anchors[i] for i in sorted(anchors)),
        slots=tuple(slots),
        sync_mode=mode,
    )


def _parse_solver(doc: dict) -> tuple[float | None, bool, float]:
    _check_keys(doc, ("grid_step", "prune", "temporal_offdiag_sign"), "solver")
    grid_step = None
    if "grid_step" in doc:
        grid_step = _number(doc["grid_step"], "solver.grid_step", positive=True)
    prune = doc.get("prune", False)
    if not isinstance(prune, bool):
        raise ConfigError(f"solver.prune must be a boolean, got {prune!r}")
    sign = 1.0
    if "temporal_offdiag_sign" in doc:
        sign = _number(doc["temporal_offdiag_sign"], "solver.temporal_offdiag_sign")
        if sign not in (1.0, -1.0):
            raise ConfigError(f"solver.temporal_offdiag_sign must be 1 or -1, got {sign}")
    return grid_step, prune, sign


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"schema must be {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    return doc


def parse_config(path: str) -> tuple[NetworkScene, ChannelParams, RunOptions]:
    """Load and validate a scenario config; errors name the failing field."""
    doc = _load_json(path)
    _check_keys(doc, ("schema", "mode", "slots", "nodes", "channel", "solver", "scheme"), "")
    mode_raw = doc.get("mode", "sync")
    try:
        mode = SyncMode(mode_raw)
    except ValueError as exc:
        raise ConfigError(f"mode must be 'sync' or 'async', got {mode_raw!r}") from exc
    n_slots = doc.get("slots", 1)
    if n_slots not in (1, 2):
        raise ConfigError(f"slots must be 1 or 2, got {n_slots!r}")
    if "nodes" not in doc:
        raise ConfigError("nodes section is required")
    scene = _parse_nodes(doc["nodes"], n_slots, mode)
    channel_doc = doc.get("channel", {})
    if not isinstance(channel_doc, dict):
        raise ConfigError("channel must be an object")
    params = _parse_channel(channel_doc)
    solver_doc = doc.get("solver", {})
    if not isinstance(solver_doc, dict):
        raise ConfigError("solver must be an object")
    grid_step, prune, sign = _parse_solver(solver_doc)
    scheme = doc.get("scheme", "both")
    if scheme not in (INTEGRATED, STEPWISE, "both"):
        raise ConfigError(
            f"scheme must be '{INTEGRATED}', '{STEPWISE}' or 'both', got {scheme!r}"
        )
    options = RunOptions(
        scheme=scheme, grid_step=grid_step, prune=prune, temporal_offdiag_sign=sign
    )
    return scene, params, options


def _max_workers_from_env() -> int:
    raw = os.environ.get("ISAL_THREADS", "1")
    try:
        workers = int(raw)
    except ValueError as exc:
        raise ConfigError(f"ISAL_THREADS must be an integer, got {raw!r}") from exc
    if workers < 1:
        raise ConfigError(f"ISAL_THREADS must be at least 1, got {workers}")
    return workers


def _write_atomic(path: str, content: str):
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit_files(files: dict):
    written = []
    try:
        for path, content in files.items():
            _write_atomic(path, content)
            written.append(path)
    except BaseException:
        for path in written:
            try:
                os.unlink(path)
            except OSError:
                pass
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _join(values) -> str:
    return "|".join(_fmt(v) for v in values)


def _trace_rows(report: AllocationReport):
    rows = []
    for i, result in enumerate(report.trace):
        rows.append(
            [
                report.scheme,
                i,
                _join(result.energies),
                _join(result.stage_energies),
                _join(sol.objective for sol in result.stage_solutions),
                _fmt(result.objective),
            ]
        )
    return rows


def _summary_rows(report: AllocationReport):
    best = report.best
    rows = []
    for i, (name, sol) in enumerate(zip(report.stage_names, best.stage_solutions)):
        row = [
            report.scheme,
            report.sync_mode.value,
            report.n_slots,
            report.best_index,
            _fmt(sum(report.target_spebs)),
            _join(report.target_spebs),
            i + 1,
            name,
            _fmt(best.stage_energies[i]),
            _fmt(sol.objective),
        ]
        row.extend(_fmt(p) for p in sol.powers.vector())
        rows.append(row)
    return rows


def run_experiment(
    scene: NetworkScene,
    params: ChannelParams,
    options: RunOptions,
    out_dir: str,
    dump_fim: bool = False,
    max_workers: int | None = None,
) -> dict:
    """Run the selected scheme(s) and emit trace.csv / summary.csv.

    Returns {scheme name: AllocationReport}. Files appear only if the whole
    run succeeds.
    """
    schemes = [options.scheme] if options.scheme != "both" else [INTEGRATED, STEPWISE]
    reports = {}
    for scheme in schemes:
        reports[scheme] = run_scheme(
            scene,
            params,
            scheme,
            grid_step=options.grid_step,
            prune=options.prune,
            max_workers=max_workers,
            temporal_offdiag_sign=options.temporal_offdiag_sign,
        )

    node_labels = [f"anchor{i + 1}" for i in range(scene.n_anchors)] + [
        f"radar{i + 1}" for i in range(scene.n_radars)
    ]
    trace_header = [
        "scheme",
        "index",
        "energies",
        "round_energies",
        "round_objectives",
        "final_objective",
    ]
    summary_header = [
        "scheme",
        "sync_mode",
        "slots",
        "best_index",
        "final_objective",
        "target_spebs",
        "round_index",
        "round_name",
        "round_energy",
        "round_objective",
    ] + [f"power_{label}" for label in node_labels]

    trace_rows = []
    summary_rows = []
    for scheme in schemes:
        trace_rows.extend(_trace_rows(reports[scheme]))
        summary_rows.extend(_summary_rows(reports[scheme]))

    os.makedirs(out_dir, exist_ok=True)
    files = {
        os.path.join(out_dir, "trace.csv"): _csv_text(trace_header, trace_rows),
        os.path.join(out_dir, "summary.csv"): _csv_text(summary_header, summary_rows),
    }
    if dump_fim:
        layout = build_layout(scene)
        sections = []
        for scheme in schemes:
            fim = FimMatrix(reports[scheme].final_matrix, layout)
            sections.append(f"scheme: {scheme}\n{fim_to_text(fim)}")
        files[os.path.join(out_dir, "fim_dump.txt")] = "\n".join(sections)
    _emit_files(files)
    return reports


def _parse_rlm_config(path: str):
    doc = _load_json(path)
    _check_keys(doc, ("schema", "clock", "exchange", "seeds"), "")
    clock_doc = doc.get("clock")
    if not isinstance(clock_doc, dict):
        raise ConfigError("clock section is required")
    _check_keys(clock_doc, ("offset", "drift", "max_drift"), "clock")
    if "offset" not in clock_doc or "drift" not in clock_doc:
        raise ConfigError("clock.offset and clock.drift are required")
    kwargs = {
        "offset": _number(clock_doc["offset"], "clock.offset"),
        "drift": _number(clock_doc["drift"], "clock.drift"),
    }
    if "max_drift" in clock_doc:
        kwargs["max_drift"] = _number(clock_doc["max_drift"], "clock.max_drift", positive=True)
    try:
        clock = ClockModel(**kwargs)
    except ValidationError as exc:
        raise ConfigError(f"clock: {exc}") from exc

    exchange_doc = doc.get("exchange", {})
    if not isinstance(exchange_doc, dict):
        raise ConfigError("exchange must be an object")
    allowed = (
        "first_send",
        "second_send",
        "one_way_delay",
        "stamp_noise_sd",
        "reverse_delay",
        "processing_delay",
    )
    _check_keys(exchange_doc, allowed, "exchange")
    exchange = {
        "first_send": 0.0,
        "second_send": 1.0,
        "one_way_delay": 1e-6,
        "stamp_noise_sd": 0.0,
        "reverse_delay": None,
        "processing_delay": 0.0,
    }
    for key in allowed:
        if key in exchange_doc and exchange_doc[key] is not None:
            exchange[key] = _number(exchange_doc[key], f"exchange.{key}")

    seeds = doc.get("seeds", 1000)
    if isinstance(seeds, bool) or not isinstance(seeds, int) or seeds < 1:
        raise ConfigError(f"seeds must be a positive integer, got {seeds!r}")
    return clock, exchange, seeds


def run_rlm_owr(config_path: str, out_dir: str, seeds_override: int | None = None) -> dict:
    """Seeded exchange simulations; emits drift.csv and drift_summary.csv."""
    clock, exchange, seeds = _parse_rlm_config(config_path)
    if seeds_override is not None:
        if seeds_override < 1:
            raise ConfigError(f"--seeds must be at least 1, got {seeds_override}")
        seeds = seeds_override

    noiseless = simulate_exchange(
        clock,
        exchange["first_send"],
        exchange["second_send"],
        exchange["one_way_delay"],
        stamp_noise_sd=0.0,
        seed=0,
        reverse_delay=exchange["reverse_delay"],
        processing_delay=exchange["processing_delay"],
    )
    predicted = drift_variance_estimate(exchange["stamp_noise_sd"], noiseless)

    rows = []
    drifts = []
    for seed in range(seeds):
        record = simulate_exchange(
            clock,
            exchange["first_send"],
            exchange["second_send"],
            exchange["one_way_delay"],
            stamp_noise_sd=exchange["stamp_noise_sd"],
            seed=seed,
            reverse_delay=exchange["reverse_delay"],
            processing_delay=exchange["processing_delay"],
        )
        est = estimate_drift(record)
        drifts.append(est.drift)
        rows.append([seed, _fmt(est.tau_first), _fmt(est.tau_second), _fmt(est.drift)])

    drifts = np.array(drifts)
    mean = float(drifts.mean())
    variance = float(drifts.var(ddof=1)) if seeds > 1 else 0.0
    summary_rows = [
        [seeds, _fmt(clock.drift), _fmt(mean), _fmt(variance), _fmt(predicted)]
    ]

    os.makedirs(out_dir, exist_ok=True)
    files = {
        os.path.join(out_dir, "drift.csv"): _csv_text(
            ["seed", "tau_first", "tau_second", "drift"], rows
        ),
        os.path.join(out_dir, "drift_summary.csv"): _csv_text(
            ["n_seeds", "true_drift", "drift_mean", "drift_variance", "predicted_variance"],
            summary_rows,
        ),
    }
    _emit_files(files)
    return {"mean": mean, "variance": variance, "predicted": predicted}


def _cmd_run(args) -> int:
    scene, params, options = parse_config(args.scenario)
    if args.scheme is not None:
        options = RunOptions(
            scheme=args.scheme,
            grid_step=options.grid_step,
            prune=options.prune,
            temporal_offdiag_sign=options.temporal_offdiag_sign,
        )
    if args.grid_step is not None:
        if args.grid_step <= 0:
            raise ConfigError(f"--grid-step must be positive, got {args.grid_step}")
        options = RunOptions(
            scheme=options.scheme,
            grid_step=args.grid_step,
            prune=options.prune,
            temporal_offdiag_sign=options.temporal_offdiag_sign,
        )
    reports = run_experiment(
        scene,
        params,
        options,
        args.out,
        dump_fim=args.dump_fim,
        max_workers=_max_workers_from_env(),
    )
    for scheme, report in reports.items():
        best = report.best
        print(
            f"{scheme}: best split {tuple(best.energies)} J, "
            f"objective {sum(report.target_spebs):.6e} m^2"
        )
    print(f"wrote {args.out}/trace.csv and {args.out}/summary.csv")
    return 0


def _cmd_fixtures(args) -> int:
    fixtures = builtin_fixtures()
    if args.name is not None:
        fixtures = (fixture_by_name(args.name),)
    if args.export is None:
        params = default_params()
        for f in fixtures:
            regime = classify_regime(f.scene, params)
            print(
                f"{f.name}: slots={f.scene.n_slots} regime={regime.value} "
                f"({f.note})"
            )
        return 0
    os.makedirs(args.export, exist_ok=True)
    files = {}
    for f in fixtures:
        path = os.path.join(args.export, f"{f.name}.json")
        files[path] = json.dumps(to_config(f), indent=2, sort_keys=True) + "\n"
    _emit_files(files)
    for path in files:
        print(f"wrote {path}")
    return 0


def _cmd_rlm_owr(args) -> int:
    stats = run_rlm_owr(args.config, args.out, seeds_override=args.seeds)
    print(
        f"drift mean {stats['mean']:.6e}, variance {stats['variance']:.6e}, "
        f"predicted {stats['predicted']:.6e}"
    )
    print(f"wrote {args.out}/drift.csv and {args.out}/drift_summary.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isalnet",
        description="Error bounds and power allocation for sensing and localization networks",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    run_p = sub.add_parser("run", help="run allocation scheme(s) on a scenario config")
    run_p.add_argument("--scenario", required=True, help="path to a scenario JSON config")
    run_p.add_argument(
        "--scheme", choices=[INTEGRATED, STEPWISE, "both"], default=None,
        help="override the config's scheme selection",
    )
    run_p.add_argument("--grid-step", type=float, default=None, help="energy lattice step in J")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument(
        "--dump-fim", action="store_true", help="also write the final information matrix"
    )
    run_p.set_defaults(func=_cmd_run)

    fx_p = sub.add_parser("fixtures", help="list or export the built-in fixtures")
    fx_p.add_argument("--export", metavar="DIR", default=None, help="write fixture configs here")
    fx_p.add_argument("--name", default=None, help="restrict to one fixture")
    fx_p.set_defaults(func=_cmd_fixtures)

    owr_p = sub.add_parser("rlm-owr", help="simulate clock-drift estimation exchanges")
    owr_p.add_argument("--config", required=True, help="path to an exchange JSON config")
    owr_p.add_argument("--seeds", type=int, default=None, help="number of seeded runs")
    owr_p.add_argument("--out", required=True, help="output directory")
    owr_p.set_defaults(func=_cmd_rlm_owr)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleError, NonIdentifiableError, GeometryError, ModeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IsalError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # keep the contract: nonzero, classified exit
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
