"""Command-line pipeline and all on-disk formats.

Commands::

    fusenav simulate   --scenario walk.cfg --out DIR [--seed N] [--mode raw|dmp] [--gps on|off]
    fusenav calibrate  --imu imu.csv --out DIR
    fusenav fuse-sonar --sonar sonar.csv --out DIR
    fusenav localize   --imu imu.csv --gps gps.csv --out DIR [--offsets offsets.cfg]
    fusenav evaluate   --est est.csv --truth truth.csv --out DIR
    fusenav run        --scenario walk.cfg --out DIR [...]

CSV schemas (header row mandatory, plain decimal, '.' radix):

    imu.csv      t,ax,ay,az,gx,gy,gz
    gps.csv      t,lat,lon,alt
    sonar.csv    t,channel,range,valid
    truth.csv    t,e,n,u,ve,vn,vu,qw,qx,qy,qz       (est.csv identical)
    fused.csv    t,raw1,raw2,fused,p11,p22
    feedback.csv t,kind,motor_or_priority,value

Scenario files are flat ``key = value`` text with ``#`` comments; list
values use ``;`` between items and ``,`` within (see scenarios/walk110.cfg).
Every command is deterministic given its inputs and seed.  Exit codes:
0 success, 1 usage, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import feedback as fb
from . import geo, metrics, perception, sim, sonar_ekf
from .core import DataError, GpsFix, ImuSample, NumericalError, SonarChannel, SonarPing
from .localizer import (
    CalibrationOffsets,
    LocalizerConfig,
    calibrate,
    run_localizer,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

IMU_HEADER = ["t", "ax", "ay", "az", "gx", "gy", "gz"]
GPS_HEADER = ["t", "lat", "lon", "alt"]
SONAR_HEADER = ["t", "channel", "range", "valid"]
TRUTH_HEADER = ["t", "e", "n", "u", "ve", "vn", "vu", "qw", "qx", "qy", "qz"]
FUSED_HEADER = ["t", "raw1", "raw2", "fused", "p11", "p22"]
FEEDBACK_HEADER = ["t", "kind", "motor_or_priority", "value"]
REPORT_HEADER = [
    "est_label",
    "truth_label",
    "mean_m",
    "peak_m",
    "relative_percent",
    "path_length_m",
    "n_points",
    "vertical_mean_m",
]


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# CSV reading/writing


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class _CsvReader:
    """Header-checked row reader with file:row:column error context."""

    def __init__(self, path, header: list[str]):
        self.path = Path(path)
        self.header = header
        if not self.path.exists():
            raise DataError(f"{self.path}: file not found")
        with open(self.path, newline="") as f:
            self.rows = list(csv.reader(f))
        if not self.rows or self.rows[0] != header:
            raise DataError(
                f"{self.path}:1: expected header {','.join(header)}"
            )

    def __iter__(self):
        for i, row in enumerate(self.rows[1:], start=2):
            if len(row) != len(self.header):
                raise DataError(
                    f"{self.path}:{i}: expected {len(self.header)} columns, got {len(row)}"
                )
            yield i, dict(zip(self.header, row))

    def floats(self, row_no: int, row: dict, col: str) -> float:
        try:
            return float(row[col])
        except ValueError:
            raise DataError(
                f"{self.path}:{row_no}: column '{col}': not a number: {row[col]!r}"
            ) from None


def write_imu_csv(path, samples) -> None:
    _write_csv(
        Path(path),
        IMU_HEADER,
        (
            [_fmt(s.t), *map(_fmt, s.accel), *map(_fmt, s.gyro)]
            for s in samples
        ),
    )


def read_imu_csv(path) -> list[ImuSample]:
    reader = _CsvReader(path, IMU_HEADER)
    out = []
    prev_t = -math.inf
    for i, row in reader:
        vals = [reader.floats(i, row, c) for c in IMU_HEADER]
        if vals[0] < prev_t:
            raise DataError(f"{reader.path}:{i}: column 't': timestamps not sorted")
        prev_t = vals[0]
        out.append(ImuSample(t=vals[0], accel=vals[1:4], gyro=vals[4:7]))
    return out


def write_gps_csv(path, fixes) -> None:
    _write_csv(
        Path(path),
        GPS_HEADER,
        ([_fmt(f.t), _fmt(f.lat), _fmt(f.lon), _fmt(f.alt)] for f in fixes),
    )


def read_gps_csv(path) -> list[GpsFix]:
    reader = _CsvReader(path, GPS_HEADER)
    out = []
    prev_t = -math.inf
    for i, row in reader:
        vals = [reader.floats(i, row, c) for c in GPS_HEADER]
        if vals[0] < prev_t:
            raise DataError(f"{reader.path}:{i}: column 't': timestamps not sorted")
        prev_t = vals[0]
        try:
            out.append(GpsFix(*vals))
        except DataError as exc:
            raise DataError(f"{reader.path}:{i}: {exc}") from None
    return out


def write_sonar_csv(path, pings) -> None:
    _write_csv(
        Path(path),
        SONAR_HEADER,
        (
            [_fmt(p.t), p.channel.value, _fmt(p.range_m), str(int(p.valid))]
            for p in pings
        ),
    )


def read_sonar_csv(path) -> list[SonarPing]:
    reader = _CsvReader(path, SONAR_HEADER)
    channels = {c.value: c for c in SonarChannel}
    out = []
    for i, row in reader:
        if row["channel"] not in channels:
            raise DataError(
                f"{reader.path}:{i}: column 'channel': unknown channel {row['channel']!r}"
            )
        out.append(
            SonarPing(
                t=reader.floats(i, row, "t"),
                channel=channels[row["channel"]],
                range_m=reader.floats(i, row, "range"),
                valid=bool(int(reader.floats(i, row, "valid"))),
            )
        )
    return out


def write_pose_csv(path, t, p, v, q) -> None:
    rows = (
        [_fmt(t[k]), *map(_fmt, p[k]), *map(_fmt, v[k]), *map(_fmt, q[k])]
        for k in range(len(t))
    )
    _write_csv(Path(path), TRUTH_HEADER, rows)


def read_pose_csv(path, label: str) -> metrics.Trajectory:
    reader = _CsvReader(path, TRUTH_HEADER)
    t, xyz = [], []
    prev_t = -math.inf
    for i, row in reader:
        tk = reader.floats(i, row, "t")
        if tk <= prev_t:
            raise DataError(f"{reader.path}:{i}: column 't': timestamps not increasing")
        prev_t = tk
        t.append(tk)
        xyz.append([reader.floats(i, row, c) for c in ("e", "n", "u")])
    if len(t) < 2:
        raise DataError(f"{reader.path}: needs at least 2 data rows")
    return metrics.Trajectory(t=np.array(t), xyz=np.array(xyz), label=label)


def write_offsets_cfg(path, offsets: CalibrationOffsets) -> None:
    with open(path, "w") as f:
        f.write("# IMU calibration offsets (subtract from raw readings)\n")
        f.write("accel_offset = " + ", ".join(map(_fmt, offsets.accel_offset)) + "\n")
        f.write("gyro_offset = " + ", ".join(map(_fmt, offsets.gyro_offset)) + "\n")


def read_offsets_cfg(path) -> CalibrationOffsets:
    entries, _ = _parse_kv_file(path)
    try:
        accel = _parse_triple(entries.pop("accel_offset"))
        gyro = _parse_triple(entries.pop("gyro_offset"))
    except KeyError as exc:
        raise DataError(f"{path}: missing key {exc}") from None
    return CalibrationOffsets(np.array(accel), np.array(gyro))


# ---------------------------------------------------------------------------
# Scenario files


def _parse_kv_file(path) -> tuple[dict[str, str], dict[str, int]]:
    """Flat ``key = value`` file; returns values and their line numbers."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    entries: dict[str, str] = {}
    lines: dict[str, int] = {}
    for i, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise DataError(f"{path}:{i}: expected 'key = value'")
        key, val = stripped.split("=", 1)
        key = key.strip()
        if key in entries:
            raise DataError(f"{path}:{i}: duplicate key '{key}'")
        entries[key] = val.strip()
        lines[key] = i
    return entries, lines


def _parse_tuple_list(value: str, arity: int):
    if not value:
        return ()
    out = []
    for item in value.split(";"):
        parts = [p.strip() for p in item.split(",")]
        if len(parts) != arity:
            raise ValueError(f"expected {arity} comma-separated numbers per item")
        out.append(tuple(float(p) for p in parts))
    return tuple(out)


def _parse_triple(value: str):
    (triple,) = _parse_tuple_list(value, 3)
    return triple


def load_scenario(path) -> sim.Scenario:
    """Parse a scenario config file, reporting errors with line numbers."""
    entries, lines = _parse_kv_file(path)
    fname = str(path)

    def take(key, conv, default):
        if key not in entries:
            return default
        raw = entries.pop(key)
        try:
            return conv(raw)
        except (ValueError, DataError) as exc:
            raise DataError(f"{fname}:{lines[key]}: key '{key}': {exc}") from None

    geometry = sim.SonarGeometry(
        belt_height=take("belt_height", float, 1.0),
        inclined_depression_deg=take("inclined_depression_deg", float, 45.0),
        inclined_azimuth_deg=take("inclined_azimuth_deg", float, 25.0),
        beam_half_angle_deg=take("beam_half_angle_deg", float, 15.0),
        max_range=take("max_range", float, 4.0),
    )
    defaults = sim.NoiseConfig()
    noise = sim.NoiseConfig(
        accel_sigma=take("accel_sigma", float, defaults.accel_sigma),
        gyro_sigma=take("gyro_sigma", float, defaults.gyro_sigma),
        accel_bias=take("accel_bias", _parse_triple, defaults.accel_bias),
        gyro_bias=take("gyro_bias", _parse_triple, defaults.gyro_bias),
        gps_sigma=take("gps_sigma", float, defaults.gps_sigma),
        sonar_sigma=take("sonar_sigma", float, defaults.sonar_sigma),
    )
    route = take("route", lambda v: _parse_tuple_list(v, 2), None)
    if route is None:
        raise DataError(f"{fname}: missing required key 'route'")
    try:
        scenario = sim.Scenario(
            route=route,
            speed=take("speed", float, 1.52),
            imu_rate=take("imu_rate", float, 100.0),
            gps_rate=take("gps_rate", float, 1.0),
            noise=noise,
            obstacles=tuple(
                sim.Obstacle(*o)
                for o in take("obstacles", lambda v: _parse_tuple_list(v, 3), ())
            ),
            dropoffs=tuple(
                sim.DropoffZone(*z)
                for z in take("dropoffs", lambda v: _parse_tuple_list(v, 3), ())
            ),
            gps_dropouts=take("gps_dropouts", lambda v: _parse_tuple_list(v, 2), ()),
            seed=take("seed", int, 0),
            anchor=take("anchor", _parse_triple, (37.0, -122.0, 30.0)),
            geometry=geometry,
            front_sensors=take("front_sensors", int, 2),
        )
    except sim.ScenarioError as exc:
        raise DataError(f"{fname}: {exc}") from None
    if entries:
        key = next(iter(entries))
        raise DataError(f"{fname}:{lines[key]}: unknown key '{key}'")
    return scenario


# ---------------------------------------------------------------------------
# Pipeline helpers


def _apply_cli_overrides(scenario: sim.Scenario, args) -> sim.Scenario:
    if getattr(args, "seed", None) is not None:
        scenario = replace(scenario, seed=args.seed)
    if getattr(args, "mode", "raw") == "dmp":
        scenario = replace(scenario, noise=scenario.noise.dmp_like())
    return scenario


def _localizer_config(noise: sim.NoiseConfig) -> LocalizerConfig:
    # Floors keep the gate and covariance well-conditioned on noiseless runs.
    return LocalizerConfig(
        accel_noise=max(noise.accel_sigma, 1e-4),
        gyro_noise=max(noise.gyro_sigma, 1e-5),
        gps_pos_std=max(noise.gps_sigma, 0.01),
    )


def _simulate_streams(scenario: sim.Scenario, gps_on: bool):
    truth = sim.gen_walk(scenario)
    imu = sim.synth_imu(truth, scenario.noise, scenario.seed)
    fixes = sim.synth_gps(
        truth,
        scenario.noise,
        scenario.seed,
        scenario.gps_rate,
        scenario.anchor_fix(),
        scenario.gps_dropouts,
    )
    if not gps_on:
        fixes = fixes[:1]  # keep only the anchor fix
    pings = sim.synth_sonar(truth, scenario)
    return truth, imu, fixes, pings


def _front_pairs(pings) -> list[tuple[float, list[SonarPing]]]:
    by_tick: dict[float, list[SonarPing]] = {}
    order: list[float] = []
    for p in pings:
        if p.channel is SonarChannel.FRONT:
            if p.t not in by_tick:
                by_tick[p.t] = []
                order.append(p.t)
            by_tick[p.t].append(p)
    pairs = []
    for t in order:
        group = by_tick[t]
        if len(group) != 2:
            raise DataError(
                f"unsupported sonar layout: {len(group)} front ping(s) at t={t}; "
                "fusion needs exactly two front sensors"
            )
        pairs.append((t, group))
    return pairs


def _fuse_front(pings, cfg: sonar_ekf.SonarFusionConfig | None = None):
    """Run the two-sensor EKF over the front channel of a ping stream.

    Yields ``(t, pair, state)`` with state None before initialization.
    """
    pairs = _front_pairs(pings)
    stream = (
        (np.array([a.range_m, b.range_m]), (a.valid, b.valid)) for t, (a, b) in pairs
    )
    for (t, pair), state in zip(pairs, sonar_ekf.run_fusion(stream, cfg)):
        yield t, pair, state


def _detection_ticks(pings, fused_by_t: dict):
    """Assemble per-tick channel->range maps for the detector.

    The front channel takes the fused estimate at ticks with at least one
    echo; other channels pass their single (post-fusion trivial) reading.
    """
    ticks: dict[float, dict] = {}
    order: list[float] = []
    front_valid: dict[float, bool] = {}
    for p in pings:
        if p.t not in ticks:
            ticks[p.t] = {}
            order.append(p.t)
        if p.channel is SonarChannel.FRONT:
            front_valid[p.t] = front_valid.get(p.t, False) or p.valid
        else:
            ticks[p.t][p.channel] = p.range_m if p.valid else math.inf
    for t in order:
        fused = fused_by_t.get(t)
        if fused is not None and front_valid.get(t, False):
            ticks[t][SonarChannel.FRONT] = fused
        else:
            ticks[t][SonarChannel.FRONT] = math.inf
    return [(t, ticks[t]) for t in order]


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(args) -> int:
    scenario = _apply_cli_overrides(load_scenario(args.scenario), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth, imu, fixes, pings = _simulate_streams(scenario, args.gps == "on")
    write_pose_csv(out / "truth.csv", truth.t, truth.p, truth.v, truth.q)
    write_imu_csv(out / "imu.csv", imu)
    write_gps_csv(out / "gps.csv", fixes)
    write_sonar_csv(out / "sonar.csv", pings)
    print(
        f"simulated {truth.path_length:.2f} m / {truth.duration:.2f} s "
        f"({len(imu)} IMU, {len(fixes)} GPS, {len(pings)} sonar) -> {out}"
    )
    return EXIT_OK


def _file_batch_source(samples: list[ImuSample]):
    pos = 0

    def source(n: int):
        nonlocal pos
        if pos + n > len(samples):
            raise DataError(
                f"calibration needs {n} more readings but only "
                f"{len(samples) - pos} remain"
            )
        chunk = samples[pos : pos + n]
        pos += n
        return (
            np.array([s.accel for s in chunk]),
            np.array([s.gyro for s in chunk]),
        )

    return source


def cmd_calibrate(args) -> int:
    samples = read_imu_csv(args.imu)
    offsets = calibrate(
        _file_batch_source(samples),
        batch=args.batch,
        tol=args.tol,
        max_iter=args.max_iter,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_offsets_cfg(out / "offsets.cfg", offsets)
    print("accel_offset =", ", ".join(map(_fmt, offsets.accel_offset)))
    print("gyro_offset =", ", ".join(map(_fmt, offsets.gyro_offset)))
    return EXIT_OK


def cmd_fuse_sonar(args) -> int:
    pings = read_sonar_csv(args.sonar)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for t, (a, b), state in _fuse_front(pings):
        if state is None:
            continue
        rows.append(
            [
                _fmt(t),
                _fmt(a.range_m),
                _fmt(b.range_m),
                _fmt(sonar_ekf.fused_distance(state)),
                _fmt(state.p[0, 0]),
                _fmt(state.p[1, 1]),
            ]
        )
    _write_csv(out / "fused.csv", FUSED_HEADER, rows)
    print(f"fused {len(rows)} front-channel ticks -> {out / 'fused.csv'}")
    return EXIT_OK


def _rebased_pose(run, frame: GpsFix | None):
    """Run output (p, v) re-anchored into ``frame`` (None: run's own frame)."""
    if frame is None:
        return run.p, run.v
    r, d = geo.enu_frame_transform(run.ref, frame)
    return run.p @ r.T + d, run.v @ r.T


def cmd_localize(args) -> int:
    imu = read_imu_csv(args.imu)
    fixes = read_gps_csv(args.gps)
    offsets = read_offsets_cfg(args.offsets) if args.offsets else None
    cfg = LocalizerConfig(
        accel_noise=args.accel_noise,
        gyro_noise=args.gyro_noise,
        gps_pos_std=args.gps_std,
    )
    run = run_localizer(imu, fixes, cfg, offsets)
    frame = None
    if args.ref is not None:
        try:
            frame = GpsFix(0.0, *_parse_triple(args.ref))
        except ValueError as exc:
            raise DataError(f"--ref: {exc}") from None
    p, v = _rebased_pose(run, frame)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pose_csv(out / "est.csv", run.t, p, v, run.q)
    print(
        f"localized {len(run.t)} steps ({run.accepted_fixes} fixes applied, "
        f"{run.rejected_fixes} rejected) -> {out / 'est.csv'}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    est = read_pose_csv(args.est, Path(args.est).stem)
    truth = read_pose_csv(args.truth, Path(args.truth).stem)
    report = metrics.evaluate(est, truth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_report_csv(out / "report.csv", [report])
    print(metrics.format_table([report]))
    return EXIT_OK


def _write_report_csv(path, reports) -> None:
    _write_csv(
        Path(path),
        REPORT_HEADER,
        (
            [
                r.est_label,
                r.truth_label,
                _fmt(r.mean),
                _fmt(r.peak),
                _fmt(r.relative_percent),
                _fmt(r.path_length),
                str(r.n_points),
                _fmt(r.vertical_mean),
            ]
            for r in reports
        ),
    )


def cmd_run(args) -> int:
    scenario = _apply_cli_overrides(load_scenario(args.scenario), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # simulate
    truth, imu, fixes, pings = _simulate_streams(scenario, args.gps == "on")
    write_pose_csv(out / "truth.csv", truth.t, truth.p, truth.v, truth.q)
    write_imu_csv(out / "imu.csv", imu)
    write_gps_csv(out / "gps.csv", fixes)
    write_sonar_csv(out / "sonar.csv", pings)

    # calibrate on a stationary bench stream with the scenario's sensors
    offsets = calibrate(
        sim.stationary_imu_source(scenario.noise, scenario.seed)
    )
    write_offsets_cfg(out / "offsets.cfg", offsets)

    # fuse the redundant front sonar pair
    fused_rows = []
    fused_by_t: dict[float, float] = {}
    for t, (a, b), state in _fuse_front(pings):
        if state is None:
            continue
        fused_by_t[t] = sonar_ekf.fused_distance(state)
        fused_rows.append(
            [
                _fmt(t),
                _fmt(a.range_m),
                _fmt(b.range_m),
                _fmt(fused_by_t[t]),
                _fmt(state.p[0, 0]),
                _fmt(state.p[1, 1]),
            ]
        )
    _write_csv(out / "fused.csv", FUSED_HEADER, fused_rows)

    # localize; est.csv shares truth.csv's frame (the scenario anchor)
    run = run_localizer(imu, fixes, _localizer_config(scenario.noise), offsets)
    est_p, est_v = _rebased_pose(run, scenario.anchor_fix())
    write_pose_csv(out / "est.csv", run.t, est_p, est_v, run.q)

    # detect + feedback
    detector = perception.ObstacleDetector(
        perception.DetectionConfig(
            expected_ground_range=scenario.geometry.expected_ground_range,
            max_range=scenario.geometry.max_range,
        )
    )
    gate = perception.RecognitionGate(perception.MockRecognizer(seed=scenario.seed))
    scheduler = fb.AudioScheduler()
    feedback_rows = []

    def offer_results(results):
        for res in results:
            if res.failed or not res.labels:
                continue
            name, conf = res.labels[0]
            scheduler.offer(
                fb.AudioMessage(
                    priority=fb.PRIORITY_RECOGNITION,
                    text=f"label {name} {conf}",
                    t=res.completed_t,
                )
            )

    for t, ranges in _detection_ticks(pings, fused_by_t):
        offer_results(gate.poll(t))
        for event in detector.process(t, ranges):
            cmd = fb.route_event(event)
            feedback_rows.append(
                [_fmt(event.t), "tactile", str(cmd.motor), _fmt(cmd.intensity)]
            )
            scheduler.offer(
                fb.AudioMessage(
                    priority=fb.priority_for(event),
                    text=f"{event.kind.value} {event.channel.value}",
                    t=event.t,
                )
            )
            if event.kind is perception.DetectionKind.OBSTACLE:
                offer_results(gate.submit(event))
        msg = scheduler.poll(t)
        if msg is not None:
            feedback_rows.append([_fmt(t), "audio", str(msg.priority), msg.text])
    offer_results(gate.flush())
    _write_csv(out / "feedback.csv", FEEDBACK_HEADER, feedback_rows)

    # evaluate
    report = metrics.evaluate(
        run.trajectory("est", frame=scenario.anchor_fix()),
        sim.truth_trajectory(truth, "truth"),
    )
    _write_report_csv(out / "report.csv", [report])
    print(metrics.format_table([report]))
    print(f"pipeline outputs in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2 (2 means data error here)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p, scenario: bool) -> None:
    if scenario:
        p.add_argument("--scenario", required=True, help="scenario config file")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument("--mode", choices=["raw", "dmp"], default="raw")
        p.add_argument("--gps", choices=["on", "off"], default="on")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=["csv"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fusenav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate truth + sensor streams")
    _add_common(p, scenario=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="estimate IMU offsets from a stationary log")
    p.add_argument("--imu", required=True)
    p.add_argument("--batch", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=20)
    _add_common(p, scenario=False)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fuse-sonar", help="fuse the two front sonar sensors")
    p.add_argument("--sonar", required=True)
    _add_common(p, scenario=False)
    p.set_defaults(func=cmd_fuse_sonar)

    p = sub.add_parser("localize", help="run the GPS/IMU filter over CSV streams")
    p.add_argument("--imu", required=True)
    p.add_argument("--gps", required=True)
    p.add_argument("--offsets", default=None, help="offsets.cfg from calibrate")
    p.add_argument(
        "--ref",
        default=None,
        help="'lat, lon, alt' ENU frame for est.csv (default: first GPS fix)",
    )
    p.add_argument("--accel-noise", type=float, default=LocalizerConfig.accel_noise)
    p.add_argument("--gyro-noise", type=float, default=LocalizerConfig.gyro_noise)
    p.add_argument("--gps-std", type=float, default=LocalizerConfig.gps_pos_std)
    _add_common(p, scenario=False)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", help="compare an estimate against ground truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    _add_common(p, scenario=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline: simulate through evaluate")
    _add_common(p, scenario=True)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"fusenav: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"fusenav: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
