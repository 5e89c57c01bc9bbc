"""Deterministic scenario simulator: ground-truth walks plus synthetic
IMU, GPS, and sonar streams.

A scenario is a waypoint route walked at constant speed.  Corners are
rounded with 1 m blends whose curvature ramps as a raised cosine, so the
path is C2 and the sampled positions stay finite-difference-consistent
with the sampled velocities (circular fillets would leave acceleration
jumps at the joints that a 100 Hz central difference can see).  Blend
entry/exit points are solved so the walk rejoins the original segment
lines exactly: closed routes return to their start.

Sensor models: IMU = exact body-frame specific force / angular rate plus
constant bias plus white Gaussian noise; GPS = truth sampled at the GPS
rate with horizontal Gaussian noise, converted to WGS84 about the
scenario anchor; sonar = cone ray-cast to cylinder obstacles (and, for
the inclined channels, the ground, lengthened over drop-off zones) plus
range noise.  All draws come from per-stream generators seeded from the
scenario seed: identical scenario + seed gives identical streams.  The
"dmp_like" noise preset models the cleaner pre-fused data path as the
same pipeline with 5x lower noise and no residual bias.

No gait model, no GPS multipath, no moving obstacles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import geo
from .core import (
    GRAVITY,
    DataError,
    GpsFix,
    ImuSample,
    SonarChannel,
    SonarPing,
    level_heading_quat,
)

CORNER_BLEND_LEN = 1.0  # m of arclength over which heading blends at corners
_BLEND_TABLE_STEPS = 2048
_MAX_CORNER_DEG = 170.0

# Sub-stream tags so the synthesizers draw from independent generators.
_STREAM_IMU = 101
_STREAM_GPS = 102
_STREAM_SONAR = 103
_STREAM_STATIC = 104


class ScenarioError(DataError):
    """Invalid scenario definition."""


@dataclass(frozen=True)
class NoiseConfig:
    accel_sigma: float = 0.25  # m/s^2 white noise per sample
    gyro_sigma: float = 0.025  # rad/s
    accel_bias: tuple = (0.05, -0.03, 0.02)  # m/s^2 constant
    gyro_bias: tuple = (0.002, -0.001, 0.0015)  # rad/s constant
    gps_sigma: float = 3.0  # m horizontal
    sonar_sigma: float = 0.003  # m

    def dmp_like(self) -> "NoiseConfig":
        """Pre-fused low-noise preset: 5x lower IMU noise, no residual bias."""
        return replace(
            self,
            accel_sigma=self.accel_sigma / 5.0,
            gyro_sigma=self.gyro_sigma / 5.0,
            accel_bias=(0.0, 0.0, 0.0),
            gyro_bias=(0.0, 0.0, 0.0),
        )

    @staticmethod
    def quiet() -> "NoiseConfig":
        """All noise and biases zero (perfect sensors)."""
        return NoiseConfig(0.0, 0.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0, 0.0)


@dataclass(frozen=True)
class Obstacle:
    e: float
    n: float
    radius: float


@dataclass(frozen=True)
class DropoffZone:
    """Floor discontinuity over a path-arclength interval [start_s, end_s]."""

    start_s: float
    end_s: float
    depth: float = 0.5


@dataclass(frozen=True)
class SonarGeometry:
    """Belt mounting geometry of the five sonar channels."""

    belt_height: float = 1.0  # m above the floor
    inclined_depression_deg: float = 45.0
    inclined_azimuth_deg: float = 25.0
    beam_half_angle_deg: float = 15.0
    max_range: float = 4.0

    @property
    def expected_ground_range(self) -> float:
        return self.belt_height / math.sin(math.radians(self.inclined_depression_deg))


# Channel boresight azimuths relative to the walking direction (rad, CCW).
def _channel_azimuths(geom: SonarGeometry) -> dict:
    az = math.radians(geom.inclined_azimuth_deg)
    return {
        SonarChannel.FRONT: 0.0,
        SonarChannel.LEFT: math.pi / 2.0,
        SonarChannel.RIGHT: -math.pi / 2.0,
        SonarChannel.INCLINED_LEFT: az,
        SonarChannel.INCLINED_RIGHT: -az,
    }


@dataclass(frozen=True)
class Scenario:
    route: tuple  # ((e, n), ...) waypoints, meters in the anchor's ENU frame
    speed: float = 1.52  # m/s
    imu_rate: float = 100.0  # Hz
    gps_rate: float = 1.0  # Hz
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    obstacles: tuple = ()
    dropoffs: tuple = ()
    gps_dropouts: tuple = ()  # ((t0, t1), ...) seconds with no fixes
    seed: int = 0
    anchor: tuple = (37.0, -122.0, 30.0)  # lat deg, lon deg, alt m
    geometry: SonarGeometry = field(default_factory=SonarGeometry)
    front_sensors: int = 2

    def __post_init__(self):
        if self.speed <= 0.0:
            raise ScenarioError("speed must be positive")
        if self.imu_rate <= 0.0 or self.gps_rate <= 0.0:
            raise ScenarioError("sample rates must be positive")
        if len(self.route) < 2:
            raise ScenarioError("route needs at least 2 waypoints")
        for a, b in zip(self.route, self.route[1:]):
            if math.hypot(b[0] - a[0], b[1] - a[1]) < 1e-9:
                raise ScenarioError(f"degenerate (repeated) waypoint at {a}")
        if self.front_sensors not in (1, 2):
            raise ScenarioError("front_sensors must be 1 or 2")

    def anchor_fix(self) -> GpsFix:
        return GpsFix(0.0, *self.anchor)


@dataclass(frozen=True)
class GroundTruth:
    """Exact per-IMU-tick kinematics and true sonar slant ranges."""

    t: np.ndarray  # (n,)
    p: np.ndarray  # (n, 3) ENU m
    v: np.ndarray  # (n, 3) ENU m/s
    q: np.ndarray  # (n, 4) body->ENU
    a_nav: np.ndarray  # (n, 3) ENU m/s^2
    omega_body: np.ndarray  # (n, 3) rad/s
    heading: np.ndarray  # (n,) rad CCW from east
    arclength: np.ndarray  # (n,) m along the walk
    sonar_true: dict  # channel -> (n,) slant range m, inf = no echo
    path_length: float
    duration: float


# ---------------------------------------------------------------------------
# Path geometry


class _Line:
    def __init__(self, start, heading, length):
        self.start = np.asarray(start, dtype=float)
        self.heading = heading
        self.length = length
        self._dir = np.array([math.cos(heading), math.sin(heading)])

    def sample(self, s):
        return self.start + s * self._dir, self.heading, 0.0


class _Blend:
    """Raised-cosine curvature fillet turning by ``dtheta`` over ``length``."""

    def __init__(self, entry, entry_heading, dtheta, length):
        self.entry = np.asarray(entry, dtype=float)
        self.entry_heading = entry_heading
        self.dtheta = dtheta
        self.length = length
        # local-frame centerline, integrated once at build time
        su = np.linspace(0.0, length, _BLEND_TABLE_STEPS + 1)
        psi = self._psi(su)
        dxy = np.column_stack([np.cos(psi), np.sin(psi)])
        xy = np.zeros_like(dxy)
        xy[1:] = np.cumsum(0.5 * (dxy[1:] + dxy[:-1]) * (su[1] - su[0]), axis=0)
        self._table_s = su
        self._table_xy = xy
        c, sn = math.cos(entry_heading), math.sin(entry_heading)
        self._rot = np.array([[c, -sn], [sn, c]])

    def _psi(self, s):
        u = s / self.length
        return self.dtheta * (u - np.sin(2.0 * math.pi * u) / (2.0 * math.pi))

    def exit_local(self) -> np.ndarray:
        return self._table_xy[-1]

    def sample(self, s):
        x = np.interp(s, self._table_s, self._table_xy[:, 0])
        y = np.interp(s, self._table_s, self._table_xy[:, 1])
        heading = self.entry_heading + float(self._psi(np.array([s]))[0])
        u = s / self.length
        kappa = (
            2.0 * self.dtheta / self.length * 0.5 * (1.0 - math.cos(2.0 * math.pi * u))
        )
        return self.entry + self._rot @ np.array([x, y]), heading, kappa


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def _build_path(route) -> tuple[list, float]:
    """Turn waypoints into (primitive, cumulative-length) pieces."""
    verts = [np.asarray(w, dtype=float) for w in route]
    dirs, headings, seg_len = [], [], []
    for a, b in zip(verts, verts[1:]):
        d = b - a
        length = float(np.hypot(*d))
        dirs.append(d / length)
        headings.append(math.atan2(d[1], d[0]))
        seg_len.append(length)

    n_seg = len(seg_len)
    turn = [0.0] * n_seg  # turn[i] is the corner at the END of segment i
    blends: list = [None] * n_seg
    trim_end = [0.0] * n_seg
    trim_start = [0.0] * n_seg
    for i in range(n_seg - 1):
        dtheta = _wrap_angle(headings[i + 1] - headings[i])
        if abs(dtheta) < 1e-12:
            continue
        if abs(dtheta) > math.radians(_MAX_CORNER_DEG):
            raise ScenarioError(
                f"corner at waypoint {i + 1} turns {math.degrees(abs(dtheta)):.0f} deg;"
                " near-reversals cannot be blended"
            )
        blend = _Blend(np.zeros(2), 0.0, dtheta, CORNER_BLEND_LEN)
        ex, ey = blend.exit_local()
        d2 = ey / math.sin(dtheta)
        d1 = ex - d2 * math.cos(dtheta)
        turn[i] = dtheta
        blends[i] = blend
        trim_end[i] = d1
        trim_start[i + 1] = d2

    for i in range(n_seg):
        if trim_start[i] + trim_end[i] > seg_len[i] + 1e-9:
            raise ScenarioError(
                f"segment {i} ({seg_len[i]:.2f} m) too short to blend its corners"
            )

    pieces = []  # (start_s, primitive)
    s = 0.0
    for i in range(n_seg):
        start = verts[i] + trim_start[i] * dirs[i]
        line_len = seg_len[i] - trim_start[i] - trim_end[i]
        if line_len > 1e-12:
            pieces.append((s, _Line(start, headings[i], line_len)))
            s += line_len
        if blends[i] is not None:
            entry = verts[i + 1] - trim_end[i] * dirs[i]
            pieces.append(
                (s, _Blend(entry, headings[i], turn[i], CORNER_BLEND_LEN))
            )
            s += CORNER_BLEND_LEN
    return pieces, s


def _sample_path(pieces, total_len, s):
    s = min(max(s, 0.0), total_len)
    lo, hi = 0, len(pieces) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if pieces[mid][0] <= s:
            lo = mid
        else:
            hi = mid - 1
    start_s, prim = pieces[lo]
    return prim.sample(min(s - start_s, prim.length))


# ---------------------------------------------------------------------------
# Ground truth


def gen_walk(scenario: Scenario) -> GroundTruth:
    """Traverse the route at constant speed and record exact kinematics.

    Samples sit on the IMU tick grid, with one extra sample appended at
    the exact end of the walk when the duration is not a tick multiple.
    """
    pieces, total_len = _build_path(scenario.route)
    duration = total_len / scenario.speed
    dt = 1.0 / scenario.imu_rate
    n_grid = int(math.floor(duration / dt + 1e-9))
    t = np.arange(n_grid + 1) * dt
    if duration - t[-1] > 1e-9:
        t = np.append(t, duration)
    n = len(t)

    p = np.zeros((n, 3))
    v = np.zeros((n, 3))
    q = np.zeros((n, 4))
    a_nav = np.zeros((n, 3))
    omega = np.zeros((n, 3))
    heading = np.zeros(n)
    arclength = scenario.speed * t
    speed = scenario.speed
    for k in range(n):
        xy, th, kappa = _sample_path(pieces, total_len, arclength[k])
        p[k, :2] = xy
        heading[k] = th
        v[k] = (speed * math.cos(th), speed * math.sin(th), 0.0)
        theta_dot = kappa * speed
        a_nav[k] = (
            -speed * theta_dot * math.sin(th),
            speed * theta_dot * math.cos(th),
            0.0,
        )
        omega[k] = (0.0, 0.0, -theta_dot)  # body z points down
        q[k] = level_heading_quat(th)

    sonar_true = _raycast_sonar(scenario, p, heading, arclength)
    return GroundTruth(
        t=t,
        p=p,
        v=v,
        q=q,
        a_nav=a_nav,
        omega_body=omega,
        heading=heading,
        arclength=arclength,
        sonar_true=sonar_true,
        path_length=total_len,
        duration=duration,
    )


def _raycast_sonar(scenario: Scenario, p, heading, arclength) -> dict:
    geom = scenario.geometry
    n = len(heading)
    half_angle = math.radians(geom.beam_half_angle_deg)
    dep = math.radians(geom.inclined_depression_deg)
    azimuths = _channel_azimuths(geom)
    obstacles = scenario.obstacles

    out = {}
    for channel, az in azimuths.items():
        inclined = channel in (SonarChannel.INCLINED_LEFT, SonarChannel.INCLINED_RIGHT)
        ranges = np.full(n, np.inf)
        for k in range(n):
            beam_dir = heading[k] + az
            best = math.inf
            for obs in obstacles:
                de = obs.e - p[k, 0]
                dn = obs.n - p[k, 1]
                dist_c = math.hypot(de, dn)
                if dist_c <= obs.radius:
                    best = 1e-3
                    continue
                bearing = _wrap_angle(math.atan2(dn, de) - beam_dir)
                if abs(bearing) > half_angle:
                    continue
                horiz = dist_c - obs.radius
                slant = horiz / math.cos(dep) if inclined else horiz
                if slant < best:
                    best = slant
            if inclined:
                # ground echo, lengthened while the look-ahead point is over a
                # drop-off zone (along-track projection of the boresight)
                look = arclength[k] + math.cos(az) * geom.belt_height / math.tan(dep)
                h_eff = geom.belt_height
                for zone in scenario.dropoffs:
                    if zone.start_s <= look <= zone.end_s:
                        h_eff = geom.belt_height + zone.depth
                        break
                ground = h_eff / math.sin(dep)
                best = min(best, ground)
            if best <= geom.max_range:
                ranges[k] = best
        out[channel] = ranges
    return out


# ---------------------------------------------------------------------------
# Sensor synthesis


def _quat_to_matrix_batch(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((len(q), 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def synth_imu(
    truth: GroundTruth, noise: NoiseConfig, seed: int
) -> list[ImuSample]:
    """Body-frame specific force and angular rate with bias and white noise."""
    rng = np.random.default_rng([seed, _STREAM_IMU])
    r_bn = _quat_to_matrix_batch(truth.q)
    f_body = np.einsum("nji,nj->ni", r_bn, truth.a_nav - GRAVITY)
    n = len(truth.t)
    accel = (
        f_body
        + np.asarray(noise.accel_bias)
        + noise.accel_sigma * rng.standard_normal((n, 3))
    )
    gyro = (
        truth.omega_body
        + np.asarray(noise.gyro_bias)
        + noise.gyro_sigma * rng.standard_normal((n, 3))
    )
    return [
        ImuSample(t=float(truth.t[k]), accel=accel[k], gyro=gyro[k])
        for k in range(n)
    ]


def synth_gps(
    truth: GroundTruth,
    noise: NoiseConfig,
    seed: int,
    rate: float,
    anchor: GpsFix,
    dropout_windows: Sequence = (),
) -> list[GpsFix]:
    """Truth positions at the GPS rate, horizontally perturbed, as WGS84 fixes."""
    rng = np.random.default_rng([seed, _STREAM_GPS])
    epochs = np.arange(0.0, truth.duration + 1e-9, 1.0 / rate)
    fixes = []
    for t in epochs:
        if any(t0 <= t <= t1 for t0, t1 in dropout_windows):
            # draw anyway so dropouts do not shift later fixes' noise
            rng.standard_normal(2)
            continue
        enu = np.array(
            [np.interp(t, truth.t, truth.p[:, i]) for i in range(3)]
        )
        enu[:2] += noise.gps_sigma * rng.standard_normal(2)
        lat, lon, alt = geo.enu_to_wgs84(enu, anchor)
        fixes.append(GpsFix(t=float(t), lat=lat, lon=lon, alt=alt))
    return fixes


_CHANNEL_ORDER = (
    SonarChannel.LEFT,
    SonarChannel.FRONT,
    SonarChannel.RIGHT,
    SonarChannel.INCLINED_LEFT,
    SonarChannel.INCLINED_RIGHT,
)


def synth_sonar(
    truth: GroundTruth, scenario: Scenario, seed: int | None = None
) -> list[SonarPing]:
    """Noisy pings per tick, channel-major within each tick.

    The front channel carries ``scenario.front_sensors`` independent pings
    per tick (the redundant pair the fusion filter consumes).  Pings with
    no echo within ``max_range`` carry ``range_m = max_range`` and
    ``valid = False``.
    """
    if seed is None:
        seed = scenario.seed
    geom = scenario.geometry
    sigma = scenario.noise.sonar_sigma
    n = len(truth.t)
    readings = {}
    for ci, channel in enumerate(_CHANNEL_ORDER):
        copies = scenario.front_sensors if channel is SonarChannel.FRONT else 1
        rng = np.random.default_rng([seed, _STREAM_SONAR, ci])
        true = truth.sonar_true[channel]
        noisy = np.where(
            np.isfinite(true), true + sigma * rng.standard_normal((copies, n)), np.inf
        )
        readings[channel] = noisy

    pings = []
    for k in range(n):
        t = float(truth.t[k])
        for channel in _CHANNEL_ORDER:
            for r in readings[channel][:, k]:
                if math.isfinite(r):
                    pings.append(
                        SonarPing(
                            t=t,
                            channel=channel,
                            range_m=min(max(float(r), 1e-3), geom.max_range),
                            valid=True,
                        )
                    )
                else:
                    pings.append(
                        SonarPing(
                            t=t, channel=channel, range_m=geom.max_range, valid=False
                        )
                    )
    return pings


def stationary_imu_source(noise: NoiseConfig, seed: int, heading: float = 0.0):
    """Repeatable raw-reading source of a stationary, level IMU.

    Returns ``source(n) -> (accel (n,3), gyro (n,3))`` drawing fresh noise
    on every call from one seeded generator; used for bench calibration.
    """
    rng = np.random.default_rng([seed, _STREAM_STATIC])
    q = level_heading_quat(heading)
    r_bn = _quat_to_matrix_batch(q[np.newaxis, :])[0]
    f_body = r_bn.T @ (-GRAVITY)
    accel_bias = np.asarray(noise.accel_bias, dtype=float)
    gyro_bias = np.asarray(noise.gyro_bias, dtype=float)

    def source(n: int):
        accel = f_body + accel_bias + noise.accel_sigma * rng.standard_normal((n, 3))
        gyro = gyro_bias + noise.gyro_sigma * rng.standard_normal((n, 3))
        return accel, gyro

    return source


def truth_trajectory(truth: GroundTruth, label: str = "ground-truth"):
    from .metrics import Trajectory

    return Trajectory(t=truth.t, xyz=truth.p, label=label)
