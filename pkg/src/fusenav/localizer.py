"""Error-state EKF localization: IMU strapdown propagation + GPS corrections.

The nominal state (position, velocity, attitude quaternion) is integrated
directly from IMU samples; the filter estimates only the 9-dimensional
error state ``dx = (dp, dv, dtheta)`` with ``dtheta`` a navigation-frame
rotation vector (error injected as ``dq (x) q``).  GPS position fixes,
converted to local ENU, correct the error state at their own (much slower)
rate.  IMU biases are removed by the one-shot stationary calibration
routine below, not estimated online.

Innovation gating rejects fixes whose residual exceeds
``gate * sqrt(diag(H P H^T + R))`` per axis; urban GPS produces exactly
the outliers an ungated filter would be destabilized by.

The localizer is a single-threaded deterministic state machine over one
merged, time-ordered measurement stream; out-of-order timestamps within a
stream are a contract violation and raise.  Independent instances can run
concurrently on separate data.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import geo
from .core import (
    GRAVITY,
    DataError,
    GpsFix,
    ImuSample,
    NumericalError,
    level_heading_quat,
    quat_from_small_angle,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
    skew,
)

MAX_IMU_DT = 0.1  # s, sanity bound on a single strapdown step


class CalibrationDivergedError(NumericalError):
    def __init__(self, accel_residual, gyro_residual):
        self.accel_residual = np.asarray(accel_residual)
        self.gyro_residual = np.asarray(gyro_residual)
        super().__init__(
            "calibration did not converge: accel residual "
            f"{self.accel_residual}, gyro residual {self.gyro_residual}"
        )


@dataclass(frozen=True)
class NominalState:
    p: np.ndarray  # (3,) ENU position, m
    v: np.ndarray  # (3,) ENU velocity, m/s
    q: np.ndarray  # (4,) body->ENU quaternion, scalar-first
    t: float


@dataclass(frozen=True)
class CalibrationOffsets:
    accel_offset: np.ndarray  # (3,) m/s^2
    gyro_offset: np.ndarray  # (3,) rad/s

    @staticmethod
    def zero() -> "CalibrationOffsets":
        return CalibrationOffsets(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class LocalizerConfig:
    """Filter noise and rate parameters.

    ``accel_noise``/``gyro_noise`` are per-sample standard deviations; the
    discrete process noise injected on (dv, dtheta) each step is
    ``sigma^2 * dt^2``.  ``imu_rate``/``gps_rate`` document the expected
    stream rates; the actual timestamps govern integration.
    """

    accel_noise: float = 0.25  # m/s^2 per sample
    gyro_noise: float = 0.025  # rad/s per sample
    gps_pos_std: float = 3.0  # m
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    imu_rate: float = 100.0
    gps_rate: float = 1.0
    innovation_gate: float = 5.0
    init_vel_std: float = 1.0  # m/s, initial velocity uncertainty
    init_att_std: float = 0.1  # rad, initial attitude uncertainty


def calibrate(
    sample_source,
    batch: int = 1000,
    tol: float = 1e-3,
    max_iter: int = 20,
    gravity_mag: float = 9.80665,
) -> CalibrationOffsets:
    """Estimate constant IMU offsets from a stationary, level device.

    ``sample_source(n)`` must return ``(accel, gyro)`` arrays of shape
    (n, 3) of raw readings; the device is assumed stationary and level
    (caller's responsibility).  Offsets start at zero; each iteration draws
    a fresh batch, accumulates it into the running mean of all readings so
    far, and adjusts the offsets by the residual against the stationary
    targets (gyro zero; accel equal to the gravity reaction
    ``(0, 0, -g)`` of the z-down mount).  Terminates once every axis'
    residual is within ``tol``; the accumulation shrinks the measurement
    noise floor below any fixed tolerance, which a fixed-size batch mean
    cannot do.

    Raises CalibrationDivergedError with the final residuals after
    ``max_iter`` iterations.
    """
    accel_target = np.array([0.0, 0.0, -gravity_mag])
    accel_off = np.zeros(3)
    gyro_off = np.zeros(3)
    accel_sum = np.zeros(3)
    gyro_sum = np.zeros(3)
    n = 0
    resid_a = np.full(3, np.inf)
    resid_g = np.full(3, np.inf)
    for _ in range(max_iter):
        accel, gyro = sample_source(batch)
        accel = np.asarray(accel, dtype=float)
        gyro = np.asarray(gyro, dtype=float)
        if accel.shape != (batch, 3) or gyro.shape != (batch, 3):
            raise DataError(
                f"sample source returned shapes {accel.shape}/{gyro.shape}, "
                f"expected ({batch}, 3)"
            )
        accel_sum += accel.sum(axis=0)
        gyro_sum += gyro.sum(axis=0)
        n += batch
        resid_a = (accel_sum / n - accel_off) - accel_target
        resid_g = gyro_sum / n - gyro_off
        if np.all(np.abs(resid_a) <= tol) and np.all(np.abs(resid_g) <= tol):
            return CalibrationOffsets(accel_off, gyro_off)
        accel_off = accel_off + resid_a
        gyro_off = gyro_off + resid_g
    raise CalibrationDivergedError(resid_a, resid_g)


def initial_covariance(cfg: LocalizerConfig) -> np.ndarray:
    return np.diag(
        [cfg.gps_pos_std**2] * 3
        + [cfg.init_vel_std**2] * 3
        + [cfg.init_att_std**2] * 3
    )


def propagate(
    s: NominalState, P: np.ndarray, imu: ImuSample, dt: float, cfg: LocalizerConfig
) -> tuple[NominalState, np.ndarray]:
    """One strapdown step plus covariance propagation.

    Nominal: a_nav = R(q) accel + g; p, v by constant-acceleration
    kinematics; q right-multiplied by the gyro increment.  Covariance:
    P <- F P F^T + L Qd L^T with the error-state Jacobian (including the
    -0.5 [R accel]x dt^2 position/attitude block, the exact derivative of
    this integrator) and Qd = diag(sa^2 dt^2, sg^2 dt^2) on (dv, dtheta).
    """
    if not 0.0 < dt <= MAX_IMU_DT:
        raise DataError(f"dt={dt} outside (0, {MAX_IMU_DT}] s")
    if not (
        np.all(np.isfinite(imu.accel))
        and np.all(np.isfinite(imu.gyro))
        and np.all(np.isfinite(s.p))
        and np.all(np.isfinite(s.v))
        and np.all(np.isfinite(s.q))
    ):
        raise DataError("non-finite propagation input")

    c = quat_to_matrix(s.q)
    a_nav = c @ imu.accel + cfg.gravity
    p = s.p + s.v * dt + 0.5 * a_nav * dt * dt
    v = s.v + a_nav * dt
    q = quat_normalize(quat_multiply(s.q, quat_from_small_angle(imu.gyro * dt)))

    ca_skew = skew(c @ imu.accel)
    f = np.eye(9)
    f[0:3, 3:6] = np.eye(3) * dt
    f[0:3, 6:9] = -0.5 * ca_skew * dt * dt
    f[3:6, 6:9] = -ca_skew * dt
    qd = np.zeros((9, 9))
    qd[3:6, 3:6] = np.eye(3) * (cfg.accel_noise * dt) ** 2
    qd[6:9, 6:9] = np.eye(3) * (cfg.gyro_noise * dt) ** 2
    p_cov = f @ P @ f.T + qd
    return NominalState(p=p, v=v, q=q, t=s.t + dt), 0.5 * (p_cov + p_cov.T)


def gps_update(
    s: NominalState, P: np.ndarray, fix_enu, cfg: LocalizerConfig
) -> tuple[NominalState, np.ndarray, bool]:
    """Correct the state with an ENU position fix.

    Returns ``(state, P, accepted)``; a fix whose per-axis innovation
    exceeds ``gate * sqrt(diag(H P H^T + R))`` is rejected and the state
    passes through unchanged.
    """
    z = np.asarray(fix_enu, dtype=float)
    innovation = z - s.p
    s_cov = P[0:3, 0:3] + cfg.gps_pos_std**2 * np.eye(3)
    if np.any(np.abs(innovation) > cfg.innovation_gate * np.sqrt(np.diag(s_cov))):
        return s, P, False

    h = np.zeros((3, 9))
    h[:, 0:3] = np.eye(3)
    k = np.linalg.solve(s_cov.T, (P @ h.T).T).T
    dx = k @ innovation
    p = s.p + dx[0:3]
    v = s.v + dx[3:6]
    q = quat_normalize(quat_multiply(quat_from_small_angle(dx[6:9]), s.q))
    p_cov = (np.eye(9) - k @ h) @ P
    return NominalState(p=p, v=v, q=q, t=s.t), 0.5 * (p_cov + p_cov.T), True


@dataclass(frozen=True)
class LocalizerRun:
    """Per-IMU-step estimates plus bookkeeping from one localizer run."""

    t: np.ndarray  # (n,)
    p: np.ndarray  # (n, 3) ENU m, frame anchored at `ref`
    v: np.ndarray  # (n, 3) ENU m/s
    q: np.ndarray  # (n, 4)
    ref: GpsFix
    accepted_fixes: int
    rejected_fixes: int

    def positions_in(self, frame: GpsFix) -> np.ndarray:
        """Positions re-anchored into another fix's ENU frame (exact)."""
        return geo.enu_to_enu(self.p, self.ref, frame)

    def trajectory(self, label: str, frame: GpsFix | None = None):
        """As a metrics Trajectory, optionally re-anchored to ``frame``.

        Re-anchor before evaluating against a truth trajectory expressed
        in a different frame; the run's own frame sits at the (noisy)
        first fix, and the frame offset would otherwise count as error.
        """
        from .metrics import Trajectory

        xyz = self.p if frame is None else self.positions_in(frame)
        return Trajectory(t=self.t, xyz=xyz, label=label)


def run_localizer(
    imu_stream,
    gps_stream,
    cfg: LocalizerConfig,
    offsets: CalibrationOffsets | None = None,
    initial: NominalState | None = None,
) -> LocalizerRun:
    """Fuse a full IMU stream with GPS fixes into a trajectory.

    The first GPS fix anchors the ENU frame and the initial position.
    Unless ``initial`` is given, the walker starts at rest, level, facing
    east.  IMU samples earlier than the anchor are dropped; every fix is
    applied at the first IMU step at or after its timestamp.  Output is
    one record per processed IMU sample; identical inputs produce
    identical output.
    """
    if offsets is None:
        offsets = CalibrationOffsets.zero()
    imu = list(imu_stream)
    fixes = list(gps_stream)
    if not imu:
        raise DataError("empty IMU stream")
    if not fixes:
        raise DataError("empty GPS stream: no fix to anchor the ENU frame")
    for i in range(1, len(fixes)):
        if fixes[i].t < fixes[i - 1].t:
            raise DataError(f"GPS stream unsorted at index {i} (t={fixes[i].t})")

    ref = fixes[0]
    if initial is None:
        state = NominalState(
            p=geo.wgs84_to_enu(ref, ref),
            v=np.zeros(3),
            q=level_heading_quat(0.0),
            t=ref.t,
        )
    else:
        state = replace(initial, t=ref.t)
    p_cov = initial_covariance(cfg)

    ts, ps, vs, qs = [], [], [], []
    accepted = rejected = 0
    fix_idx = 1  # the anchor fix is consumed by initialization
    t_prev = ref.t
    first = True
    for i, sample in enumerate(imu):
        if sample.t < ref.t:
            continue
        dt = sample.t - t_prev
        if dt < 0.0:
            raise DataError(f"IMU stream unsorted at index {i} (t={sample.t})")
        corrected = ImuSample(
            t=sample.t,
            accel=sample.accel - offsets.accel_offset,
            gyro=sample.gyro - offsets.gyro_offset,
        )
        if dt > 0.0:
            state, p_cov = propagate(state, p_cov, corrected, dt, cfg)
        elif not first:
            raise DataError(f"IMU stream has duplicate timestamp at index {i}")
        t_prev = sample.t
        first = False

        while fix_idx < len(fixes) and fixes[fix_idx].t <= sample.t:
            z = geo.wgs84_to_enu(fixes[fix_idx], ref)
            state, p_cov, ok = gps_update(state, p_cov, z, cfg)
            accepted += ok
            rejected += not ok
            fix_idx += 1

        ts.append(sample.t)
        ps.append(state.p)
        vs.append(state.v)
        qs.append(state.q)

    if not ts:
        raise DataError("no IMU samples at or after the anchor fix")
    return LocalizerRun(
        t=np.array(ts),
        p=np.array(ps),
        v=np.array(vs),
        q=np.array(qs),
        ref=ref,
        accepted_fixes=accepted,
        rejected_fixes=rejected,
    )
