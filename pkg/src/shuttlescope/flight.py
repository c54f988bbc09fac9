"""Shuttlecock flight: drag-model ODE, monocular trajectory fitting, hit
segmentation, and net-crossing extraction.

The flight model is the standard terminal-velocity form

    dv/dt = -g zhat - (g / vT^2) |v| v,      dp/dt = v

integrated with classical fourth-order Runge-Kutta. A shot is recovered
from its pixel track by damped Gauss-Newton over (p0, v0, vT), comparing
projected simulated positions against the observed track, from four
heuristic initializations differing in launch elevation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._lm import LMResult, levenberg_marquardt
from .court import CameraModel, ground_from_pixel, plane_from_pixel, project_batch
from .errors import NoHitsDetected, NonPhysicalParams, TooFewObservations
from .model import CourtPoint, Vec3

GRAVITY = 9.81

# plausibility box used by the fitter (hit heights in meters, speeds m/s)
HIT_Z_MIN, HIT_Z_MAX = 0.3, 3.5
SPEED_MAX = 120.0
VT_MIN, VT_MAX = 4.0, 12.0
VT_DEFAULT = 6.8

MIN_FIT_OBSERVATIONS = 8
ELEVATION_STARTS_DEG = (-20.0, 0.0, 20.0, 45.0)
# soft pull of the fitted terminal speed toward its default, in px per m/s:
# monocular depth is weakly observable, and an unconstrained vT lets the
# whole trajectory slide along the view rays; shuttle terminal speeds are
# physically tight, so the prior resolves the ambiguity without pinning vT
VT_PRIOR_WEIGHT = 3.0

HIT_MIN_GAP_FRAMES = 5
HIT_PROMINENCE_MS = 2.0


@dataclass(frozen=True)
class FlightParams:
    p0: CourtPoint
    v0: Vec3
    vT: float = VT_DEFAULT
    t0: float = 0.0


class TrajectorySample(NamedTuple):
    t: float
    p: CourtPoint
    v: Vec3


class NetCrossing(NamedTuple):
    t: float
    p: CourtPoint
    v: Vec3


@dataclass(frozen=True)
class FitResult:
    params: FlightParams
    rmse_px: float
    n_obs: int
    converged: bool


def shot_speed(params: FlightParams) -> float:
    return math.hypot(*params.v0)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _accel(v: np.ndarray, vT: np.ndarray | float) -> np.ndarray:
    # batched: v is (..., 3), vT broadcasts over the leading axes
    speed = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
    k = GRAVITY / np.asarray(vT) ** 2
    a = -np.reshape(k, np.shape(k) + (1,)) * speed * v
    a[..., 2] -= GRAVITY
    return a


def _rk4_step(p: np.ndarray, v: np.ndarray, vT, dt: float) -> tuple[np.ndarray, np.ndarray]:
    a1 = _accel(v, vT)
    v2 = v + 0.5 * dt * a1
    a2 = _accel(v2, vT)
    v3 = v + 0.5 * dt * a2
    a3 = _accel(v3, vT)
    v4 = v + dt * a3
    a4 = _accel(v4, vT)
    p_new = p + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return p_new, v_new


def _rollout_numpy(p0, v0, vT, dt, n_steps):
    B = p0.shape[0]
    pos = np.empty((B, n_steps + 1, 3))
    vel = np.empty((B, n_steps + 1, 3))
    p, v = p0.astype(float).copy(), v0.astype(float).copy()
    pos[:, 0], vel[:, 0] = p, v
    for k in range(1, n_steps + 1):
        p, v = _rk4_step(p, v, vT, dt)
        pos[:, k], vel[:, k] = p, v
    return pos, vel


try:  # the fitter hammers this kernel; JIT when numba is around
    import numba

    @numba.njit(cache=True, fastmath=False)
    def _rollout_jit(p0, v0, vT, dt, n_steps):  # pragma: no cover - numpy twin below
        B = p0.shape[0]
        pos = np.empty((B, n_steps + 1, 3))
        vel = np.empty((B, n_steps + 1, 3))
        g = 9.81
        for b in range(B):
            k_drag = g / (vT[b] * vT[b])
            px, py, pz = p0[b, 0], p0[b, 1], p0[b, 2]
            vx, vy, vz = v0[b, 0], v0[b, 1], v0[b, 2]
            pos[b, 0, 0], pos[b, 0, 1], pos[b, 0, 2] = px, py, pz
            vel[b, 0, 0], vel[b, 0, 1], vel[b, 0, 2] = vx, vy, vz
            for k in range(1, n_steps + 1):
                s1 = math.sqrt(vx * vx + vy * vy + vz * vz)
                a1x, a1y, a1z = -k_drag * s1 * vx, -k_drag * s1 * vy, -k_drag * s1 * vz - g
                w2x, w2y, w2z = vx + 0.5 * dt * a1x, vy + 0.5 * dt * a1y, vz + 0.5 * dt * a1z
                s2 = math.sqrt(w2x * w2x + w2y * w2y + w2z * w2z)
                a2x, a2y, a2z = -k_drag * s2 * w2x, -k_drag * s2 * w2y, -k_drag * s2 * w2z - g
                w3x, w3y, w3z = vx + 0.5 * dt * a2x, vy + 0.5 * dt * a2y, vz + 0.5 * dt * a2z
                s3 = math.sqrt(w3x * w3x + w3y * w3y + w3z * w3z)
                a3x, a3y, a3z = -k_drag * s3 * w3x, -k_drag * s3 * w3y, -k_drag * s3 * w3z - g
                w4x, w4y, w4z = vx + dt * a3x, vy + dt * a3y, vz + dt * a3z
                s4 = math.sqrt(w4x * w4x + w4y * w4y + w4z * w4z)
                a4x, a4y, a4z = -k_drag * s4 * w4x, -k_drag * s4 * w4y, -k_drag * s4 * w4z - g
                px += dt / 6.0 * (vx + 2.0 * w2x + 2.0 * w3x + w4x)
                py += dt / 6.0 * (vy + 2.0 * w2y + 2.0 * w3y + w4y)
                pz += dt / 6.0 * (vz + 2.0 * w2z + 2.0 * w3z + w4z)
                vx += dt / 6.0 * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
                vy += dt / 6.0 * (a1y + 2.0 * a2y + 2.0 * a3y + a4y)
                vz += dt / 6.0 * (a1z + 2.0 * a2z + 2.0 * a3z + a4z)
                pos[b, k, 0], pos[b, k, 1], pos[b, k, 2] = px, py, pz
                vel[b, k, 0], vel[b, k, 1], vel[b, k, 2] = vx, vy, vz
        return pos, vel

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def rollout(
    p0: np.ndarray, v0: np.ndarray, vT: np.ndarray, dt: float, n_steps: int
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate a batch of flights for a fixed number of steps.

    Shapes: p0, v0 are (B, 3), vT is (B,); returns (B, n_steps+1, 3) each.
    No ground-contact handling: the fitter wants a smooth residual.
    """
    if _HAVE_NUMBA:
        return _rollout_jit(
            np.ascontiguousarray(p0, dtype=np.float64),
            np.ascontiguousarray(v0, dtype=np.float64),
            np.ascontiguousarray(vT, dtype=np.float64),
            float(dt),
            int(n_steps),
        )
    return _rollout_numpy(p0, v0, vT, dt, n_steps)


def simulate(params: FlightParams, dt: float, t_end: float) -> list[TrajectorySample]:
    """Integrate one flight from the hit until `t_end` seconds later or until
    the shuttle reaches the ground; the first sample at or below z=0 is kept
    so callers can interpolate the exact landing.
    """
    if dt <= 0:
        raise NonPhysicalParams(f"integration step must be positive, got {dt}")
    if not (params.vT > 0) or not math.isfinite(params.vT):
        raise NonPhysicalParams(f"terminal speed must be positive and finite, got {params.vT}")
    vals = (*params.p0, *params.v0, params.t0)
    if not all(math.isfinite(c) for c in vals):
        raise NonPhysicalParams("flight parameters must be finite")

    p = np.array(params.p0, dtype=float)
    v = np.array(params.v0, dtype=float)
    vT = float(params.vT)
    samples = [TrajectorySample(params.t0, CourtPoint(*p), (v[0], v[1], v[2]))]
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    for k in range(1, n_steps + 1):
        p, v = _rk4_step(p, v, vT, dt)
        samples.append(TrajectorySample(params.t0 + k * dt, CourtPoint(*p), (v[0], v[1], v[2])))
        if p[2] <= 0.0:
            break
    return samples


# ---------------------------------------------------------------------------
# trajectory events
# ---------------------------------------------------------------------------

def _lerp_sample(a: TrajectorySample, b: TrajectorySample, alpha: float) -> TrajectorySample:
    t = a.t + alpha * (b.t - a.t)
    p = CourtPoint(*(ai + alpha * (bi - ai) for ai, bi in zip(a.p, b.p)))
    v = tuple(ai + alpha * (bi - ai) for ai, bi in zip(a.v, b.v))
    return TrajectorySample(t, p, v)


def net_crossing(samples: Sequence[TrajectorySample]) -> NetCrossing | None:
    """First crossing of the net plane y=0, linearly interpolated in time.

    A sample lying exactly on y=0 counts as the crossing itself.
    """
    if not samples:
        return None
    if samples[0].p.y == 0.0:
        s = samples[0]
        return NetCrossing(s.t, s.p, s.v)
    for prev, cur in zip(samples, samples[1:]):
        if cur.p.y == 0.0:
            return NetCrossing(cur.t, cur.p, cur.v)
        if (prev.p.y > 0) != (cur.p.y > 0):
            alpha = prev.p.y / (prev.p.y - cur.p.y)
            s = _lerp_sample(prev, cur, alpha)
            return NetCrossing(s.t, s.p, s.v)
    return None


def landing_point(samples: Sequence[TrajectorySample]) -> CourtPoint | None:
    """Interpolated z=0 crossing, or None if the flight never reaches ground."""
    for prev, cur in zip(samples, samples[1:]):
        if prev.p.z > 0.0 >= cur.p.z:
            alpha = prev.p.z / (prev.p.z - cur.p.z)
            s = _lerp_sample(prev, cur, alpha)
            return CourtPoint(s.p.x, s.p.y, 0.0)
    if samples and samples[-1].p.z <= 0.0:
        return CourtPoint(samples[-1].p.x, samples[-1].p.y, 0.0)
    return None


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _clip_params(theta: np.ndarray) -> np.ndarray:
    out = theta.copy()
    out[0] = np.clip(out[0], -15.0, 15.0)
    out[1] = np.clip(out[1], -15.0, 15.0)
    out[2] = np.clip(out[2], HIT_Z_MIN, HIT_Z_MAX)
    speed = np.linalg.norm(out[3:6])
    if speed > SPEED_MAX:
        out[3:6] *= SPEED_MAX / speed
    out[6] = np.clip(out[6], VT_MIN, VT_MAX)
    return out


def _linear_parabola_start(
    cam: CameraModel, frames: np.ndarray, uv: np.ndarray, fps: float, vt_init: float
) -> np.ndarray | None:
    """Closed-form (p0, v0) from a drag-free flight model.

    Under zero drag the position is linear in (p0, v0), so the projection
    constraints become a plain least-squares problem. Drag biases the
    answer at high speeds, but the solution lands in the right basin,
    which the elevation heuristics cannot guarantee for fast shots.
    """
    m = min(len(frames), 12)
    P = cam.P
    rows, rhs = [], []
    for i in range(m):
        t = frames[i] / fps
        half_gt2 = 0.5 * GRAVITY * t * t
        for axis, coord in ((0, uv[i, 0]), (1, uv[i, 1])):
            q = P[axis, :3] - coord * P[2, :3]
            c = P[axis, 3] - coord * P[2, 3]
            rows.append(np.concatenate([q, t * q]))
            rhs.append(half_gt2 * q[2] - c)
    try:
        theta6, *_ = np.linalg.lstsq(np.asarray(rows), np.asarray(rhs), rcond=None)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(theta6)):
        return None
    return _clip_params(np.append(theta6, vt_init))


def _initializations(
    cam: CameraModel,
    frames: np.ndarray,
    uv: np.ndarray,
    fps: float,
    pose_xy: tuple[float, float] | None,
    vt_init: float,
) -> list[np.ndarray]:
    """Launch guesses: four elevation heuristics plus the linear solve.

    Hit height starts at 1.8 m; the horizontal position comes from the
    hitter's pose when available, otherwise from the observation ray
    intersected with the z=1.8 plane. Horizontal velocity comes from the
    ground-homography displacement of the first few observations.
    """
    if pose_xy is not None:
        x0, y0 = pose_xy
    else:
        try:
            x0, y0 = plane_from_pixel(cam, (uv[0, 0], uv[0, 1]), 1.8)
        except np.linalg.LinAlgError:
            x0, y0 = 0.0, 0.0
    x0 = float(np.clip(x0, -4.0, 4.0))
    y0 = float(np.clip(y0, -7.7, 7.7))

    j = min(2, len(frames) - 1)
    try:
        gx0, gy0 = ground_from_pixel(cam, (uv[0, 0], uv[0, 1]))
        gx1, gy1 = ground_from_pixel(cam, (uv[j, 0], uv[j, 1]))
        dt_obs = max((frames[j] - frames[0]) / fps, 1e-6)
        vx, vy = (gx1 - gx0) / dt_obs, (gy1 - gy0) / dt_obs
    except Exception:
        vx, vy = 0.0, 10.0
    speed_h = math.hypot(vx, vy)
    if speed_h > 100.0:
        vx, vy = vx * 100.0 / speed_h, vy * 100.0 / speed_h
        speed_h = 100.0
    if speed_h < 1.0:
        # nearly vertical track in the ground map: aim across the net
        vy = 5.0 if y0 < 0 else -5.0
        speed_h = abs(vy)

    starts = []
    for elev_deg in ELEVATION_STARTS_DEG:
        vz = speed_h * math.tan(math.radians(elev_deg))
        starts.append(_clip_params(np.array([x0, y0, 1.8, vx, vy, vz, vt_init])))
    linear = _linear_parabola_start(cam, frames, uv, fps, vt_init)
    if linear is not None:
        starts.append(linear)
    return starts


def fit_shot(
    cam: CameraModel,
    obs: Sequence,
    fps: float,
    hit_frame: int,
    next_hit_frame: int | None = None,
    *,
    pose_xy: tuple[float, float] | None = None,
    vt_init: float = VT_DEFAULT,
    vt_prior_weight: float = VT_PRIOR_WEIGHT,
) -> FitResult:
    """Recover flight parameters for one shot from its pixel track.

    Uses the visible observations between the hit frame and the next hit
    (inclusive), minimizing total squared reprojection error plus a soft
    terminal-speed prior. Returns the best of the four multi-start runs;
    `converged` reflects the gradient test at the returned parameters.
    """
    last = next_hit_frame if next_hit_frame is not None else (obs[-1].frame if obs else hit_frame)
    window = [s for s in obs if s.visible and hit_frame <= s.frame <= last]
    if len(window) < MIN_FIT_OBSERVATIONS:
        raise TooFewObservations(len(window))

    frames = np.array([s.frame - hit_frame for s in window], dtype=int)
    uv = np.array([[s.u, s.v] for s in window], dtype=float)
    dt = 1.0 / (4.0 * fps)
    idx = 4 * frames  # observation times are frame-aligned, dt is quarter-frame
    n_steps = int(idx.max())
    n_obs = len(window)

    def residual_batch(thetas: np.ndarray) -> np.ndarray:
        pos, _ = rollout(thetas[:, 0:3], thetas[:, 3:6], thetas[:, 6], dt, n_steps)
        out = np.empty((thetas.shape[0], 2 * n_obs + 1))
        for b in range(thetas.shape[0]):
            pix, _ = project_batch(cam.P, pos[b, idx])
            out[b, : 2 * n_obs] = (pix - uv).ravel()
        out[:, -1] = vt_prior_weight * (thetas[:, 6] - vt_init)
        return out

    def residual(theta: np.ndarray) -> np.ndarray:
        return residual_batch(theta[None, :])[0]

    starts = _initializations(cam, frames, uv, fps, pose_xy, vt_init)
    init_costs = np.sum(residual_batch(np.stack(starts)) ** 2, axis=1)

    best: LMResult | None = None
    for order in np.argsort(init_costs, kind="stable"):
        run = levenberg_marquardt(
            residual,
            starts[order],
            residual_batch=residual_batch,
            max_iter=100,
            grad_tol=1e-8,
            step_tol=1e-10,
            project=_clip_params,
        )
        if best is None or run.cost < best.cost * (1.0 - 1e-6):
            best = run
        elif run.cost <= best.cost * (1.0 + 1e-6) and run.converged and not best.converged:
            # same minimum reached; keep the run that passed the gradient test
            best = run
        # an excellent, converged fit cannot be beaten by a worse start
        if best.converged and best.cost <= float(init_costs.min()) and (
            math.sqrt(best.cost / n_obs) < 0.5
        ):
            break

    if not best.converged:
        # restart at the found minimum with fresh damping; a stale large
        # lambda from a rough stretch can strand the gradient test
        polish = levenberg_marquardt(
            residual,
            best.x,
            residual_batch=residual_batch,
            max_iter=30,
            grad_tol=1e-8,
            step_tol=1e-10,
            project=_clip_params,
        )
        if polish.cost <= best.cost * (1.0 + 1e-9):
            best = polish

    theta = best.x
    params = FlightParams(
        p0=CourtPoint(float(theta[0]), float(theta[1]), float(theta[2])),
        v0=(float(theta[3]), float(theta[4]), float(theta[5])),
        vT=float(theta[6]),
        t0=hit_frame / fps,
    )
    pixel_sq = residual(theta)[: 2 * n_obs]
    return FitResult(
        params=params,
        rmse_px=math.sqrt(float(pixel_sq @ pixel_sq) / n_obs),
        n_obs=n_obs,
        converged=best.converged,
    )


# ---------------------------------------------------------------------------
# hit segmentation
# ---------------------------------------------------------------------------

def _smooth(values: np.ndarray, width: int = 3) -> np.ndarray:
    if len(values) < width:
        return values
    kernel = np.ones(width) / width
    pad = width // 2
    padded = np.concatenate([np.repeat(values[0], pad), values, np.repeat(values[-1], pad)])
    return np.convolve(padded, kernel, mode="valid")


def segment_hits(
    obs: Sequence,
    cam: CameraModel,
    fps: float,
    provided_hits: Sequence[int] | None = None,
) -> list[int]:
    """Locate hit frames in a rally's track.

    Provided hits are snapped to the nearest visible sample. Otherwise
    hits are detected where the ground-mapped Y velocity reverses sign
    with a jump above the prominence threshold, honoring a minimum gap
    between consecutive hits.
    """
    visible = [s for s in obs if s.visible]
    if not visible:
        raise NoHitsDetected("track contains no visible samples")
    vis_frames = np.array([s.frame for s in visible])

    if provided_hits is not None:
        snapped = []
        for h in provided_hits:
            j = int(np.argmin(np.abs(vis_frames - h)))
            snapped.append(int(vis_frames[j]))
        return sorted(set(snapped))

    ys = np.array([ground_from_pixel(cam, (s.u, s.v))[1] for s in visible])
    if len(ys) < 3:
        raise NoHitsDetected("too few visible samples to detect reversals")
    dt = np.diff(vis_frames) / fps
    vy = _smooth(np.diff(ys) / dt)

    candidates: list[tuple[int, float]] = []  # (frame, prominence)
    for i in range(len(vy) - 1):
        if vy[i] == 0.0 or (vy[i] > 0) == (vy[i + 1] > 0):
            continue
        before = vy[max(0, i - 2) : i + 1].mean()
        after = vy[i + 1 : i + 4].mean()
        prominence = abs(after - before)
        if (before > 0) != (after > 0) and prominence >= HIT_PROMINENCE_MS:
            candidates.append((int(vis_frames[i + 1]), prominence))

    hits: list[tuple[int, float]] = []
    for frame, prom in candidates:
        if hits and frame - hits[-1][0] < HIT_MIN_GAP_FRAMES:
            if prom > hits[-1][1]:
                hits[-1] = (frame, prom)
        else:
            hits.append((frame, prom))
    if not hits:
        raise NoHitsDetected("no Y-velocity reversal above the prominence threshold")
    return [frame for frame, _ in hits]
