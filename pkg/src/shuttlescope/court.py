"""Court geometry: camera solve, projection, zone partition, mirroring.

The camera is a plain 3x4 projective matrix mapping homogeneous court
coordinates to homogeneous pixels. Solving uses the Direct Linear
Transform over normalized correspondences followed by damped Gauss-Newton
refinement of the total squared reprojection error. When the keypoints
are all coplanar except a single net-post top, a ground homography plus
focal-length decomposition recovers the full matrix instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from ._lm import levenberg_marquardt
from .errors import BehindCamera, DegenerateConfiguration, TooFewKeypoints
from .model import CourtPoint, Depth, PlayerId, Side, Zone

PixelPoint = tuple[float, float]


@dataclass(frozen=True)
class CourtSpec:
    """Court dimensions and the depth boundaries of the six-zone partition.

    Defaults are the standard doubles-width court used in broadcast
    singles venues; zone boundaries default to equal thirds of the
    half-court length, measured from the net.
    """

    length: float = 13.40
    width: float = 6.10
    net_height_center: float = 1.524
    net_height_post: float = 1.55
    zone_bounds: tuple[float, float] = (13.40 / 6.0, 13.40 / 3.0)

    def __post_init__(self):
        b0, b1 = self.zone_bounds
        if not (0.0 < b0 < b1 < self.length / 2.0):
            raise ValueError(
                f"zone_bounds must satisfy 0 < {b0} < {b1} < half length {self.length / 2}"
            )

    @property
    def half_length(self) -> float:
        return self.length / 2.0

    @property
    def half_width(self) -> float:
        return self.width / 2.0

    def corners(self) -> tuple[CourtPoint, ...]:
        hw, hl = self.half_width, self.half_length
        return (
            CourtPoint(-hw, -hl, 0.0),
            CourtPoint(hw, -hl, 0.0),
            CourtPoint(-hw, hl, 0.0),
            CourtPoint(hw, hl, 0.0),
        )


@dataclass(frozen=True)
class Keypoint:
    """One 3D-to-pixel correspondence used for the camera solve."""

    point: CourtPoint
    pixel: PixelPoint


@dataclass(frozen=True)
class CalibrationInput:
    keypoints: tuple[Keypoint, ...] = ()
    projection: tuple[float, ...] | None = None  # 12 numbers, row-major
    image_size: tuple[int, int] = (1920, 1080)


@dataclass(frozen=True)
class CameraModel:
    P: np.ndarray = field(repr=False)  # 3x4, scale-normalized, frozen
    image_size: tuple[int, int] = (1920, 1080)
    rmse_px: float = 0.0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float).reshape(3, 4)
        norm = np.linalg.norm(P)
        if not np.isfinite(norm) or norm == 0.0:
            raise DegenerateConfiguration("projection matrix is not finite")
        P = P / norm
        # canonical sign: court center projects with positive depth
        if P[2, 3] < 0:
            P = -P
        P.flags.writeable = False
        object.__setattr__(self, "P", P)
        if np.linalg.matrix_rank(P, tol=1e-10) != 3:
            raise DegenerateConfiguration("projection matrix is rank-deficient")

    def check_plausible(self, spec: CourtSpec) -> None:
        """Court corners must land inside a 4x image-size guard box."""
        w, h = self.image_size
        for corner in spec.corners():
            u, v = project(self, corner)
            if not (-1.5 * w <= u <= 2.5 * w and -1.5 * h <= v <= 2.5 * h):
                raise DegenerateConfiguration(
                    f"court corner {tuple(corner)} projects to ({u:.0f}, {v:.0f}), "
                    "outside the guard box"
                )


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def project(cam: CameraModel, p: CourtPoint) -> PixelPoint:
    q = cam.P @ np.array([p.x, p.y, p.z, 1.0])
    if q[2] <= 1e-12:
        raise BehindCamera(f"point {tuple(p)} has non-positive projective depth")
    return (float(q[0] / q[2]), float(q[1] / q[2]))


def project_batch(P: np.ndarray, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project (N,3) points; returns pixel (N,2) and depth w (N,).

    Depths are clamped away from zero so optimizer line searches stay
    finite; callers that care should inspect w themselves.
    """
    q = pts @ P[:, :3].T + P[:, 3]
    w = q[:, 2].copy()
    safe = np.where(np.abs(w) < 1e-9, 1e-9, w)
    return q[:, :2] / safe[:, None], w


def ground_from_pixel(cam: CameraModel, pixel: PixelPoint) -> tuple[float, float]:
    """Back-project a pixel onto the ground plane z=0."""
    H = cam.P[:, [0, 1, 3]]
    g = np.linalg.solve(H, np.array([pixel[0], pixel[1], 1.0]))
    if abs(g[2]) < 1e-12:
        raise BehindCamera("pixel maps to the ground plane's line at infinity")
    return (float(g[0] / g[2]), float(g[1] / g[2]))


def plane_from_pixel(cam: CameraModel, pixel: PixelPoint, z: float) -> tuple[float, float]:
    """Back-project a pixel onto the horizontal plane at height z."""
    P = cam.P
    u, v = pixel
    a = np.array(
        [
            [P[0, 0] - u * P[2, 0], P[0, 1] - u * P[2, 1]],
            [P[1, 0] - v * P[2, 0], P[1, 1] - v * P[2, 1]],
        ]
    )
    b = np.array(
        [
            u * (P[2, 2] * z + P[2, 3]) - (P[0, 2] * z + P[0, 3]),
            v * (P[2, 2] * z + P[2, 3]) - (P[1, 2] * z + P[1, 3]),
        ]
    )
    x, y = np.linalg.solve(a, b)
    return (float(x), float(y))


# ---------------------------------------------------------------------------
# zones and mirroring
# ---------------------------------------------------------------------------

def zone_of(p: CourtPoint, spec: CourtSpec = CourtSpec()) -> Zone:
    """Map a point to its player-relative zone.

    Off-court points are clamped to the nearest boundary first; ties on
    any boundary go to the positive side (half), to the deeper zone
    (depth), and x = 0 counts as positive (side).
    """
    x = min(max(p.x, -spec.half_width), spec.half_width)
    y = min(max(p.y, -spec.half_length), spec.half_length)

    half = PlayerId.B if y >= 0 else PlayerId.A
    d = abs(y)
    b0, b1 = spec.zone_bounds
    if d >= b1:
        depth = Depth.BACK
    elif d >= b0:
        depth = Depth.MIDDLE
    else:
        depth = Depth.FRONT
    # player-relative: on half A the player faces +Y, so court +X is their left
    if half is PlayerId.A:
        side = Side.LEFT if x >= 0 else Side.RIGHT
    else:
        side = Side.RIGHT if x >= 0 else Side.LEFT
    return Zone(half, depth, side)


def mirror(p: CourtPoint) -> CourtPoint:
    """Rotate 180 degrees about the net's vertical axis."""
    return CourtPoint(-p.x, -p.y, p.z)


def zone_center(zone: Zone, spec: CourtSpec = CourtSpec()) -> CourtPoint:
    b0, b1 = spec.zone_bounds
    mids = {
        Depth.FRONT: b0 / 2.0,
        Depth.MIDDLE: (b0 + b1) / 2.0,
        Depth.BACK: (b1 + spec.half_length) / 2.0,
    }
    y = mids[zone.depth]
    x = spec.half_width / 2.0
    if (zone.half is PlayerId.A) == (zone.side is Side.RIGHT):
        x = -x
    if zone.half is PlayerId.A:
        y = -y
    return CourtPoint(x, y, 0.0)


# ---------------------------------------------------------------------------
# camera solve
# ---------------------------------------------------------------------------

def _normalization_2d(pts: np.ndarray) -> np.ndarray:
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    s = math.sqrt(2.0) / max(d, 1e-12)
    return np.array([[s, 0, -s * centroid[0]], [0, s, -s * centroid[1]], [0, 0, 1]])


def _normalization_3d(pts: np.ndarray) -> np.ndarray:
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    s = math.sqrt(3.0) / max(d, 1e-12)
    T = np.eye(4)
    T[:3, :3] *= s
    T[:3, 3] = -s * centroid
    return T


def _dlt_projection(world: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    T2 = _normalization_2d(pixels)
    T3 = _normalization_3d(world)
    wh = np.hstack([world, np.ones((len(world), 1))]) @ T3.T
    ph = np.hstack([pixels, np.ones((len(pixels), 1))]) @ T2.T

    rows = []
    for X, x in zip(wh, ph):
        u, v = x[0], x[1]
        rows.append(np.concatenate([np.zeros(4), -X, v * X]))
        rows.append(np.concatenate([X, np.zeros(4), -u * X]))
    _, _, vt = np.linalg.svd(np.asarray(rows))
    P = vt[-1].reshape(3, 4)
    return np.linalg.inv(T2) @ P @ T3


def _dlt_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    Ts = _normalization_2d(src)
    Td = _normalization_2d(dst)
    sh = np.hstack([src, np.ones((len(src), 1))]) @ Ts.T
    dh = np.hstack([dst, np.ones((len(dst), 1))]) @ Td.T
    rows = []
    for X, x in zip(sh, dh):
        u, v = x[0], x[1]
        rows.append(np.concatenate([np.zeros(3), -X, v * X]))
        rows.append(np.concatenate([X, np.zeros(3), -u * X]))
    _, _, vt = np.linalg.svd(np.asarray(rows))
    H = vt[-1].reshape(3, 3)
    return np.linalg.inv(Td) @ H @ Ts


def _projection_from_homography(
    H: np.ndarray, image_size: tuple[int, int], world: np.ndarray, pixels: np.ndarray
) -> np.ndarray:
    """Lift a ground homography to a full 3x4 matrix.

    Assumes square pixels and the principal point at the image center,
    which pins the focal length through the rotation-orthogonality
    constraints; the vertical column then follows from the pose.
    """
    cx, cy = image_size[0] / 2.0, image_size[1] / 2.0
    Hc = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1.0]]) @ H
    h1, h2 = Hc[:, 0], Hc[:, 1]
    a1, b1 = h1[0] * h2[0] + h1[1] * h2[1], h1[2] * h2[2]
    a2 = h1[0] ** 2 + h1[1] ** 2 - h2[0] ** 2 - h2[1] ** 2
    b2 = h1[2] ** 2 - h2[2] ** 2
    denom = a1 * a1 + a2 * a2
    if denom < 1e-18:
        raise DegenerateConfiguration("homography does not constrain the focal length")
    inv_f2 = -(a1 * b1 + a2 * b2) / denom
    if inv_f2 <= 0:
        raise DegenerateConfiguration("homography implies a non-real focal length")
    f = 1.0 / math.sqrt(inv_f2)

    K = np.array([[f, 0, cx], [0, f, cy], [0, 0, 1.0]])
    M = np.linalg.solve(K, H)
    lam = 2.0 / (np.linalg.norm(M[:, 0]) + np.linalg.norm(M[:, 1]))
    # two sign choices; pick the one with the camera above the ground
    best = None
    for sign in (1.0, -1.0):
        r1, r2 = sign * lam * M[:, 0], sign * lam * M[:, 1]
        t = sign * lam * M[:, 2]
        r3 = np.cross(r1, r2)
        U, _, Vt = np.linalg.svd(np.column_stack([r1, r2, r3]))
        R = U @ Vt
        if np.linalg.det(R) < 0:
            U[:, -1] *= -1
            R = U @ Vt
        cam_center = -R.T @ t
        depth = (R @ np.array([world[0][0], world[0][1], 0.0]) + t)[2]
        if cam_center[2] > 0 and depth > 0:
            best = np.hstack([R, t[:, None]])
            break
    if best is None:
        raise DegenerateConfiguration("homography decomposition puts the camera underground")
    return K @ best


def _reprojection_rmse(P: np.ndarray, world: np.ndarray, pixels: np.ndarray) -> float:
    uv, _ = project_batch(P, world)
    return float(np.sqrt(np.mean(np.sum((uv - pixels) ** 2, axis=1))))


def _refine(P0: np.ndarray, world: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    def residual(x: np.ndarray) -> np.ndarray:
        uv, _ = project_batch(x.reshape(3, 4), world)
        return (uv - pixels).ravel()

    def normalize(x: np.ndarray) -> np.ndarray:
        return x / np.linalg.norm(x)

    result = levenberg_marquardt(
        residual,
        P0.ravel() / np.linalg.norm(P0),
        max_iter=200,
        grad_tol=1e-10,
        project=normalize,
    )
    return result.x.reshape(3, 4)


def solve_camera(cal: CalibrationInput, spec: CourtSpec = CourtSpec()) -> CameraModel:
    """Estimate the projection matrix from a calibration input.

    A precomputed matrix is validated and passed through. Otherwise the
    correspondences must number at least six and span both court axes;
    with two or more elevated points the full DLT runs, with exactly one
    the homography fallback runs, and with none the configuration is
    degenerate (no vertical scale information at all).
    """
    if cal.projection is not None:
        cam = CameraModel(np.asarray(cal.projection, dtype=float), cal.image_size)
        cam.check_plausible(spec)
        return cam

    kps = cal.keypoints
    if len(kps) < 6:
        raise TooFewKeypoints(len(kps))
    world = np.array([[k.point.x, k.point.y, k.point.z] for k in kps])
    pixels = np.array([[k.pixel[0], k.pixel[1]] for k in kps])
    if len(set(np.round(world[:, 0], 9))) < 2 or len(set(np.round(world[:, 1], 9))) < 2:
        raise DegenerateConfiguration("keypoints must span at least two X and two Y values")

    elevated = np.abs(world[:, 2]) > 1e-9
    n_elevated = int(elevated.sum())
    if n_elevated == 0:
        raise DegenerateConfiguration(
            "all keypoints lie on the ground plane; include at least one "
            "net-post-top correspondence to fix the vertical scale"
        )
    if n_elevated >= 2:
        P0 = _dlt_projection(world, pixels)
    else:
        ground = ~elevated
        if ground.sum() < 4:
            raise DegenerateConfiguration("homography fallback needs >= 4 ground keypoints")
        H = _dlt_homography(world[ground][:, :2], pixels[ground])
        P0 = _projection_from_homography(H, cal.image_size, world, pixels)

    P = _refine(P0, world, pixels)
    cam = CameraModel(P, cal.image_size, rmse_px=_reprojection_rmse(P, world, pixels))
    cam.check_plausible(spec)
    return cam
