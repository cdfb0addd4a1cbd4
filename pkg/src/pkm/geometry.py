"""Domain types and anchor-point geometry of the 3UPS/RPU manipulator.

The robot has three lateral UPS limbs and one central RPU strut. Limb 1
attaches at the back of both platforms (angle pi on the anchor circles),
limb 2 at angles ``betaFD`` / ``betaMD`` on the +Y side, limb 3 mirrored at
``betaFI`` / ``betaMI`` on the -Y side, and the central strut runs from
``(ds, 0, 0)`` on the base to the mobile-frame origin.  The mobile platform
is oriented by a rotation about its Y axis (theta) followed by one about
its Z axis (psi).  These conventions make the geometric limb vectors agree
with the closed-form actuator lengths and the loop-closure equations used
throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLimb

# Below this length (m) a limb is considered geometrically collapsed.
DEGENERATE_LENGTH = 1e-9

N_COORDS = 15
N_SECONDARY = 11
N_ACTIVE = 4

COORD_NAMES = (
    "q11", "q12", "q21", "q22", "q31", "q32", "q41",
    "xm", "zm", "theta", "psi",
    "q13", "q23", "q33", "q42",
)


@dataclass(frozen=True)
class PlatformGeometry:
    """Reconfigurable geometric parameters (lengths in m, angles in rad).

    R / Rm are the anchor-circle radii of the fixed and mobile platforms,
    ds the offset of the central strut base along the fixed X axis, and the
    beta angles place the two reconfigurable lateral limbs on each circle.
    """

    R: float
    Rm: float
    ds: float
    betaFD: float
    betaFI: float
    betaMD: float
    betaMI: float

    def __post_init__(self):
        if not (self.R > 0.0 and self.Rm > 0.0):
            raise ValueError("platform radii must be positive")

    def base_anchors(self) -> np.ndarray:
        """Fixed-frame anchor points of the four limbs, shape (4, 3)."""
        return np.array([
            [-self.R, 0.0, 0.0],
            [self.R * math.cos(self.betaFD), self.R * math.sin(self.betaFD), 0.0],
            [self.R * math.cos(self.betaFI), -self.R * math.sin(self.betaFI), 0.0],
            [self.ds, 0.0, 0.0],
        ])

    def platform_anchors_local(self) -> np.ndarray:
        """Mobile-frame anchor points of the four limbs, shape (4, 3).

        The central strut attaches at the mobile-frame origin.
        """
        return np.array([
            [-self.Rm, 0.0, 0.0],
            [self.Rm * math.cos(self.betaMD), self.Rm * math.sin(self.betaMD), 0.0],
            [self.Rm * math.cos(self.betaMI), -self.Rm * math.sin(self.betaMI), 0.0],
            [0.0, 0.0, 0.0],
        ])


def initial_geometry() -> PlatformGeometry:
    """Starting layout of the virtual robot before any reconfiguration."""
    return PlatformGeometry(
        R=0.4,
        Rm=0.2,
        ds=0.0,
        betaFD=math.radians(50.0),
        betaFI=math.radians(40.0),
        betaMD=math.radians(30.0),
        betaMI=math.radians(40.0),
    )


@dataclass(frozen=True)
class PlatformPose:
    """Task-space coordinates: mobile-origin position (xm, zm) in the fixed
    XZ plane plus the two platform rotations (rad)."""

    xm: float
    zm: float
    theta: float
    psi: float

    def __post_init__(self):
        for name in ("xm", "zm", "theta", "psi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite pose component {name}")
        if abs(self.theta) > math.pi + 1e-12 or abs(self.psi) > math.pi + 1e-12:
            raise ValueError("orientation angles must lie in (-pi, pi]")

    def as_array(self) -> np.ndarray:
        return np.array([self.xm, self.zm, self.theta, self.psi])

    @staticmethod
    def from_array(arr) -> "PlatformPose":
        xm, zm, theta, psi = (float(v) for v in arr)
        return PlatformPose(xm, zm, theta, psi)


@dataclass(frozen=True)
class FullCoordinates:
    """The 15 generalized coordinates, ordered secondary-first.

    Layout: [q11, q12, q21, q22, q31, q32, q41 | xm, zm, theta, psi |
    q13, q23, q33, q42].  The first 11 are secondary, the last 4 are the
    actuated (independent) limb extensions.
    """

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (N_COORDS,):
            raise ValueError(f"expected {N_COORDS} coordinates, got shape {q.shape}")
        if np.any(q[N_SECONDARY:] <= 0.0):
            raise ValueError("limb lengths must be positive")
        object.__setattr__(self, "q", q)

    @property
    def secondary(self) -> np.ndarray:
        return self.q[:N_SECONDARY]

    @property
    def independent(self) -> np.ndarray:
        return self.q[N_SECONDARY:]

    @property
    def pose(self) -> PlatformPose:
        return PlatformPose.from_array(self.q[7:11])

    @staticmethod
    def assemble(angles, pose: PlatformPose, lengths) -> "FullCoordinates":
        """Build the 15-vector from the 7 joint angles, the pose and the 4
        actuator lengths."""
        return FullCoordinates(np.concatenate([
            np.asarray(angles, dtype=float),
            pose.as_array(),
            np.asarray(lengths, dtype=float),
        ]))


@dataclass(frozen=True)
class ExternalWrench:
    """Force (N) and torque (N*m) applied to the mobile platform, expressed
    in the mobile frame."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        f = np.asarray(self.force, dtype=float)
        t = np.asarray(self.torque, dtype=float)
        if f.shape != (3,) or t.shape != (3,):
            raise ValueError("wrench force and torque must be 3-vectors")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(t))):
            raise ValueError("wrench components must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])


def _per_limb(value, name) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(4, float(arr))
    if arr.shape != (4,):
        raise ValueError(f"{name} must be a scalar or a 4-vector")
    return arr


@dataclass(frozen=True)
class PhysicalParams:
    """Masses, centres of mass, friction and actuator limits.

    The published model takes these from a CAD model that is not public;
    the values below are plausible defaults for a knee-rehabilitation sized
    rig and every quantity is overridable.  ``com_cyl`` is measured from the
    base anchor along the limb axis, ``com_rod`` from the platform anchor
    back toward the base.  ``d_point`` locates the external-force
    application point in the mobile frame (default: the mobile origin).
    """

    mass_cyl: np.ndarray = 2.0
    mass_rod: np.ndarray = 1.0
    com_cyl: np.ndarray = 0.15
    com_rod: np.ndarray = 0.15
    mass_platform: float = 8.0
    com_platform: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mu_c: np.ndarray = 40.0
    mu_v: np.ndarray = 100.0
    g: float = 9.81
    l_min: float = 0.45
    l_max: float = 0.85
    alpha_max: float = math.pi / 4.0
    d_point: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("mass_cyl", "mass_rod", "com_cyl", "com_rod", "mu_c", "mu_v"):
            object.__setattr__(self, name, _per_limb(getattr(self, name), name))
        for name in ("com_platform", "d_point"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, arr)
        if np.any(self.mass_cyl < 0) or np.any(self.mass_rod < 0) or self.mass_platform < 0:
            raise ValueError("masses must be nonnegative")
        if np.any(self.mu_c < 0) or np.any(self.mu_v < 0):
            raise ValueError("friction coefficients must be nonnegative")
        if not (0.0 < self.l_min < self.l_max):
            raise ValueError("stroke limits must satisfy 0 < l_min < l_max")
        if not (0.0 < self.alpha_max < math.pi / 2.0):
            raise ValueError("alpha_max must lie in (0, pi/2)")


# ---------------------------------------------------------------------------
# Rotation of the mobile frame: about Y_m by theta, then about Z_m by psi.
# ---------------------------------------------------------------------------

def rotation_matrices(theta, psi) -> np.ndarray:
    """Mobile-to-fixed rotation matrices for arrays of angles.

    Broadcasts over the inputs and returns shape (..., 3, 3).
    """
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    zero = np.zeros(np.broadcast(theta, psi).shape)
    rot = np.stack([
        np.stack([ct * cp, -ct * sp, st], axis=-1),
        np.stack([sp, cp, zero], axis=-1),
        np.stack([-st * cp, st * sp, ct], axis=-1),
    ], axis=-2)
    return rot


def rotation_matrices_dtheta(theta, psi) -> np.ndarray:
    """Derivative of :func:`rotation_matrices` with respect to theta."""
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    zero = np.zeros(np.broadcast(theta, psi).shape)
    return np.stack([
        np.stack([-st * cp, st * sp, ct], axis=-1),
        np.stack([zero, zero, zero], axis=-1),
        np.stack([-ct * cp, ct * sp, -st], axis=-1),
    ], axis=-2)


def rotation_matrices_dpsi(theta, psi) -> np.ndarray:
    """Derivative of :func:`rotation_matrices` with respect to psi."""
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    zero = np.zeros(np.broadcast(theta, psi).shape)
    return np.stack([
        np.stack([-ct * sp, -ct * cp, zero], axis=-1),
        np.stack([cp, -sp, zero], axis=-1),
        np.stack([st * sp, st * cp, zero], axis=-1),
    ], axis=-2)


def rotation_matrix(pose: PlatformPose) -> np.ndarray:
    """3x3 matrix mapping mobile-frame vectors into the fixed frame."""
    return rotation_matrices(pose.theta, pose.psi)


def poses_as_array(poses) -> np.ndarray:
    """Normalize a pose, a pose array or a sequence of poses to (p, 4)."""
    if isinstance(poses, PlatformPose):
        return poses.as_array()[None, :]
    arr = np.asarray(poses, dtype=float)
    if arr.ndim == 1 and arr.shape == (4,):
        return arr[None, :]
    if arr.ndim == 2 and arr.shape[1] == 4:
        return arr
    if arr.ndim == 1 and arr.dtype == object:
        return np.stack([p.as_array() for p in poses])
    raise ValueError("expected a PlatformPose or an array of shape (p, 4)")


def anchor_points_many(geom: PlatformGeometry, poses) -> tuple[np.ndarray, np.ndarray]:
    """Base and platform anchor points for a batch of poses.

    Returns ``(B, A)`` with B of shape (4, 3) (pose independent) and A of
    shape (p, 4, 3) in the fixed frame.
    """
    arr = poses_as_array(poses)
    rot = rotation_matrices(arr[:, 2], arr[:, 3])  # (p, 3, 3)
    local = geom.platform_anchors_local()  # (4, 3)
    origin = np.zeros((arr.shape[0], 3))
    origin[:, 0] = arr[:, 0]
    origin[:, 2] = arr[:, 1]
    world = origin[:, None, :] + np.einsum("pij,aj->pai", rot, local)
    return geom.base_anchors(), world


def anchor_points(geom: PlatformGeometry, pose: PlatformPose) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-frame anchor points (B[4], A[4]) of the four limbs at a pose."""
    base, world = anchor_points_many(geom, pose)
    return base, world[0]


def limb_vectors_many(geom: PlatformGeometry, poses) -> np.ndarray:
    """Limb vectors A_i - B_i, shape (p, 4, 3)."""
    base, world = anchor_points_many(geom, poses)
    return world - base[None, :, :]


def limb_axes_many(geom: PlatformGeometry, poses) -> tuple[np.ndarray, np.ndarray]:
    """Unit limb axes and lengths for a batch of poses.

    Returns ``(u, lengths)`` of shapes (p, 4, 3) and (p, 4).  Raises
    :class:`DegenerateLimb` if any length underflows the threshold.
    """
    vec = limb_vectors_many(geom, poses)
    lengths = np.linalg.norm(vec, axis=-1)
    bad = lengths <= DEGENERATE_LENGTH
    if np.any(bad):
        point, limb = np.argwhere(bad)[0]
        raise DegenerateLimb(
            f"limb {limb + 1} collapses to zero length at via point {point}",
            limb=int(limb),
        )
    return vec / lengths[..., None], lengths


def limb_axes(geom: PlatformGeometry, pose: PlatformPose) -> np.ndarray:
    """Unit vectors along each limb, base anchor toward platform anchor."""
    u, _ = limb_axes_many(geom, pose)
    return u[0]
