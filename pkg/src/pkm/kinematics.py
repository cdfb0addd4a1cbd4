"""Inverse/forward kinematics, loop-closure constraints and Jacobians.

The manipulator closes eleven scalar loop equations: three per lateral limb
(the limb direction given by its two universal-joint angles, scaled by the
limb length, must reach from base anchor to platform anchor) and two for
the central strut, which stays in the fixed XZ plane.  Everything here is a
pure function of geometry and coordinates; batched variants carry a leading
via-point axis and feed the statics and optimization layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLimb, IllConditioned, NearSingular, NoConvergence, UnreachablePose
from .geometry import (
    DEGENERATE_LENGTH,
    N_ACTIVE,
    N_COORDS,
    N_SECONDARY,
    FullCoordinates,
    PlatformGeometry,
    PlatformPose,
    anchor_points_many,
    poses_as_array,
    rotation_matrices,
    rotation_matrices_dpsi,
    rotation_matrices_dtheta,
)

# Relative determinant threshold below which the secondary Jacobian block is
# treated as singular (Type-II proximity).  Relative to a caller-supplied
# reference so the test is unit-independent.
SINGULAR_DET_RATIO = 1e-9


# ---------------------------------------------------------------------------
# Inverse kinematics: closed-form actuator lengths.
# ---------------------------------------------------------------------------

def active_length_radicands(geom: PlatformGeometry, poses) -> np.ndarray:
    """Squared actuator lengths as explicit closed forms, shape (p, 4).

    Algebraically each radicand is the squared distance between a limb's
    anchor points, so it is nonnegative for every real pose; the sign test
    in :func:`active_lengths_many` is purely defensive.
    """
    arr = poses_as_array(poses)
    xm, zm, th, ps = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
    R, Rm, ds = geom.R, geom.Rm, geom.ds
    ct, st = np.cos(th), np.sin(th)
    cp, sp = np.cos(ps), np.sin(ps)
    cFD, sFD = np.cos(geom.betaFD), np.sin(geom.betaFD)
    cFI, sFI = np.cos(geom.betaFI), np.sin(geom.betaFI)
    cMD, sMD = np.cos(geom.betaMD), np.sin(geom.betaMD)
    cMI, sMI = np.cos(geom.betaMI), np.sin(geom.betaMI)

    r1 = (R**2 + (2.0 * xm - 2.0 * ct * cp * Rm) * R + Rm**2
          + (2.0 * zm * cp * st - 2.0 * ct * cp * xm) * Rm + xm**2 + zm**2)
    r2 = (R**2 + Rm**2 + xm**2 + zm**2
          + 2.0 * Rm * (R * (cFD * ct * sMD * sp - cFD * cMD * cp * ct
                             - cMD * sFD * sp - cp * sFD * sMD)
                        + ct * cp * cMD * xm - cMD * cp * st * zm
                        - ct * sMD * sp * xm + st * sp * sMD * zm)
          - 2.0 * R * xm * cFD)
    r3 = (R**2 + Rm**2 + xm**2 + zm**2
          + 2.0 * Rm * (R * (-cFI * ct * sMI * sp - cFI * cMI * cp * ct
                             + cMI * sFI * sp - cp * sFI * sMI)
                        + ct * cp * cMI * xm - cMI * cp * st * zm
                        + ct * sMI * sp * xm - st * sp * sMI * zm)
          - 2.0 * R * xm * cFI)
    r4 = ds**2 - 2.0 * ds * xm + xm**2 + zm**2
    return np.stack([r1, r2, r3, r4], axis=-1)


def lengths_from_radicands(radicands: np.ndarray) -> np.ndarray:
    """Positive roots of the length radicands; raises on a negative one."""
    neg = radicands < 0.0
    if np.any(neg):
        point, limb = np.argwhere(neg)[0]
        raise UnreachablePose(
            f"limb {limb + 1} unreachable at via point {point} "
            f"(radicand {radicands[point, limb]:.3e})",
            index=int(point),
        )
    return np.sqrt(radicands)


def active_lengths_many(geom: PlatformGeometry, poses) -> np.ndarray:
    """Closed-form actuator lengths (q13, q23, q33, q42) per via point."""
    return lengths_from_radicands(active_length_radicands(geom, poses))


def inverse_kinematics_active(geom: PlatformGeometry, pose: PlatformPose) -> np.ndarray:
    """Actuator lengths for one pose, shape (4,)."""
    return active_lengths_many(geom, pose)[0]


# ---------------------------------------------------------------------------
# Secondary (passive joint) coordinates.
# ---------------------------------------------------------------------------

def _axes_and_lengths(geom, arr):
    base, world = anchor_points_many(geom, arr)
    vec = world - base[None, :, :]
    lengths = np.linalg.norm(vec, axis=-1)
    bad = lengths <= DEGENERATE_LENGTH
    if np.any(bad):
        point, limb = np.argwhere(bad)[0]
        raise DegenerateLimb(
            f"limb {limb + 1} collapses to zero length at via point {point}",
            limb=int(limb),
        )
    return vec / lengths[..., None], lengths


def secondary_angles_many(geom: PlatformGeometry, poses) -> np.ndarray:
    """Passive joint angles (q11, q12, q21, q22, q31, q32, q41), shape (p, 7).

    The second universal angle of each lateral limb is kept in (0, pi) and
    the first follows from the remaining direction components, which picks
    the assembled configuration with limbs above the base plane.  The
    central-strut angle is the one closest to zero.
    """
    arr = poses_as_array(poses)
    u, _ = _axes_and_lengths(geom, arr)
    # Lateral limb direction: (cos q1 sin q2, -cos q2, sin q1 sin q2).
    uy = np.clip(u[:, :3, 1], -1.0, 1.0)
    q2 = np.arccos(-uy)
    s2 = np.sin(q2)
    if np.any(s2 <= DEGENERATE_LENGTH):
        point, limb = np.argwhere(s2 <= DEGENERATE_LENGTH)[0]
        raise DegenerateLimb(
            f"limb {limb + 1} aligned with its universal-joint axis at via point {point}",
            limb=int(limb),
        )
    q1 = np.arctan2(u[:, :3, 2], u[:, :3, 0])
    xm, zm = arr[:, 0], arr[:, 1]
    q41 = np.arctan2(geom.ds - xm, zm)
    out = np.empty((arr.shape[0], 7))
    out[:, 0:6:2] = q1
    out[:, 1:6:2] = q2
    out[:, 6] = q41
    return out


def solve_secondary_angles(geom: PlatformGeometry, pose: PlatformPose) -> np.ndarray:
    """Passive joint angles for one pose, shape (7,)."""
    return secondary_angles_many(geom, pose)[0]


def full_coordinates_many(geom: PlatformGeometry, poses) -> np.ndarray:
    """Consistent 15-coordinate vectors along a pose batch, shape (p, 15)."""
    arr = poses_as_array(poses)
    angles = secondary_angles_many(geom, arr)
    lengths = active_lengths_many(geom, arr)
    return np.concatenate([angles, arr, lengths], axis=1)


def assemble_coordinates(geom: PlatformGeometry, pose: PlatformPose) -> FullCoordinates:
    """Full consistent coordinate vector for one pose."""
    return FullCoordinates(full_coordinates_many(geom, pose)[0])


# ---------------------------------------------------------------------------
# Loop-closure constraint residuals and their Jacobian.
# ---------------------------------------------------------------------------

def _coords_as_array(q) -> np.ndarray:
    if isinstance(q, FullCoordinates):
        return q.q[None, :]
    arr = np.asarray(q, dtype=float)
    if arr.ndim == 1:
        return arr[None, :]
    return arr


def constraint_vector_many(geom: PlatformGeometry, coords) -> np.ndarray:
    """Residuals of the eleven loop-closure equations, shape (p, 11).

    Written out term by term; zero exactly when the coordinates are
    kinematically consistent.
    """
    q = _coords_as_array(coords)
    c = np.cos(q)
    s = np.sin(q)
    c11, c12, c21, c22, c31, c32, c41 = (c[:, i] for i in range(7))
    s11, s12, s21, s22, s31, s32, s41 = (s[:, i] for i in range(7))
    xm, zm = q[:, 7], q[:, 8]
    ct, st = c[:, 9], s[:, 9]
    cp, sp = c[:, 10], s[:, 10]
    q13, q23, q33, q42 = q[:, 11], q[:, 12], q[:, 13], q[:, 14]
    R, Rm, ds = geom.R, geom.Rm, geom.ds
    cFD, sFD = np.cos(geom.betaFD), np.sin(geom.betaFD)
    cFI, sFI = np.cos(geom.betaFI), np.sin(geom.betaFI)
    cMD, sMD = np.cos(geom.betaMD), np.sin(geom.betaMD)
    cMI, sMI = np.cos(geom.betaMI), np.sin(geom.betaMI)

    phi = np.empty((q.shape[0], N_SECONDARY))
    phi[:, 0] = c11 * s12 * q13 - R - xm + ct * cp * Rm
    phi[:, 1] = -c12 * q13 + sp * Rm
    phi[:, 2] = s11 * s12 * q13 - zm - st * cp * Rm
    phi[:, 3] = (c21 * s22 * q23 + R * cFD - xm
                 - ct * cp * cMD * Rm + ct * sp * sMD * Rm)
    phi[:, 4] = -c22 * q23 + R * sFD - sp * cMD * Rm - cp * sMD * Rm
    phi[:, 5] = (s21 * s22 * q23 - zm
                 + st * cp * cMD * Rm - st * sp * sMD * Rm)
    phi[:, 6] = (c31 * s32 * q33 + R * cFI - xm
                 - ct * cp * cMI * Rm - ct * sp * sMI * Rm)
    phi[:, 7] = -c32 * q33 - R * sFI - sp * cMI * Rm + cp * sMI * Rm
    phi[:, 8] = (s31 * s32 * q33 - zm
                 + st * cp * cMI * Rm + st * sp * sMI * Rm)
    phi[:, 9] = -s41 * q42 + ds - xm
    phi[:, 10] = c41 * q42 - zm
    return phi


def constraint_vector(geom: PlatformGeometry, q) -> np.ndarray:
    """Constraint residual vector for one coordinate set, shape (11,)."""
    return constraint_vector_many(geom, q)[0]


def constraint_jacobian_many(geom: PlatformGeometry, coords) -> np.ndarray:
    """Analytic Jacobian of the constraint residuals, shape (p, 11, 15)."""
    q = _coords_as_array(coords)
    p = q.shape[0]
    c = np.cos(q)
    s = np.sin(q)
    th, ps = q[:, 9], q[:, 10]
    rot_dt = rotation_matrices_dtheta(th, ps)
    rot_dp = rotation_matrices_dpsi(th, ps)
    local = geom.platform_anchors_local()
    dA_dt = np.einsum("pij,aj->pai", rot_dt, local)  # (p, 4, 3)
    dA_dp = np.einsum("pij,aj->pai", rot_dp, local)

    jac = np.zeros((p, N_SECONDARY, N_COORDS))
    for k in range(3):
        rows = slice(3 * k, 3 * k + 3)
        c1, s1 = c[:, 2 * k], s[:, 2 * k]
        c2, s2 = c[:, 2 * k + 1], s[:, 2 * k + 1]
        qlen = q[:, 11 + k]
        u = np.stack([c1 * s2, -c2, s1 * s2], axis=-1)
        du1 = np.stack([-s1 * s2, np.zeros(p), c1 * s2], axis=-1)
        du2 = np.stack([c1 * c2, s2, s1 * c2], axis=-1)
        jac[:, rows, 2 * k] = du1 * qlen[:, None]
        jac[:, rows, 2 * k + 1] = du2 * qlen[:, None]
        jac[:, rows, 11 + k] = u
        jac[:, 3 * k, 7] = -1.0
        jac[:, 3 * k + 2, 8] = -1.0
        jac[:, rows, 9] = -dA_dt[:, k, :]
        jac[:, rows, 10] = -dA_dp[:, k, :]
    c41, s41, q42 = c[:, 6], s[:, 6], q[:, 14]
    jac[:, 9, 6] = -c41 * q42
    jac[:, 9, 14] = -s41
    jac[:, 9, 7] = -1.0
    jac[:, 10, 6] = -s41 * q42
    jac[:, 10, 14] = c41
    jac[:, 10, 8] = -1.0
    return jac


def constraint_jacobian(geom: PlatformGeometry, q) -> np.ndarray:
    """Constraint Jacobian for one coordinate set, shape (11, 15)."""
    return constraint_jacobian_many(geom, q)[0]


# ---------------------------------------------------------------------------
# Forward Jacobian (actuator rates per unit task-space rates).
# ---------------------------------------------------------------------------

def forward_jacobian_many(geom: PlatformGeometry, poses) -> np.ndarray:
    """d(lengths)/d(xm, zm, theta, psi) per via point, shape (p, 4, 4)."""
    arr = poses_as_array(poses)
    u, lengths = _axes_and_lengths(geom, arr)
    rot_dt = rotation_matrices_dtheta(arr[:, 2], arr[:, 3])
    rot_dp = rotation_matrices_dpsi(arr[:, 2], arr[:, 3])
    local = geom.platform_anchors_local()
    dA_dt = np.einsum("pij,aj->pai", rot_dt, local)
    dA_dp = np.einsum("pij,aj->pai", rot_dp, local)
    out = np.empty((arr.shape[0], 4, 4))
    out[:, :, 0] = u[:, :, 0]
    out[:, :, 1] = u[:, :, 2]
    out[:, :, 2] = np.einsum("pai,pai->pa", u, dA_dt)
    out[:, :, 3] = np.einsum("pai,pai->pa", u, dA_dp)
    # The central strut has no platform lever arm: exact zeros.
    out[:, 3, 2] = 0.0
    out[:, 3, 3] = 0.0
    return out


def forward_jacobian(geom: PlatformGeometry, pose: PlatformPose) -> tuple[np.ndarray, float]:
    """Forward Jacobian and its determinant at one pose."""
    mat = forward_jacobian_many(geom, pose)[0]
    return mat, float(np.linalg.det(mat))


# ---------------------------------------------------------------------------
# Coordinate partitioning.
# ---------------------------------------------------------------------------

def r_star_many(geom: PlatformGeometry, coords) -> tuple[np.ndarray, np.ndarray]:
    """Velocity-distribution matrices along a batch, shape (p, 15, 4).

    Returns ``(r_star, det_secondary)``.  Raises :class:`NearSingular` when a
    secondary block is numerically non-invertible; relative-threshold checks
    against a path maximum are the caller's responsibility.
    """
    q = _coords_as_array(coords)
    jac = constraint_jacobian_many(geom, q)
    jac_s = jac[:, :, :N_SECONDARY]
    jac_i = jac[:, :, N_SECONDARY:]
    dets = np.linalg.det(jac_s)
    try:
        top = -np.linalg.solve(jac_s, jac_i)
    except np.linalg.LinAlgError as exc:
        raise NearSingular(f"secondary Jacobian block is singular: {exc}") from exc
    eye = np.broadcast_to(np.eye(N_ACTIVE), (q.shape[0], N_ACTIVE, N_ACTIVE))
    return np.concatenate([top, eye], axis=1), dets


def r_star(geom: PlatformGeometry, q, det_reference: float | None = None) -> np.ndarray:
    """15x4 matrix distributing active rates to all coordinate rates.

    ``det_reference`` is an optional magnitude (e.g. the largest secondary
    determinant along a path) against which Type-II proximity is tested.
    """
    mat, dets = r_star_many(geom, q)
    det = float(dets[0])
    if det_reference is not None and abs(det) < SINGULAR_DET_RATIO * abs(det_reference):
        raise NearSingular(
            f"secondary determinant {det:.3e} below threshold "
            f"{SINGULAR_DET_RATIO * abs(det_reference):.3e}"
        )
    if det == 0.0 or not np.isfinite(det):
        raise NearSingular(f"secondary determinant is {det}")
    return mat[0]


@dataclass(frozen=True)
class JacobianBundle:
    """All Jacobian-level quantities at one configuration."""

    phi: np.ndarray
    phi_q: np.ndarray
    phi_q_s: np.ndarray
    phi_q_i: np.ndarray
    r_star: np.ndarray
    phi_x: np.ndarray
    det_phi_x: float
    det_phi_q_s: float


def jacobian_bundle(geom: PlatformGeometry, q: FullCoordinates) -> JacobianBundle:
    """Evaluate residuals, Jacobian blocks and both determinants at ``q``."""
    arr = q.q[None, :]
    phi = constraint_vector_many(geom, arr)[0]
    jac = constraint_jacobian_many(geom, arr)[0]
    jac_s = jac[:, :N_SECONDARY]
    jac_i = jac[:, N_SECONDARY:]
    det_s = float(np.linalg.det(jac_s))
    try:
        top = -np.linalg.solve(jac_s, jac_i)
    except np.linalg.LinAlgError as exc:
        raise NearSingular(f"secondary Jacobian block is singular: {exc}") from exc
    rs = np.concatenate([top, np.eye(N_ACTIVE)], axis=0)
    phi_x = forward_jacobian_many(geom, q.q[None, 7:11])[0]
    return JacobianBundle(
        phi=phi,
        phi_q=jac,
        phi_q_s=jac_s,
        phi_q_i=jac_i,
        r_star=rs,
        phi_x=phi_x,
        det_phi_x=float(np.linalg.det(phi_x)),
        det_phi_q_s=det_s,
    )


# ---------------------------------------------------------------------------
# Forward kinematics by Newton iteration on the secondary coordinates.
# ---------------------------------------------------------------------------

def _wrap_angle(x: np.ndarray) -> np.ndarray:
    return np.arctan2(np.sin(x), np.cos(x))


def forward_kinematics(
    geom: PlatformGeometry,
    q_active,
    seed: PlatformPose,
    tol: float = 1e-10,
    max_iter: int = 50,
    cond_limit: float = 1e12,
) -> tuple[PlatformPose, np.ndarray]:
    """Solve the pose (and passive angles) that realizes given actuator lengths.

    Newton iteration on the 11 secondary coordinates with the secondary
    Jacobian block as iteration matrix; full steps with halving on residual
    increase.  Returns ``(pose, secondary_angles)``.

    Raises :class:`NoConvergence` if the residual tolerance is not met in
    ``max_iter`` iterations and :class:`IllConditioned` if the iteration
    matrix condition number exceeds ``cond_limit`` (both typically signal a
    nearby forward singularity or a poor seed).
    """
    q_active = np.asarray(q_active, dtype=float)
    if q_active.shape != (N_ACTIVE,) or np.any(q_active <= 0.0):
        raise ValueError("q_active must be four positive lengths")
    angles = secondary_angles_many(geom, seed)[0]
    state = np.concatenate([angles, seed.as_array(), q_active])

    res = constraint_vector_many(geom, state[None, :])[0]
    res_norm = float(np.max(np.abs(res)))
    for _ in range(max_iter):
        if res_norm < tol:
            break
        jac_s = constraint_jacobian_many(geom, state[None, :])[0][:, :N_SECONDARY]
        cond = np.linalg.cond(jac_s)
        if not np.isfinite(cond) or cond > cond_limit:
            raise IllConditioned(
                f"iteration matrix condition {cond:.3e} exceeds {cond_limit:.1e}"
            )
        step = np.linalg.solve(jac_s, -res)
        scale = 1.0
        for _ in range(25):
            trial = state.copy()
            trial[:N_SECONDARY] += scale * step
            trial_res = constraint_vector_many(geom, trial[None, :])[0]
            trial_norm = float(np.max(np.abs(trial_res)))
            if trial_norm < res_norm:
                break
            scale *= 0.5
        else:
            raise NoConvergence(
                f"line search stalled at residual {res_norm:.3e}"
            )
        state, res, res_norm = trial, trial_res, trial_norm
    else:
        if res_norm >= tol:
            raise NoConvergence(
                f"residual {res_norm:.3e} after {max_iter} iterations"
            )

    state[:7] = _wrap_angle(state[:7])
    state[9:11] = _wrap_angle(state[9:11])
    pose = PlatformPose.from_array(state[7:11])
    return pose, state[:7]


# ---------------------------------------------------------------------------
# Path sweeps.
# ---------------------------------------------------------------------------

def det_along_path(geom: PlatformGeometry, poses) -> np.ndarray:
    """Forward-Jacobian determinant at each pose of a path."""
    arr = poses_as_array(poses)
    lengths_from_radicands(active_length_radicands(geom, arr))
    return np.linalg.det(forward_jacobian_many(geom, arr))


def det_secondary_along_path(geom: PlatformGeometry, poses) -> np.ndarray:
    """Secondary-block determinant at the assembled coordinates of each pose."""
    coords = full_coordinates_many(geom, poses)
    jac = constraint_jacobian_many(geom, coords)
    return np.linalg.det(jac[:, :, :N_SECONDARY])
