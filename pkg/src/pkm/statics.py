"""Quasi-static inverse dynamics of the manipulator.

Gravity, patient wrench, actuator forces and prismatic friction are mapped
into the 15-coordinate space through the body-point Jacobians, then the
constraint reactions are eliminated by projecting onto the admissible
velocity space (coordinate partitioning).  Inertia is deliberately absent:
rehabilitation motions are slow enough that a static balance per via point
captures the actuator effort.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NearSingular
from .geometry import (
    ExternalWrench,
    FullCoordinates,
    N_ACTIVE,
    N_COORDS,
    N_SECONDARY,
    PhysicalParams,
    PlatformGeometry,
    rotation_matrices,
    rotation_matrices_dpsi,
    rotation_matrices_dtheta,
)
from .kinematics import (
    SINGULAR_DET_RATIO,
    _coords_as_array,
    constraint_jacobian_many,
    forward_jacobian_many,
    full_coordinates_many,
)

# Points whose secondary determinant falls below this fraction of the path
# maximum are flagged as near a forward singularity (forces still reported).
VICINITY_DET_RATIO = 1e-3


@dataclass(frozen=True)
class BodyJacobians:
    """Position Jacobians (3 x 15) of every mass point plus the platform
    angular-velocity map."""

    cyl: np.ndarray      # (4, 3, 15)
    rod: np.ndarray      # (4, 3, 15)
    platform: np.ndarray  # (3, 15)
    point_d: np.ndarray   # (3, 15)
    omega: np.ndarray     # (3, 15)


def _body_jacobians_many(geom: PlatformGeometry, phys: PhysicalParams, coords) -> dict:
    """Batched body-point Jacobians, leading via-point axis."""
    q = _coords_as_array(coords)
    p = q.shape[0]
    c, s = np.cos(q), np.sin(q)

    cyl = np.zeros((p, 4, 3, N_COORDS))
    rod = np.zeros((p, 4, 3, N_COORDS))
    for k in range(3):
        c1, s1 = c[:, 2 * k], s[:, 2 * k]
        c2, s2 = c[:, 2 * k + 1], s[:, 2 * k + 1]
        qlen = q[:, 11 + k]
        u = np.stack([c1 * s2, -c2, s1 * s2], axis=-1)
        du1 = np.stack([-s1 * s2, np.zeros(p), c1 * s2], axis=-1)
        du2 = np.stack([c1 * c2, s2, s1 * c2], axis=-1)
        cyl[:, k, :, 2 * k] = phys.com_cyl[k] * du1
        cyl[:, k, :, 2 * k + 1] = phys.com_cyl[k] * du2
        arm = (qlen - phys.com_rod[k])[:, None]
        rod[:, k, :, 2 * k] = arm * du1
        rod[:, k, :, 2 * k + 1] = arm * du2
        rod[:, k, :, 11 + k] = u
    c41, s41, q42 = c[:, 6], s[:, 6], q[:, 14]
    w = np.stack([-s41, np.zeros(p), c41], axis=-1)
    dw = np.stack([-c41, np.zeros(p), -s41], axis=-1)
    cyl[:, 3, :, 6] = phys.com_cyl[3] * dw
    rod[:, 3, :, 6] = (q42 - phys.com_rod[3])[:, None] * dw
    rod[:, 3, :, 14] = w

    th, ps = q[:, 9], q[:, 10]
    rot_dt = rotation_matrices_dtheta(th, ps)
    rot_dp = rotation_matrices_dpsi(th, ps)

    def _point_jac(local):
        jac = np.zeros((p, 3, N_COORDS))
        jac[:, 0, 7] = 1.0
        jac[:, 2, 8] = 1.0
        jac[:, :, 9] = rot_dt @ local
        jac[:, :, 10] = rot_dp @ local
        return jac

    platform = _point_jac(phys.com_platform)
    point_d = _point_jac(phys.d_point)

    omega = np.zeros((p, 3, N_COORDS))
    omega[:, 1, 9] = 1.0
    omega[:, 0, 10] = s[:, 9]
    omega[:, 2, 10] = c[:, 9]
    return {"cyl": cyl, "rod": rod, "platform": platform, "point_d": point_d, "omega": omega}


def com_velocity_jacobians(geom: PlatformGeometry, phys: PhysicalParams, q) -> BodyJacobians:
    """Jacobians of every centre of mass and of the wrench application point."""
    jacs = _body_jacobians_many(geom, phys, q)
    return BodyJacobians(
        cyl=jacs["cyl"][0],
        rod=jacs["rod"][0],
        platform=jacs["platform"][0],
        point_d=jacs["point_d"][0],
        omega=jacs["omega"][0],
    )


def q_grav_many(geom: PlatformGeometry, phys: PhysicalParams, coords) -> np.ndarray:
    """Generalized gravity forces, shape (p, 15).

    Only the vertical Jacobian rows contribute since gravity acts along -Z.
    """
    jacs = _body_jacobians_many(geom, phys, coords)
    out = -phys.g * (
        np.einsum("a,pan->pn", phys.mass_cyl, jacs["cyl"][:, :, 2, :])
        + np.einsum("a,pan->pn", phys.mass_rod, jacs["rod"][:, :, 2, :])
        + phys.mass_platform * jacs["platform"][:, 2, :]
    )
    return out


def q_grav(geom: PlatformGeometry, phys: PhysicalParams, q) -> np.ndarray:
    return q_grav_many(geom, phys, q)[0]


def q_ext_many(geom: PlatformGeometry, phys: PhysicalParams, coords, wrenches) -> np.ndarray:
    """Generalized forces of the platform wrench, shape (p, 15).

    ``wrenches`` is (p, 6) with force then torque, both in the mobile frame;
    they are rotated to the fixed frame before projection.
    """
    q = _coords_as_array(coords)
    w = np.asarray(wrenches, dtype=float)
    if w.ndim == 1:
        w = np.broadcast_to(w, (q.shape[0], 6))
    rot = rotation_matrices(q[:, 9], q[:, 10])
    force = np.einsum("pij,pj->pi", rot, w[:, :3])
    torque = np.einsum("pij,pj->pi", rot, w[:, 3:])
    jacs = _body_jacobians_many(geom, phys, q)
    return (np.einsum("pi,pin->pn", force, jacs["point_d"])
            + np.einsum("pi,pin->pn", torque, jacs["omega"]))


def q_ext(geom: PlatformGeometry, phys: PhysicalParams, q, wrench: ExternalWrench) -> np.ndarray:
    return q_ext_many(geom, phys, q, wrench.as_array())[0]


def q_fric_many(phys: PhysicalParams, qdot_active) -> np.ndarray:
    """Generalized friction forces, shape (p, 15).

    Coulomb plus viscous, opposing each actuator's extension rate; zero at
    rest (sign(0) = 0).
    """
    qd = np.asarray(qdot_active, dtype=float)
    if qd.ndim == 1:
        qd = qd[None, :]
    out = np.zeros((qd.shape[0], N_COORDS))
    out[:, N_SECONDARY:] = -np.sign(qd) * (phys.mu_c + phys.mu_v * np.abs(qd))
    return out


def q_fric(geom: PlatformGeometry, phys: PhysicalParams, q, q_dot_active) -> np.ndarray:
    return q_fric_many(phys, q_dot_active)[0]


def q_act_matrix(geom: PlatformGeometry, phys: PhysicalParams, q) -> np.ndarray:
    """15 x 4 map from actuator force magnitudes to generalized forces.

    Each actuator pushes its rod along the limb axis; projected onto the
    coordinate basis this is exactly a unit entry in the actuator's own
    extension slot (the axial force is power-conjugate to the extension
    rate), which the test suite cross-checks against the rod-Jacobian
    projection.
    """
    mat = np.zeros((N_COORDS, N_ACTIVE))
    mat[N_SECONDARY:, :] = np.eye(N_ACTIVE)
    return mat


@dataclass(frozen=True)
class StaticsSolution:
    """Actuator forces solving the static balance at one configuration."""

    forces: np.ndarray
    lagrange_multipliers: np.ndarray
    residual: float
    power: np.ndarray
    near_singular: bool = False


def _partition_solve(jac, q_passive):
    """Forces and multipliers from the projected equation, batched.

    ``jac`` is (p, 11, 15), ``q_passive`` the summed gravity/external/friction
    generalized forces (p, 15).  Returns forces (p, 4), multipliers (p, 11)
    and the secondary-block determinants (p,).
    """
    jac_s = jac[:, :, :N_SECONDARY]
    jac_i = jac[:, :, N_SECONDARY:]
    dets = np.linalg.det(jac_s)
    top = -np.linalg.solve(jac_s, jac_i)          # (p, 11, 4)
    # R*^T Q = top^T q_s + q_i ; actuator slots contribute the identity.
    proj = np.einsum("pna,pn->pa", top, q_passive[:, :N_SECONDARY]) + q_passive[:, N_SECONDARY:]
    forces = -proj
    q_total = q_passive.copy()
    q_total[:, N_SECONDARY:] += forces
    lam = np.linalg.solve(np.swapaxes(jac_s, 1, 2), -q_total[:, :N_SECONDARY, None])[..., 0]
    return forces, lam, dets, q_total


def inverse_statics(
    geom: PlatformGeometry,
    phys: PhysicalParams,
    q,
    q_dot_active,
    wrench: ExternalWrench,
    det_reference: float | None = None,
) -> StaticsSolution:
    """Solve the four actuator forces at one configuration.

    ``det_reference`` optionally supplies the path-maximum secondary
    determinant; when the local determinant falls below the relative
    singularity threshold a :class:`NearSingular` error is raised (actuator
    forces are unbounded at a Type-II configuration).
    """
    arr = _coords_as_array(q)
    jac = constraint_jacobian_many(geom, arr)
    qd = np.asarray(q_dot_active, dtype=float).reshape(1, N_ACTIVE)
    passive = (q_grav_many(geom, phys, arr)
               + q_ext_many(geom, phys, arr, wrench.as_array())
               + q_fric_many(phys, qd))
    det_s = float(np.linalg.det(jac[0, :, :N_SECONDARY]))
    ref = abs(det_reference) if det_reference is not None else 0.0
    if (ref > 0.0 and abs(det_s) < SINGULAR_DET_RATIO * ref) or det_s == 0.0:
        raise NearSingular(
            f"secondary determinant {det_s:.3e} too close to a forward singularity"
        )
    forces, lam, dets, q_total = _partition_solve(jac, passive)
    top = -np.linalg.solve(jac[:, :, :N_SECONDARY], jac[:, :, N_SECONDARY:])
    proj_residual = np.einsum("pna,pn->pa", top, q_total[:, :N_SECONDARY]) + q_total[:, N_SECONDARY:]
    return StaticsSolution(
        forces=forces[0],
        lagrange_multipliers=lam[0],
        residual=float(np.max(np.abs(proj_residual))),
        power=forces[0] * qd[0],
        near_singular=ref > 0.0 and abs(det_s) < VICINITY_DET_RATIO * ref,
    )


def path_statics(
    geom: PlatformGeometry,
    phys: PhysicalParams,
    poses,
    pose_rates,
    wrenches,
) -> dict:
    """Batched static solve along a pose path.

    Returns a dict of arrays: ``forces`` (p, 4), ``power`` (p, 4),
    ``multipliers`` (p, 11), ``residual`` (p,), ``qdot_active`` (p, 4),
    ``det_secondary`` (p,), ``near_singular`` (p,) and ``solvable`` (p,).
    Points within the hard singularity threshold get NaN forces and are
    flagged rather than raising.
    """
    coords = full_coordinates_many(geom, poses)
    jac = constraint_jacobian_many(geom, coords)
    rates = np.asarray(pose_rates, dtype=float)
    phix = forward_jacobian_many(geom, coords[:, 7:11])
    qdot = np.einsum("pij,pj->pi", phix, rates)
    w = np.asarray(wrenches, dtype=float)
    if w.ndim == 1:
        w = np.broadcast_to(w, (coords.shape[0], 6))
    passive = (q_grav_many(geom, phys, coords)
               + q_ext_many(geom, phys, coords, w)
               + q_fric_many(phys, qdot))

    jac_s = jac[:, :, :N_SECONDARY]
    dets = np.linalg.det(jac_s)
    ref = float(np.max(np.abs(dets))) if dets.size else 0.0
    solvable = np.abs(dets) >= SINGULAR_DET_RATIO * ref
    near = np.abs(dets) < VICINITY_DET_RATIO * ref

    p = coords.shape[0]
    forces = np.full((p, 4), np.nan)
    lam = np.full((p, N_SECONDARY), np.nan)
    residual = np.full(p, np.nan)
    if np.any(solvable):
        idx = np.where(solvable)[0]
        f, l, _, q_total = _partition_solve(jac[idx], passive[idx])
        forces[idx] = f
        lam[idx] = l
        full_res = q_total + np.einsum("pnm,pn->pm", jac[idx], l)
        residual[idx] = np.max(np.abs(full_res), axis=1)
    return {
        "forces": forces,
        "power": forces * qdot,
        "multipliers": lam,
        "residual": residual,
        "qdot_active": qdot,
        "det_secondary": dets,
        "near_singular": near,
        "solvable": solvable,
    }


def forces_along_path(geom: PlatformGeometry, phys: PhysicalParams, via_points) -> list[StaticsSolution]:
    """Per-via-point static solutions for a trajectory.

    ``via_points`` is a :class:`~pkm.trajectories.ViaPointSeries` (or any
    object with ``poses``, ``rates`` and ``wrenches`` arrays).  Near-singular
    points are flagged, never fatal.
    """
    res = path_statics(geom, phys, via_points.poses, via_points.rates, via_points.wrenches)
    out = []
    for i in range(res["forces"].shape[0]):
        out.append(StaticsSolution(
            forces=res["forces"][i],
            lagrange_multipliers=res["multipliers"][i],
            residual=float(res["residual"][i]),
            power=res["power"][i],
            near_singular=bool(res["near_singular"][i] or not res["solvable"][i]),
        ))
    return out
