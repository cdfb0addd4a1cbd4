"""Rehabilitation test trajectories as discretized via-point series.

Eight trajectories cover the four path shapes (horizontal, vertical and
inclined lines, ellipse) in constant- and variable-orientation variants.
Only Tr8's parameters are published; the remaining seven are frozen
constants produced by ``scripts/calibrate_trajectories.py``, which searches
small parameter grids until each trajectory reproduces its catalogued
difficulty (forward-singularity crossing and/or actuator-range violation)
under the initial geometry and the default physical parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EllipseDomain
from .geometry import ExternalWrench, PlatformPose

KINDS = ("horizontal-line", "vertical-line", "inclined-line", "ellipse")
ORIENTATIONS = ("constant", "variable")

# Wrench applied by the patient in every catalogued trajectory (mobile frame).
DEFAULT_WRENCH = ExternalWrench(force=np.array([45.0, 0.0, -45.0]))


@dataclass(frozen=True)
class TrajectorySpec:
    """Parametric description of one test trajectory.

    Line kinds move the mobile origin from (x0, z0) at constant speed v0;
    the inclined direction is (a, b) normalized, horizontal and vertical
    fix it.  The ellipse kind advances x at v0 and sets the height to
    z0 + a*sqrt(1 - (x/b)^2).  Orientation evolves linearly from (theta0,
    psi0) at rates (omega_theta, omega_psi); ``constant`` requires zero
    rates.
    """

    kind: str
    orientation: str
    x0: float = 0.0
    z0: float = 0.5
    v0: float = 0.0
    a: float = 0.0
    b: float = 0.0
    theta0: float = 0.0
    psi0: float = 0.0
    omega_theta: float = 0.0
    omega_psi: float = 0.0
    duration: float = 20.0
    dt: float = 0.3
    wrench: ExternalWrench = field(default_factory=lambda: DEFAULT_WRENCH)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation mode {self.orientation!r}")
        if not (self.dt > 0.0 and self.duration > 0.0):
            raise ValueError("duration and dt must be positive")
        if self.orientation == "constant" and (self.omega_theta != 0.0 or self.omega_psi != 0.0):
            raise ValueError("constant orientation requires zero angular rates")
        if self.kind == "ellipse" and self.b == 0.0:
            raise ValueError("ellipse kind requires a nonzero semi-axis b")
        if self.kind == "inclined-line" and self.a == 0.0 and self.b == 0.0:
            raise ValueError("inclined-line kind requires a direction (a, b)")


class ViaPoint(NamedTuple):
    t: float
    pose: PlatformPose
    rates: np.ndarray
    wrench: ExternalWrench


@dataclass(frozen=True)
class ViaPointSeries:
    """Uniformly sampled trajectory: times, poses, pose rates and wrench."""

    t: np.ndarray           # (p,)
    poses: np.ndarray       # (p, 4) columns xm, zm, theta, psi
    rates: np.ndarray       # (p, 4) exact time derivatives of the pose laws
    wrenches: np.ndarray    # (p, 6) force then torque, mobile frame
    spec: TrajectorySpec | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("need at least one via point")
        if t.size > 1:
            steps = np.diff(t)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise ValueError("via-point times must increase uniformly")

    def __len__(self) -> int:
        return self.t.size

    @property
    def points(self) -> list[ViaPoint]:
        return [
            ViaPoint(
                t=float(self.t[i]),
                pose=PlatformPose.from_array(self.poses[i]),
                rates=self.rates[i].copy(),
                wrench=ExternalWrench(force=self.wrenches[i, :3], torque=self.wrenches[i, 3:]),
            )
            for i in range(len(self))
        ]


def _line_direction(spec: TrajectorySpec) -> np.ndarray:
    if spec.kind == "horizontal-line":
        return np.array([1.0, 0.0])
    if spec.kind == "vertical-line":
        return np.array([0.0, 1.0])
    d = np.array([spec.a, spec.b])
    return d / np.linalg.norm(d)


def _evaluate(spec: TrajectorySpec, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pose laws and their exact time derivatives at the given times."""
    if spec.kind == "ellipse":
        xm = spec.x0 + spec.v0 * t
        ratio = xm / spec.b
        radicand = 1.0 - ratio**2
        if np.any(radicand < 1e-12):
            bad = int(np.argmax(radicand < 1e-12))
            raise EllipseDomain(
                f"|x/b| reaches {abs(ratio[bad]):.6f} at t={t[bad]:.3f}s; "
                "the height law leaves its domain"
            )
        root = np.sqrt(radicand)
        zm = spec.z0 + spec.a * root
        xdot = np.full_like(t, spec.v0)
        zdot = -spec.a * xm * xdot / (spec.b**2 * root)
    else:
        d = _line_direction(spec)
        xm = spec.x0 + spec.v0 * t * d[0]
        zm = spec.z0 + spec.v0 * t * d[1]
        xdot = np.full_like(t, spec.v0 * d[0])
        zdot = np.full_like(t, spec.v0 * d[1])
    theta = spec.theta0 + spec.omega_theta * t
    psi = spec.psi0 + spec.omega_psi * t
    poses = np.column_stack([xm, zm, theta, psi])
    rates = np.column_stack([
        xdot, zdot,
        np.full_like(t, spec.omega_theta),
        np.full_like(t, spec.omega_psi),
    ])
    return poses, rates


def build(spec: TrajectorySpec) -> ViaPointSeries:
    """Discretize a trajectory on the grid t_k = k*dt, k = 0..floor(T/dt)."""
    count = int(math.floor(spec.duration / spec.dt + 1e-9)) + 1
    t = np.arange(count) * spec.dt
    poses, rates = _evaluate(spec, t)
    wrenches = np.broadcast_to(spec.wrench.as_array(), (count, 6)).copy()
    return ViaPointSeries(t=t, poses=poses, rates=rates, wrenches=wrenches, spec=spec)


def resample(series: ViaPointSeries, p: int) -> ViaPointSeries:
    """Resample to ``p`` uniformly spaced via points, endpoints preserved.

    Series carrying their generating spec are re-evaluated analytically at
    the new times; otherwise the nearest original indices are taken.
    """
    if p < 2:
        raise ValueError("need at least two via points")
    t0, t1 = float(series.t[0]), float(series.t[-1])
    t = np.linspace(t0, t1, p)
    if series.spec is not None:
        poses, rates = _evaluate(series.spec, t)
        wrenches = np.broadcast_to(series.spec.wrench.as_array(), (p, 6)).copy()
        return ViaPointSeries(t=t, poses=poses, rates=rates, wrenches=wrenches, spec=series.spec)
    idx = np.round(np.linspace(0, len(series) - 1, p)).astype(int)
    return ViaPointSeries(
        t=series.t[idx], poses=series.poses[idx], rates=series.rates[idx],
        wrenches=series.wrenches[idx], spec=None,
    )


def tr8_spec() -> TrajectorySpec:
    """The published variable-orientation ellipse (the only printed set)."""
    return TrajectorySpec(
        kind="ellipse", orientation="variable",
        x0=-0.15, z0=0.25, v0=0.015, a=0.40, b=0.20,
        theta0=math.radians(30.0), psi0=0.0,
        omega_theta=-0.05, omega_psi=-0.05,
        duration=20.0, dt=0.30,
        wrench=DEFAULT_WRENCH,
    )


def catalog() -> dict[str, TrajectorySpec]:
    """The eight catalogued test trajectories.

    Tr1's start height and X-range follow the published physical-robot run;
    Tr2-Tr7 are frozen outputs of the calibration search (see module
    docstring).  Difficulty realized under the initial geometry and default
    parameters: Tr1, Tr2, Tr4 cross a forward singularity; Tr3, Tr5 violate
    a stroke limit without a crossing; Tr6, Tr7 do both; Tr8 crosses and
    exceeds the actuator inclination limit.
    """
    deg = math.radians
    return {
        "Tr1": TrajectorySpec(
            kind="horizontal-line", orientation="constant",
            x0=-0.048, z0=0.631, v0=0.02, duration=10.0, dt=0.15,
        ),
        "Tr2": TrajectorySpec(
            kind="horizontal-line", orientation="variable",
            x0=-0.10, z0=0.60, v0=0.02,
            theta0=deg(20.0), psi0=0.0, omega_theta=-0.05, omega_psi=-0.05,
            duration=10.0, dt=0.15,
        ),
        "Tr3": TrajectorySpec(
            kind="vertical-line", orientation="constant",
            x0=-0.10, z0=0.42, v0=0.01, duration=20.0, dt=0.30,
        ),
        "Tr4": TrajectorySpec(
            kind="vertical-line", orientation="variable",
            x0=-0.02, z0=0.50, v0=0.01,
            theta0=deg(30.0), psi0=0.0, omega_theta=-0.05, omega_psi=-0.05,
            duration=20.0, dt=0.30,
        ),
        "Tr5": TrajectorySpec(
            kind="inclined-line", orientation="constant",
            x0=-0.10, z0=0.435, v0=0.012, a=0.3, b=0.7, duration=15.0, dt=0.25,
        ),
        "Tr6": TrajectorySpec(
            kind="inclined-line", orientation="variable",
            x0=-0.08, z0=0.44, v0=0.012, a=0.6, b=0.6,
            theta0=deg(20.0), psi0=0.0, omega_theta=-0.05, omega_psi=-0.05,
            duration=15.0, dt=0.25,
        ),
        "Tr7": TrajectorySpec(
            kind="ellipse", orientation="constant",
            x0=-0.15, z0=0.44, v0=0.015, a=0.40, b=0.20,
            theta0=deg(30.0), psi0=0.0, duration=20.0, dt=0.30,
        ),
        "Tr8": tr8_spec(),
    }


CSV_COLUMNS = (
    "t", "xm", "zm", "theta_deg", "psi_deg",
    "xdot", "zdot", "thetadot", "psidot",
    "Fx", "Fy", "Fz", "Tx", "Ty", "Tz",
)


def series_rows(series: ViaPointSeries) -> np.ndarray:
    """Matrix of CSV rows in the column order of ``CSV_COLUMNS``.

    Orientation angles are exported in degrees; rates stay in rad/s.
    """
    return np.column_stack([
        series.t,
        series.poses[:, 0], series.poses[:, 1],
        np.degrees(series.poses[:, 2]), np.degrees(series.poses[:, 3]),
        series.rates,
        series.wrenches,
    ])
