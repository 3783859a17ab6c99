"""Ground-truth trajectories and noisy sensor synthesis.

A :class:`Scenario` fixes everything a Monte-Carlo run needs: time grid,
reference directions, noise levels, the initial attitude, the analytic
angular-rate profile and the RNG seed.  :func:`propagate_truth` integrates
the attitude kinematics on the group with a midpoint-evaluated exponential
step, and :func:`synthesize_measurements` corrupts the true signals with
white Gaussian noise from a seeded numpy PCG64 generator, so identical
seeds give bit-identical measurement streams.

Noise convention: the quoted standard deviations are applied per sample at
the scenario's own time step (no sqrt(dt) scaling), i.e. the gyro reading
at each grid time is ``omega_true + sigma_process * n`` with ``n`` standard
normal per axis, and each measured direction is ``R.T @ r_i`` plus
``sigma_meas`` noise per axis, left unnormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .so3 import euler_to_rotation, exp_so3

__all__ = [
    "SQRT_PI_12",
    "UnknownProfile",
    "UnknownScenario",
    "Scenario",
    "SampleFrame",
    "omega_true",
    "propagate_truth",
    "synthesize_measurements",
    "builtin_scenario",
    "load_scenario",
    "save_scenario",
]

# Per-axis noise std shared by both built-in cases, sqrt(pi/12) ~ 0.5116.
SQRT_PI_12 = math.sqrt(math.pi / 12.0)


class UnknownProfile(ValueError):
    """Angular-rate profile tag is not registered."""


class UnknownScenario(ValueError):
    """No built-in scenario with that name."""


def omega_true(t, profile: str = "caseA") -> np.ndarray:
    """True body angular rate at time ``t`` (scalar or array), rad/s.

    Profiles:
      - ``caseA``: (cos 3t, 0.1 sin 2t, -cos t), the benchmark trajectory
        reused by both built-in cases.
      - ``zero``: rest.
      - ``constant:x,y,z``: fixed rate, coefficients parsed from the tag.
    """
    t = np.asarray(t, dtype=float)
    if profile == "caseA":
        out = np.stack([np.cos(3.0 * t), 0.1 * np.sin(2.0 * t), -np.cos(t)], axis=-1)
    elif profile == "zero":
        out = np.zeros(t.shape + (3,))
    elif profile.startswith("constant:"):
        coeffs = [float(s) for s in profile.split(":", 1)[1].split(",")]
        if len(coeffs) != 3:
            raise UnknownProfile(f"constant profile needs 3 coefficients: {profile!r}")
        out = np.broadcast_to(np.array(coeffs), t.shape + (3,)).copy()
    else:
        raise UnknownProfile(f"unregistered angular-rate profile {profile!r}")
    return out


@dataclass(frozen=True, eq=False)
class Scenario:
    """Immutable description of one simulation setup."""

    duration: float  # s
    dt: float  # s
    r_list: tuple  # reference directions, unit 3-vectors
    sigma_process: float  # gyro noise std, rad/s
    sigma_meas: float  # direction noise std per axis, rad
    euler0: tuple  # initial attitude as (yaw, pitch, roll), rad
    omega_profile: str = "caseA"
    seed: int = 0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration!r}")
        if not 0 < self.dt <= self.duration:
            raise ValueError(f"dt must lie in (0, duration], got {self.dt!r}")
        if self.sigma_process < 0 or self.sigma_meas < 0:
            raise ValueError("noise standard deviations must be nonnegative")
        r_list = tuple(np.asarray(r, dtype=float) for r in self.r_list)
        if len(r_list) < 1:
            raise ValueError("at least one reference direction is required")
        for r in r_list:
            if abs(float(np.linalg.norm(r)) - 1.0) > 1e-9:
                raise ValueError(f"reference direction {r} is not unit length")
        for i in range(len(r_list)):
            for j in range(i + 1, len(r_list)):
                if float(np.linalg.norm(np.cross(r_list[i], r_list[j]))) <= 1e-6:
                    raise ValueError(
                        f"reference directions {i} and {j} are collinear"
                    )
        object.__setattr__(self, "r_list", r_list)
        object.__setattr__(self, "euler0", tuple(float(a) for a in self.euler0))
        # fail early on a bad profile tag
        omega_true(0.0, self.omega_profile)

    @property
    def R0(self) -> np.ndarray:
        """Initial true attitude built from the stored Euler angles."""
        return euler_to_rotation(*self.euler0)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt


@dataclass
class SampleFrame:
    """One time step of sensor data plus the truth that generated it."""

    t: float
    omega_meas: np.ndarray  # gyro reading, rad/s
    y_list: tuple  # measured directions, noisy and unnormalized
    R_true: np.ndarray


def propagate_truth(scenario: Scenario) -> list:
    """True attitude at every grid time, starting from ``scenario.R0``.

    Integrates ``Rdot = R hat(omega_true)`` with the Lie-Euler exponential
    step evaluated at the interval midpoint,
    ``R_{k+1} = R_k @ exp_so3(dt * omega_true(t_k + dt/2))``,
    which stays on the group exactly and is second-order accurate.
    """
    dt = scenario.dt
    profile = scenario.omega_profile
    R = scenario.R0
    out = [R]
    for k in range(scenario.n_steps - 1):
        w = omega_true(k * dt + 0.5 * dt, profile)
        R = R @ exp_so3(dt * w)
        out.append(R)
    return out


def synthesize_measurements(truth: list, scenario: Scenario) -> list:
    """Corrupt a truth trajectory into per-step gyro and direction readings.

    All randomness comes from one ``numpy.random.default_rng(seed)``
    (PCG64) generator: first the (n, 3) gyro noise block, then the
    (n, p, 3) direction noise block, so a fixed seed reproduces the
    streams bit for bit.
    """
    n = len(truth)
    p = len(scenario.r_list)
    t = np.arange(n) * scenario.dt
    rng = np.random.default_rng(scenario.seed)
    gyro_noise = rng.standard_normal((n, 3))
    dir_noise = rng.standard_normal((n, p, 3))
    omega = omega_true(t, scenario.omega_profile) + scenario.sigma_process * gyro_noise
    frames = []
    for k in range(n):
        Rt = truth[k].T
        y = tuple(
            Rt @ scenario.r_list[i] + scenario.sigma_meas * dir_noise[k, i]
            for i in range(p)
        )
        frames.append(SampleFrame(float(t[k]), omega[k], y, truth[k]))
    return frames


def builtin_scenario(name: str) -> Scenario:
    """The two built-in benchmark cases.

    Both run 30 s at 100 Hz from the large initial attitude given by the
    Euler angles (pi, -pi/2, pi/2), with two orthogonal reference
    directions.  caseA uses sigma_process = sigma_meas = sqrt(pi/12);
    caseB doubles the process noise and halves the measurement noise.
    """
    base = dict(
        duration=30.0,
        dt=0.01,
        r_list=(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])),
        euler0=(math.pi, -math.pi / 2.0, math.pi / 2.0),
        omega_profile="caseA",
        seed=0,
    )
    if name == "caseA":
        return Scenario(sigma_process=SQRT_PI_12, sigma_meas=SQRT_PI_12, **base)
    if name == "caseB":
        return Scenario(
            sigma_process=2.0 * SQRT_PI_12, sigma_meas=0.5 * SQRT_PI_12, **base
        )
    raise UnknownScenario(f"no built-in scenario named {name!r}")


def save_scenario(scenario: Scenario, path) -> None:
    """Write a scenario as a plain-text ``key = value`` file.

    Floats are written with ``repr`` so a round trip through
    :func:`load_scenario` is lossless.
    """
    lines = [
        f"duration = {scenario.duration!r}",
        f"dt = {scenario.dt!r}",
        f"sigma_process = {scenario.sigma_process!r}",
        f"sigma_meas = {scenario.sigma_meas!r}",
    ]
    for i, r in enumerate(scenario.r_list, start=1):
        lines.append(f"r{i} = " + ",".join(repr(float(x)) for x in r))
    lines.append("euler0 = " + ",".join(repr(a) for a in scenario.euler0))
    lines.append(f"profile = {scenario.omega_profile}")
    lines.append(f"seed = {scenario.seed}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_scenario(path) -> Scenario:
    """Parse a ``key = value`` scenario file written by :func:`save_scenario`.

    Blank lines and ``#`` comments are ignored.  Direction keys r1, r2, ...
    are collected in numeric order.
    """
    kv = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed scenario line {raw!r}")
        key, value = line.split("=", 1)
        kv[key.strip()] = value.strip()
    r_keys = sorted(
        (k for k in kv if k.startswith("r") and k[1:].isdigit()),
        key=lambda k: int(k[1:]),
    )
    try:
        return Scenario(
            duration=float(kv["duration"]),
            dt=float(kv["dt"]),
            r_list=tuple(
                np.array([float(x) for x in kv[k].split(",")]) for k in r_keys
            ),
            sigma_process=float(kv["sigma_process"]),
            sigma_meas=float(kv["sigma_meas"]),
            euler0=tuple(float(x) for x in kv["euler0"].split(",")),
            omega_profile=kv.get("profile", "caseA"),
            seed=int(kv.get("seed", "0")),
        )
    except KeyError as e:
        raise ValueError(f"scenario file {path} is missing key {e.args[0]!r}") from e
