"""Four attitude estimators behind one stepping interface.

Recursive filters (stepped once per sample frame):

  - ``hinf_step``: the worst-case filter on SO(3).  Attitude follows
    ``Rdot_hat = R_hat hat(omega - P l)`` with the body-frame innovation
    ``l = sum_i k_i^-2 (y_hat_i x y_i)``; the gain P obeys a Riccati-type
    equation whose extra ``P^2 / gamma^2`` term makes the filter more
    aggressive as the L2-gain bound gamma shrinks.  Too small a gamma and
    the gain escapes to infinity, raising :class:`FilterDiverged`.
  - ``mekf_step``: the continuous-time multiplicative EKF on the unit
    quaternion, same innovation, gain equation without the gamma term.
  - ``game_step``: the geometric approximate minimum-energy filter, same
    attitude update, gain equation with curvature correction terms.

``triad_estimate`` is the memoryless two-vector baseline.

Time discretization: attitude advances by the exact exponential on the
group (quaternion product for the MEKF); P advances by explicit Euler with
post-symmetrization, or by the classic 4-stage Runge-Kutta scheme when
``p_integrator="rk4"`` (rate inputs held fixed over the step).  Steps are
pure functions of (state, frame), so distinct runs can execute
concurrently without shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .so3 import e_map, exp_so3, hat, project_to_so3, sym_proj

__all__ = [
    "FilterDiverged",
    "DegenerateDirections",
    "FilterParams",
    "UnitQuaternion",
    "FilterState",
    "quat_multiply",
    "quat_exp",
    "quat_to_rotation",
    "innovation",
    "hinf_riccati_rhs",
    "hinf_step",
    "mekf_step",
    "game_step",
    "triad_estimate",
]

# A gain entry beyond this is treated as Riccati blow-up.
GAIN_LIMIT = 1e6


class FilterDiverged(RuntimeError):
    """Gain matrix lost positive definiteness or blew up mid-run."""

    def __init__(self, message: str, t: Optional[float] = None):
        super().__init__(message)
        self.t = t


class DegenerateDirections(ValueError):
    """Vector pair too close to collinear for a TRIAD solution."""


@dataclass(frozen=True)
class FilterParams:
    """Tuning set shared by the recursive filters.

    ``g`` scales the process disturbance (the MEKF reads it as the gyro
    noise std), ``k_list`` scales each measurement error (MEKF: per-sensor
    noise std), ``gamma`` is the L2-gain bound of the worst-case filter
    (``math.inf`` disables the gamma term and is ignored by the MEKF and
    GAME updates), ``r_list`` holds the known reference directions.
    """

    g: float
    k_list: tuple
    gamma: float
    r_list: tuple

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("g must be nonnegative")
        if any(k <= 0 for k in self.k_list):
            raise ValueError("every k_i must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive (math.inf allowed)")
        if len(self.k_list) != len(self.r_list):
            raise ValueError("k_list and r_list lengths differ")
        object.__setattr__(self, "k_list", tuple(float(k) for k in self.k_list))
        object.__setattr__(
            self, "r_list", tuple(np.asarray(r, dtype=float) for r in self.r_list)
        )


@dataclass
class UnitQuaternion:
    """Attitude quaternion split into vector and scalar parts."""

    q_v: np.ndarray
    q_s: float

    def normalized(self) -> "UnitQuaternion":
        n = math.sqrt(float(self.q_v @ self.q_v) + self.q_s * self.q_s)
        return UnitQuaternion(self.q_v / n, self.q_s / n)

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(np.zeros(3), 1.0)


@dataclass
class FilterState:
    """Estimator state: attitude (matrix or quaternion), gain P, time."""

    P: np.ndarray
    t: float
    R_hat: Optional[np.ndarray] = None
    q_hat: Optional[UnitQuaternion] = None

    def attitude(self) -> np.ndarray:
        """Rotation-matrix view of the current attitude estimate."""
        if self.R_hat is not None:
            return self.R_hat
        return quat_to_rotation(self.q_hat)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross carries too much dispatch overhead for a 100 Hz x 50-run loop
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def quat_multiply(q: UnitQuaternion, p: UnitQuaternion) -> UnitQuaternion:
    """Hamilton product ``q (x) p``."""
    v = q.q_s * p.q_v + p.q_s * q.q_v + _cross(q.q_v, p.q_v)
    s = q.q_s * p.q_s - float(q.q_v @ p.q_v)
    return UnitQuaternion(v, s)


def quat_exp(u: np.ndarray) -> UnitQuaternion:
    """Unit quaternion ``(cos|u|, sin|u| u/|u|)``, series-safe near zero."""
    angle = math.sqrt(float(u @ u))
    if angle < 1e-8:
        return UnitQuaternion(u * (1.0 - angle * angle / 6.0), math.cos(angle))
    return UnitQuaternion(u * (math.sin(angle) / angle), math.cos(angle))


def quat_to_rotation(q: UnitQuaternion) -> np.ndarray:
    """Rotation matrix of a unit quaternion.

    ``R = (q_s^2 - q_v.q_v) I + 2 q_v q_v^T + 2 q_s hat(q_v)``; for
    ``q = (sin(a/2) e, cos(a/2))`` this reproduces the Rodrigues rotation
    by angle ``a`` about ``e``.
    """
    qv, qs = q.q_v, q.q_s
    return (
        (qs * qs - float(qv @ qv)) * np.eye(3)
        + 2.0 * np.outer(qv, qv)
        + 2.0 * qs * hat(qv)
    )


def _innovation(y_hat_list, y_list, k_list) -> np.ndarray:
    l = np.zeros(3)
    for y_hat, y, k in zip(y_hat_list, y_list, k_list):
        l += _cross(y_hat, y) / (k * k)
    return l


def innovation(R_hat: np.ndarray, y_list, params: FilterParams) -> np.ndarray:
    """Body-frame correction ``sum_i k_i^-2 (y_hat_i x y_i)``, y_hat_i = R_hat.T r_i.

    Zero when every measurement agrees with its prediction.  Shared by all
    three recursive filters.
    """
    Rt = R_hat.T
    y_hat = [Rt @ r for r in params.r_list]
    return _innovation(y_hat, y_list, params.k_list)


def _riccati_rhs(P, omega, y_hat_list, k_list, g, gamma) -> np.ndarray:
    """Common gain-update right-hand side; gamma = inf drops the last term."""
    A = P @ hat(omega)
    rhs = A + A.T  # sym_proj(2 P hat(omega)) evaluated directly
    S = np.zeros((3, 3))
    for y_hat, k in zip(y_hat_list, k_list):
        Y = hat(y_hat)
        S += (Y @ Y) / (k * k)
    rhs = rhs + P @ S @ P + (g * g) * np.eye(3)
    if math.isfinite(gamma):
        rhs = rhs + (P @ P) / (gamma * gamma)
    return sym_proj(rhs)


def hinf_riccati_rhs(P, omega, y_hat_list, params: FilterParams) -> np.ndarray:
    """Gain-update right-hand side of the worst-case filter.

    ``sym(2 P hat(omega)) + P (sum k_i^-2 hat(y_hat_i)^2) P + g^2 I
    + P^2 / gamma^2``, exactly symmetric on output.  With gamma = inf the
    last term vanishes and this is the MEKF gain equation.
    """
    return _riccati_rhs(P, omega, y_hat_list, params.k_list, params.g, params.gamma)


def _advance_gain(P, rhs_fn, dt, p_integrator) -> np.ndarray:
    if p_integrator == "euler":
        return sym_proj(P + dt * rhs_fn(P))
    if p_integrator == "rk4":
        k1 = rhs_fn(P)
        k2 = rhs_fn(P + 0.5 * dt * k1)
        k3 = rhs_fn(P + 0.5 * dt * k2)
        k4 = rhs_fn(P + dt * k3)
        return sym_proj(P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    raise ValueError(f"unknown gain integrator {p_integrator!r}")


def _check_gain(P, t) -> None:
    """Positive definiteness via leading principal minors, plus a blow-up cap."""
    m = P.ravel().tolist()
    if max(abs(x) for x in m) > GAIN_LIMIT:
        raise FilterDiverged(
            f"gain entry exceeded {GAIN_LIMIT:.0e} at t = {t:.3f} s "
            "(gamma likely too small)",
            t=t,
        )
    a, b, c, d, e, f, g_, h, i = m
    m1 = a
    m2 = a * e - b * d
    m3 = a * (e * i - f * h) - b * (d * i - f * g_) + c * (d * h - e * g_)
    if not (m1 > 0 and m2 > 0 and m3 > 0):
        raise FilterDiverged(
            f"gain lost positive definiteness at t = {t:.3f} s "
            f"(minors {m1:.3e}, {m2:.3e}, {m3:.3e})",
            t=t,
        )


def hinf_step(
    state: FilterState,
    frame,
    params: FilterParams,
    dt: float,
    p_integrator: str = "euler",
) -> FilterState:
    """Advance the worst-case filter by one sample interval.

    Attitude: ``R_hat+ = proj(R_hat @ exp_so3(dt (omega - P l)))``.
    Gain: one explicit step of :func:`hinf_riccati_rhs`, symmetrized, then
    checked; raises :class:`FilterDiverged` on blow-up or PD loss.
    """
    R, P = state.R_hat, state.P
    Rt = R.T
    y_hat = [Rt @ r for r in params.r_list]
    l = _innovation(y_hat, frame.y_list, params.k_list)
    omega = frame.omega_meas
    R_new = project_to_so3(R @ exp_so3(dt * (omega - P @ l)))
    P_new = _advance_gain(
        P,
        lambda Q: _riccati_rhs(Q, omega, y_hat, params.k_list, params.g, params.gamma),
        dt,
        p_integrator,
    )
    t_new = state.t + dt
    _check_gain(P_new, t_new)
    return FilterState(P=P_new, t=t_new, R_hat=R_new)


def mekf_step(
    state: FilterState,
    frame,
    params: FilterParams,
    dt: float,
    p_integrator: str = "euler",
) -> FilterState:
    """Advance the quaternion MEKF by one sample interval.

    The reference rate ``omega - P l`` feeds the exact unit-norm quaternion
    update ``q+ = q (x) quat_exp(dt/2 omega_ref)`` followed by a
    renormalization; the gain uses the gamma-free Riccati right-hand side
    with ``sigma_omega := g`` and ``sigma_i := k_i``.
    """
    q, P = state.q_hat, state.P
    Rt = quat_to_rotation(q).T
    y_hat = [Rt @ r for r in params.r_list]
    l = _innovation(y_hat, frame.y_list, params.k_list)
    omega = frame.omega_meas
    omega_ref = omega - P @ l
    q_new = quat_multiply(q, quat_exp(0.5 * dt * omega_ref)).normalized()
    P_new = _advance_gain(
        P,
        lambda Q: _riccati_rhs(Q, omega, y_hat, params.k_list, params.g, math.inf),
        dt,
        p_integrator,
    )
    t_new = state.t + dt
    _check_gain(P_new, t_new)
    return FilterState(P=P_new, t=t_new, q_hat=q_new)


def _game_rhs(P, omega, y_hat_list, y_list, k_list, g) -> np.ndarray:
    """GAME gain update: gamma-free Riccati terms plus curvature corrections."""
    rhs = _riccati_rhs(P, omega, y_hat_list, k_list, g, math.inf)
    l = _innovation(y_hat_list, y_list, k_list)
    B = P @ hat(P @ l)
    C = np.zeros((3, 3))
    for y_hat, y, k in zip(y_hat_list, y_list, k_list):
        C += sym_proj(np.outer(y_hat - y, y) / (k * k))
    return sym_proj(rhs - sym_proj(B) + P @ e_map(C) @ P)


def game_step(
    state: FilterState,
    frame,
    params: FilterParams,
    dt: float,
    p_integrator: str = "euler",
) -> FilterState:
    """Advance the minimum-energy (GAME) filter by one sample interval.

    Attitude update identical to :func:`hinf_step`; the gain adds
    ``- sym(P hat(P l))`` and ``P E(sum_i sym(k_i^-2 (y_hat_i - y_i) y_i^T)) P``
    to the gamma-free Riccati right-hand side.  Both corrections vanish
    when every measurement matches its prediction.
    """
    R, P = state.R_hat, state.P
    Rt = R.T
    y_hat = [Rt @ r for r in params.r_list]
    l = _innovation(y_hat, frame.y_list, params.k_list)
    omega = frame.omega_meas
    R_new = project_to_so3(R @ exp_so3(dt * (omega - P @ l)))
    P_new = _advance_gain(
        P,
        lambda Q: _game_rhs(Q, omega, y_hat, frame.y_list, params.k_list, params.g),
        dt,
        p_integrator,
    )
    t_new = state.t + dt
    _check_gain(P_new, t_new)
    return FilterState(P=P_new, t=t_new, R_hat=R_new)


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise DegenerateDirections(f"{what} has near-zero length")
    return v / n


def triad_estimate(y1, y2, r1, r2) -> np.ndarray:
    """Memoryless attitude from two direction measurements.

    Builds right-handed orthonormal triads anchored on the first
    (dominant) vector of each pair and returns the rotation with
    ``R_hat.T @ r_i ~ y_i``; recovery is exact for noiseless measurements.
    Raises :class:`DegenerateDirections` when either normalized pair is
    collinear within 1e-6.  Inputs are normalized, so noisy measurement
    lengths are harmless; swapping y1 and y2 while keeping r1 and r2 fixed
    is *not* detected and simply yields a poor estimate.
    """
    b1 = _unit(np.asarray(y1, dtype=float), "y1")
    y2n = _unit(np.asarray(y2, dtype=float), "y2")
    s1 = _unit(np.asarray(r1, dtype=float), "r1")
    r2n = _unit(np.asarray(r2, dtype=float), "r2")
    bx = _cross(b1, y2n)
    sx = _cross(s1, r2n)
    if float(np.linalg.norm(bx)) <= 1e-6:
        raise DegenerateDirections("measured directions are collinear")
    if float(np.linalg.norm(sx)) <= 1e-6:
        raise DegenerateDirections("reference directions are collinear")
    b2 = bx / float(np.linalg.norm(bx))
    s2 = sx / float(np.linalg.norm(sx))
    b3 = _cross(b1, b2)
    s3 = _cross(s1, s2)
    B = np.column_stack([b1, b2, b3])
    S = np.column_stack([s1, s2, s3])
    return S @ B.T
