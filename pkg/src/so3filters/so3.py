"""Small-matrix geometry of the rotation group SO(3).

Pure helpers shared by every estimator in this package: the skew
(cross-product) operator and its inverse, the exponential and logarithm
maps, rotation error measures, and a polar re-projection that repairs
numerical drift after repeated group multiplications.

All functions take and return plain float64 numpy arrays; vectors have
shape (3,) and matrices shape (3, 3).  Everything here is pure and
re-entrant.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

__all__ = [
    "AxisAngle",
    "NotSkewSymmetric",
    "NearPiRotation",
    "NotNearRotation",
    "hat",
    "vee",
    "sym_proj",
    "exp_so3",
    "log_so3",
    "config_error",
    "e_map",
    "geodesic_angle",
    "project_to_so3",
    "euler_to_rotation",
    "check_rotation",
]

# Below this rotation angle the exp/log maps switch to series expansions.
SMALL_ANGLE = 1e-8


class NotSkewSymmetric(ValueError):
    """Matrix handed to vee() is not skew-symmetric within tolerance."""


class NearPiRotation(ValueError):
    """Rotation angle within 1e-6 of pi, where the axis is ill-defined."""


class NotNearRotation(ValueError):
    """Matrix too far from SO(3) for the polar re-projection."""


class AxisAngle(NamedTuple):
    """Rotation as a unit axis and an angle in [0, pi] radians."""

    axis: np.ndarray
    angle: float


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of ``v`` such that ``hat(v) @ w == v x w``.

    ::

        hat(v) = [[  0,  -v2,  v1],
                  [ v2,    0, -v0],
                  [-v1,   v0,   0]]
    """
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(M: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Inverse of :func:`hat`, mapping a skew-symmetric matrix to a 3-vector.

    Raises NotSkewSymmetric when any entry of ``M + M.T`` exceeds ``tol``.
    ``vee(hat(v))`` returns ``v`` exactly (entries are copied verbatim).
    """
    defect = float(np.max(np.abs(M + M.T)))
    if defect > tol:
        raise NotSkewSymmetric(
            f"max |M + M.T| entry is {defect:.3e}, above tolerance {tol:.1e}"
        )
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def sym_proj(M: np.ndarray) -> np.ndarray:
    """Symmetric part ``(M + M.T) / 2``; idempotent, output exactly symmetric."""
    return 0.5 * (M + M.T)


def exp_so3(v: np.ndarray) -> np.ndarray:
    """Exponential map: rotation by angle ``|v|`` about axis ``v / |v|``.

    Uses the Rodrigues formula, switching to the second-order series
    ``I + hat(v) + hat(v)^2 / 2`` below ``SMALL_ANGLE`` to avoid 0/0.
    Output is orthogonal with determinant +1 to machine precision.
    """
    angle = math.sqrt(float(v @ v))
    V = hat(v)
    if angle < SMALL_ANGLE:
        return np.eye(3) + V + 0.5 * (V @ V)
    A = V / angle
    return np.eye(3) + math.sin(angle) * A + (1.0 - math.cos(angle)) * (A @ A)


def _angle_from_trace(trace: float) -> float:
    return math.acos(min(1.0, max(-1.0, 0.5 * (trace - 1.0))))


def log_so3(R: np.ndarray) -> AxisAngle:
    """Axis-angle of a rotation, angle from the clamped-trace arccos formula.

    Raises NearPiRotation when the angle is within 1e-6 of pi; there the
    axis extraction from ``R - R.T`` degenerates.  Callers that only need
    the angle should use :func:`geodesic_angle`, which stays valid at pi.
    For the identity the axis is (1, 0, 0) by convention.
    """
    angle = _angle_from_trace(float(R[0, 0] + R[1, 1] + R[2, 2]))
    if angle >= math.pi - 1e-6:
        raise NearPiRotation(f"angle {angle:.9f} rad is within 1e-6 of pi")
    if angle < SMALL_ANGLE:
        return AxisAngle(np.array([1.0, 0.0, 0.0]), angle)
    axis = np.array(
        [R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]
    ) / (2.0 * math.sin(angle))
    return AxisAngle(axis, angle)


def config_error(R_tilde: np.ndarray) -> np.ndarray:
    """Attitude error vector ``vee((R - R.T) / 2)`` of an error rotation.

    Equals ``sin(angle) * axis`` of the axis-angle form, so its norm is
    ``|sin(angle)|``.  Zero exactly at the identity.
    """
    return 0.5 * np.array(
        [
            R_tilde[2, 1] - R_tilde[1, 2],
            R_tilde[0, 2] - R_tilde[2, 0],
            R_tilde[1, 0] - R_tilde[0, 1],
        ]
    )


def e_map(M: np.ndarray) -> np.ndarray:
    """Linear map ``tr(M) I - M.T`` used by the gain and worst-case formulas.

    At the identity this evaluates to ``2 I``.
    """
    return (M[0, 0] + M[1, 1] + M[2, 2]) * np.eye(3) - M.T


def geodesic_angle(R1: np.ndarray, R2: np.ndarray) -> float:
    """Rotation angle of ``R1.T @ R2`` in radians, in [0, pi].

    Symmetric in its arguments and zero iff the rotations coincide.
    Unlike :func:`log_so3` this never raises near pi, which makes it the
    error metric of choice for benchmark logging.
    """
    P = R1.T @ R2
    return _angle_from_trace(float(P[0, 0] + P[1, 1] + P[2, 2]))


def _cofactor(m: list) -> tuple[list, float]:
    """Cofactor entries and determinant of a 3x3 given as a flat row-major list."""
    a, b, c, d, e, f, g, h, i = m
    c00 = e * i - f * h
    c01 = f * g - d * i
    c02 = d * h - e * g
    det = a * c00 + b * c01 + c * c02
    cof = [
        c00, c01, c02,
        c * h - b * i, a * i - c * g, b * g - a * h,
        b * f - c * e, c * d - a * f, a * e - b * d,
    ]
    return cof, det


def project_to_so3(M: np.ndarray, tol: float = 1e-14, max_iter: int = 60) -> np.ndarray:
    """Nearest rotation to ``M`` in the Frobenius norm.

    Computes the orthogonal polar factor by the Newton iteration
    ``X <- (X + X^-T) / 2``, which converges quadratically near SO(3),
    then verifies the precondition ``||M - R||_F <= 0.5``.  Raises
    NotNearRotation for singular or reflected input, for input outside
    the 0.5 Frobenius ball, or if the iteration fails to converge.
    Idempotent on valid rotations.
    """
    X = np.array(M, dtype=float)
    for _ in range(max_iter):
        cof, det = _cofactor(X.ravel().tolist())
        if det <= 1e-12:
            raise NotNearRotation(f"determinant {det:.3e} is not positive")
        # cofactor matrix / det is the transposed inverse
        X_next = 0.5 * (X + np.array(cof).reshape(3, 3) / det)
        delta = float(np.max(np.abs(X_next - X)))
        X = X_next
        if delta < tol:
            break
    else:
        raise NotNearRotation("polar iteration did not converge")
    dist = float(np.linalg.norm(M - X))
    if dist > 0.5:
        raise NotNearRotation(
            f"Frobenius distance {dist:.3e} to SO(3) exceeds 0.5"
        )
    return X


def euler_to_rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Body-to-inertial rotation from intrinsic Z-Y-X (yaw, pitch, roll) angles.

    ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``, all angles in radians.
    """
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    Rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    Ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return Rz @ Ry @ Rx


def check_rotation(R: np.ndarray, tol: float = 1e-9) -> None:
    """Raise ValueError unless ``R.T @ R = I`` (Frobenius) and ``det R = 1``."""
    if R.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {R.shape}")
    defect = float(np.linalg.norm(R.T @ R - np.eye(3)))
    if defect > tol:
        raise ValueError(f"R.T @ R deviates from I by {defect:.3e} (tol {tol:.1e})")
    det = float(np.linalg.det(R))
    if abs(det - 1.0) > tol:
        raise ValueError(f"det(R) = {det!r} is not 1 within {tol:.1e}")
