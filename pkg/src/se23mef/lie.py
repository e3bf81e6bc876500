"""Matrix algebra for the extended special Euclidean group SE2(3).

Elements are stored field-wise as ``(R, v, x)`` and embed into 5x5 matrices::

    [R  v  x]
    [0  1  0]
    [0  0  1]

Lie algebra elements are 9-vectors ordered ``(xi_R, xi_v, xi_x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-9
SMALL_ANGLE = 1e-6

_I3 = np.eye(3)


class LieDomainError(ValueError):
    """Raised when an input lies outside the domain of a map."""


def skew(w) -> np.ndarray:
    """Return the skew-symmetric matrix ``w_x`` such that ``w_x @ u == cross(w, u)``."""
    w1, w2, w3 = w[0], w[1], w[2]
    return np.array([[0.0, -w3, w2], [w3, 0.0, -w1], [-w2, w1, 0.0]])


def vex(M, tol: float = ORTHO_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise LieDomainError(f"vex expects a 3x3 matrix, got shape {M.shape}")
    if np.max(np.abs(M + M.T)) > tol:
        raise LieDomainError("vex: matrix is not antisymmetric")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def hom(p) -> np.ndarray:
    """Homogeneous 5-vector ``(p, 0, 1)``."""
    return np.array([p[0], p[1], p[2], 0.0, 1.0])


def wedge(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    X = np.zeros((5, 5))
    X[:3, :3] = skew(xi[0:3])
    X[:3, 3] = xi[3:6]
    X[:3, 4] = xi[6:9]
    return X


def vee(X, tol: float = ORTHO_TOL) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != (5, 5):
        raise LieDomainError(f"vee expects a 5x5 matrix, got shape {X.shape}")
    if np.max(np.abs(X[3:, :])) > 1e-12:
        raise LieDomainError("vee: bottom two rows must be zero")
    return np.concatenate([vex(X[:3, :3], tol), X[:3, 3], X[:3, 4]])


def proj_sym(A) -> np.ndarray:
    """Symmetric part ``(A + A^T) / 2``."""
    A = np.asarray(A)
    return 0.5 * (A + A.T)


def _rodrigues_coeffs(theta: float) -> tuple[float, float, float]:
    # sin(t)/t, (1 - cos t)/t^2, (t - sin t)/t^3
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        t4 = t2 * t2
        return (
            1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0,
        )
    s = math.sin(theta)
    half = math.sin(0.5 * theta)
    return s / theta, 2.0 * half * half / (theta * theta), (theta - s) / theta**3


def exp_so3(phi) -> np.ndarray:
    """Rotation matrix ``expm(skew(phi))`` via the Rodrigues formula."""
    theta = math.sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    a, b, _ = _rodrigues_coeffs(theta)
    W = skew(phi)
    return _I3 + a * W + b * (W @ W)


def left_jacobian_so3(phi) -> np.ndarray:
    theta = math.sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    _, b, c = _rodrigues_coeffs(theta)
    W = skew(phi)
    return _I3 + b * W + c * (W @ W)


def left_jacobian_inv_so3(phi) -> np.ndarray:
    theta = math.sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        k = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        k = 1.0 / theta**2 - (1.0 + math.cos(theta)) / (2.0 * theta * math.sin(theta))
    W = skew(phi)
    return _I3 - 0.5 * W + k * (W @ W)


def rotation_angle(R) -> float:
    """Geodesic angle of ``R`` in ``[0, pi]``."""
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    return math.acos(min(1.0, max(-1.0, c)))


def log_so3(R) -> np.ndarray:
    """Rotation vector of ``R``; the angle must be strictly below pi."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr <= -1.0 + 1e-9:
        raise LieDomainError("log_so3: rotation angle too close to pi, axis is ambiguous")
    theta = rotation_angle(R)
    axial = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < SMALL_ANGLE:
        return axial * (1.0 + theta * theta / 6.0)
    if theta < 2.5:
        return axial * (theta / math.sin(theta))
    # near pi the antisymmetric part vanishes; take the axis from the symmetric part
    S = 0.5 * (R + R.T) - math.cos(theta) * _I3
    k = int(np.argmax(np.diag(S)))
    n = S[:, k] / math.sqrt(S[k, k] * (1.0 - math.cos(theta)))
    n /= np.linalg.norm(n)
    if n @ axial < 0.0:
        n = -n
    return theta * n


def nearest_rotation(M) -> np.ndarray:
    """Project a 3x3 matrix onto SO(3) (polar decomposition)."""
    U, _, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt))
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def orthonormality_error(R) -> float:
    """Frobenius norm of ``R^T R - I``."""
    d = (R.T @ R - _I3).ravel()
    return math.sqrt(d @ d)


@dataclass(frozen=True)
class GroupElement:
    """An element of SE2(3): rotation ``R``, inertial velocity ``v``, inertial position ``x``."""

    R: np.ndarray
    v: np.ndarray
    x: np.ndarray

    @classmethod
    def identity(cls) -> GroupElement:
        return cls(np.eye(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> GroupElement:
        T = np.asarray(T, dtype=float)
        if T.shape != (5, 5):
            raise LieDomainError(f"expected 5x5 matrix, got shape {T.shape}")
        bottom = np.array([[0.0, 0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0, 1.0]])
        if np.max(np.abs(T[3:, :] - bottom)) > 1e-12:
            raise LieDomainError("bottom rows of an SE2(3) matrix must be [0 1 0; 0 0 1]")
        g = cls(T[:3, :3].copy(), T[:3, 3].copy(), T[:3, 4].copy())
        g.validate()
        return g

    def as_matrix(self) -> np.ndarray:
        T = np.eye(5)
        T[:3, :3] = self.R
        T[:3, 3] = self.v
        T[:3, 4] = self.x
        return T

    def validate(self, tol: float = ORTHO_TOL) -> None:
        if not (np.all(np.isfinite(self.R)) and np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.x))):
            raise LieDomainError("group element has non-finite entries")
        if orthonormality_error(self.R) > tol:
            raise LieDomainError("rotation block is not orthonormal")
        if abs(np.linalg.det(self.R) - 1.0) > tol:
            raise LieDomainError("rotation block does not have determinant +1")

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return compose(self, other)


def _renormalized(R: np.ndarray) -> np.ndarray:
    if orthonormality_error(R) > ORTHO_TOL:
        return nearest_rotation(R)
    return R


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    R = _renormalized(g.R @ h.R)
    return GroupElement(R, g.R @ h.v + g.v, g.R @ h.x + g.x)


def inverse(g: GroupElement) -> GroupElement:
    Rt = g.R.T
    return GroupElement(Rt, -(Rt @ g.v), -(Rt @ g.x))


def exp_se23(xi) -> GroupElement:
    """Closed-form matrix exponential of ``wedge(xi)``.

    Powers of ``wedge(xi)`` only ever touch the top block row, so the
    translational columns pick up the SO(3) left Jacobian.
    """
    xi = np.asarray(xi, dtype=float)
    phi = xi[0:3]
    theta = math.sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    a, b, c = _rodrigues_coeffs(theta)
    W = skew(phi)
    W2 = W @ W
    # Rodrigues output is orthonormal to roundoff; drift is handled in compose
    R = _I3 + a * W + b * W2
    J = _I3 + b * W + c * W2
    return GroupElement(R, J @ xi[3:6], J @ xi[6:9])


def log_se23(g: GroupElement) -> np.ndarray:
    phi = log_so3(g.R)
    Jinv = left_jacobian_inv_so3(phi)
    return np.concatenate([phi, Jinv @ g.v, Jinv @ g.x])


def adjoint_matrix(xi) -> np.ndarray:
    """9x9 matrix of ``ad_xi``, i.e. ``gamma -> vee([wedge(xi), wedge(gamma)])``."""
    xi = np.asarray(xi, dtype=float)
    WR = skew(xi[0:3])
    ad = np.zeros((9, 9))
    ad[0:3, 0:3] = WR
    ad[3:6, 3:6] = WR
    ad[6:9, 6:9] = WR
    ad[3:6, 0:3] = skew(xi[3:6])
    ad[6:9, 0:3] = skew(xi[6:9])
    return ad


def op_F(v) -> np.ndarray:
    """3x9 matrix ``[-v_x | 0 | I]``: ``top3(wedge(xi) @ hom(v)) == op_F(v) @ xi``."""
    F = np.zeros((3, 9))
    F[:, 0:3] = -skew(v)
    F[:, 6:9] = _I3
    return F


def op_Fbar(v) -> np.ndarray:
    """5x9 homogeneous form of :func:`op_F` (two trailing zero rows)."""
    Fb = np.zeros((5, 9))
    Fb[:3] = op_F(v)
    return Fb


def op_G(v) -> np.ndarray:
    """3x9 matrix ``[v_x | 0 | 0]``."""
    G = np.zeros((3, 9))
    G[:, 0:3] = skew(v)
    return G


def op_Gbar(v) -> np.ndarray:
    """5x9 matrix with ``wedge(xi).T @ hom(v) == op_Gbar(v) @ xi``."""
    Gb = np.zeros((5, 9))
    Gb[0:3, 0:3] = skew(v)
    Gb[3, 3:6] = v
    Gb[4, 6:9] = v
    return Gb
