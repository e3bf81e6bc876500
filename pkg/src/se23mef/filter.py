"""Second-order-optimal minimum-energy filter on SE2(3).

The gain is carried in information form ``P = K^{-1}``. IMU samples drive a
Lie-group Euler prediction; landmark batches trigger a discrete update that
adds the measurement terms of the Riccati flow, weighted by ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .lie import (
    GroupElement,
    adjoint_matrix,
    compose,
    exp_se23,
    op_F,
    op_G,
    proj_sym,
    skew,
)

# Sign applied to the innovation-weighted residual. The landmark derivative is
# d h(g) . gX = -F(y_hat) X^vee, so the descent direction of the measurement
# cost is -F^T P_y (y - y_hat). Pinned by the innovation-descent tests.
RESIDUAL_SIGN = -1.0

SYM_TOL = 1e-9


class FilterError(RuntimeError):
    """Base class for filter failures."""


class FilterDivergenceError(FilterError):
    """The information matrix lost positive definiteness."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (t = {t:.6f} s)")
        self.t = t


@dataclass(frozen=True)
class ImuSample:
    t: float
    u_Omega: np.ndarray
    u_a: np.ndarray


@dataclass(frozen=True)
class LandmarkBatch:
    """Landmark observations available at time ``t``.

    ``indices`` are zero-based positions into the :class:`LandmarkMap`; any
    subset (including none) may be present.
    """

    t: float
    indices: tuple[int, ...] = ()
    y: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if len(self.indices) != y.shape[0]:
            raise ValueError("one measurement row is required per landmark index")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("landmark indices must be distinct")

    def __len__(self) -> int:
        return len(self.indices)

    def check(self, lmap: LandmarkMap) -> None:
        for i in self.indices:
            if not 0 <= i < len(lmap):
                raise ValueError(f"landmark index {i} is outside the map (N = {len(lmap)})")


@dataclass(frozen=True)
class LandmarkMap:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if pts.shape[0] < 1:
            raise ValueError("a landmark map needs at least one landmark")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class NoiseGains:
    B_Omega: np.ndarray
    B_a: np.ndarray
    D: np.ndarray
    alpha: float

    def __post_init__(self):
        for name in ("B_Omega", "B_a", "D"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (3, 3):
                raise ValueError(f"{name} must be 3x3, got shape {m.shape}")
            object.__setattr__(self, name, m)
        if not np.isfinite(np.linalg.cond(self.D)):
            raise ValueError("D must be invertible")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @classmethod
    def isotropic(cls, b_omega: float, b_a: float, d: float, alpha: float) -> NoiseGains:
        return cls(b_omega * np.eye(3), b_a * np.eye(3), d * np.eye(3), alpha)

    @cached_property
    def P_y(self) -> np.ndarray:
        """Measurement weight ``D^{-T} D^{-1}``."""
        Dinv = np.linalg.inv(self.D)
        return Dinv.T @ Dinv

    @cached_property
    def BBt(self) -> np.ndarray:
        """``B @ B.T`` for the 9x6 disturbance map, i.e. blkdiag(B_O B_O^T, B_a B_a^T, 0)."""
        out = np.zeros((9, 9))
        out[0:3, 0:3] = self.B_Omega @ self.B_Omega.T
        out[3:6, 3:6] = self.B_a @ self.B_a.T
        return out


@dataclass(frozen=True)
class FilterState:
    g_hat: GroupElement
    P: np.ndarray
    t: float


def _is_spd(P: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return False
    return True


def init(g0_hat: GroupElement, P0, t0: float = 0.0) -> FilterState:
    P0 = np.asarray(P0, dtype=float)
    if P0.shape != (9, 9):
        raise ValueError(f"P0 must be 9x9, got shape {P0.shape}")
    if np.max(np.abs(P0 - P0.T)) > SYM_TOL:
        raise ValueError("P0 must be symmetric")
    if not _is_spd(P0):
        raise ValueError("P0 must be positive definite")
    return FilterState(g0_hat, proj_sym(P0), float(t0))


# -- model terms -------------------------------------------------------------


def lambda_hat(g_hat: GroupElement, imu: ImuSample) -> np.ndarray:
    """Kinematic velocity ``(u_Omega, u_a, R^T v)`` evaluated at the estimate."""
    return np.concatenate([imu.u_Omega, imu.u_a, g_hat.R.T @ g_hat.v])


def predict_h(g_hat: GroupElement, l) -> np.ndarray:
    """Predicted body-frame landmark position ``R^T (l - x)``."""
    return g_hat.R.T @ (np.asarray(l, dtype=float) - g_hat.x)


_A_TEMPLATE = np.zeros((9, 9))
_A_TEMPLATE[6:9, 3:6] = np.eye(3)


def A_matrix(imu: ImuSample) -> np.ndarray:
    W = skew(imu.u_Omega)
    A = _A_TEMPLATE.copy()
    A[0:3, 0:3] = -W
    A[3:6, 3:6] = -W
    A[6:9, 6:9] = -W
    A[3:6, 0:3] = -skew(imu.u_a)
    return A


def B_matrix(gains: NoiseGains) -> np.ndarray:
    """9x6 disturbance map. Only ``B @ B.T`` enters the filter."""
    B = np.zeros((9, 6))
    B[0:3, 0:3] = -gains.B_Omega
    B[3:6, 3:6] = -gains.B_a
    return B


def residual_vec(g_hat: GroupElement, batch: LandmarkBatch, lmap: LandmarkMap, gains: NoiseGains) -> np.ndarray:
    r = np.zeros(9)
    if not len(batch):
        return r
    Py = gains.P_y
    for i, y in zip(batch.indices, batch.y):
        y_hat = predict_h(g_hat, lmap.points[i])
        r += op_F(y_hat).T @ (Py @ (y - y_hat))
    return RESIDUAL_SIGN * r


def E_matrix(g_hat: GroupElement, batch: LandmarkBatch, lmap: LandmarkMap, gains: NoiseGains) -> np.ndarray:
    """Measurement Hessian term, summed over the landmarks present in ``batch``."""
    E = np.zeros((9, 9))
    if not len(batch):
        return E
    Py = gains.P_y
    for i, y in zip(batch.indices, batch.y):
        y_hat = predict_h(g_hat, lmap.points[i])
        F = op_F(y_hat)
        E += F.T @ Py @ F - proj_sym(F.T @ op_G(Py @ (y - y_hat)))
    return proj_sym(E)


# -- continuous-time flows (reference only) ------------------------------------


def _K_times_r(P: np.ndarray, r: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(P, r)
    except np.linalg.LinAlgError as exc:
        raise FilterError("information matrix is singular") from exc


def riccati_rhs_continuous(state: FilterState, imu: ImuSample, batch: LandmarkBatch, lmap: LandmarkMap, gains: NoiseGains) -> np.ndarray:
    """Time derivative of the information matrix ``P`` under continuous measurement."""
    P = state.P
    A = A_matrix(imu)
    B = B_matrix(gains)
    r = residual_vec(state.g_hat, batch, lmap, gains)
    ad = adjoint_matrix(_K_times_r(P, r))
    E = E_matrix(state.g_hat, batch, lmap, gains)
    return proj_sym(-(2.0 * P @ A - P @ ad) + E - P @ B @ B.T @ P)


def riccati_rhs_gain(state: FilterState, imu: ImuSample, batch: LandmarkBatch, lmap: LandmarkMap, gains: NoiseGains) -> np.ndarray:
    """Time derivative of the gain ``K = P^{-1}``."""
    try:
        K = np.linalg.inv(state.P)
    except np.linalg.LinAlgError as exc:
        raise FilterError("information matrix is singular") from exc
    A = A_matrix(imu)
    B = B_matrix(gains)
    r = residual_vec(state.g_hat, batch, lmap, gains)
    ad = adjoint_matrix(K @ r)
    E = E_matrix(state.g_hat, batch, lmap, gains)
    return proj_sym(2.0 * A @ K - ad @ K - K @ E @ K + B @ B.T)


# -- discrete filter -----------------------------------------------------------


def predict(state: FilterState, imu: ImuSample, dt: float, gains: NoiseGains) -> FilterState:
    """Propagate estimate and information matrix over one IMU interval."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return state
    P = state.P
    g_next = compose(state.g_hat, exp_se23(dt * lambda_hat(state.g_hat, imu)))
    P_next = P - 2.0 * dt * proj_sym(P @ A_matrix(imu)) - dt * (P @ gains.BBt @ P)
    return FilterState(g_next, proj_sym(P_next), state.t + dt)


def update(state: FilterState, batch: LandmarkBatch, lmap: LandmarkMap, gains: NoiseGains, alpha: float | None = None) -> FilterState:
    """Discrete landmark update; ``alpha`` defaults to ``gains.alpha``.

    The information matrix is updated first and the state correction uses the
    updated matrix. Both are linearised at the pre-update estimate.
    """
    if not len(batch):
        return state
    alpha = gains.alpha if alpha is None else alpha
    P = state.P
    r = residual_vec(state.g_hat, batch, lmap, gains)
    E = E_matrix(state.g_hat, batch, lmap, gains)
    P_next = proj_sym(P + alpha * E + alpha * proj_sym(P @ adjoint_matrix(_K_times_r(P, r))))
    if not _is_spd(P_next):
        raise FilterDivergenceError("information matrix lost positive definiteness in update", state.t)
    correction = alpha * _K_times_r(P_next, r)
    return FilterState(compose(state.g_hat, exp_se23(correction)), P_next, state.t)


def innovation_energy(g_hat: GroupElement, batch: LandmarkBatch, lmap: LandmarkMap) -> float:
    """Sum of squared innovations ``||y_i - y_hat_i||^2`` over the batch."""
    total = 0.0
    for i, y in zip(batch.indices, batch.y):
        e = y - predict_h(g_hat, lmap.points[i])
        total += float(e @ e)
    return total


def check_state(state: FilterState, sym_tol: float = 1e-10) -> None:
    """Raise if ``P`` is asymmetric or not positive definite."""
    P = state.P
    if np.max(np.abs(P - P.T)) >= sym_tol:
        raise FilterDivergenceError("information matrix is not symmetric", state.t)
    if not _is_spd(P):
        raise FilterDivergenceError("information matrix is not positive definite", state.t)


def run(state: FilterState, imu_samples: Sequence[ImuSample], batches: dict[int, LandmarkBatch], lmap: LandmarkMap, gains: NoiseGains, dt_fallback: float) -> FilterState:
    """Advance over ``imu_samples``; ``batches[k]`` fires after the k-th predict.

    Each sample is held over the gap to the next timestamp. The last sample,
    and any non-increasing gap, uses ``dt_fallback``.
    """
    n = len(imu_samples)
    for k, imu in enumerate(imu_samples):
        dt = imu_samples[k + 1].t - imu.t if k + 1 < n else 0.0
        if not dt > 0:
            dt = dt_fallback
        state = predict(state, imu, dt, gains)
        batch = batches.get(k)
        if batch is not None:
            state = update(state, batch, lmap, gains)
    return state
