"""Ground-truth trajectories and simulated IMU / landmark sensors.

Randomness comes from ``numpy.random.Generator`` seeded with PCG64, so a
(seed, spec) pair always yields the same sample stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filter import ImuSample, LandmarkBatch, LandmarkMap, NoiseGains
from .lie import GroupElement, exp_so3, nearest_rotation, orthonormality_error

DEFAULT_LANDMARKS = ((10.0, 0.0, 0.0), (0.0, 10.0, 0.0), (0.0, 0.0, 10.0), (10.0, 10.0, 10.0))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class TrajectorySpec:
    """Motion with constant body-frame angular rate and acceleration."""

    g0: GroupElement
    Omega_body: np.ndarray
    a_body: np.ndarray
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "Omega_body", np.asarray(self.Omega_body, dtype=float))
        object.__setattr__(self, "a_body", np.asarray(self.a_body, dtype=float))


@dataclass(frozen=True)
class SensorSpec:
    imu_rate: float
    landmark_rate: float
    gains: NoiseGains
    landmarks: LandmarkMap
    dropout: float = 0.0
    seed: int = 0
    noise_scale: float = 1.0  # 0 gives exact sensors; the filter still uses ``gains``

    def __post_init__(self):
        if not self.imu_rate >= self.landmark_rate > 0:
            raise ValueError("need imu_rate >= landmark_rate > 0")
        ratio = self.imu_rate / self.landmark_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("imu_rate must be an integer multiple of landmark_rate")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must lie in [0, 1]")
        if not self.noise_scale >= 0.0:
            raise ValueError("noise_scale must be non-negative")

    @property
    def dt(self) -> float:
        return 1.0 / self.imu_rate

    @property
    def update_every(self) -> int:
        """Number of IMU steps between landmark batches."""
        return int(round(self.imu_rate / self.landmark_rate))


@dataclass(frozen=True)
class GroundTruthSample:
    t: float
    g: GroupElement
    Omega: np.ndarray
    a: np.ndarray


def initial_truth(spec: TrajectorySpec, t0: float = 0.0) -> GroundTruthSample:
    return GroundTruthSample(t0, spec.g0, spec.Omega_body, spec.a_body)


def _step_rotations(Omega: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return exp_so3(dt * Omega), exp_so3(0.5 * dt * Omega), exp_so3(0.25 * dt * Omega)


def _advance(g: GroupElement, rots, a: np.ndarray, dt: float) -> GroupElement:
    # rotation advanced exactly; v and x by the midpoint rule on the exact attitude
    full, half, quarter = rots
    R1 = g.R @ full
    if orthonormality_error(R1) > 1e-9:
        R1 = nearest_rotation(R1)
    v1 = g.v + dt * (g.R @ (half @ a))
    x1 = g.x + dt * (g.v + 0.5 * dt * (g.R @ (quarter @ a)))
    return GroupElement(R1, v1, x1)


def propagate_truth(sample: GroundTruthSample, spec: TrajectorySpec, dt: float) -> GroundTruthSample:
    """One step of ``R' = R Omega_x, v' = R a, x' = v`` with local error O(dt^3)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    rots = _step_rotations(spec.Omega_body, dt)
    g1 = _advance(sample.g, rots, spec.a_body, dt)
    return GroundTruthSample(sample.t + dt, g1, spec.Omega_body, spec.a_body)


def sample_imu(truth: GroundTruthSample, gains: NoiseGains, rng: np.random.Generator, scale: float = 1.0) -> ImuSample:
    d = scale * rng.standard_normal(6)
    return ImuSample(truth.t, truth.Omega + gains.B_Omega @ d[:3], truth.a + gains.B_a @ d[3:])


def sample_landmarks(truth: GroundTruthSample, spec: SensorSpec, rng: np.random.Generator) -> LandmarkBatch:
    """Noisy body-frame landmark positions, each kept with probability ``1 - dropout``.

    Every landmark consumes one uniform and three normals regardless of
    dropout, so the stream layout does not depend on which landmarks survive.
    """
    pts = spec.landmarks.points
    n = pts.shape[0]
    keep = rng.random(n) >= spec.dropout
    eps = spec.noise_scale * rng.standard_normal((n, 3))
    R, x = truth.g.R, truth.g.x
    y = (pts - x) @ R + eps @ spec.gains.D.T
    idx = np.flatnonzero(keep)
    return LandmarkBatch(truth.t, tuple(idx.tolist()), y[idx])


def trajectory(spec: TrajectorySpec, dt: float, t0: float = 0.0) -> list[GroundTruthSample]:
    """Truth samples at ``t0 + k dt`` for ``k = 0 .. round(duration / dt)``.

    Identical, step for step, to repeated :func:`propagate_truth`.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = int(round(spec.duration / dt))
    rots = _step_rotations(spec.Omega_body, dt)
    g = spec.g0
    out = [GroundTruthSample(t0, g, spec.Omega_body, spec.a_body)]
    for k in range(1, n + 1):
        g = _advance(g, rots, spec.a_body, dt)
        out.append(GroundTruthSample(t0 + k * dt, g, spec.Omega_body, spec.a_body))
    return out
