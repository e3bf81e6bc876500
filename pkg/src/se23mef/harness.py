"""Simulation runs, error metrics, Monte-Carlo aggregation and CSV output."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import filter as mef
from .filter import FilterDivergenceError, LandmarkMap, NoiseGains
from .lie import GroupElement, exp_so3
from .sim import (
    DEFAULT_LANDMARKS,
    GroundTruthSample,
    SensorSpec,
    TrajectorySpec,
    make_rng,
    sample_imu,
    sample_landmarks,
    trajectory,
)

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("t", "trans_err_m", "rot_err_rad", "vel_err_mps")
METRICS = TRACE_COLUMNS[1:]
CONVERGED_FRACTION = 0.5

REFERENCE_P0_DIAG = (1e-3, 1e-3, 1e-3, 3.0, 3.0, 3.0, 5.0, 5.0, 5.0)
# Constant body-frame angular and linear velocity: a = Omega x v_body traces a
# circle of radius |v| / |Omega| = 10/3 m, centred here on the landmark centroid.
DEFAULT_OMEGA = (0.0, 0.0, 0.3)
DEFAULT_V0 = (1.0, 0.0, 0.0)
DEFAULT_A = tuple(np.cross(DEFAULT_OMEGA, DEFAULT_V0).tolist())
DEFAULT_X0 = (5.0, 5.0 - 1.0 / 0.3, 5.0)
_DIAG = np.array([1.0, -1.0, 1.0]) / math.sqrt(3.0)
DEFAULT_INIT_OFFSET = tuple(np.concatenate([0.2 * _DIAG, np.zeros(3), 3.8 * _DIAG]).tolist())


# -- metrics -------------------------------------------------------------------


def translation_error(g_hat: GroupElement, g_true: GroupElement) -> float:
    d = g_hat.x - g_true.x
    return math.sqrt(d @ d)


def velocity_error(g_hat: GroupElement, g_true: GroupElement) -> float:
    d = g_hat.v - g_true.v
    return math.sqrt(d @ d)


def rotation_error(g_hat: GroupElement, g_true: GroupElement) -> float:
    """Geodesic angle between the two attitudes, in ``[0, pi]``."""
    c = 0.5 * (float(np.sum(g_hat.R * g_true.R)) - 1.0)
    return math.acos(min(1.0, max(-1.0, c)))


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    trajectory: TrajectorySpec
    sensors: SensorSpec
    init_offset: np.ndarray
    p0_diag: np.ndarray
    trials: int = 1
    output: str | None = None

    def __post_init__(self):
        off = np.asarray(self.init_offset, dtype=float)
        p0 = np.asarray(self.p0_diag, dtype=float)
        if off.shape != (9,):
            raise ValueError("init_offset needs 9 entries")
        if p0.shape != (9,) or np.any(p0 <= 0):
            raise ValueError("p0_diag needs 9 positive entries")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "init_offset", off)
        object.__setattr__(self, "p0_diag", p0)

    @property
    def gains(self) -> NoiseGains:
        return self.sensors.gains

    @property
    def seed(self) -> int:
        return self.sensors.seed

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, sensors=replace(self.sensors, seed=int(seed)))

    def initial_estimate(self) -> GroupElement:
        """Truth at t0 displaced field-wise: ``R exp(dR)``, ``v + dv``, ``x + dx``."""
        g0 = self.trajectory.g0
        o = self.init_offset
        return GroupElement(g0.R @ exp_so3(o[0:3]), g0.v + o[3:6], g0.x + o[6:9])


def reference_config(**overrides) -> RunConfig:
    """The simulated scenario: 1 kHz IMU, 10 Hz landmarks, 4 landmarks, 20 s."""
    values = dict(_DEFAULTS)
    values.update(overrides)
    return _build(values)


_DEFAULTS: dict[str, object] = {
    "imu_rate_hz": 1000.0,
    "landmark_rate_hz": 10.0,
    "duration_s": 20.0,
    "b_omega": (0.1,),
    "b_a": (0.1,),
    "d_gain": (0.5,),
    "alpha": 0.1,
    "p0_diag": REFERENCE_P0_DIAG,
    "landmarks": DEFAULT_LANDMARKS,
    "omega_body": DEFAULT_OMEGA,
    "a_body": DEFAULT_A,
    "v0": DEFAULT_V0,
    "x0": DEFAULT_X0,
    "init_offset": DEFAULT_INIT_OFFSET,
    "seed": 0,
    "trials": 1,
    "dropout": 0.0,
    "noise_scale": 1.0,
}

_SCALARS = {"imu_rate_hz", "landmark_rate_hz", "duration_s", "alpha", "dropout", "noise_scale"}
_INTS = {"seed", "trials"}
_VECTORS = {"omega_body": 3, "a_body": 3, "v0": 3, "x0": 3, "init_offset": 9, "p0_diag": 9}
_MATRICES = {"b_omega", "b_a", "d_gain"}


class ConfigError(ValueError):
    pass


def _as_matrix(name: str, vals) -> np.ndarray:
    vals = np.asarray(vals, dtype=float).ravel()
    if vals.size == 1:
        return vals[0] * np.eye(3)
    if vals.size == 3:
        return np.diag(vals)
    if vals.size == 9:
        return vals.reshape(3, 3)
    raise ConfigError(f"{name}: expected 1, 3 or 9 numbers, got {vals.size}")


def _build(values: dict) -> RunConfig:
    try:
        gains = NoiseGains(
            _as_matrix("b_omega", values["b_omega"]),
            _as_matrix("b_a", values["b_a"]),
            _as_matrix("d_gain", values["d_gain"]),
            float(values["alpha"]),
        )
        lmap = LandmarkMap(np.asarray(values["landmarks"], dtype=float))
        sensors = SensorSpec(
            float(values["imu_rate_hz"]),
            float(values["landmark_rate_hz"]),
            gains,
            lmap,
            dropout=float(values["dropout"]),
            seed=int(values["seed"]),
            noise_scale=float(values["noise_scale"]),
        )
        g0 = GroupElement(np.eye(3), np.asarray(values["v0"], dtype=float), np.asarray(values["x0"], dtype=float))
        traj = TrajectorySpec(g0, values["omega_body"], values["a_body"], float(values["duration_s"]))
        return RunConfig(traj, sensors, values["init_offset"], values["p0_diag"], trials=int(values["trials"]))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Vectors are comma-separated; ``landmarks`` is a semicolon-separated list
    of comma-separated triples. Omitted keys take the reference defaults.
    """
    values = dict(_DEFAULTS)
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            values[key] = _parse_value(key, val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from exc
    return _build(values)


def _floats(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    if not all(parts):
        raise ValueError("empty list entry")
    return tuple(float(p) for p in parts)


def _parse_value(key: str, val: str):
    if key in _INTS:
        return int(val)
    if key in _SCALARS:
        return float(val)
    if key == "landmarks":
        rows = [_floats(chunk) for chunk in val.split(";") if chunk.strip()]
        if not rows or any(len(r) != 3 for r in rows):
            raise ValueError("landmarks must be semicolon-separated x,y,z triples")
        return tuple(rows)
    vec = _floats(val)
    if key in _VECTORS and len(vec) != _VECTORS[key]:
        raise ValueError(f"expected {_VECTORS[key]} numbers, got {len(vec)}")
    return vec


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# -- traces --------------------------------------------------------------------


@dataclass
class ErrorTrace:
    t: np.ndarray
    trans_err_m: np.ndarray
    rot_err_rad: np.ndarray
    vel_err_mps: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def converged_mean(self, metric: str, fraction: float = CONVERGED_FRACTION) -> float:
        """Mean of ``metric`` over the final ``fraction`` of the run."""
        return float(np.mean(getattr(self, metric)[_tail(self.t, fraction)]))

    def max_after(self, metric: str, t: float) -> float:
        return float(np.max(getattr(self, metric)[self.t >= t]))


def _tail(t: np.ndarray, fraction: float) -> np.ndarray:
    start = t[0] + (1.0 - fraction) * (t[-1] - t[0])
    return t >= start - 1e-12


@dataclass
class TrialResult:
    seed: int
    trace: ErrorTrace
    final_state: mef.FilterState
    max_asymmetry: float | None  # only tracked with keep_P
    min_eigenvalue: float
    max_ortho_error: float
    P_history: np.ndarray | None = None


@dataclass
class TruthTrack:
    t: np.ndarray
    R: np.ndarray
    v: np.ndarray
    x: np.ndarray
    samples: list[GroundTruthSample]


def truth_track(config: RunConfig) -> TruthTrack:
    samples = trajectory(config.trajectory, config.sensors.dt)
    n = len(samples)
    t = np.arange(n) * config.sensors.dt
    R = np.stack([s.g.R for s in samples])
    v = np.stack([s.g.v for s in samples])
    x = np.stack([s.g.x for s in samples])
    return TruthTrack(t, R, v, x, samples)


def _is_pd(P: np.ndarray) -> bool:
    if not np.all(np.isfinite(P)):
        return False
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return False
    return True


def simulate(config: RunConfig, seed: int | None = None, truth: TruthTrack | None = None, keep_P: bool = False) -> TrialResult:
    """Run the filter against simulated sensors and record errors at every IMU step.

    Positive definiteness of ``P`` is checked once per landmark interval (the
    update itself also checks); with ``keep_P`` every step's ``P`` is stored
    and the symmetry / eigenvalue statistics cover all of them. Raises
    :class:`FilterDivergenceError` with the failing time on loss of
    definiteness.
    """
    seed = config.seed if seed is None else int(seed)
    truth = truth_track(config) if truth is None else truth
    sensors, gains, lmap = config.sensors, config.gains, config.sensors.landmarks
    dt, every = sensors.dt, sensors.update_every
    rng = make_rng(seed)
    state = mef.init(config.initial_estimate(), np.diag(config.p0_diag), truth.t[0])

    n = len(truth.t)
    R_hat = np.empty((n, 3, 3))
    v_hat = np.empty((n, 3))
    x_hat = np.empty((n, 3))
    Ps = np.empty((n, 9, 9)) if keep_P else None
    R_hat[0], v_hat[0], x_hat[0] = state.g_hat.R, state.g_hat.v, state.g_hat.x
    max_asym = None
    if keep_P:
        Ps[0] = state.P

    samples = truth.samples
    for k in range(n - 1):
        imu = sample_imu(samples[k], gains, rng, sensors.noise_scale)
        state = mef.predict(state, imu, dt, gains)
        if (k + 1) % every == 0:
            batch = sample_landmarks(samples[k + 1], sensors, rng)
            state = mef.update(state, batch, lmap, gains)
        if (k + 1) % every == 0 or k == n - 2:
            if not _is_pd(state.P):
                raise FilterDivergenceError("information matrix lost positive definiteness", float(truth.t[k + 1]))
        g = state.g_hat
        R_hat[k + 1], v_hat[k + 1], x_hat[k + 1] = g.R, g.v, g.x
        if keep_P:
            Ps[k + 1] = state.P

    trans = np.linalg.norm(x_hat - truth.x, axis=1)
    vel = np.linalg.norm(v_hat - truth.v, axis=1)
    cos = 0.5 * (np.einsum("kij,kij->k", R_hat, truth.R) - 1.0)
    rot = np.arccos(np.clip(cos, -1.0, 1.0))
    RtR = np.einsum("kji,kjl->kil", R_hat, R_hat) - np.eye(3)
    max_ortho = float(np.max(np.sqrt(np.einsum("kij,kij->k", RtR, RtR))))
    if keep_P:
        max_asym = float(np.max(np.abs(Ps - Ps.transpose(0, 2, 1))))
        min_eig = float(np.min(np.linalg.eigvalsh(Ps)))
    else:
        min_eig = float(np.min(np.linalg.eigvalsh(state.P)))
    trace = ErrorTrace(truth.t.copy(), trans, rot, vel)
    return TrialResult(seed, trace, state, max_asym, min_eig, max_ortho, Ps)


def run_trial(config: RunConfig, seed: int | None = None, truth: TruthTrack | None = None) -> ErrorTrace:
    return simulate(config, seed, truth).trace


# -- Monte Carlo ---------------------------------------------------------------


def derive_seeds(base_seed: int, trials: int) -> list[int]:
    """Independent per-trial seeds derived from one base seed."""
    ss = np.random.SeedSequence(base_seed)
    return [int(s) for s in ss.generate_state(trials, dtype=np.uint64)]


@dataclass
class Aggregate:
    t: np.ndarray
    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]
    seeds: list[int]
    flagged: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_ok(self) -> int:
        return len(self.seeds) - len(self.flagged)

    def converged_mean(self, metric: str, fraction: float = CONVERGED_FRACTION) -> float:
        return float(np.mean(self.mean[metric][_tail(self.t, fraction)]))


def aggregate(traces: list[ErrorTrace], seeds: list[int], flagged=()) -> Aggregate:
    """Per-timestep mean and population standard deviation across traces."""
    if not traces:
        raise ValueError("no successful trials to aggregate")
    t = traces[0].t
    mean, std = {}, {}
    for m in METRICS:
        stack = np.stack([getattr(tr, m) for tr in traces])
        # shifted by the first trace: identical trials give exactly zero spread
        d = stack - stack[0]
        mean[m] = stack[0] + d.mean(axis=0)
        std[m] = d.std(axis=0)
    return Aggregate(t, mean, std, list(seeds), list(flagged))


def run_monte_carlo(config: RunConfig, trials: int | None = None, seeds: list[int] | None = None) -> tuple[Aggregate, list[ErrorTrace]]:
    """Run independent trials; diverged trials are flagged, not fatal.

    Seeds default to :func:`derive_seeds` of the config seed. The result does
    not depend on the order in which trials are executed.
    """
    if seeds is None:
        trials = config.trials if trials is None else trials
        if trials < 1:
            raise ValueError("trials must be >= 1")
        seeds = derive_seeds(config.seed, trials)
    truth = truth_track(config)
    traces, flagged = [], []
    for s in seeds:
        try:
            traces.append(run_trial(config, s, truth))
        except FilterDivergenceError as exc:
            log.warning("trial with seed %d diverged: %s", s, exc)
            flagged.append((s, str(exc)))
    return aggregate(traces, seeds, flagged), traces


# -- CSV -----------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def aggregate_columns() -> list[str]:
    cols = ["t"]
    for m in METRICS:
        cols += [f"{m}_mean", f"{m}_std"]
    return cols


def write_csv(data: ErrorTrace | Aggregate, path) -> None:
    path = Path(path)
    if isinstance(data, Aggregate):
        header = aggregate_columns()
        columns = [data.t]
        for m in METRICS:
            columns += [data.mean[m], data.std[m]]
    else:
        header = list(TRACE_COLUMNS)
        columns = [data.t, data.trans_err_m, data.rot_err_rad, data.vel_err_mps]
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in zip(*columns):
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write CSV {path}: {exc}") from exc


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a trace or aggregate CSV back as column arrays."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def trace_from_columns(cols: dict[str, np.ndarray]) -> ErrorTrace:
    return ErrorTrace(*(cols[c] for c in TRACE_COLUMNS))
