"""Ground-truth simulation of the gyro-driven diffusion on S^2.

The state obeys ``dX = -Omega x X dt - gamma^2 X dt + gamma X x dW`` and is
observed through ``y = g X + noise`` at the measurement rate.  Gyro signals
are independent Ornstein-Uhlenbeck processes per axis, sampled at the
measurement rate and held constant in between.

Array layout: time is the leading axis, an optional batch of independent
runs comes next, and the trailing axis holds vector components.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sphere_math import DomainError, norm, rotate_exp, sample_uniform_sphere
from .vmf import MeasurementModel


@dataclass(frozen=True)
class OuParams:
    """``d omega_i = reversion_rate * omega_i dt + diffusion * dB_i``."""

    reversion_rate: float = -5.0
    diffusion: float = 2.5

    def transition(self, dt):
        """Return ``(decay, noise_std)`` of the exact transition over ``dt``."""
        a = self.reversion_rate
        if a == 0.0:
            return 1.0, self.diffusion * np.sqrt(dt)
        var = self.diffusion**2 * np.expm1(2.0 * a * dt) / (2.0 * a)
        return float(np.exp(a * dt)), float(np.sqrt(var))

    @property
    def stationary_var(self):
        if self.reversion_rate >= 0.0:
            return None
        return self.diffusion**2 / (2.0 * abs(self.reversion_rate))


@dataclass(frozen=True)
class ScenarioConfig:
    duration_s: float = 10.0
    meas_rate_hz: float = 100.0
    substeps_per_meas: int = 10
    gamma2: float = 1e-3
    model: MeasurementModel = field(default_factory=MeasurementModel)
    ou: OuParams = field(default_factory=OuParams)
    seed: int = 0

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if not self.meas_rate_hz > 0:
            raise ValueError("meas_rate_hz must be positive")
        if int(self.substeps_per_meas) < 1:
            raise ValueError("substeps_per_meas must be >= 1")
        if self.gamma2 < 0:
            raise ValueError("gamma2 must be non-negative")

    @property
    def n_meas(self) -> int:
        return int(round(self.duration_s * self.meas_rate_hz))

    @property
    def dt(self) -> float:
        return 1.0 / (self.meas_rate_hz * self.substeps_per_meas)


@dataclass
class Scenario:
    """Simulated trajectory on the fine grid.

    ``truth``, ``gyro`` and ``meas`` have shape ``(n_grid, *batch, 3)``.
    ``gyro[j]`` is the rate applied over ``[times[j], times[j+1])``.
    ``meas[j]`` is NaN wherever ``meas_mask[j]`` is False.
    """

    times: np.ndarray
    truth: np.ndarray
    gyro: np.ndarray
    meas_mask: np.ndarray
    meas: np.ndarray

    @property
    def measurements(self):
        idx = np.flatnonzero(self.meas_mask)
        return [(float(self.times[j]), self.meas[j]) for j in idx]

    @property
    def batch_shape(self):
        return self.truth.shape[1:-1]

    def run(self, i: int) -> "Scenario":
        """Extract run ``i`` from a batched scenario."""
        return Scenario(self.times, self.truth[:, i], self.gyro[:, i],
                        self.meas_mask, self.meas[:, i])

    def without_measurements(self) -> "Scenario":
        return Scenario(self.times, self.truth, self.gyro,
                        np.zeros_like(self.meas_mask), np.full_like(self.meas, np.nan))


def ou_step(omega, dt, params: OuParams, rng: np.random.Generator):
    """Exact OU transition of each gyro axis over ``dt``."""
    omega = np.asarray(omega, dtype=float)
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return omega.copy()
    decay, std = params.transition(dt)
    return decay * omega + std * rng.standard_normal(omega.shape)


def sde_step(x, omega, gamma, dt, rng=None, dW=None):
    """One Lie-group Euler-Maruyama step, exactly on the sphere.

    Applies the rotation ``exp([-omega dt - gamma dW]_x)``; its Ito
    expansion reproduces the ``-gamma^2 x dt`` drift.  Pass ``dW`` to use a
    pre-drawn Brownian increment instead of sampling from ``rng``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(norm(x) - 1.0) > 1e-9):
        raise DomainError("sde_step expects a unit vector")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dW is None:
        dW = np.sqrt(dt) * rng.standard_normal(x.shape)
    return rotate_exp(-np.asarray(omega) * dt - gamma * dW, x)


def measure(x, model: MeasurementModel, rng: np.random.Generator):
    x = np.asarray(x, dtype=float)
    return model.gain_g * x + np.sqrt(model.alpha2) * rng.standard_normal(x.shape)


def _draw_run(config: ScenarioConfig, rng: np.random.Generator):
    # Fixed draw order so a scenario is a pure function of the stream.
    M, sub = config.n_meas, config.substeps_per_meas
    x0 = sample_uniform_sphere(rng)
    var = config.ou.stationary_var
    omega0 = np.sqrt(var) * rng.standard_normal(3) if var is not None else np.zeros(3)
    ou_noise = rng.standard_normal((M, 3))
    sde_noise = rng.standard_normal((M * sub, 3))
    meas_noise = rng.standard_normal((M, 3))
    return x0, omega0, ou_noise, sde_noise, meas_noise


def _assemble(config: ScenarioConfig, x0, omega0, ou_noise, sde_noise, meas_noise):
    M, sub = config.n_meas, config.substeps_per_meas
    n = M * sub
    dt = config.dt
    times = np.arange(n + 1) * dt

    decay, std = config.ou.transition(1.0 / config.meas_rate_hz)
    omegas = np.empty((M + 1,) + omega0.shape)
    omegas[0] = omega0
    for k in range(M):
        omegas[k + 1] = decay * omegas[k] + std * ou_noise[k]
    gyro = np.empty((n + 1,) + omega0.shape)
    gyro[:n] = np.repeat(omegas[:M], sub, axis=0)
    gyro[n] = omegas[M]

    gamma = np.sqrt(config.gamma2)
    dW = np.sqrt(dt) * sde_noise
    truth = np.empty((n + 1,) + x0.shape)
    truth[0] = x0
    x = x0
    for j in range(n):
        x = rotate_exp(-gyro[j] * dt - gamma * dW[j], x)
        truth[j + 1] = x

    meas_mask = np.zeros(n + 1, dtype=bool)
    meas_mask[sub::sub] = True
    meas = np.full_like(truth, np.nan)
    model = config.model
    meas[meas_mask] = model.gain_g * truth[meas_mask] + np.sqrt(model.alpha2) * meas_noise
    return Scenario(times, truth, gyro, meas_mask, meas)


def simulate_scenario(config: ScenarioConfig, rng: np.random.Generator = None) -> Scenario:
    """Simulate one run; ``rng`` defaults to a stream seeded by ``config.seed``."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return _assemble(config, *_draw_run(config, rng))


def simulate_batch(config: ScenarioConfig, rngs) -> Scenario:
    """Simulate one run per generator, stacked along axis 1.

    Run ``i`` is identical to ``simulate_scenario(config, rngs[i])``.
    """
    draws = [_draw_run(config, rng) for rng in rngs]
    stacked = [np.stack(parts, axis=-2) for parts in zip(*draws)]
    return _assemble(config, *stacked)


SCENARIO_COLUMNS = ["t", "truth_x", "truth_y", "truth_z", "gyro_x", "gyro_y", "gyro_z",
                    "meas_flag", "y_x", "y_y", "y_z"]


def write_scenario_csv(scenario: Scenario, path) -> None:
    """Write a single (unbatched) scenario as columnar CSV."""
    if scenario.batch_shape:
        raise ValueError("write_scenario_csv expects a single run")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCENARIO_COLUMNS)
        for j, t in enumerate(scenario.times):
            flag = int(scenario.meas_mask[j])
            y = scenario.meas[j] if flag else ("", "", "")
            w.writerow([repr(float(t)), *map(repr, map(float, scenario.truth[j])),
                        *map(repr, map(float, scenario.gyro[j])), flag,
                        *(repr(float(c)) if flag else c for c in y)])


def read_scenario_csv(path) -> Scenario:
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append(row)
    times = np.array([float(r["t"]) for r in rows])
    truth = np.array([[float(r[f"truth_{c}"]) for c in "xyz"] for r in rows])
    gyro = np.array([[float(r[f"gyro_{c}"]) for c in "xyz"] for r in rows])
    mask = np.array([r["meas_flag"] == "1" for r in rows])
    meas = np.array([[float(r[f"y_{c}"]) if r["meas_flag"] == "1" else np.nan for c in "xyz"]
                     for r in rows])
    return Scenario(times, truth, gyro, mask, meas)
