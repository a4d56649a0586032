"""Projection filter and smoother in natural parameters.

For an exponential family ``p ~ exp(theta . s(x) - psi(theta))`` the
projected prediction and smoothing densities move along the parameter ODEs

    d theta_F / dt = g^{-1}(theta_F) E_F[G s]
    d theta_S / dt = g^{-1}(theta_S) (E_S[G s] + E_S[J Q J^T] (theta_S - theta_F))

where ``G`` is the generator of the state diffusion and ``g`` the Fisher
information.  :func:`predict_rhs_generic` and :func:`smooth_rhs_generic`
evaluate these for any model object exposing the four expectations;
:func:`vmf_predict_rhs` and :func:`vmf_smooth_rhs` are the closed forms for
the von Mises-Fisher family under the gyro-driven sphere diffusion.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .dynamics import Scenario
from .sphere_math import DomainError, _projectors_safe, cross, kappa_all, kappa_prime_over_r, norm, one_minus_kappa_prime
from .vmf import (
    MeasurementModel,
    bayes_update,
    expected_generator_statistic,
    expected_process_noise,
    fisher,
    fisher_inv,
    mode,
)


class NumericalBlowupError(FloatingPointError):
    """Non-finite state encountered while integrating."""

    def __init__(self, t, state=None, msg="non-finite value in ODE integration"):
        super().__init__(f"{msg} at t={t:.6g}")
        self.t = t
        self.state = state


def rk4_step(rhs: Callable, t: float, y, h: float):
    """Classical fourth-order Runge-Kutta step of ``y' = rhs(t, y)``."""
    if not h > 0:
        raise ValueError("step size must be positive")
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    except DomainError:
        # a stage produced a non-finite radius
        raise NumericalBlowupError(t, y) from None
    if not np.all(np.isfinite(out)):
        raise NumericalBlowupError(t, y)
    return out


class ExpFamilyModel(Protocol):
    """Expectations needed by the generic projection ODEs.

    The current gyro rate is carried as mutable context in ``omega``.
    """

    omega: np.ndarray

    def expected_generator_statistic(self, theta): ...
    def fisher(self, theta): ...
    def fisher_inv(self, theta): ...
    def expected_process_noise(self, theta): ...


@dataclass
class VmfSphereModel:
    """vMF family paired with the gyro-driven diffusion on S^2."""

    gamma2: float
    omega: np.ndarray = None

    def __post_init__(self):
        if self.omega is None:
            self.omega = np.zeros(3)

    def expected_generator_statistic(self, theta):
        return expected_generator_statistic(theta, self.omega, self.gamma2)

    def fisher(self, theta):
        return fisher(theta)

    def fisher_inv(self, theta):
        return fisher_inv(theta)

    def expected_process_noise(self, theta):
        return expected_process_noise(theta, self.gamma2)


def _matvec(A, v):
    return np.einsum("...ij,...j->...i", A, v)


def predict_rhs_generic(model: ExpFamilyModel, theta):
    return _matvec(model.fisher_inv(theta), model.expected_generator_statistic(theta))


def smooth_rhs_generic(model: ExpFamilyModel, theta_s, theta_f):
    theta_s = np.asarray(theta_s, dtype=float)
    drift = model.expected_generator_statistic(theta_s)
    pull = _matvec(model.expected_process_noise(theta_s), theta_s - np.asarray(theta_f, dtype=float))
    return _matvec(model.fisher_inv(theta_s), drift + pull)


def _decay_coefficient(r, kv):
    # kappa'(r) / (r kappa''(r)), which tends to 1 as r -> 0
    return kappa_prime_over_r(r) / kv.kappa_double_prime


def vmf_predict_rhs(theta, omega, gamma2):
    """Closed-form vMF prediction vector field.

    ``-omega x theta - gamma2 kappa'(r) / (r kappa''(r)) theta``; in polar form
    the mean direction rotates rigidly and ``r`` decays as
    ``-gamma2 kappa'(r) / kappa''(r)``.
    """
    theta = np.asarray(theta, dtype=float)
    r = norm(theta)
    c = _decay_coefficient(r, kappa_all(r))
    return -cross(omega, theta) - (np.asarray(gamma2, dtype=float) * c)[..., None] * theta


def smoother_gain(theta, gamma2):
    """Matrix coupling the smoother to the filter: ``G(theta)``.

    ``gamma2 [ r/kappa' P_perp + (1 - kappa'^2)/kappa'' P - I ]``, equal to
    ``fisher_inv(theta) @ expected_process_noise(theta)``.  At theta = 0 it
    reduces to ``2 gamma2 I``.
    """
    theta = np.asarray(theta, dtype=float)
    r = norm(theta)
    kv = kappa_all(r)
    P, Pp = _projectors_safe(theta)
    perp = 1.0 / kappa_prime_over_r(r)
    one_m = one_minus_kappa_prime(r, kv.kappa_prime)
    par = one_m * (1.0 + kv.kappa_prime) / kv.kappa_double_prime
    g2 = np.asarray(gamma2, dtype=float)[..., None, None]
    return g2 * (perp[..., None, None] * Pp + par[..., None, None] * P - np.eye(3))


def vmf_smooth_rhs(theta_s, theta_f, omega, gamma2):
    theta_s = np.asarray(theta_s, dtype=float)
    return (vmf_predict_rhs(theta_s, omega, gamma2)
            + _matvec(smoother_gain(theta_s, gamma2), theta_s - np.asarray(theta_f, dtype=float)))


@dataclass
class FilterTrajectory:
    """Filter parameters on the scenario grid.

    ``theta_f[j]`` is stored after any update at ``times[j]``; ``theta_pre[j]``
    is the value just before it (identical where no update happened).
    """

    times: np.ndarray
    theta_f: np.ndarray
    theta_pre: np.ndarray
    update_flags: np.ndarray

    @property
    def modes(self):
        return mode(self.theta_f)


@dataclass
class SmootherTrajectory:
    times: np.ndarray
    theta_s: np.ndarray

    @property
    def modes(self):
        return mode(self.theta_s)


def run_vmf_filter(scenario: Scenario, gamma2: float, model: MeasurementModel,
                   theta0=None) -> FilterTrajectory:
    """Forward pass: RK4 prediction on the fine grid, conjugate updates at
    measurement instants.  ``theta0`` defaults to the uniform distribution."""
    times = scenario.times
    n = len(times) - 1
    shape = scenario.truth.shape[1:]
    theta = np.zeros(shape) if theta0 is None else np.broadcast_to(theta0, shape).astype(float)

    post = np.empty((n + 1,) + shape)
    pre = np.empty_like(post)
    post[0] = pre[0] = theta
    for j in range(n):
        h = times[j + 1] - times[j]
        omega = scenario.gyro[j]
        theta = rk4_step(lambda t, y: vmf_predict_rhs(y, omega, gamma2), times[j], theta, h)
        pre[j + 1] = theta
        if scenario.meas_mask[j + 1]:
            theta = bayes_update(theta, scenario.meas[j + 1], model)
        post[j + 1] = theta
    return FilterTrajectory(times, post, pre, scenario.meas_mask.copy())


def hermite_blend(p1, d1, p0, d0, s, h):
    """Cubic Hermite blend on ``s in [0, 1]`` from ``(p1, d1)`` to ``(p0, d0)``."""
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * p1 + h10 * h * d1 + h01 * p0 + h11 * h * d0


def run_vmf_smoother(filt: FilterTrajectory, scenario: Scenario, gamma2: float) -> SmootherTrajectory:
    """Backward pass from ``theta_S(T) = theta_F(T)``.

    Within step ``[t_j, t_{j+1}]`` the filter parameter is rebuilt by cubic
    Hermite interpolation between the post-update value at ``t_j`` and the
    pre-update value at ``t_{j+1}`` (the filter jumps at measurement
    instants), with end slopes from the prediction vector field.  This keeps
    the lookup error at the same order as RK4.  Integration runs in reversed
    time ``tau = t_{j+1} - t``.
    """
    times = filt.times
    n = len(times) - 1
    out = np.empty_like(filt.theta_f)
    theta = filt.theta_f[n].copy()
    out[n] = theta
    for j in range(n - 1, -1, -1):
        h = times[j + 1] - times[j]
        omega = scenario.gyro[j]
        p0, p1 = filt.theta_f[j], filt.theta_pre[j + 1]
        # slopes in reversed time
        d0 = -vmf_predict_rhs(p0, omega, gamma2)
        d1 = -vmf_predict_rhs(p1, omega, gamma2)

        def rhs(tau, y, p0=p0, p1=p1, d0=d0, d1=d1, h=h, omega=omega):
            return -vmf_smooth_rhs(y, hermite_blend(p1, d1, p0, d0, tau / h, h), omega, gamma2)

        try:
            theta = rk4_step(rhs, 0.0, theta, h)
        except NumericalBlowupError as exc:
            raise NumericalBlowupError(times[j + 1], exc.state,
                                       "smoother blew up") from None
        out[j] = theta
    return SmootherTrajectory(times, out)


def write_trajectory_csv(path, times, params, modes, param_name="theta") -> None:
    """Write ``t, <param>_xyz, mode_xyz`` rows for one run."""
    params = np.asarray(params)
    modes = np.asarray(modes)
    if params.ndim != 2:
        raise ValueError("write_trajectory_csv expects a single run")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *(f"{param_name}_{c}" for c in "xyz"), *(f"mode_{c}" for c in "xyz")])
        for t, p, m in zip(times, params, modes):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in p), *(repr(float(v)) for v in m)])
