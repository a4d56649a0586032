"""Continuous-discrete Gaussian filter and smoother baseline.

Given the gyro rate the drift ``-(omega x x) - gamma2 x`` is linear, ``A =
-[omega]_x - gamma2 I``, and ``Q(x) = gamma2 (|x|^2 I - x x^T)`` is quadratic,
so Gaussian expectations of both are exact:

    E[Q] = gamma2 ((tr P + |m|^2) I - (P + m m^T)).

The filter integrates the mean/covariance moment ODEs between measurements
and applies a Kalman update with ``H = g I``.  The smoother integrates the
backward moment ODEs driven by the filter moments.  Point estimates are the
mean projected onto the sphere.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dynamics import Scenario
from .projection import NumericalBlowupError, hermite_blend, rk4_step
from .sphere_math import DomainError, norm, outer, skew
from .vmf import MeasurementModel

log = logging.getLogger(__name__)

I3 = np.eye(3)


class DegenerateMeanError(DomainError):
    pass


@dataclass
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray


def uniform_sphere_belief(batch_shape=()):
    """Moment match of the uniform distribution on S^2: ``N(0, I/3)``."""
    return GaussianBelief(np.zeros(batch_shape + (3,)),
                          np.broadcast_to(I3 / 3.0, batch_shape + (3, 3)).copy())


def _sym(P):
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def drift_matrix(omega, gamma2):
    return -skew(omega) - gamma2 * I3


def expected_noise(mean, cov, gamma2):
    tr = np.trace(cov, axis1=-2, axis2=-1) + np.sum(mean * mean, axis=-1)
    return gamma2 * (tr[..., None, None] * I3 - (cov + outer(mean, mean)))


def gf_predict_rhs(belief: GaussianBelief, omega, gamma2):
    """Return ``(dm/dt, dP/dt)`` for the moment ODEs."""
    A = drift_matrix(omega, gamma2)
    m, P = belief.mean, belief.cov
    AP = A @ P
    dm = np.einsum("...ij,...j->...i", A, m)
    dP = AP + np.swapaxes(AP, -1, -2) + expected_noise(m, P, gamma2)
    return dm, dP


def kalman_update(belief: GaussianBelief, y, model: MeasurementModel) -> GaussianBelief:
    g = model.gain_g
    m, P = belief.mean, belief.cov
    S = g * g * P + model.alpha2 * I3
    # K = g P S^{-1}; both P and S are symmetric
    K = g * np.swapaxes(np.linalg.solve(S, P), -1, -2)
    innov = np.asarray(y, dtype=float) - g * m
    m_new = m + np.einsum("...ij,...j->...i", K, innov)
    P_new = _sym((I3 - g * K) @ P)
    return GaussianBelief(m_new, P_new)


def _pack(m, P):
    return np.concatenate([m, P.reshape(P.shape[:-2] + (9,))], axis=-1)


def _unpack(z):
    return z[..., :3], z[..., 3:].reshape(z.shape[:-1] + (3, 3))


@dataclass
class GaussianTrajectory:
    """Beliefs on the scenario grid.  ``*_pre`` hold values just before an
    update at the same instant (equal to the stored values elsewhere)."""

    times: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    means_pre: np.ndarray = None
    covs_pre: np.ndarray = None

    def __len__(self):
        return len(self.times)

    def __getitem__(self, j) -> GaussianBelief:
        return GaussianBelief(self.means[j], self.covs[j])


def run_gaussian_filter(scenario: Scenario, gamma2: float, model: MeasurementModel,
                        belief0: GaussianBelief = None) -> GaussianTrajectory:
    times = scenario.times
    n = len(times) - 1
    batch = scenario.truth.shape[1:-1]
    if belief0 is None:
        belief0 = uniform_sphere_belief(batch)
    m = np.broadcast_to(belief0.mean, batch + (3,)).astype(float)
    P = np.broadcast_to(belief0.cov, batch + (3, 3)).astype(float)

    means = np.empty((n + 1,) + m.shape)
    covs = np.empty((n + 1,) + P.shape)
    means_pre, covs_pre = np.empty_like(means), np.empty_like(covs)
    means[0] = means_pre[0] = m
    covs[0] = covs_pre[0] = P
    z = _pack(m, P)
    for j in range(n):
        omega = scenario.gyro[j]

        def rhs(t, z, omega=omega):
            dm, dP = gf_predict_rhs(GaussianBelief(*_unpack(z)), omega, gamma2)
            return _pack(dm, dP)

        z = rk4_step(rhs, times[j], z, times[j + 1] - times[j])
        m, P = _unpack(z)
        P = _sym(P)
        means_pre[j + 1], covs_pre[j + 1] = m, P
        if scenario.meas_mask[j + 1]:
            b = kalman_update(GaussianBelief(m, P), scenario.meas[j + 1], model)
            m, P = b.mean, b.cov
        means[j + 1], covs[j + 1] = m, P
        z = _pack(m, P)
    return GaussianTrajectory(times, means, covs, means_pre, covs_pre)


def _gain(P_f, Qbar):
    # Qbar P_f^{-1} = (P_f^{-1} Qbar)^T for symmetric arguments
    try:
        X = np.linalg.solve(P_f, Qbar)
    except np.linalg.LinAlgError:
        X = np.linalg.solve(P_f + 1e-12 * I3, Qbar)
    return np.swapaxes(X, -1, -2)


def gs_backward_rhs(mean_s, cov_s, mean_f, cov_f, omega, gamma2):
    """Time derivatives of the smoother moments (forward-time convention)."""
    A = drift_matrix(omega, gamma2)
    Qbar = expected_noise(mean_f, cov_f, gamma2)
    C = A + _gain(cov_f, Qbar)
    dm = (np.einsum("...ij,...j->...i", A, mean_s)
          + np.einsum("...ij,...j->...i", C - A, mean_s - mean_f))
    CP = C @ cov_s
    dP = CP + np.swapaxes(CP, -1, -2) - Qbar
    return dm, dP


def run_gaussian_smoother(filt: GaussianTrajectory, scenario: Scenario,
                          gamma2: float) -> GaussianTrajectory:
    """Backward RK4 from the terminal filter belief.

    Inside each step the filter moments are rebuilt by cubic Hermite
    interpolation between the post-update values at the left end and the
    pre-update values at the right end, with slopes from the moment ODEs.
    """
    times = filt.times
    n = len(times) - 1
    means = np.empty_like(filt.means)
    covs = np.empty_like(filt.covs)
    means[n], covs[n] = filt.means[n], filt.covs[n]
    z = _pack(filt.means[n], filt.covs[n])
    for j in range(n - 1, -1, -1):
        h = times[j + 1] - times[j]
        omega = scenario.gyro[j]
        z1 = _pack(filt.means_pre[j + 1], filt.covs_pre[j + 1])
        z0 = _pack(filt.means[j], filt.covs[j])
        # slopes in reversed time
        d1 = -_pack(*gf_predict_rhs(GaussianBelief(*_unpack(z1)), omega, gamma2))
        d0 = -_pack(*gf_predict_rhs(GaussianBelief(*_unpack(z0)), omega, gamma2))

        def rhs(tau, z, z1=z1, d1=d1, z0=z0, d0=d0, h=h, omega=omega):
            ms, Ps = _unpack(z)
            mf, Pf = _unpack(hermite_blend(z1, d1, z0, d0, tau / h, h))
            dm, dP = gs_backward_rhs(ms, Ps, mf, Pf, omega, gamma2)
            return -_pack(dm, dP)

        try:
            z = rk4_step(rhs, 0.0, z, h)
        except NumericalBlowupError as exc:
            raise NumericalBlowupError(times[j + 1], exc.state, "Gaussian smoother blew up") from None
        m, P = _unpack(z)
        P = _sym(P)
        means[j], covs[j] = m, P
        z = _pack(m, P)
    return GaussianTrajectory(times, means, covs)


def norm_constrained_estimate(m):
    """Project a mean onto the unit sphere."""
    m = np.asarray(m, dtype=float)
    r = norm(m)
    if np.any(r <= 1e-12):
        raise DegenerateMeanError("mean too close to zero to define a direction")
    return m / r[..., None]


def norm_constrained_estimates(m, fallback=(0.0, 0.0, 1.0)):
    """Vectorised :func:`norm_constrained_estimate` that substitutes
    ``fallback`` for degenerate means.  Returns ``(estimates, n_substituted)``."""
    m = np.asarray(m, dtype=float)
    r = norm(m)
    bad = r <= 1e-12
    est = np.where(bad[..., None], np.asarray(fallback, dtype=float),
                   m / np.where(bad, 1.0, r)[..., None])
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        log.info("substituted fallback direction for %d degenerate means", n_bad)
    return est, n_bad
