"""von Mises-Fisher family on S^2 in natural parameters.

A density is ``p(x) = exp(theta . x - kappa(|theta|))`` with respect to the
uniform (area) measure, with ``theta = 0`` the uniform distribution.  The
sufficient statistic is ``x`` itself, so its Jacobian is the identity.

All functions broadcast over leading axes of ``theta``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere_math import (
    _projectors_safe,
    cross,
    kappa_all,
    kappa_prime_over_r,
    norm,
    one_minus_kappa_prime,
    sample_uniform_sphere,
)


@dataclass(frozen=True)
class MeasurementModel:
    """Accelerometer model ``y ~ N(gain_g * x, alpha2 * I)``."""

    gain_g: float = 9.82
    alpha2: float = 1e-3

    def __post_init__(self):
        if not (self.gain_g > 0 and self.alpha2 > 0):
            raise ValueError("gain_g and alpha2 must be positive")


def _radius_terms(theta):
    theta = np.asarray(theta, dtype=float)
    r = norm(theta)
    kv = kappa_all(r)
    return theta, r, kv


def mode(theta):
    """Mode direction ``theta / |theta|``; undefined (nan) at theta = 0."""
    theta = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return theta / norm(theta)[..., None]


def expected_statistic(theta):
    """Mean ``E[X] = kappa'(r) theta / r``; zero at theta = 0."""
    theta = np.asarray(theta, dtype=float)
    return kappa_prime_over_r(norm(theta))[..., None] * theta


def fisher(theta):
    """Fisher information, equal to ``Cov_theta[X]``."""
    theta, r, kv = _radius_terms(theta)
    P, Pp = _projectors_safe(theta)
    a = kappa_prime_over_r(r)[..., None, None]
    return a * Pp + kv.kappa_double_prime[..., None, None] * P


def fisher_inv(theta):
    """Closed-form inverse of :func:`fisher`.

    The coefficient on the orthogonal complement is ``r / kappa'(r)``, the
    reciprocal of the corresponding Fisher coefficient.
    """
    theta, r, kv = _radius_terms(theta)
    P, Pp = _projectors_safe(theta)
    a = 1.0 / kappa_prime_over_r(r)[..., None, None]
    return a * Pp + (1.0 / kv.kappa_double_prime)[..., None, None] * P


def bayes_update(theta, y, model: MeasurementModel):
    """Conjugate update with one accelerometer sample.

    On the unit sphere ``|y - g x|^2 = const - 2 g y.x``, so the Gaussian
    likelihood is itself a vMF kernel in ``x`` with parameter ``g y / alpha2``.
    """
    return np.asarray(theta, dtype=float) + (model.gain_g / model.alpha2) * np.asarray(y, dtype=float)


def sample_vmf(theta, rng: np.random.Generator, size=None):
    """Exact draws from the vMF density with natural parameter ``theta``.

    The axial coordinate ``t = mu . x`` has density proportional to
    ``exp(r t)`` on ``[-1, 1]`` and is drawn by inverting its CDF; the azimuth
    is uniform.  ``theta`` must be a single 3-vector here.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (3,):
        raise ValueError("sample_vmf expects a single 3-vector theta")
    r = float(np.linalg.norm(theta))
    if r == 0.0:
        return sample_uniform_sphere(rng, size)

    shape = () if size is None else tuple(np.atleast_1d(size))
    w = 1.0 - rng.random(shape)  # in (0, 1]
    phi = 2.0 * np.pi * rng.random(shape)
    if r < 1e-8:
        t = 1.0 - 2.0 * w
    else:
        t = 1.0 + np.log1p(w * np.expm1(-2.0 * r)) / r
    t = np.clip(t, -1.0, 1.0)

    mu = theta / r
    # orthonormal pair spanning the plane orthogonal to mu
    helper = np.array([1.0, 0.0, 0.0]) if abs(mu[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(mu, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(mu, e1)
    s = np.sqrt(np.maximum(1.0 - t * t, 0.0))
    x = (t[..., None] * mu + (s * np.cos(phi))[..., None] * e1
         + (s * np.sin(phi))[..., None] * e2)
    return x / norm(x)[..., None]


def expected_generator_statistic(theta, omega, gamma2):
    """``E_theta[G[x]]`` for the gyro-driven diffusion on S^2.

    The generator applied to the linear statistic ``x`` has no second-order
    part, leaving ``-(omega x m) - gamma2 m`` with ``m = E_theta[X]``.
    """
    m = expected_statistic(theta)
    return -cross(omega, m) - np.asarray(gamma2, dtype=float)[..., None] * m


def expected_process_noise(theta, gamma2):
    """``E_theta[Q(X)]`` with ``Q(x) = gamma2 (|x|^2 I - x x^T)``.

    Uses ``E[XX^T] = fisher + m m^T`` which splits into
    ``(1 - kappa'/r) P_perp + (1 - kappa'' - kappa'^2) P``.
    """
    theta, r, kv = _radius_terms(theta)
    P, Pp = _projectors_safe(theta)
    kp = kv.kappa_prime
    one_m = one_minus_kappa_prime(r, kp)
    perp = 1.0 - kappa_prime_over_r(r)
    par = one_m * (1.0 + kp) - kv.kappa_double_prime
    g2 = np.asarray(gamma2, dtype=float)[..., None, None]
    return g2 * (perp[..., None, None] * Pp + par[..., None, None] * P)
