"""Special functions and small geometric primitives on S^2 and R^3.

Everything here works on arrays whose trailing axis has length 3 (vectors) or
whose trailing two axes are 3x3 (matrices); leading axes are broadcast, so a
batch of independent Monte Carlo runs can be pushed through in one call.

The log-normaliser of the von Mises-Fisher density on S^2 is

    kappa(r) = -log r + log(4 pi) + log sinh r

and its first two derivatives are the mean resultant length and its slope.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

LOG_4PI = np.log(4.0 * np.pi)

# Below this radius kappa' and kappa'' come from Taylor series of coth; the
# dropped terms are below 1e-14 relative at the threshold, where the direct
# formulas have already lost about that much to cancellation.
SMALL_R = 0.1
# Above this radius the exponentially small corrections are evaluated with
# e^{-2r} instead of sinh/cosh.
LARGE_R = 20.0


class DomainError(ValueError):
    """Input outside the domain of a function."""


class DegenerateParameterError(DomainError):
    """Raised where theta = 0 has no well defined direction."""


class KappaValues(NamedTuple):
    kappa: np.ndarray
    kappa_prime: np.ndarray
    kappa_double_prime: np.ndarray


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise DomainError("kappa is defined for finite r >= 0")
    return r


def _coth_minus_one(r):
    # coth r - 1 = 2 e^{-2r} / (1 - e^{-2r}), valid for r > 0
    e2 = np.exp(-2.0 * r)
    return 2.0 * e2 / -np.expm1(-2.0 * r)


def _csch2(r):
    # 1 / sinh^2 r without overflow
    return (2.0 * np.exp(-r) / -np.expm1(-2.0 * r)) ** 2


def _kp_over_r_series(r2):
    return (1.0 / 3.0 + r2 * (-1.0 / 45.0 + r2 * (2.0 / 945.0 + r2 * (
        -1.0 / 4725.0 + r2 * (2.0 / 93555.0 - r2 * 1382.0 / 638512875.0)))))


def _kpp_series(r2):
    return (1.0 / 3.0 + r2 * (-1.0 / 15.0 + r2 * (10.0 / 945.0 + r2 * (
        -7.0 / 4725.0 + r2 * (18.0 / 93555.0 - r2 * 15202.0 / 638512875.0)))))


def _log_sinh_over_r_series(r2):
    return r2 * (1.0 / 6.0 + r2 * (-1.0 / 180.0 + r2 * (
        1.0 / 2835.0 + r2 * (-1.0 / 37800.0 + r2 / 467775.0))))


def kappa_prime_over_r(r):
    """kappa'(r) / r, finite at r = 0 (limit 1/3)."""
    r = _check_radius(r)
    small = r < SMALL_R
    rs = np.where(small, 1.0, r)
    r2 = np.where(small, r * r, 0.0)
    series = _kp_over_r_series(r2)
    direct = (1.0 / np.tanh(rs) - 1.0 / rs) / rs
    return np.where(small, series, direct)


def one_minus_kappa_prime(r, kappa_prime=None):
    """1 - kappa'(r), accurate for large r where kappa' -> 1.

    ``kappa_prime`` may be passed when already computed for the same ``r``.
    """
    r = _check_radius(r)
    if kappa_prime is None:
        kappa_prime = kappa_all(r).kappa_prime
    big = r > LARGE_R
    rb = np.where(big, r, LARGE_R)
    return np.where(big, 1.0 / rb - _coth_minus_one(rb), 1.0 - kappa_prime)


def kappa_all(r) -> KappaValues:
    """Evaluate kappa, kappa' and kappa'' at radius ``r``.

    Parameters
    ----------
    r : float or ndarray
        Non-negative radius ``|theta|``.

    Returns
    -------
    KappaValues
        Arrays with the shape of ``r``.  At ``r = 0`` the series limits
        ``(log 4 pi, 0, 1/3)`` are returned.

    Raises
    ------
    DomainError
        If ``r`` is negative or not finite.
    """
    r = _check_radius(r)
    small = r < SMALL_R
    big = r > LARGE_R
    # placeholder radius keeps the unused branches free of division by zero
    rs = np.where(small, 1.0, r)
    r2 = np.where(small, r * r, 0.0)

    log_sinh_over_r_small = _log_sinh_over_r_series(r2)
    log_sinh_mid = np.log(np.sinh(np.minimum(rs, LARGE_R)))
    log_sinh_big = rs - np.log(2.0) + np.log1p(-np.exp(-2.0 * rs))
    log_sinh = np.where(big, log_sinh_big, log_sinh_mid)
    kappa = np.where(small, LOG_4PI + log_sinh_over_r_small,
                     LOG_4PI - np.log(rs) + log_sinh)

    kp_small = r * _kp_over_r_series(r2)
    kp_mid = 1.0 / np.tanh(rs) - 1.0 / rs
    kp_big = 1.0 - 1.0 / rs + _coth_minus_one(rs)
    kp = np.where(small, kp_small, np.where(big, kp_big, kp_mid))

    kpp_small = _kpp_series(r2)
    kpp_other = 1.0 / rs**2 - _csch2(rs)
    kpp = np.where(small, kpp_small, kpp_other)
    return KappaValues(kappa, kp, kpp)


def cross(u, v):
    """Cross product over the trailing axis."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.stack([
        u[..., 1] * v[..., 2] - u[..., 2] * v[..., 1],
        u[..., 2] * v[..., 0] - u[..., 0] * v[..., 2],
        u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0],
    ], axis=-1)


def skew(v):
    """Matrix ``[v]_x`` with ``[v]_x @ u == cross(v, u)``."""
    v = np.asarray(v, dtype=float)
    z = np.zeros(v.shape[:-1])
    return np.stack([
        np.stack([z, -v[..., 2], v[..., 1]], axis=-1),
        np.stack([v[..., 2], z, -v[..., 0]], axis=-1),
        np.stack([-v[..., 1], v[..., 0], z], axis=-1),
    ], axis=-2)


def norm(v):
    return np.linalg.norm(v, axis=-1)


def outer(u, v):
    return u[..., :, None] * v[..., None, :]


def projectors(theta):
    """Return ``(P, P_perp)`` projecting onto / orthogonal to ``theta``.

    Raises
    ------
    DegenerateParameterError
        If any ``theta`` is the zero vector.
    """
    theta = np.asarray(theta, dtype=float)
    r2 = np.sum(theta * theta, axis=-1)
    if np.any(r2 == 0.0):
        raise DegenerateParameterError("projectors undefined at theta = 0")
    P = outer(theta, theta) / r2[..., None, None]
    return P, np.eye(3) - P


def _projectors_safe(theta):
    # Zero vectors get P = 0; every caller multiplies P by a coefficient whose
    # theta -> 0 limit makes the combination isotropic.
    theta = np.asarray(theta, dtype=float)
    r2 = np.sum(theta * theta, axis=-1)
    safe = np.where(r2 > 0.0, r2, 1.0)
    P = outer(theta, theta) / safe[..., None, None]
    return P, np.eye(3) - P


def angular_error_deg(u, v, tol=1e-9):
    """Great-circle angle between unit vectors, in degrees."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(norm(u) - 1.0) > tol) or np.any(np.abs(norm(v) - 1.0) > tol):
        raise DomainError("angular_error_deg expects unit vectors")
    c = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(c))


def rotate_exp(v, x):
    """Rotate ``x`` by the rotation ``exp([v]_x)`` (Rodrigues formula)."""
    v = np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    a = norm(v)
    tiny = a < 1e-8
    a_safe = np.where(tiny, 1.0, a)
    # sin(a)/a and (1 - cos a)/a^2, with their series near zero
    c1 = np.where(tiny, 1.0 - a * a / 6.0, np.sin(a_safe) / a_safe)
    c2 = np.where(tiny, 0.5 - a * a / 24.0, 2.0 * (np.sin(0.5 * a_safe) / a_safe) ** 2)
    vx = cross(v, x)
    return x + c1[..., None] * vx + c2[..., None] * cross(v, vx)


def sample_uniform_sphere(rng: np.random.Generator, size=None):
    """Uniform draw(s) on S^2 by normalising a standard normal 3-vector."""
    shape = (3,) if size is None else tuple(np.atleast_1d(size)) + (3,)
    z = rng.standard_normal(shape)
    return z / norm(z)[..., None]
