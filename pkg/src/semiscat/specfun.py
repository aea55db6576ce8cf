"""Zeroth-order Bessel functions and Helmholtz fundamental solutions for d = 2, 3.

J0 and Y0 are evaluated from scratch: the ascending power series (summed in
long double to survive the cancellation near x = 12) below ``SERIES_CUTOFF``
and the Hankel asymptotic expansion, truncated at its smallest term, above it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError

SERIES_CUTOFF = 12.0
EULER_GAMMA = 0.57721566490153286060651209008240243
_TWO_OVER_PI = 2.0 / np.pi
_MAX_SERIES_TERMS = 80
_MAX_ASYMPTOTIC_TERMS = 60
_MIN_ASYMPTOTIC_TERMS = 6


@dataclass(frozen=True)
class WaveContext:
    """Wavenumber ``k`` (1/length) and spatial dimension ``d``."""

    k: float
    d: int

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k > 0):
            raise DomainError(f"wavenumber must be positive and finite, got {self.k!r}")
        if self.d not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.d!r}")


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Bessel argument must be finite")
    return arr


def _series(x, with_y):
    xl = np.asarray(x, dtype=np.longdouble)
    t = xl * xl / 4
    term = np.ones_like(xl)
    j = np.ones_like(xl)
    s = np.zeros_like(xl)
    harmonic = np.longdouble(0)
    for m in range(1, _MAX_SERIES_TERMS):
        term = -term * t / (m * m)
        j += term
        if with_y:
            harmonic += np.longdouble(1) / m
            s -= term * harmonic
        if np.all(np.abs(term) < 1e-21 * np.maximum(np.abs(j), 1e-300)):
            break
    if not with_y:
        return j.astype(float), None
    y = np.longdouble(_TWO_OVER_PI) * ((np.log(xl / 2) + np.longdouble(EULER_GAMMA)) * j + s)
    return j.astype(float), y.astype(float)


def _asymptotic(x):
    # Hankel expansion: P ~ sum (-1)^m a_2m, Q ~ -sum (-1)^m a_(2m+1), a_k = prod (2j-1)^2 / (k! (8x)^k)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    mag = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _MAX_ASYMPTOTIC_TERMS):
        nxt = mag * (2 * k - 1) ** 2 / (8.0 * k * x)
        if k > _MIN_ASYMPTOTIC_TERMS:
            active &= nxt < mag
        contrib = np.where(active, nxt, 0.0)
        if k % 2 == 0:
            p += (-1) ** (k // 2) * contrib
        else:
            q -= (-1) ** ((k - 1) // 2) * contrib
        mag = np.where(active, nxt, mag)
        if not active.any():
            break
    chi = x - np.pi / 4
    amp = np.sqrt(_TWO_OVER_PI / x)
    c, s = np.cos(chi), np.sin(chi)
    return amp * (p * c - q * s), amp * (p * s + q * c)


def _j0y0(x, with_y=True):
    x = np.atleast_1d(x)
    j = np.empty_like(x)
    y = np.empty_like(x) if with_y else None
    low = x <= SERIES_CUTOFF
    if low.any():
        jl, yl = _series(x[low], with_y)
        j[low] = jl
        if with_y:
            y[low] = yl
    high = ~low
    if high.any():
        jh, yh = _asymptotic(x[high])
        j[high] = jh
        if with_y:
            y[high] = yh
    return j, y


def _restore(values, like):
    return values.reshape(np.shape(like)) if np.ndim(like) else values[0]


def bessel_j0(x):
    """Bessel function of the first kind, order zero, for real ``x >= 0``."""
    arr = _as_array(x)
    if np.any(arr < 0):
        raise DomainError("bessel_j0 requires x >= 0")
    j, _ = _j0y0(arr.ravel(), with_y=False)
    return _restore(j, arr)


def bessel_y0(x):
    """Bessel function of the second kind, order zero, for real ``x > 0``."""
    arr = _as_array(x)
    if np.any(arr <= 0):
        raise DomainError("bessel_y0 requires x > 0")
    _, y = _j0y0(arr.ravel())
    return _restore(y, arr)


def hankel0(x):
    """Hankel function of the first kind H0^(1)(x) = J0(x) + i Y0(x), ``x > 0``."""
    arr = _as_array(x)
    if np.any(arr <= 0):
        raise DomainError("hankel0 requires x > 0")
    j, y = _j0y0(arr.ravel())
    return _restore(j + 1j * y, arr)


def kernel(r, ctx: WaveContext):
    """Outgoing fundamental solution of -Laplace - k^2 as a function of distance ``r > 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise SingularityError("fundamental solution is singular at r = 0")
    kr = ctx.k * r
    if ctx.d == 2:
        return 0.25j * hankel0(kr)
    return np.exp(1j * kr) / (4 * np.pi * r)


def kernel_regular_part(r, ctx: WaveContext):
    """Kernel minus its Laplace singularity; continuous at r = 0.

    d = 2: (i/4) H0(kr) + ln(r)/(2 pi).  d = 3: (e^{ikr} - 1)/(4 pi r).
    """
    r = np.asarray(r, dtype=float)
    out = np.empty(r.shape, dtype=complex)
    zero = r == 0
    pos = ~zero
    k = ctx.k
    if ctx.d == 2:
        out[zero] = 0.25j - (np.log(k / 2) + EULER_GAMMA) / (2 * np.pi)
        out[pos] = 0.25j * hankel0(k * r[pos]) + np.log(r[pos]) / (2 * np.pi)
    else:
        out[zero] = 1j * k / (4 * np.pi)
        half = np.sin(k * r[pos] / 2)
        out[pos] = (-2 * half * half + 1j * np.sin(k * r[pos])) / (4 * np.pi * r[pos])
    return out


def fundamental_solution(x, y, ctx: WaveContext):
    """Phi(x, y): (i/4) H0(k|x-y|) in 2-D, e^{ik|x-y|}/(4 pi |x-y|) in 3-D.

    ``x`` and ``y`` broadcast as arrays of points with the coordinate on the last axis.
    """
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if diff.shape[-1] != ctx.d:
        raise DomainError(f"points must have {ctx.d} coordinates")
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(r == 0):
        raise SingularityError("fundamental solution evaluated at x = y")
    return kernel(r, ctx)


def farfield_constant(ctx: WaveContext) -> complex:
    """C_d = k^{(d-3)/2} e^{-i pi (d-3)/4} / (2^{(d+1)/2} pi^{(d-1)/2})."""
    d, k = ctx.d, ctx.k
    return (k ** ((d - 3) / 2) * np.exp(-1j * np.pi * (d - 3) / 4)
            / (2 ** ((d + 1) / 2) * np.pi ** ((d - 1) / 2)))


def ball_integral(rho, ctx: WaveContext) -> complex:
    """Integral of Phi(0, y) over the ball |y| < rho.

    In 3-D the radial integral is elementary.  In 2-D the ascending series of
    H0 is integrated term by term, including the x^{2m} ln x terms.
    """
    if rho <= 0:
        raise DomainError("ball radius must be positive")
    k = ctx.k
    if ctx.d == 3:
        return (np.exp(1j * k * rho) * (1 - 1j * k * rho) - 1) / k ** 2
    # int_0^rho r (kr/2)^{2m} dr = rho^2/2 * t^m/(m+1), t = (k rho/2)^2
    # int_0^rho r (kr/2)^{2m} ln(kr/2) dr = rho^2/2 * t^m/(m+1) * (L - 1/(2m+2)), L = ln(k rho/2)
    t = (k * rho / 2) ** 2
    big_l = np.log(k * rho / 2)
    j_int = 0.0
    y_int = 0.0
    term = 1.0
    harmonic = 0.0
    for m in range(_MAX_SERIES_TERMS):
        if m > 0:
            term *= -t / (m * m)
            harmonic += 1.0 / m
        base = term / (m + 1)
        j_int += base
        y_int += base * (big_l + EULER_GAMMA - 1.0 / (2 * m + 2)) - base * harmonic
        if abs(base) < 1e-18 * max(abs(j_int), 1e-300) and m > 2:
            break
    y_int *= _TWO_OVER_PI
    radial = rho ** 2 / 2 * (j_int + 1j * y_int)
    return 2 * np.pi * 0.25j * radial
