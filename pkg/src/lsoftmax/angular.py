"""Scalar mathematics of the margin function ψ.

Every function accepts a Python float or a numpy array of cosines and works elementwise
in double precision. Scalar input returns a ``float``, array input returns an array.

ψ is defined piecewise on the angle θ = acos(c):

    ψ(θ) = (-1)^k cos(mθ) - 2k,    θ ∈ [kπ/m, (k+1)π/m],  k = 0 .. m-1

and is evaluated without θ by expanding cos(mθ) as a polynomial in c.
"""

from functools import lru_cache
from math import comb, pi
from typing import Tuple, Union

import numpy as np

from .exceptions import ValidationError

Cosine = Union[float, np.ndarray]


def _check_margin(m: int) -> int:
    if int(m) != m or m < 1:
        raise ValidationError(f"margin m must be a positive integer, got {m}")
    return int(m)


def _as_cosine(c: Cosine) -> Tuple[np.ndarray, bool]:
    """Clamp to [-1, 1]; dot-product rounding can push cosines slightly outside."""
    arr = np.clip(np.asarray(c, dtype=np.float64), -1.0, 1.0)
    return arr, arr.ndim == 0


def _result(value: np.ndarray, scalar: bool) -> Cosine:
    return float(value) if scalar else value


@lru_cache(maxsize=None)
def _boundary_table(m: int) -> np.ndarray:
    table = np.cos(np.arange(m + 1) * pi / m)
    table.setflags(write=False)
    return table


def segment_boundaries(m: int) -> np.ndarray:
    """Look-up table of cos(kπ/m) for k = 0 .. m (decreasing, from 1 to -1)."""
    return _boundary_table(_check_margin(m)).copy()


def segment_of(c: Cosine, m: int) -> Union[int, np.ndarray]:
    """Segment index k with c ∈ [cos((k+1)π/m), cos(kπ/m)].

    A cosine exactly on an interior boundary cos(kπ/m) belongs to segment k, the larger-k
    side (for m=2: k=1 iff c <= cos(π/2)).
    """
    m = _check_margin(m)
    arr, scalar = _as_cosine(c)
    interior = _boundary_table(m)[1:m]
    k = np.sum(arr[..., np.newaxis] <= interior, axis=-1).astype(np.int64)
    return int(k) if scalar else k


def near_boundary(c: Cosine, m: int, tol: float = 1e-4) -> Union[bool, np.ndarray]:
    """Whether c lies within ``tol`` of an interior segment boundary, where ψ' jumps."""
    m = _check_margin(m)
    arr, scalar = _as_cosine(c)
    interior = _boundary_table(m)[1:m]
    if interior.size == 0:
        hit = np.zeros(arr.shape, dtype=bool)
    else:
        hit = np.any(np.abs(arr[..., np.newaxis] - interior) < tol, axis=-1)
    return bool(hit) if scalar else hit


def cos_multiple(c: Cosine, m: int) -> Cosine:
    """cos(m·acos(c)) via Σ_n (-1)^n C(m, 2n) c^(m-2n) (1-c²)^n, 2n <= m."""
    m = _check_margin(m)
    arr, scalar = _as_cosine(c)
    sin_sq = 1.0 - arr * arr
    total = np.zeros_like(arr)
    for n in range(m // 2 + 1):
        term = comb(m, 2 * n) * arr ** (m - 2 * n)
        if n:
            term = term * sin_sq**n
        total = total + term if n % 2 == 0 else total - term
    return _result(total, scalar)


def cos_multiple_derivative(c: Cosine, m: int) -> Cosine:
    """d cos(mθ) / d cos(θ), by differentiating the expansion term by term."""
    m = _check_margin(m)
    arr, scalar = _as_cosine(c)
    sin_sq = 1.0 - arr * arr
    total = np.zeros_like(arr)
    for n in range(m // 2 + 1):
        power = m - 2 * n
        coeff = comb(m, 2 * n)
        term = np.zeros_like(arr)
        if power:
            term = term + power * arr ** (power - 1) * sin_sq**n
        if n:
            term = term - 2.0 * n * arr ** (power + 1) * sin_sq ** (n - 1)
        total = total + coeff * term if n % 2 == 0 else total - coeff * term
    return _result(total, scalar)


def psi(c: Cosine, m: int) -> Cosine:
    """ψ(acos(c)) = (-1)^k cos(mθ) - 2k. Range [-(2m-1), 1]; equals c when m=1."""
    m = _check_margin(m)
    arr, scalar = _as_cosine(c)
    if m == 1:
        return _result(arr.copy(), scalar)
    k = segment_of(arr, m)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    value = sign * cos_multiple(arr, m) - 2.0 * k
    return _result(value, scalar)


def psi_derivative(c: Cosine, m: int) -> Cosine:
    """dψ/dc = (-1)^k · d cos(mθ)/dc, using the segment chosen by :func:`segment_of`."""
    m = _check_margin(m)
    arr, scalar = _as_cosine(c)
    if m == 1:
        return _result(np.ones_like(arr), scalar)
    k = segment_of(arr, m)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    return _result(sign * cos_multiple_derivative(arr, m), scalar)
