"""Rational transfer-function algebra, realization and discretization.

Everything downstream (wave approximants, reflection laws, the platoon
simulator) is built on the small set of carriers defined here:
real-coefficient :class:`Polynomial`, :class:`RationalTF` in the Laplace
variable, controllable-canonical :class:`StateSpace` realizations, and
sampled :class:`FrequencyResponse` grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.polynomial.polynomial as npp
from scipy.linalg import expm

from .errors import (
    DegenerateDenominator,
    ExtrapolationError,
    ImproperTF,
    InfiniteDCGain,
    PoleAtProbe,
    UnstablePoles,
    ZeroNumerator,
)

# Relative threshold below which a low-order coefficient is treated as a
# cancellation residue when locating the valuation at s=0 (dc_gain). Storage
# itself only trims exact zeros: coefficient magnitudes legitimately span
# many orders (constant terms of chain polynomials grow like 4^l while the
# monic lead stays 1), so any magnitude-based storage trim would corrupt
# degrees.

# Relative tolerance for pole/zero cancellation by root matching.
CANCEL_TOL = 1e-8
CANCEL_DEGREE_LIMIT = 40


def _trim(coeffs):
    """Drop trailing coefficients that are exactly zero."""
    c = np.asarray(coeffs, dtype=float)
    nz = np.nonzero(c)[0]
    if len(nz) == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1].copy()


class Polynomial:
    """Real polynomial in s, coefficients stored in ascending powers.

    The zero polynomial is represented as exactly ``[0.0]``; otherwise the
    leading coefficient is nonzero after construction.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must form a non-empty 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        self.coeffs = _trim(c)

    @classmethod
    def from_roots(cls, roots, leading=1.0):
        """Build ``leading * prod(s - r)``, taking the real part of the expansion."""
        if len(roots) == 0:
            return cls([leading])
        c = np.atleast_1d(np.poly(np.asarray(roots)))[::-1]
        return cls(np.real(c) * leading)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def is_zero(self):
        return len(self.coeffs) == 1 and self.coeffs[0] == 0.0

    def __call__(self, s):
        return npp.polyval(s, self.coeffs)

    def magnitude_scale(self, s):
        """Sum of |c_k|*|s|^k, the natural scale for cancellation tests at s."""
        return npp.polyval(np.abs(s), np.abs(self.coeffs))

    def derivative(self):
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial(npp.polyder(self.coeffs))

    def roots(self):
        if self.degree < 1:
            return np.array([], dtype=complex)
        return np.roots(self.coeffs[::-1])

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if self.is_zero or other.is_zero:
                return Polynomial([0.0])
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * float(other))

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([float(other)])
        n = max(len(self.coeffs), len(other.coeffs))
        c = np.zeros(n)
        c[: len(self.coeffs)] += self.coeffs
        c[: len(other.coeffs)] += other.coeffs
        return Polynomial(c)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Polynomial) else -float(other))

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"


class RationalTF:
    """Ratio of two real polynomials in s with a monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        if den.is_zero:
            raise DegenerateDenominator("denominator is the zero polynomial")
        lead = den.coeffs[-1]
        self.num = Polynomial(num.coeffs / lead)
        self.den = Polynomial(den.coeffs / lead)

    @classmethod
    def constant(cls, value):
        return cls([float(value)], [1.0])

    @property
    def is_proper(self):
        return self.num.degree <= self.den.degree or self.num.is_zero

    @property
    def is_strictly_proper(self):
        return self.num.is_zero or self.num.degree < self.den.degree

    def poles(self):
        return self.den.roots()

    def zeros(self):
        return self.num.roots()

    def __add__(self, other):
        return tf_add(self, as_tf(other))

    __radd__ = __add__

    def __sub__(self, other):
        return tf_add(self, tf_mul(as_tf(other), RationalTF.constant(-1.0)))

    def __rsub__(self, other):
        return tf_add(as_tf(other), tf_mul(self, RationalTF.constant(-1.0)))

    def __mul__(self, other):
        return tf_mul(self, as_tf(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return tf_mul(self, tf_inv(as_tf(other)))

    def __rtruediv__(self, other):
        return tf_mul(as_tf(other), tf_inv(self))

    def __neg__(self):
        return RationalTF(-self.num, self.den)

    def __call__(self, s):
        return eval_at(self, s)

    def __repr__(self):
        return f"RationalTF({self.num.coeffs.tolist()}, {self.den.coeffs.tolist()})"


def as_tf(x):
    """Coerce a scalar or Polynomial into a RationalTF."""
    if isinstance(x, RationalTF):
        return x
    if isinstance(x, Polynomial):
        return RationalTF(x, Polynomial([1.0]))
    return RationalTF.constant(x)


def _match_and_cancel(num_roots, den_roots, tol):
    """Remove pairwise-matching roots; returns the surviving root lists."""
    den_left = list(den_roots)
    num_left = []
    for rn in num_roots:
        hit = None
        best = np.inf
        for i, rd in enumerate(den_left):
            d = abs(rn - rd)
            if d < best:
                best, hit = d, i
        if hit is not None and best <= tol * max(1.0, abs(rn)):
            den_left.pop(hit)
        else:
            num_left.append(rn)
    return num_left, den_left


def cancel_common_factors(a, tol=CANCEL_TOL):
    """Cancel matching pole/zero pairs of ``a`` (roots via companion eigenvalues)."""
    if a.num.is_zero:
        return RationalTF([0.0], [1.0])
    if a.num.degree == 0 or a.den.degree == 0:
        return a
    num_left, den_left = _match_and_cancel(a.num.roots(), a.den.roots(), tol)
    if len(num_left) == a.num.degree:
        return a
    num = Polynomial.from_roots(num_left, leading=a.num.coeffs[-1])
    den = Polynomial.from_roots(den_left, leading=a.den.coeffs[-1])
    return RationalTF(num, den)


def _reduced(a):
    # root matching degrades on large clustered root sets and can cancel
    # pairs that are merely close; keep high-degree results unreduced
    if a.num.degree + a.den.degree > CANCEL_DEGREE_LIMIT:
        return a
    return cancel_common_factors(a)


def tf_add(a, b):
    """Sum of two rational functions with common-factor reduction."""
    a, b = as_tf(a), as_tf(b)
    num = a.num * b.den + b.num * a.den
    den = a.den * b.den
    return _reduced(RationalTF(num, den))


def tf_mul(a, b):
    """Product of two rational functions, normalized and reduced."""
    a, b = as_tf(a), as_tf(b)
    return _reduced(RationalTF(a.num * b.num, a.den * b.den))


def tf_inv(a):
    """Reciprocal of a rational function."""
    a = as_tf(a)
    if a.num.is_zero:
        raise ZeroNumerator("cannot invert a transfer function with zero numerator")
    return RationalTF(a.den, a.num)


def eval_at(a, s):
    """Evaluate ``a`` at a complex point by Horner's scheme."""
    dv = a.den(s)
    scale = a.den.magnitude_scale(s)
    if scale == 0.0 or np.abs(dv) < 1e-12 * scale:
        raise PoleAtProbe(f"denominator vanishes at s={s}")
    return a.num(s) / dv


def dc_gain(a):
    """Limit of ``a`` as s -> 0 after cancelling common powers of s.

    Valuations count exact zero coefficients only: polynomial products
    preserve exact zeros, while thresholding against the largest
    coefficient misreads inputs whose coefficients span many decades.
    """
    if a.num.is_zero:
        return 0.0
    nc, dc = a.num.coeffs, a.den.coeffs
    vn = int(np.argmax(nc != 0.0))
    vd = int(np.argmax(dc != 0.0))
    if vn < vd:
        raise InfiniteDCGain(f"{vd - vn} uncancelled pole(s) at the origin")
    if vn > vd:
        return 0.0
    return float(nc[vn] / dc[vd])


def origin_limit(f, probes=(1e-5, 1e-6, 1e-7), rtol=1e-3):
    """Limit of ``f(s)`` as real s -> 0+ by Richardson extrapolation.

    Two extrapolants are formed from consecutive probe pairs; if they
    disagree beyond ``rtol`` (relative) an :class:`ExtrapolationError` is
    raised instead of returning a doubtful value.
    """
    p = [float(x) for x in probes]
    if len(p) != 3 or not all(a > b > 0 for a, b in zip(p, p[1:])):
        raise ValueError("probes must be three positive decreasing reals")
    f0, f1, f2 = (complex(f(x)) for x in p)

    def richardson(sa, fa, sb, fb):
        return (sa * fb - sb * fa) / (sa - sb)

    ra = richardson(p[0], f0, p[1], f1)
    rb = richardson(p[1], f1, p[2], f2)
    if abs(ra - rb) > rtol * max(1.0, abs(rb)):
        raise ExtrapolationError(
            f"origin extrapolants disagree: {ra} vs {rb} (rtol={rtol})"
        )
    return float(rb.real)


@dataclass(frozen=True)
class StateSpace:
    """Single-input single-output realization dx/dt = Ax + Bu, y = Cx + Du."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    @property
    def order(self):
        return self.A.shape[0]

    def eval_at(self, s):
        if self.order == 0:
            return complex(self.D)
        n = self.order
        m = s * np.eye(n) - self.A
        x = np.linalg.solve(m, self.B)
        return complex((self.C @ x)[0, 0] + self.D)

    def freq_response(self, omegas):
        omegas = _check_grid(omegas)
        values = np.array([self.eval_at(1j * w) for w in omegas])
        return FrequencyResponse(omegas, values)


def to_state_space(a):
    """Controllable canonical realization of a proper rational function."""
    if not a.is_proper:
        raise ImproperTF(
            f"numerator degree {a.num.degree} exceeds denominator degree {a.den.degree}"
        )
    n = a.den.degree
    if n == 0:
        return StateSpace(
            np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)),
            float(a.num.coeffs[0] / a.den.coeffs[0]),
        )
    den = a.den.coeffs  # monic by construction
    num = np.zeros(n + 1)
    num[: len(a.num.coeffs)] = a.num.coeffs
    d = num[n]
    c = num[:n] - den[:n] * d
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -den[:n]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    return StateSpace(A, B, c.reshape(1, n), float(d))


def _stability_check(poles, allow_marginal):
    if len(poles) == 0:
        return
    scale = max(1.0, float(np.max(np.abs(poles))))
    re = poles.real
    if np.any(re > 1e-9 * scale):
        raise UnstablePoles(f"pole(s) in the right half-plane: {poles[re > 0]}")
    if not allow_marginal and np.any(re > -1e-9 * scale):
        raise UnstablePoles(
            "pole(s) on the imaginary axis; pass allow_marginal=True to accept"
        )


def impulse_response(a, fs, T, allow_marginal=False):
    """Samples of the continuous impulse response at times k/fs, k=0..floor(T*fs).

    The response is produced by exact zero-order discretization of the
    companion realization: the matrix exponential of A/fs is applied
    recursively to the input vector. ``a`` must be strictly proper;
    poles must lie in the open left half-plane unless ``allow_marginal``
    admits poles on the imaginary axis.
    """
    if fs <= 0 or T <= 0:
        raise ValueError("fs and T must be positive")
    if not a.is_strictly_proper:
        raise ImproperTF("impulse sampling requires a strictly proper function")
    count = int(np.floor(T * fs + 1e-9)) + 1
    if a.num.is_zero:
        return np.zeros(count)
    _stability_check(a.poles(), allow_marginal)
    ss = to_state_space(a)
    M = expm(ss.A / fs)
    x = ss.B.ravel().copy()
    c = ss.C.ravel()
    h = np.empty(count)
    for k in range(count):
        h[k] = c @ x
        x = M @ x
    return h


def _check_grid(omegas):
    w = np.asarray(omegas, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("frequency grid must be a non-empty 1-D sequence")
    if np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise ValueError("frequency grid must be positive and strictly increasing")
    return w


@dataclass(frozen=True)
class FrequencyResponse:
    """Complex response values on a positive, strictly increasing grid."""

    omegas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.omegas) != len(self.values):
            raise ValueError("omegas and values must have equal length")

    @property
    def magnitude(self):
        return np.abs(self.values)

    @property
    def phase_rad(self):
        return np.unwrap(np.angle(self.values))


def freq_response(a, omegas):
    """Evaluate ``a`` along the imaginary axis on the given grid."""
    w = _check_grid(omegas)
    s = 1j * w
    dv = a.den(s)
    scale = a.den.magnitude_scale(s)
    bad = np.abs(dv) < 1e-12 * scale
    if np.any(bad):
        raise PoleAtProbe(f"pole at omega={w[bad][0]}")
    return FrequencyResponse(w, a.num(s) / dv)
