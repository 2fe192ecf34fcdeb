"""Wave transfer function of a bidirectional vehicle chain.

An in-platoon vehicle under symmetric bidirectional control obeys
``X_n = (X_{n-1} + X_{n+1}) / coupling`` where the coupling ratio is
``1/(P*C) + 2``. Positional changes travel along the chain as waves; the
wave transfer function maps one vehicle's wave component to its
neighbour's. This module evaluates that function exactly (per complex
probe), approximates it by a rational function via a continued-fraction
recursion, and samples the approximant into an FIR filter usable online.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegreeOverflow, SampleRateMismatch, ZeroNumerator, DegenerateDenominator
from .lti import RationalTF, freq_response, impulse_response, tf_add, tf_inv, tf_mul

# Degree cap for the continued-fraction recursion; exceeding it means
# cancellation failed and further iteration would only amplify noise.
MAX_APPROX_DEGREE = 200

DEFAULT_ITERATIONS = 20
DEFAULT_FIR_RATE = 100.0
DEFAULT_FIR_SPAN = 15.0


def friction_plant(xi):
    """Double-integrator vehicle with linear friction: 1/(s^2 + xi*s)."""
    return RationalTF([1.0], [0.0, float(xi), 1.0])


def pi_controller(kp, ki):
    """PI controller acting on distance error: (kp*s + ki)/s."""
    return RationalTF([float(ki), float(kp)], [0.0, 1.0])


@dataclass(frozen=True)
class CouplingRatio:
    """Neighbour-coupling ratio 1/(P*C) + 2 with its plant and controller."""

    tf: RationalTF
    plant: RationalTF
    controller: RationalTF

    def __call__(self, s):
        return self.tf(s)


def make_coupling(plant, controller):
    """Build the coupling ratio 1/(P*C) + 2 for the given loop pieces."""
    loop = tf_mul(plant, controller)
    if loop.num.is_zero:
        raise ZeroNumerator("plant*controller has zero numerator")
    tf = tf_add(tf_inv(loop), RationalTF.constant(2.0))
    return CouplingRatio(tf=tf, plant=plant, controller=controller)


def coupling_from_gains(kp, ki, xi):
    """Coupling ratio for the standard friction plant + PI controller."""
    return make_coupling(friction_plant(xi), pi_controller(kp, ki))


def wave_tf_exact(coupling_value):
    """Downstream wave transfer value for one complex coupling sample.

    Returns the root of ``G**2 - a*G + 1 = 0`` with magnitude <= 1. When
    both roots sit on the unit circle the one with non-positive imaginary
    part is returned.
    """
    a = complex(coupling_value)
    sq = np.sqrt(a * a - 4.0)
    # Form the larger-magnitude root first to dodge cancellation, then
    # use the product-of-roots identity for the smaller one.
    big = (a + sq) / 2.0 if abs(a + sq) >= abs(a - sq) else (a - sq) / 2.0
    small = 1.0 / big
    if abs(abs(small) - 1.0) < 1e-9 and small.imag > 0:
        return big
    return small


def wave_tf_exact_shifted(shift_value):
    """Downstream wave transfer value from the coupling sample minus 2.

    Equivalent to ``wave_tf_exact(shift_value + 2)`` but accurate when the
    coupling sits within rounding distance of 2 (near s = 0), where forming
    ``a*a - 4`` directly loses most significant digits. Solves the quadratic
    for the deviation w = G - 1: ``w**2 - d*w - d = 0``.
    """
    d = complex(shift_value)
    sq = np.sqrt(d * (d + 4.0))
    lo, hi = (d - sq) / 2.0, (d + sq) / 2.0
    g_lo, g_hi = 1.0 + lo, 1.0 + hi
    small = g_lo if abs(g_lo) <= abs(g_hi) else g_hi
    big = g_hi if small is g_lo else g_lo
    if abs(abs(small) - 1.0) < 1e-9 and small.imag > 0:
        return big
    return small


def wave_tf_pair(coupling_value):
    """Both wave roots (downstream, upstream); their product is 1."""
    g = wave_tf_exact(coupling_value)
    return g, complex(coupling_value) - g


@dataclass(frozen=True)
class WaveApprox:
    """Rational approximant of the wave transfer function."""

    approx: RationalTF
    iterations: int
    coupling: CouplingRatio

    def __call__(self, s):
        return self.approx(s)


def wave_tf_approx(coupling, iterations=DEFAULT_ITERATIONS):
    """Continued-fraction rational approximation of the wave transfer function.

    Starting from 1, the recursion ``g <- 1/(coupling - g)`` is applied
    ``iterations`` times with pole/zero cancellation after every step. The
    result equals the leader-to-first-follower transfer function of a
    chain of ``iterations`` vehicles.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    g = RationalTF.constant(1.0)
    for _ in range(iterations):
        step = tf_add(coupling.tf, tf_mul(g, RationalTF.constant(-1.0)))
        try:
            g = tf_inv(step)
        except ZeroNumerator as exc:
            raise DegenerateDenominator(
                "recursion step produced a zero denominator"
            ) from exc
        if g.den.degree > MAX_APPROX_DEGREE:
            raise DegreeOverflow(
                f"approximant degree {g.den.degree} exceeds {MAX_APPROX_DEGREE}; "
                "cancellation is not keeping up"
            )
    return WaveApprox(approx=g, iterations=iterations, coupling=coupling)


@dataclass(frozen=True)
class WaveFIR:
    """Truncated, sampled impulse response of the wave transfer function.

    Taps are pre-scaled by 1/fs so that a plain dot product with position
    samples approximates the continuous convolution and ``sum(taps)``
    equals the DC gain.
    """

    taps: np.ndarray
    fs: float
    span: float

    def __post_init__(self):
        expect = int(np.floor(self.span * self.fs + 1e-9)) + 1
        if len(self.taps) != expect:
            raise ValueError(f"expected {expect} taps, got {len(self.taps)}")

    @property
    def dc(self):
        return float(np.sum(self.taps))

    def step_response(self):
        return np.cumsum(self.taps)


def wave_fir(approx, fs=DEFAULT_FIR_RATE, span=DEFAULT_FIR_SPAN):
    """Sample the approximant's impulse response into FIR taps."""
    h = impulse_response(approx.approx, fs, span)
    return WaveFIR(taps=h / fs, fs=float(fs), span=float(span))


@dataclass(frozen=True)
class PeakGain:
    """Grid maxima of the wave transfer magnitude."""

    exact: float
    approx: float | None
    omegas: np.ndarray


def peak_wave_gain(coupling, omegas, approx=None):
    """Max |wave transfer| over a jw grid, exact branch plus optional approximant."""
    resp = freq_response(coupling.tf, omegas)
    exact_vals = np.array([wave_tf_exact(v) for v in resp.values])
    exact = float(np.max(np.abs(exact_vals)))
    amax = None
    if approx is not None:
        amax = float(np.max(np.abs(freq_response(approx.approx, omegas).values)))
    return PeakGain(exact=exact, approx=amax, omegas=resp.omegas)


def fir_convolve(fir, history, fs=None):
    """Dot product of taps with the most recent samples (zero-padded past).

    ``history`` is ordered oldest first; its last element is the newest
    sample. ``fs``, when given, must match the filter's design rate.
    """
    if fs is not None and abs(float(fs) - fir.fs) > 1e-9 * fir.fs:
        raise SampleRateMismatch(f"history rate {fs} != filter rate {fir.fs}")
    h = np.asarray(history, dtype=float)
    if h.ndim != 1:
        raise ValueError("history must be 1-D")
    recent = h[::-1][: len(fir.taps)]
    return float(np.dot(fir.taps[: len(recent)], recent))
