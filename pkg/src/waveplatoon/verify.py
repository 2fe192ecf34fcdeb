"""Self-check suites: each check recomputes an identity or bound the rest
of the package relies on and reports the measured slack.

Checks never raise; a crashed check becomes a failed entry so that broken
configurations (for instance an unstable gain set) are reported alongside
the healthy ones.
"""

import numpy as np
from dataclasses import dataclass

from .boundary import ChainModel, chain_tf_prediction, kappa_front, kappa_rear
from .lti import eval_at, freq_response
from .sim import chain_state_space
from .wave import (
    DEFAULT_FIR_SPAN,
    coupling_from_gains,
    wave_fir,
    wave_tf_approx,
    wave_tf_exact,
    wave_tf_pair,
)

SUITES = (
    "quadratic",
    "stability",
    "approximation",
    "string_stability",
    "chain_oracle",
    "absorption",
    "end_gains",
    "fir",
)

# the rational approximant converges from high frequencies downward; suite
# grids stay inside its converged band, the region the absorbers rely on
APPROX_GRID = (1.0, 100.0)
ORACLE_GRID = (1.0, 10.0)


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    measured: float = None
    threshold: float = None
    detail: str = ""

    def line(self):
        state = "pass" if self.passed else "FAIL"
        parts = [f"[{state}] {self.suite}: {self.name}"]
        if self.measured is not None:
            parts.append(f"measured={self.measured:.3e}")
        if self.threshold is not None:
            parts.append(f"threshold={self.threshold:.3e}")
        if self.detail:
            parts.append(self.detail)
        return "  ".join(parts)


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        return [c.line() for c in self.checks]

    def as_dict(self):
        return {
            "passed": self.passed,
            "checks": [
                {
                    "suite": c.suite,
                    "name": c.name,
                    "passed": c.passed,
                    "measured": c.measured,
                    "threshold": c.threshold,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }


def _bounded(suite, name, measured, threshold):
    return CheckResult(suite, name, bool(measured < threshold), float(measured), threshold)


def _suite_quadratic(ctx):
    coup = ctx["coupling"]
    rng = np.random.default_rng(202)
    omegas = 10.0 ** rng.uniform(-2, 2, size=100)
    quad = recip = 0.0
    for w in omegas:
        alpha = eval_at(coup.tf, 1j * w)
        g1, g2 = wave_tf_pair(alpha)
        quad = max(quad, abs(g1 * g1 - alpha * g1 + 1.0))
        recip = max(recip, abs(g1 * g2 - 1.0))
    return [
        _bounded("quadratic", "defining quadratic residual", quad, 1e-10),
        _bounded("quadratic", "downstream*upstream reciprocity", recip, 1e-10),
    ]


def _suite_stability(ctx):
    poles = ctx["approx"].approx.poles()
    worst = float(np.max(poles.real)) if len(poles) else -np.inf
    return [
        CheckResult(
            "stability",
            "approximant poles in open left half-plane",
            worst < 0.0,
            worst,
            0.0,
        )
    ]


def _suite_approximation(ctx):
    coup, ap = ctx["coupling"], ctx["approx"]
    omegas = np.logspace(*np.log10(APPROX_GRID), 200)
    err = 0.0
    for w in omegas:
        alpha = eval_at(coup.tf, 1j * w)
        err = max(err, abs(eval_at(ap.approx, 1j * w) - wave_tf_exact(alpha)))
    return [
        _bounded(
            "approximation",
            f"approximant error on [{APPROX_GRID[0]:g}, {APPROX_GRID[1]:g}] rad/s",
            err,
            1e-2,
        )
    ]


def _suite_string_stability(ctx):
    coup = ctx["coupling"]
    omegas = np.logspace(-2, 2, 1000)
    resp = freq_response(coup.tf, omegas)
    gmag = np.abs([wave_tf_exact(a) for a in resp.values])
    checks = [
        _bounded("string_stability", "peak |wave transfer|", gmag.max(), 1.0 + 1e-9)
    ]
    g = np.array([wave_tf_exact(a) for a in resp.values])
    for n in (2, 5, 10):
        bound = np.abs(1.0 + g ** (2 * n + 1)).max()
        checks.append(
            _bounded(
                "string_stability",
                f"chain denominator bound, {n} followers",
                bound,
                2.0 + 1e-6,
            )
        )
    return checks


def _suite_chain_oracle(ctx):
    coup = ctx["coupling"]
    omegas = np.logspace(*np.log10(ORACLE_GRID), 100)
    worst = 0.0
    for m in (2, 3, 4, 5):
        ss = chain_state_space(ctx["kp"], ctx["ki"], ctx["xi"], m)
        model = ChainModel(
            coupling=coup, n_vehicles=m, mode="approx",
            iterations=ctx["iterations"],
        )
        pred = chain_tf_prediction(model, "none", m - 1)
        ref = ss.freq_response(omegas).values
        mine = np.array([pred.from_front(1j * w) for w in omegas])
        rel = np.abs(mine - ref) / np.maximum(np.abs(ref), 1e-12)
        worst = max(worst, float(rel.max()))
    return [
        _bounded(
            "chain_oracle",
            "wave model vs state-space chain, tail response",
            worst,
            1e-2,
        )
    ]


def _suite_absorption(ctx):
    coup, ap = ctx["coupling"], ctx["approx"]
    probes = (1.0j, 2.0j, 5.0j, 1.0 + 0.5j)
    exact = impl = 0.0
    for s in probes:
        g = wave_tf_exact(eval_at(coup.tf, s))
        # command carrying g*incoming cancels the forced-end reflection
        exact = max(exact, abs(g * g - g * g))
        g_l = eval_at(ap.approx, s)
        impl = max(impl, abs(g_l * g - g_l * g_l))
    return [
        _bounded("absorption", "exact reflection null", exact, 1e-9),
        _bounded("absorption", "absorber reflection residual", impl, 2e-2),
    ]


def _suite_end_gains(ctx):
    kp, ki, xi = ctx["kp"], ctx["ki"], ctx["xi"]
    if ki <= 0 or xi <= 0:
        return [
            CheckResult(
                "end_gains",
                "closed-form gain ratio",
                False,
                detail="ki and xi must be positive for sqrt(ki/xi)",
            )
        ]
    coup = ctx["coupling"]
    kf = kappa_front(coup)
    kr = kappa_rear(coup)
    return [
        _bounded(
            "end_gains",
            "head gain vs -sqrt(ki/xi)",
            abs(kf + np.sqrt(ki / xi)),
            1e-3,
        ),
        _bounded(
            "end_gains",
            "tail gain vs sqrt(xi/ki)",
            abs(kr - np.sqrt(xi / ki)),
            1e-2,
        ),
    ]


def _suite_fir(ctx):
    fir = ctx["fir"]()
    dc = float(np.sum(fir.taps))
    lead = abs(fir.taps[0]) / np.abs(fir.taps).max()
    return [
        _bounded("fir", "tap sum near unity", abs(dc - 1.0), 0.02),
        _bounded("fir", "leading tap negligible", lead, 1e-4),
        CheckResult(
            "fir",
            "tap count matches span",
            len(fir.taps) == int(round(fir.span * fir.fs)) + 1,
            float(len(fir.taps)),
        ),
    ]


_SUITE_FNS = {
    "quadratic": _suite_quadratic,
    "stability": _suite_stability,
    "approximation": _suite_approximation,
    "string_stability": _suite_string_stability,
    "chain_oracle": _suite_chain_oracle,
    "absorption": _suite_absorption,
    "end_gains": _suite_end_gains,
    "fir": _suite_fir,
}


def verify(suites=None, kp=4.0, ki=4.0, xi=4.0, iterations=20, fs=100.0,
           span=DEFAULT_FIR_SPAN):
    """Run the requested suites (all by default) and report each check."""
    if suites is None:
        selected = SUITES
    elif isinstance(suites, str):
        selected = (suites,)
    else:
        selected = tuple(suites)
    unknown = [s for s in selected if s not in _SUITE_FNS]
    if unknown:
        raise ValueError(f"unknown suites: {unknown}")

    coup = coupling_from_gains(kp, ki, xi)
    ctx = {"kp": kp, "ki": ki, "xi": xi, "iterations": iterations,
           "coupling": coup}
    checks = []
    for name in selected:
        try:
            if name in ("stability", "approximation", "absorption") and \
                    "approx" not in ctx:
                ctx["approx"] = wave_tf_approx(coup, iterations)
            if name == "fir":
                ctx["fir"] = lambda: wave_fir(
                    ctx.get("approx") or wave_tf_approx(coup, iterations),
                    fs, span,
                )
            checks.extend(_SUITE_FNS[name](ctx))
        except Exception as exc:
            checks.append(
                CheckResult(
                    name,
                    "suite execution",
                    False,
                    detail=f"{type(exc).__name__}: {exc}",
                )
            )
    return VerifyReport(checks=tuple(checks))
