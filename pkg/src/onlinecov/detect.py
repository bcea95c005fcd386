"""Detectability of a covariance change by a given test function.

For a change Sigma0 -> Sigma1 the normalized traces tau1 = p^-1 Tr(Sigma0^-1 Sigma1)
and tau2 = p^-1 Tr((Sigma0^-1 Sigma1)^2) drive the drift of the CUSUM after
the change. Whether a test function f picks that drift up is decided by two
contour integrals,

    I1(f, tau1) = (1/2 pi i) \\oint f'(z) log{tau1 - (1 - tau1) z mbar(z)} dz,
    I2(f)       = (1/2 pi i) \\oint f'(z) {log(z mbar(z)) + z mbar(z)} dz,

computed here in closed form where available and by contour quadrature
otherwise. The logarithms are followed continuously along the contour.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
import math

import numpy as np

from .errors import BranchFailure, InvalidParams, SingularBaseline
from .functions import TestFunction, get_function
from .quadrature import rectangle_contour
from .rmt import SpectralParams, stieltjes_m, stieltjes_mbar, support_edges

NONZERO = 1e-8


@dataclass(frozen=True)
class ChangeProfile:
    tau1: float
    tau2: float
    source: str = "direct"


def change_profile(Sigma0, Sigma1) -> ChangeProfile:
    s0 = np.asarray(Sigma0, dtype=float)
    s1 = np.asarray(Sigma1, dtype=float)
    if s0.ndim != 2 or s0.shape[0] != s0.shape[1] or s0.shape != s1.shape:
        raise InvalidParams("Sigma0 and Sigma1 must be square matrices of equal size")
    p = s0.shape[0]
    try:
        c = np.linalg.cholesky(s0)
    except np.linalg.LinAlgError as exc:
        raise SingularBaseline("Sigma0 is not positive definite") from exc
    # L^-1 Sigma1 L^-T is similar to Sigma0^-1 Sigma1 and symmetric
    half = np.linalg.solve(c, s1)
    m = np.linalg.solve(c, half.T).T
    return ChangeProfile(float(np.trace(m) / p), float(np.sum(m * m) / p), "matrices")


def laurent_A(tau1: float, params: SpectralParams) -> tuple[float, float]:
    c1, c2 = params.c1, params.c2
    a1 = (1.0 - tau1) * c2 / (1.0 - c1)
    a2 = c2 * (1.0 - tau1) * (2.0 + c2 * (1.0 - c1) * (1.0 + tau1)) / (2.0 * (1.0 - c1) ** 3)
    return a1, a2


def laurent_B(params: SpectralParams) -> tuple[float, float]:
    return 0.0, -params.c2**2 / (2.0 * (1.0 - params.c1) ** 2)


def default_contour(params: SpectralParams) -> tuple[float, float, float]:
    """(left, right, eps) of a rectangle around the support that keeps z = -1 outside.

    The left side never goes below -1/2, so the pole of (1+z)^-1 stays outside.
    When c2 >= 1 the Fisher spectrum has mass at 0 and the left side is pinned
    at -1/2 to enclose it.
    """
    e = support_edges(params)
    delta = 0.5 * (e.b - e.a) + 0.5
    left = max(e.a - delta, -0.5)
    if params.c2 >= 1.0:
        left = -0.5
    return left, e.b + delta, 0.5


def _tracked_log(w: np.ndarray) -> np.ndarray:
    phase = np.unwrap(np.angle(w))
    if abs(phase[-1] - phase[0]) > math.pi:
        raise BranchFailure("log argument winds around 0 along the contour")
    return np.log(np.abs(w)) + 1j * phase


def _contour(fun, params: SpectralParams) -> float:
    left, right, eps = default_contour(params)
    val = rectangle_contour(fun, left, right, eps, per_side=256, tol=1e-10)
    return float(np.real(val))


def I1_numeric(f: str | TestFunction, tau1: float, params: SpectralParams) -> float:
    f = get_function(f)

    def integrand(z):
        zm = z * stieltjes_mbar(z, params)
        return f.df(z) * _tracked_log(tau1 - (1.0 - tau1) * zm)

    return _contour(integrand, params)


def I2_numeric(f: str | TestFunction, params: SpectralParams) -> float:
    f = get_function(f)

    def integrand(z):
        zm = z * stieltjes_mbar(z, params)
        return f.df(z) * (_tracked_log(zm) + zm)

    return _contour(integrand, params)


def I1(f: str | TestFunction, tau1: float, params: SpectralParams) -> float:
    if tau1 <= 0.0:
        raise InvalidParams("tau1 must be positive")
    f = get_function(f)
    a1, a2 = laurent_A(tau1, params)
    if f.kind == "linear":
        return a1
    if f.kind == "square":
        return 2.0 * a2
    if f.kind in ("log1p", "mix"):
        mb = stieltjes_mbar(-1.0, params).real
        val = -math.log(tau1 + (1.0 - tau1) * mb)
        return val + a1 if f.kind == "mix" else val
    return I1_numeric(f, tau1, params)


def I2(f: str | TestFunction, params: SpectralParams) -> float:
    f = get_function(f)
    _, b2 = laurent_B(params)
    if f.kind == "linear":
        return 0.0
    if f.kind == "square":
        return 2.0 * b2
    if f.kind in ("log1p", "mix"):
        mb = stieltjes_mbar(-1.0, params).real
        return -(math.log(mb) - mb + 1.0)
    return I2_numeric(f, params)


def log_case_variants(tau1: float, params: SpectralParams) -> dict:
    """The log-function closed forms evaluated with mbar(-1) and with m(-1),
    next to the contour value, so the two readings can be compared."""
    mb = stieltjes_mbar(-1.0, params).real
    m = stieltjes_m(-1.0, params).real
    out = {
        "I1_with_mbar": -math.log(tau1 + (1.0 - tau1) * mb),
        "I1_numeric": I1_numeric("log1p", tau1, params),
        "I2_with_mbar": -(math.log(mb) - mb + 1.0),
        "I2_numeric": I2_numeric("log1p", params),
    }
    arg = tau1 + (1.0 - tau1) * m
    out["I1_with_m"] = -math.log(arg) if arg > 0 else float("nan")
    out["I2_with_mixed"] = -(math.log(mb) - m + 1.0)
    return out


def delay_regime(
    profile: ChangeProfile, f: str | TestFunction, k_star: int, n: int, params: SpectralParams
) -> dict:
    """Predicted order of the detection delay, as a JSON-ready report.

    A change is "early" when |k* - n| < n/10 and "late" otherwise.
    """
    f = get_function(f)
    i1 = I1(f, profile.tau1, params)
    i2 = I2(f, params)
    regime = "early" if abs(k_star - n) < n / 10 else "late"
    tau1_moves = abs(profile.tau1 - 1.0) > NONZERO
    tau2_moves = abs(profile.tau2 - 1.0) > NONZERO
    if tau1_moves and abs(i1) > NONZERO:
        order = "log n"
    elif not tau1_moves and tau2_moves and abs(i2) > NONZERO:
        order = "n^(1/2-delta)" if regime == "early" else "sqrt(n)"
    elif not tau1_moves and not tau2_moves:
        order = "undetectable"
    else:
        order = "undetectable by this f"
    return {
        "tau1": profile.tau1,
        "tau2": profile.tau2,
        "I1": i1,
        "I2": i2,
        "regime": regime,
        "predicted_order": order,
    }
