"""Null mean and variance of the one-step LSS difference L_k(f).

Two independent routes are provided. ``step_moments_closed`` evaluates the
explicit formulas for the four named test functions. ``step_moments_numeric``
integrates the boundary values A + iB of mbar along the support and works for
any f with known first and second derivatives.

Ratios are plug-in values: c1 = p/k1 and c2 = p/k2 with k2 = k - 1 - k1.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import DegenerateData, InvalidParams, SingularBaseline, UnsupportedKind
from .functions import NAMED, TestFunction, get_function
from .quadrature import adaptive_interval
from .rmt import SpectralParams, mbar_derivative, spectral_moments, stieltjes_mbar, support_edges


@dataclass(frozen=True)
class StepMoments:
    mu: float
    sigma2: float
    k2: float
    c2_k: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def _counts(p: int, k1: int, k: int) -> float:
    if k1 <= p:
        raise SingularBaseline(f"baseline size k1={k1} must exceed the dimension p={p}")
    k2 = k - 1 - k1
    if k2 < 1:
        raise InvalidParams(f"need k - 1 - k1 >= 1, got k={k}, k1={k1}")
    return float(k2)


def closed_form(kind: str, c1: float, c2: float, p: float, nu4: float) -> tuple[float, float]:
    """(mu, sigma2) from the explicit formulas, with k2 = p / c2 possibly fractional."""
    if kind not in NAMED:
        raise UnsupportedKind(f"no closed form for {kind!r}; use the numeric path")
    params = SpectralParams(c1, c2, nu4)
    k2 = p / c2
    kurt = nu4 - 3.0
    mom = spectral_moments(params)
    m1, m2 = mom.M1, mom.M2
    if kind == "linear":
        return 0.0, kurt / (k2 * c2) * m1**2 - 2.0 / k2 * (m1**2 - m2)
    if kind == "square":
        mu = -(m1**2) + kurt / p * m1**2 + m2 / k2
        var = 4.0 * m2**2 * kurt / (k2 * c2) - 8.0 * mom.C3 / k2
        return mu, var
    mb = stieltjes_mbar(-1.0, params).real
    mbp = mbar_derivative(-1.0, params).real
    mu = (
        (mb - 1.0 - math.log(mb))
        - kurt / (2.0 * p) * (1.0 - mb) ** 2
        + (0.5 - mbp * (0.5 - 1.0 / mb + 1.0 / mb**2)) / k2
    )
    if kind == "log1p":
        var = kurt / (k2 * c2) * (mb - 1.0) ** 2 + 2.0 / k2 * (mbp / mb**2 - 1.0)
    else:
        var = kurt / (k2 * c2) * (m1 + 1.0 - mb) ** 2 + 2.0 / k2 * (
            m2 - (m1 - 1.0) ** 2 + 2.0 - 2.0 / mb + mbp / mb**2
        )
    return mu, var


def step_moments_closed(f: str | TestFunction, p: int, k1: int, k: int, nu4: float) -> StepMoments:
    f = get_function(f)
    k2 = _counts(p, k1, k)
    mu, var = closed_form(f.kind, p / k1, p / k2, p, nu4)
    return StepMoments(mu=mu, sigma2=var, k2=k2, c2_k=p / k2)


def _support_integrals(f: TestFunction, params: SpectralParams, tol: float) -> np.ndarray:
    """The five real integrals over [a, b] that make up mu and sigma2.

    With x = a + (b-a) sin^2(t) we have dx = 2 sqrt(q) dt where
    q = (x-a)(b-x). Every integrand is multiplied by sqrt(q) analytically,
    so the 1/sqrt(q) behaviour of B' at the edges never reaches the nodes.
    """
    c1, c2 = params.c1, params.c2
    e = support_edges(params)
    a, b = e.a, e.b
    alpha = e.h**2 + c1
    beta = c2 * (1.0 - c2)
    g = c2 * (1.0 - c1)

    def integrands(theta):
        x = a + (b - a) * np.sin(theta) ** 2
        q = (x - a) * (b - x)
        den = 2.0 * x * (c2 + c1 * x)
        dden = 2.0 * c2 + 4.0 * c1 * x
        A = -(alpha * x + beta) / den
        dA = -(alpha * den - (alpha * x + beta) * dden) / den**2
        B = g * np.sqrt(q) / den
        Bq = g * q / den  # B * sqrt(q)
        dBq = g * (0.5 * (a + b - 2.0 * x) * den - q * dden) / den**2  # B' * sqrt(q)
        mod2 = A * A + B * B
        argq = (dA * Bq - A * dBq) / mod2  # -(d/dx) arg mbar, times sqrt(q)
        fx, d1, d2 = f.f(x), f.df(x), f.d2f(x)
        rows = np.stack(
            [
                x * Bq * d1 + argq * fx,
                (1.0 + x * A) * x * Bq * d1,
                -(x * d2 + 2.0 * d1) * x * Bq / 2.0 - argq * x * d1 - Bq * d2 / mod2,
                x * d1 * Bq,
                Bq * d1**2 / mod2,
            ]
        )
        return 2.0 * rows

    return adaptive_interval(integrands, 0.0, 0.5 * np.pi, tol=tol, max_refinements=16)


def numeric_form(
    f: TestFunction, c1: float, c2: float, p: float, nu4: float, tol: float = 1e-9
) -> tuple[float, float]:
    params = SpectralParams(c1, c2, nu4)
    k2 = p / c2
    kurt = nu4 - 3.0
    i_first, i_kurt, i_corr, j_lin, j_var = _support_integrals(f, params, tol)
    mu = -i_first / np.pi - kurt / (p * np.pi) * i_kurt - i_corr / (k2 * np.pi)
    var = kurt / (k2 * c2 * np.pi**2) * j_lin**2 + 2.0 / (k2 * np.pi) * j_var
    return float(mu), float(var)


def step_moments_numeric(
    f: str | TestFunction, p: int, k1: int, k: int, nu4: float, tol: float = 1e-9
) -> StepMoments:
    f = get_function(f)
    k2 = _counts(p, k1, k)
    mu, var = numeric_form(f, p / k1, p / k2, p, nu4, tol)
    return StepMoments(mu=mu, sigma2=var, k2=k2, c2_k=p / k2)


@dataclass(frozen=True)
class MomentSchedule:
    """Per-step moments for k = k_first .. k_first + len - 1, affine in nu4.

    mu and sigma2 are both linear in nu4, so one schedule serves every
    replication regardless of the fourth-moment estimate it plugs in.
    """

    k_first: int
    mu_base: np.ndarray
    mu_slope: np.ndarray
    var_base: np.ndarray
    var_slope: np.ndarray

    def at(self, nu4: float) -> tuple[np.ndarray, np.ndarray]:
        mu = self.mu_base + (nu4 - 3.0) * self.mu_slope
        var = self.var_base + (nu4 - 3.0) * self.var_slope
        if np.any(var <= 0.0):
            raise InvalidParams(f"nonpositive null variance at nu4={nu4}")
        return mu, np.sqrt(var)


def moment_schedule(f: str | TestFunction, p: int, k1: int, k_first: int, steps: int) -> MomentSchedule:
    f = get_function(f)
    rows = []
    for k in range(k_first, k_first + steps):
        k2 = _counts(p, k1, k)
        lo = closed_form(f.kind, p / k1, p / k2, p, 3.0)
        hi = closed_form(f.kind, p / k1, p / k2, p, 4.0)
        rows.append((lo[0], hi[0] - lo[0], lo[1], hi[1] - lo[1]))
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return MomentSchedule(k_first, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def estimate_nu4(data) -> float:
    """Fourth-moment estimate from a p x n sample (columns are observations).

    The correction term is divided by sum_i (mean_j y_ij^2)^2, i.e. by the
    squared quantity, which is what makes the ratio dimensionless.
    """
    y = np.asarray(data, dtype=float)
    if y.ndim != 2:
        raise InvalidParams("data must be a p x n matrix")
    p, n = y.shape
    if n < 2 or p < 1:
        raise InvalidParams("need p >= 1 and n >= 2")
    s = y @ y.T / n
    tau = float(np.sum(s * s) - np.trace(s) ** 2 / n)
    norms = np.sum(y * y, axis=0)
    gam = float(np.sum((norms - norms.mean()) ** 2) / (n - 1))
    omega2 = float(np.sum(np.mean(y * y, axis=1) ** 2))
    if omega2 == 0.0:
        raise DegenerateData("all observations are zero; fourth moment undefined")
    return max(3.0 + (gam - 2.0 * tau) / omega2, 1.0)
