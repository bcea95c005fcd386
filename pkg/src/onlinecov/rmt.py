"""Limiting spectral distribution of the Fisher matrix S1^{-1} S2 under H0.

Everything here is a pure function of the dimension ratios c1 = p/k1 and
c2 = p/k2. The companion transform ``mbar`` belongs to the k2 x k2 matrix
sharing the nonzero Fisher eigenvalues.

The square root sqrt((z-a)(z-b)) is evaluated as sqrt(z-a)*sqrt(z-b) with
principal roots. That product is analytic off [a, b] and behaves like z at
infinity, which is exactly the branch making mbar(z) ~ -1/z.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import BranchFailure, InvalidParams, OutOfSupport


@dataclass(frozen=True)
class SpectralParams:
    c1: float
    c2: float
    nu4: float = 3.0

    def __post_init__(self) -> None:
        if not (0.0 < self.c1 < 1.0):
            raise InvalidParams(f"c1 must lie in (0, 1), got {self.c1}")
        if not (self.c2 > 0.0 and math.isfinite(self.c2)):
            raise InvalidParams(f"c2 must be positive and finite, got {self.c2}")
        if not (self.nu4 >= 1.0):
            raise InvalidParams(f"nu4 must be at least 1, got {self.nu4}")

    @classmethod
    def from_counts(cls, p: int, k1: float, k2: float, nu4: float = 3.0) -> "SpectralParams":
        return cls(p / k1, p / k2, nu4)


@dataclass(frozen=True)
class SupportEdges:
    h: float
    a: float
    b: float


@dataclass(frozen=True)
class SpectralMoments:
    M1: float
    M2: float
    M3: float
    M4: float
    C3: float


def support_edges(params: SpectralParams) -> SupportEdges:
    c1, c2 = params.c1, params.c2
    h = math.sqrt(c1 + c2 - c1 * c2)
    a = (1.0 - h) ** 2 / (1.0 - c1) ** 2
    b = (1.0 + h) ** 2 / (1.0 - c1) ** 2
    return SupportEdges(h=h, a=a, b=b)


def lsd_density(x, params: SpectralParams):
    """Density of the Fisher LSD on [a, b].

    For c2 > 1 the distribution also carries an atom of mass 1 - 1/c2 at the
    origin, so this density then integrates to 1/c2.
    """
    e = support_edges(params)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < e.a) or np.any(xa > e.b):
        raise OutOfSupport(f"density evaluated outside [{e.a}, {e.b}]")
    c1, c2 = params.c1, params.c2
    root = np.sqrt(np.clip((e.b - xa) * (xa - e.a), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (1.0 - c1) * root / (2.0 * np.pi * xa * (c1 * xa + c2))
    out = np.where(root == 0.0, 0.0, out)
    return out if np.ndim(x) else float(out)


def _check_off_support(z: np.ndarray, e: SupportEdges) -> None:
    on_cut = (z.imag == 0.0) & (z.real >= e.a) & (z.real <= e.b)
    if np.any(on_cut):
        raise OutOfSupport("Stieltjes transform requested on the support [a, b]")


def _sqrt_product(z: np.ndarray, e: SupportEdges) -> np.ndarray:
    return np.sqrt(z - e.a) * np.sqrt(z - e.b)


def _denominator(z: np.ndarray, params: SpectralParams, e: SupportEdges):
    """N(z) with mbar = -2h^2 / N, plus the root used to build it.

    Multiplying numerator and denominator of the printed expression by its
    conjugate-root partner gives this form, which has no removable 0/0 at
    z = -c2/c1.
    """
    c1, c2 = params.c1, params.c2
    s = _sqrt_product(z, e)
    n = c2 * (z * (1.0 - c1) + 1.0 - c2) + 2.0 * z * c1 + c2 * (1.0 - c1) * s
    return n, s


def _herglotz(z: np.ndarray, val: np.ndarray, name: str) -> None:
    scale = np.maximum(np.abs(val), 1e-300)
    upper = z.imag > 0
    lower = z.imag < 0
    real = z.imag == 0
    bad = (upper & (val.imag < -1e-12 * scale)) | (lower & (val.imag > 1e-12 * scale))
    bad |= real & (np.abs(val.imag) > 1e-10 * scale)
    if np.any(bad):
        raise BranchFailure(f"{name}: branch violates the Herglotz sign condition")


def _as_complex(z):
    return np.atleast_1d(np.asarray(z, dtype=complex))


def _out(val, z):
    return val if np.ndim(z) else complex(val[0])


def stieltjes_mbar(z, params: SpectralParams):
    """Companion Stieltjes transform mbar(z) = int 1/(x - z) dF_companion(x)."""
    e = support_edges(params)
    zz = _as_complex(z)
    _check_off_support(zz, e)
    n, _ = _denominator(zz, params, e)
    val = -2.0 * e.h**2 / n
    _herglotz(zz, val, "mbar")
    return _out(val, z)


def mbar_derivative(z, params: SpectralParams):
    e = support_edges(params)
    zz = _as_complex(z)
    _check_off_support(zz, e)
    c1, c2 = params.c1, params.c2
    n, s = _denominator(zz, params, e)
    dn = c2 * (1.0 - c1) + 2.0 * c1 + c2 * (1.0 - c1) * (2.0 * zz - e.a - e.b) / (2.0 * s)
    return _out(2.0 * e.h**2 * dn / n**2, z)


def stieltjes_m(z, params: SpectralParams):
    """Stieltjes transform of the Fisher LSD itself, in its direct closed form.

    The direct form is 0/0 at z = -c2/c1; within a relative distance 1e-6 of
    that point the value is taken from mbar through mbar = -(1-c2)/z + c2 m.
    """
    e = support_edges(params)
    zz = _as_complex(z)
    _check_off_support(zz, e)
    c1, c2 = params.c1, params.c2
    s = _sqrt_product(zz, e)
    pole = c2 + zz * c1
    near = np.abs(pole) <= 1e-6 * c2
    safe = np.where(near, 1.0, pole)
    num = c2 * (zz * (1.0 - c1) + 1.0 - c2) + 2.0 * zz * c1 - c2 * (1.0 - c1) * s
    val = (1.0 - c2) / (zz * c2) - num / (2.0 * zz * c2 * safe)
    if np.any(near):
        n, _ = _denominator(zz[near], params, e)
        val[near] = (-2.0 * e.h**2 / n + (1.0 - c2) / zz[near]) / c2
    _herglotz(zz, val, "m")
    return _out(val, z)


def spectral_moments(params: SpectralParams) -> SpectralMoments:
    """Moments M1..M4 of the companion LSD and the combination C3."""
    c1, c2 = params.c1, params.c2
    d = 1.0 - c1
    m1 = c2 / d
    m2 = c2 * (1.0 + c2 - c1 * c2) / d**3
    m3 = c2 * (c1**2 * c2**2 - 2 * c1 * c2**2 - 3 * c1 * c2 + c1 + c2**2 + 3 * c2 + 1) / d**5
    m4 = (
        c2
        / d**7
        * (
            -(c1**3) * c2**3
            + 3 * c1**2 * c2**3
            + 6 * c1**2 * c2**2
            - 4 * c1**2 * c2
            + c1**2
            - 3 * c1 * c2**3
            - 12 * c1 * c2**2
            - 2 * c1 * c2
            + 3 * c1
            + c2**3
            + 6 * c2**2
            + 6 * c2
            + 1
        )
    )
    c3 = m1**4 - 3 * m1**2 * m2 + 2 * m1 * m3 + m2**2 - m4
    return SpectralMoments(M1=m1, M2=m2, M3=m3, M4=m4, C3=c3)


def boundary_AB(x, params: SpectralParams):
    """Real and imaginary parts of mbar(x + i0) for x inside (a, b)."""
    e = support_edges(params)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < e.a) or np.any(xa > e.b):
        raise OutOfSupport(f"boundary values requested outside [{e.a}, {e.b}]")
    c1, c2 = params.c1, params.c2
    den = 2.0 * xa * (c2 + xa * c1)
    A = -(xa * (e.h**2 + c1) + c2 * (1.0 - c2)) / den
    B = c2 * (1.0 - c1) * np.sqrt(np.clip((xa - e.b) * (e.a - xa), 0.0, None)) / den
    if np.ndim(x) == 0:
        return float(A), float(B)
    return A, B
