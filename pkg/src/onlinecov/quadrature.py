"""Gauss-Legendre integration helpers.

Nodes are cached per order. ``adaptive_interval`` doubles the number of
panels of a fixed-order composite rule until two successive estimates agree,
and ``rectangle_contour`` does the same on the four sides of an
anticlockwise rectangle in the complex plane.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_legendre

from .errors import QuadratureFailure

PANEL_ORDER = 32


@lru_cache(maxsize=16)
def legendre_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``order``-point rule on [-1, 1] (read-only)."""
    x, w = roots_legendre(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_nodes(lo: float, hi: float, panels: int, order: int = PANEL_ORDER):
    x, w = legendre_rule(order)
    cuts = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(cuts)
    mid = 0.5 * (cuts[:-1] + cuts[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def adaptive_interval(
    fun: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    tol: float = 1e-9,
    max_refinements: int = 16,
    order: int = PANEL_ORDER,
) -> np.ndarray:
    """Integrate a vectorised ``fun`` over [lo, hi].

    ``fun`` maps a 1-d node array to an array whose last axis runs over the
    nodes, so several integrands can share one pass. Convergence is declared
    when every component changes by at most ``tol * max(1, |estimate|)``
    between successive doublings.
    """
    nodes, weights = composite_nodes(lo, hi, 1, order)
    prev = np.asarray(fun(nodes)) @ weights
    panels = 1
    for _ in range(max_refinements):
        panels *= 2
        nodes, weights = composite_nodes(lo, hi, panels, order)
        cur = np.asarray(fun(nodes)) @ weights
        if np.all(np.abs(cur - prev) <= tol * np.maximum(1.0, np.abs(cur))):
            return cur
        prev = cur
    raise QuadratureFailure(
        f"interval quadrature did not reach tol={tol} after {max_refinements} refinements"
    )


def rectangle_path(left: float, right: float, eps: float, per_side: int):
    """Nodes z and weights dz along the anticlockwise rectangle.

    Sides in order: bottom (left to right), right (up), top (right to left),
    left (down). ``per_side`` must be a multiple of ``PANEL_ORDER``.
    """
    panels = max(1, per_side // PANEL_ORDER)
    zs, dzs = [], []
    corners = [
        complex(left, -eps),
        complex(right, -eps),
        complex(right, eps),
        complex(left, eps),
        complex(left, -eps),
    ]
    for start, end in zip(corners[:-1], corners[1:]):
        s, w = composite_nodes(0.0, 1.0, panels)
        zs.append(start + (end - start) * s)
        dzs.append((end - start) * w)
    return np.concatenate(zs), np.concatenate(dzs)


def rectangle_contour(
    fun: Callable[[np.ndarray], np.ndarray],
    left: float,
    right: float,
    eps: float,
    per_side: int = 256,
    tol: float = 1e-8,
    max_doublings: int = 8,
) -> np.ndarray:
    """(1/2πi) times the contour integral of ``fun`` around the rectangle."""
    z, dz = rectangle_path(left, right, eps, per_side)
    prev = np.asarray(fun(z)) @ dz / (2j * np.pi)
    n = per_side
    for _ in range(max_doublings):
        n *= 2
        z, dz = rectangle_path(left, right, eps, n)
        cur = np.asarray(fun(z)) @ dz / (2j * np.pi)
        if np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
    raise QuadratureFailure(
        f"contour quadrature did not reach tol={tol} after {max_doublings} doublings"
    )
