"""Streaming Fisher matrix F_k = S1^{-1} S2,k and its one-step LSS differences.

The baseline S1 is frozen after initialisation. Every new observation y is
whitened once, v = L^{-1} y with S1 = L L^T, and accumulated into the
whitened scatter W = sum v v^T, so that F_k is similar to W / m with m the
number of monitoring observations. Three exact ways to read Tr f(F_k) off W:

* eigen path: eigenvalues of W / m (reference, O(p^3));
* trace path: Tr W and Tr W^2 tracked by rank-one updates (linear, square);
* log-det path: sum log(1 + lambda) = log det(m I + W) - p log m (log1p, mix).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.linalg.lapack import dpotrf

from .errors import NonfiniteInput, NumericalBreakdown, ShapeMismatch, SingularBaseline, UnsupportedKind
from .functions import TestFunction, get_function

CLAMP = -1e-10


@dataclass
class StreamState:
    p: int
    k1: int
    f: TestFunction
    S1_factor: np.ndarray
    S1_inv: np.ndarray
    scatter: np.ndarray
    white: np.ndarray
    k: int
    last_lss: float
    trace1: float = 0.0
    trace2: float = 0.0

    @property
    def m(self) -> int:
        """Number of monitoring-sample observations in S2,k."""
        return self.k - self.k1

    def copy(self) -> "StreamState":
        return replace(
            self,
            S1_factor=self.S1_factor,
            S1_inv=self.S1_inv,
            scatter=self.scatter.copy(),
            white=self.white.copy(),
        )


def init(history, k1: int, f: str | TestFunction = "log1p") -> StreamState:
    """Build the state from the first n = k1 + k2 observations (columns of ``history``)."""
    f = get_function(f)
    x = np.asarray(history, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatch("history must be a p x n matrix")
    p, n = x.shape
    if k1 <= p:
        raise SingularBaseline(f"k1={k1} must exceed p={p}")
    if n - k1 < 1:
        raise ShapeMismatch(f"history has {n} columns; need more than k1={k1}")
    if not np.all(np.isfinite(x)):
        raise NonfiniteInput("history contains NaN or Inf")
    base, second = x[:, :k1], x[:, k1:]
    s1 = base @ base.T / k1
    try:
        chol = cholesky(s1, lower=True)
    except LinAlgError as exc:
        raise SingularBaseline("baseline covariance is not positive definite") from exc
    s1_inv = cho_solve((chol, True), np.eye(p))
    v = solve_triangular(chol, second, lower=True)
    white = v @ v.T
    state = StreamState(
        p=p,
        k1=k1,
        f=f,
        S1_factor=chol,
        S1_inv=s1_inv,
        scatter=second @ second.T,
        white=white,
        k=n,
        last_lss=0.0,
        trace1=float(np.trace(white)),
        trace2=float(np.sum(white * white)),
    )
    state.last_lss = lss(eigenvalues_fisher(state), f)
    return state


def eigenvalues_fisher(state: StreamState) -> np.ndarray:
    """Ascending eigenvalues of S1^{-1} S2,k via the symmetric form L^{-1} S2 L^{-T}."""
    eig = np.linalg.eigvalsh(state.white / state.m)
    if eig[0] < CLAMP:
        raise NumericalBreakdown(f"Fisher eigenvalue {eig[0]:.3e} below {CLAMP}")
    return np.maximum(eig, 0.0)


def lss(eigs, f: str | TestFunction) -> float:
    """Tr f(F) = sum f(lambda_i)."""
    f = get_function(f)
    return float(np.sum(f.f(np.asarray(eigs, dtype=float))))


def _whiten(state: StreamState, y) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    if y.shape != (state.p,):
        raise ShapeMismatch(f"expected a vector of length {state.p}, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise NonfiniteInput("observation contains NaN or Inf")
    return y, solve_triangular(state.S1_factor, y, lower=True, check_finite=False)


def _absorb(state: StreamState, y: np.ndarray, v: np.ndarray) -> None:
    vv = float(v @ v)
    state.trace2 += 2.0 * float(v @ state.white @ v) + vv * vv
    state.trace1 += vv
    state.white += np.outer(v, v)
    state.scatter += np.outer(y, y)
    state.k += 1


def push(state: StreamState, y, f: str | TestFunction | None = None) -> float:
    """Absorb y and return L_k(f) = Tr f(F_k) - Tr f(F_{k-1}) on the eigen path."""
    f = state.f if f is None else get_function(f)
    y, v = _whiten(state, y)
    prev = state.last_lss if f is state.f else lss(eigenvalues_fisher(state), f)
    _absorb(state, y, v)
    cur = lss(eigenvalues_fisher(state), f)
    if f is state.f:
        state.last_lss = cur
    return cur - prev


def _trace_value(kind: str, trace1: float, trace2: float, m: int) -> float:
    if kind == "linear":
        return trace1 / m
    if kind == "square":
        return trace2 / (m * m)
    raise UnsupportedKind(f"trace path supports linear and square, not {kind!r}")


def push_fast_trace(state: StreamState, y, f: str | TestFunction | None = None) -> float:
    """Same value as ``push`` for polynomial f, in O(p^2) per observation."""
    f = state.f if f is None else get_function(f)
    if not f.polynomial:
        raise UnsupportedKind(f"trace path supports linear and square, not {f.kind!r}")
    y, v = _whiten(state, y)
    prev = _trace_value(f.kind, state.trace1, state.trace2, state.m)
    _absorb(state, y, v)
    cur = _trace_value(f.kind, state.trace1, state.trace2, state.m)
    if f is state.f:
        state.last_lss = cur
    return cur - prev


def logdet_lss(white: np.ndarray, m: int) -> float:
    """sum_i log(1 + lambda_i(W/m)) from one Cholesky factorisation of m I + W."""
    p = white.shape[0]
    mat = white + m * np.eye(p)
    c, info = dpotrf(mat, lower=1, clean=0, overwrite_a=1)
    if info != 0:
        raise NumericalBreakdown("m I + W is not positive definite")
    return 2.0 * float(np.sum(np.log(np.diagonal(c)))) - p * math.log(m)


def push_logdet(state: StreamState, y, f: str | TestFunction | None = None) -> float:
    """Same value as ``push`` for log1p and mix, via one Cholesky per observation."""
    f = state.f if f is None else get_function(f)
    if f.kind not in ("log1p", "mix"):
        raise UnsupportedKind(f"log-det path supports log1p and mix, not {f.kind!r}")

    def value() -> float:
        out = logdet_lss(state.white, state.m)
        return out + state.trace1 / state.m if f.kind == "mix" else out

    y, v = _whiten(state, y)
    prev = state.last_lss if f is state.f else value()
    _absorb(state, y, v)
    cur = value()
    if f is state.f:
        state.last_lss = cur
    return cur - prev


class MultiTracker:
    """Tracks Tr f(F_k) for several named f at once, using the fastest exact path.

    Used by the simulation loops, where the same stream feeds every test
    function under study.
    """

    def __init__(self, state: StreamState, kinds):
        self.state = state
        self.kinds = tuple(get_function(k).kind for k in kinds)
        self._need_logdet = any(k in ("log1p", "mix") for k in self.kinds)
        self._values = self._current()

    def _current(self) -> dict:
        st = self.state
        out = {}
        logdet = logdet_lss(st.white, st.m) if self._need_logdet else 0.0
        for kind in self.kinds:
            if kind == "linear":
                out[kind] = st.trace1 / st.m
            elif kind == "square":
                out[kind] = st.trace2 / (st.m * st.m)
            elif kind == "log1p":
                out[kind] = logdet
            else:
                out[kind] = st.trace1 / st.m + logdet
        return out

    def push(self, y) -> dict:
        y, v = _whiten(self.state, y)
        _absorb(self.state, y, v)
        new = self._current()
        diff = {k: new[k] - self._values[k] for k in self.kinds}
        self._values = new
        return diff
