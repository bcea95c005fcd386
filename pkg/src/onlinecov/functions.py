"""Test functions f applied to Fisher eigenvalues, with first and second derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import UnsupportedKind

NAMED = ("linear", "square", "log1p", "mix")


@dataclass(frozen=True)
class TestFunction:
    kind: str
    f: Callable
    df: Callable
    d2f: Callable

    __test__ = False  # keep pytest from collecting this class

    def __call__(self, x):
        return self.f(x)

    @property
    def polynomial(self) -> bool:
        return self.kind in ("linear", "square")


def _zeros_like(x):
    return np.zeros_like(np.asarray(x), dtype=np.result_type(np.asarray(x), float))


def _ones_like(x):
    return np.ones_like(np.asarray(x), dtype=np.result_type(np.asarray(x), float))


LINEAR = TestFunction("linear", lambda x: x, _ones_like, _zeros_like)
SQUARE = TestFunction("square", lambda x: x * x, lambda x: 2 * x, lambda x: 2 * _ones_like(x))
LOG1P = TestFunction(
    "log1p",
    lambda x: np.log1p(x),
    lambda x: 1.0 / (1.0 + x),
    lambda x: -1.0 / (1.0 + x) ** 2,
)
MIX = TestFunction(
    "mix",
    lambda x: x + np.log1p(x),
    lambda x: 1.0 + 1.0 / (1.0 + x),
    lambda x: -1.0 / (1.0 + x) ** 2,
)

_BY_NAME = {t.kind: t for t in (LINEAR, SQUARE, LOG1P, MIX)}
_ALIASES = {"x": "linear", "x2": "square", "log": "log1p", "x+log": "mix"}


def get_function(name: str | TestFunction) -> TestFunction:
    """Look up a named test function (also accepts x, x2, log)."""
    if isinstance(name, TestFunction):
        return name
    key = _ALIASES.get(name, name)
    if key not in _BY_NAME:
        raise UnsupportedKind(f"unknown test function {name!r}; choose from {NAMED}")
    return _BY_NAME[key]


def custom(f: Callable, df: Callable, d2f: Callable) -> TestFunction:
    """Wrap a user-supplied analytic function; only the numeric moment path accepts it."""
    return TestFunction("custom", f, df, d2f)
