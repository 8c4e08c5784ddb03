"""Least-squares decay fits on log-transformed data."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    stderr: float  # standard error of the slope
    residual: float  # rms of log residuals
    n: int
    extra: float = 0.0  # coefficient of log(x) in the exponential model

    @property
    def band(self):
        return (self.slope - 2 * self.stderr, self.slope + 2 * self.stderr)


def _lstsq(A, y):
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    dof = max(len(y) - A.shape[1], 1)
    s2 = float(res @ res) / dof
    cov = s2 * np.linalg.pinv(A.T @ A)
    return coef, float(np.sqrt(np.mean(res**2))), np.sqrt(np.maximum(np.diag(cov), 0.0))


def loglog_fit(x, y) -> Fit:
    """log y = a + b log x."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    A = np.c_[np.ones_like(x), np.log(x)]
    coef, rms, se = _lstsq(A, np.log(y))
    return Fit(float(coef[1]), float(coef[0]), float(se[1]), rms, len(x))


def loglinear_fit(x, y) -> Fit:
    """log y = a + b x."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    A = np.c_[np.ones_like(x), x]
    coef, rms, se = _lstsq(A, np.log(y))
    return Fit(float(coef[1]), float(coef[0]), float(se[1]), rms, len(x))


def exp_rate_fit(gamma, y) -> Fit:
    """log y = a + b gamma + c log gamma; ``slope`` is the rate b, ``extra`` the power c.

    The log term absorbs power-law prefactors such as |p| ~ gamma^2 that would
    otherwise bias a plain log-linear slope over a finite gamma range.
    """
    g, y = np.asarray(gamma, float), np.asarray(y, float)
    A = np.c_[np.ones_like(g), g, np.log(g)]
    coef, rms, se = _lstsq(A, np.log(y))
    return Fit(float(coef[1]), float(coef[0]), float(se[1]), rms, len(g), float(coef[2]))


def worker_count() -> int:
    """Thread count from OSCGRAPH_THREADS (0 or unset: automatic)."""
    try:
        n = int(os.environ.get("OSCGRAPH_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else min(8, os.cpu_count() or 1)


def parallel_map(fn, items):
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def within(value: float, target: float, rel: float) -> bool:
    return math.isfinite(value) and abs(value - target) <= rel * abs(target)
