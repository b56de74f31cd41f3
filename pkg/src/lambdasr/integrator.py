"""Adaptive ODE integration with automatic stiff fallback, plus peak finding.

The step engines are scipy's ``DOP853`` (explicit, order 8) and ``Radau``
(implicit, order 5). :func:`integrate` drives them one step at a time so
that it can sample dense output on an arbitrary grid, notice when the
explicit method is crawling, and hand the current state over to the
implicit one.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy import integrate as _spi
from scipy import signal as _sps

from .errors import IntegrationError

log = logging.getLogger(__name__)

__all__ = ["Tolerances", "Trajectory", "RawSolution", "integrate", "find_peaks", "Peak"]

TIME_UNITS = ("fast", "slow", "physical")


@dataclass(frozen=True)
class Tolerances:
    rel: float = 1e-10
    abs: float = 1e-13
    max_step: float = math.inf
    min_step: float = 1e-14

    def __post_init__(self):
        if not 0 < self.rel < 1:
            raise ValueError("rel tolerance must lie in (0, 1)")
        if not self.abs > 0:
            raise ValueError("abs tolerance must be positive")
        if not self.min_step < self.max_step:
            raise ValueError("min_step must be smaller than max_step")


@dataclass
class RawSolution:
    t: np.ndarray
    y: np.ndarray  # shape (n_points, n_vars)
    stats: Dict[str, object]


@dataclass
class Trajectory:
    """Time series of named observables.

    ``unit`` names the time axis: ``"fast"`` (units of 1/(mu1 gamma1 N)),
    ``"slow"`` (units of 1/(mu2 gamma2 N)) or ``"physical"``.
    """

    times: np.ndarray
    unit: str
    columns: Dict[str, np.ndarray]
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.unit not in TIME_UNITS:
            raise ValueError(f"unknown time unit {self.unit!r}")
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        cols = {}
        for name, values in self.columns.items():
            arr = np.asarray(values)
            if arr.shape != self.times.shape:
                raise ValueError(f"column {name!r} has {arr.shape} samples, expected {self.times.shape}")
            cols[name] = arr
        self.columns = cols

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return self.times.size

    @property
    def names(self):
        return list(self.columns)


def _sample(dense, t_hi, grid, start, out):
    """Fill ``out`` at grid points from ``start`` up to ``t_hi`` inclusive."""
    stop = np.searchsorted(grid, t_hi, side="right")
    if stop > start:
        out[start:stop] = np.asarray(dense(grid[start:stop])).T
        return stop
    return start


# DOP853 stability boundary on the negative real axis; stiffness is declared
# after _STIFF_COUNT consecutive checks (one every _STIFF_EVERY steps) with
# h * rho above it.
_STIFF_BOUND = 6.1
_STIFF_COUNT = 5
_STIFF_EVERY = 5


def _spectral_radius(fun, t, y, f, v, iterations=2):
    """Power-iteration estimate of the Jacobian spectral radius at ``y``.

    Jacobian-vector products are forward differences. ``v`` is the warm
    start from the previous call; returns ``(rho, v)``.
    """
    rho = 0.0
    scale = 1.0 + np.linalg.norm(y)
    for _ in range(iterations):
        eps = 1.49e-8 * scale
        jv = (np.asarray(fun(t, y + eps * v)) - f) / eps
        rho = np.linalg.norm(jv)
        if not rho > 0 or not np.isfinite(rho):
            return 0.0, v
        v = jv / rho
    return rho, v


def integrate(rhs: Callable, y0, t_span, tol: Tolerances = Tolerances(),
              output_grid=None, method: str = "auto", jac: Optional[Callable] = None,
              max_explicit_steps: int = 200_000, max_steps: int = 2_000_000) -> RawSolution:
    """Integrate ``y' = rhs(t, y)`` and sample the solution on ``output_grid``.

    Parameters
    ----------
    method : {"auto", "explicit", "stiff"}
        ``"auto"`` starts with DOP853 and hands over to Radau when the
        explicit step is stability-limited for several consecutive steps,
        collapses below ``min_step``, or the explicit step count exceeds
        ``max_explicit_steps``.

    Complex systems are integrated as real vectors of twice the length.
    """
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    if method not in ("auto", "explicit", "stiff"):
        raise ValueError(f"unknown method {method!r}")
    y0 = np.asarray(y0)
    is_complex = np.iscomplexobj(y0)
    if is_complex:
        n = y0.size
        y0r = np.concatenate([y0.real, y0.imag]).astype(float)

        def fun(t, y):
            d = np.asarray(rhs(t, y[:n] + 1j * y[n:]))
            return np.concatenate([d.real, d.imag])

        jac_r = None
        if jac is not None:
            def jac_r(t, y):
                J = np.asarray(jac(t, y[:n] + 1j * y[n:]))
                return np.block([[J.real, -J.imag], [J.imag, J.real]])
    else:
        y0r = y0.astype(float)
        fun, jac_r = rhs, jac

    f0 = np.asarray(fun(t0, y0r))
    if not np.all(np.isfinite(f0)):
        raise IntegrationError("rhs is not finite at the initial state", t0, y0)
    grid = np.array([t0, t1]) if output_grid is None else np.asarray(output_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("output_grid must be strictly increasing")
    if grid[0] < t0 - 1e-12 * max(1.0, abs(t0)) or grid[-1] > t1 + 1e-12 * max(1.0, abs(t1)):
        raise ValueError("output_grid must lie inside t_span")

    out = np.empty((grid.size, y0r.size))
    idx = 0
    while idx < grid.size and grid[idx] <= t0:
        out[idx] = y0r
        idx += 1

    def make(kind, t, y, first_step=None):
        common = dict(rtol=tol.rel, atol=tol.abs, max_step=tol.max_step, first_step=first_step)
        if kind == "explicit":
            return _spi.DOP853(fun, t, y, t1, **common)
        # the Radau interpolant is low order, so stiff mode lands on every grid point
        bound = grid[idx] if idx < grid.size and grid[idx] < t1 else t1
        return _spi.Radau(fun, t, y, bound, jac=jac_r, **common)

    def unpack(y):
        return y[: y.size // 2] + 1j * y[y.size // 2:] if is_complex else y

    kind = "stiff" if method == "stiff" else "explicit"
    solver = make(kind, t0, y0r)
    stats = {"method_initial": kind, "switched_at": None, "steps": 0, "nfev": 0, "njev": 0, "nlu": 0}
    n_kind_steps = 0
    stiff_hits = 0
    probe = np.cos(np.arange(y0r.size) + 0.5)
    probe /= np.linalg.norm(probe)
    t_prev, y_prev, h = t0, y0r, None

    def collect(s):
        stats["nfev"] += s.nfev
        stats["njev"] += getattr(s, "njev", 0)
        stats["nlu"] += getattr(s, "nlu", 0)

    def switch(reason):
        nonlocal kind, solver, n_kind_steps
        log.info("switching to stiff mode at t=%g: %s", t_prev, reason)
        collect(solver)
        kind = "stiff"
        stats["switched_at"] = float(t_prev)
        stats["switch_reason"] = reason
        solver = make(kind, t_prev, y_prev)
        n_kind_steps = 0

    while True:
        msg = solver.step()
        stats["steps"] += 1
        n_kind_steps += 1
        if solver.status == "failed" or not np.all(np.isfinite(solver.y)):
            if kind == "explicit" and method == "auto":
                switch(f"explicit step failed ({msg or 'non-finite state'})")
                continue
            raise IntegrationError(f"integration failed at t={t_prev!r}: {msg or 'non-finite state'}",
                                   t_prev, unpack(y_prev))
        h = solver.t - solver.t_old
        if kind == "explicit":
            idx = _sample(solver.dense_output(), solver.t, grid, idx, out)
        elif solver.status == "finished" and idx < grid.size and solver.t >= grid[idx]:
            out[idx] = solver.y
            idx += 1
        if kind == "explicit" and method == "auto" and n_kind_steps % _STIFF_EVERY == 0:
            rho, probe = _spectral_radius(fun, solver.t, solver.y, solver.f, probe)
            stats["nfev"] += 2
            stiff_hits = stiff_hits + 1 if h * rho > _STIFF_BOUND else 0
        t_prev, y_prev = solver.t, solver.y.copy()
        if solver.status == "finished":
            if t_prev >= t1:
                break
            collect(solver)
            solver = make(kind, t_prev, y_prev, first_step=min(h, t1 - t_prev) if h > 0 else None)
            continue
        if stats["steps"] > max_steps:
            raise IntegrationError(f"step budget exhausted at t={t_prev!r}", t_prev, unpack(y_prev))
        collapsed = h < tol.min_step
        if kind == "explicit" and method == "auto":
            if collapsed:
                switch(f"step collapse (h={h:g})")
            elif stiff_hits >= _STIFF_COUNT:
                switch("stability-limited steps")
            elif n_kind_steps > max_explicit_steps:
                switch("explicit step budget exceeded")
        elif collapsed:
            raise IntegrationError(f"step size underflow (h={h:g}) at t={t_prev!r}", t_prev, unpack(y_prev))
    collect(solver)
    if idx < grid.size:
        # grid points equal to t1 up to rounding
        out[idx:] = solver.y
    stats["method_final"] = kind
    y_out = out[:, : out.shape[1] // 2] + 1j * out[:, out.shape[1] // 2:] if is_complex else out
    return RawSolution(t=grid, y=y_out, stats=stats)


@dataclass(frozen=True)
class Peak:
    time: float
    value: float
    prominence: float


def find_peaks(times, values, floor: float = 0.05, relative: bool = True):
    """Local maxima with prominence above ``floor``.

    With ``relative=True`` the floor is a fraction of the global maximum of
    ``values``. Returns a time-ordered list of :class:`Peak`.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("need at least 3 samples")
    top = np.max(v)
    threshold = floor * top if relative else floor
    if relative and not top > 0:
        return []
    idx, props = _sps.find_peaks(v, prominence=threshold)
    return [Peak(float(t[i]), float(v[i]), float(p)) for i, p in zip(idx, props["prominences"])]

