"""Shared conversion from correlator states to trajectory columns."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .integrator import Trajectory

# column order of the trajectory CSV
COLUMNS = (
    "t_scaled_slow", "t_scaled_fast",
    "p1_over_N", "p2_over_N", "p3_over_N", "re_c12_over_N", "im_c12_over_N",
    "I1", "I2", "d_mm", "d_pp", "re_cross", "im_cross",
)


class _Axes(dict):
    def __missing__(self, unit):
        raise ConfigError(f"unknown time unit {unit!r}")


def time_axes(params):
    """Factors converting a time in each unit into fast units ``mu1 gamma1 N t``."""
    fast_rate = params.collective_rate1
    slow_rate = params.collective_rate2
    axes = _Axes(fast=1.0, physical=fast_rate)
    if slow_rate > 0:
        axes["slow"] = fast_rate / slow_rate
    return axes


def fast_to(params, unit, tau):
    if unit == "fast":
        return tau
    if unit == "physical":
        return tau / params.collective_rate1
    if unit == "slow":
        if params.collective_rate2 == 0:
            raise ConfigError("slow time unit is undefined for gamma2 = 0")
        return tau * params.collective_rate2 / params.collective_rate1
    raise ConfigError(f"unknown time unit {unit!r}")


def build_trajectory(times, unit, states, params, metadata) -> Trajectory:
    """Columns of :data:`COLUMNS` from a sequence of ``CorrelatorState``."""
    from .analysis import dressed_transform

    n = float(params.n_atoms)
    times = np.asarray(times, dtype=float)
    if unit == "slow" and params.collective_rate2 == 0:
        raise ConfigError("slow time unit is undefined for gamma2 = 0")
    tau = times * time_axes(params)[unit]
    p = np.array([[s.p1, s.p2, s.p3] for s in states]) / n
    c = np.array([complex(s.c12) for s in states]) / n
    q11 = np.array([s.q11 for s in states])
    q22 = np.array([s.q22 for s in states])
    q12 = np.array([complex(s.q12) for s in states])
    dd = dressed_transform(q11, q22, q12, norm=2 * n * n)
    slow = tau * params.collective_rate2 / params.collective_rate1
    cols = {
        "t_scaled_slow": slow,
        "t_scaled_fast": tau,
        "p1_over_N": p[:, 0],
        "p2_over_N": p[:, 1],
        "p3_over_N": p[:, 2],
        "re_c12_over_N": c.real,
        "im_c12_over_N": c.imag,
        "I1": q11 / n ** 2,
        "I2": q22 / n ** 2,
        "d_mm": dd.d_mm,
        "d_pp": dd.d_pp,
        "re_cross": np.real(dd.cross),
        "im_cross": np.imag(dd.cross),
    }
    return Trajectory(times, unit, cols, metadata)
