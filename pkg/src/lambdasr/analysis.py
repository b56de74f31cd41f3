"""Analytic limits, dressed-state decomposition and pulse diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from .integrator import Trajectory, find_peaks

__all__ = [
    "single_atom_decay",
    "single_atom_solution",
    "dicke_relation_residual",
    "DressedDecomposition",
    "dressed_transform",
    "dressed_inverse",
    "dressed_operators",
    "interference_fraction",
    "independent_intensity_estimate",
    "collective_intensity_estimate",
    "dimensional_intensity",
    "find_plateaus",
    "post_decay_rabi_frequency",
    "PulseMetrics",
    "pulse_metrics",
    "inversion_slope_diagnostic",
]


def single_atom_decay(t, gamma1, gamma2, s33_0=1.0):
    """Upper-level population of a lone atom, ``s33_0 exp(-2 (gamma1 + gamma2) t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    return s33_0 * np.exp(-2.0 * (gamma1 + gamma2) * t)


def single_atom_solution(t, gamma1, gamma2, rabi=0.0):
    """Closed-form populations and lower coherence of one atom starting in |3>.

    The upper level decays as in :func:`single_atom_decay` whatever the
    drive. The lower doublet obeys ``D' = 4 rabi Y + 2 (gamma1-gamma2) p3``,
    ``Y' = -rabi D`` with ``D = p1 - p2`` and ``Y = Im <S12>``, which is a
    driven oscillator at angular frequency ``2 rabi``. Returns
    ``(p1, p2, p3, c12)`` arrays.
    """
    t = np.asarray(t, dtype=float)
    G = 2.0 * (gamma1 + gamma2)
    p3 = np.exp(-G * t)
    dg = 2.0 * (gamma1 - gamma2)
    w = 2.0 * rabi
    A = -dg * G / (G * G + w * w)
    K = dg + A * G          # coefficient of sin(w t)/w; zero when rabi = 0
    sinc = t * np.sinc(w * t / math.pi)                 # sin(w t)/w
    one_minus_cos = t * t * 0.5 * np.sinc(w * t / (2 * math.pi)) ** 2  # (1 - cos w t)/w**2
    D = A * (p3 - np.cos(w * t)) + K * sinc
    # Y = -rabi * int_0^t D
    int_D = A * ((1 - p3) / G - sinc) + K * one_minus_cos
    Y = -rabi * int_D
    s = 1.0 - p3
    p1 = 0.5 * (s + D)
    p2 = 0.5 * (s - D)
    return p1, p2, p3, 1j * Y


def dicke_relation_residual(p1, p2, ratio):
    """``(p1 + 1) - (p2 + 1)**ratio`` evaluated through logarithms.

    ``ratio`` is gamma1/gamma2. The power is formed as
    ``(p1 + 1) * exp(ratio log(p2 + 1) - log(p1 + 1))`` so that the large
    powers met at extreme ratios do not overflow before the subtraction;
    a residual whose true magnitude exceeds the float range comes back as
    ``-inf``.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if np.any(p1 < 0) or np.any(p2 < 0):
        raise ValueError("populations must be non-negative")
    a = np.log1p(p1)
    b = ratio * np.log1p(p2)
    with np.errstate(over="ignore"):
        return -(p1 + 1.0) * np.expm1(b - a)


@dataclass(frozen=True)
class DressedDecomposition:
    """Pair correlators in the dressed basis ``|+-> = (|2> +- |1>)/sqrt(2)``.

    ``d_mm = <R3- R-3>``, ``d_pp = <R3+ R+3>``, ``cross = <R3- R+3>``, all
    divided by the same ``norm``.
    """

    d_mm: np.ndarray | float
    d_pp: np.ndarray | float
    cross: np.ndarray | complex

    @property
    def i1_parts(self):
        """Signed contributions to channel 1: ``(d_mm, d_pp, -cross, -cross*)``."""
        return (self.d_mm, self.d_pp, -self.cross, -np.conj(self.cross))

    @property
    def i2_parts(self):
        return (self.d_mm, self.d_pp, self.cross, np.conj(self.cross))

    @property
    def i1(self):
        return self.d_mm + self.d_pp - 2.0 * np.real(self.cross)

    @property
    def i2(self):
        return self.d_mm + self.d_pp + 2.0 * np.real(self.cross)


def dressed_transform(q11, q22, q12, norm=1.0) -> DressedDecomposition:
    """Map bare pair correlators onto the dressed basis.

    With ``R3+- = (S32 +- S31)/sqrt(2)`` and ``q21 = conj(q12)``::

        d_mm  = (q11 + q22 - 2 Re q12) / 2
        d_pp  = (q11 + q22 + 2 Re q12) / 2
        cross = (q22 - q11) / 2 - i Im q12

    so that ``d_mm + d_pp - 2 Re cross = 2 q11`` and
    ``d_mm + d_pp + 2 Re cross = 2 q22``. Passing ``norm = 2 N**2`` puts the
    result on the scale of ``I1 = q11/N**2``.
    """
    q11 = np.asarray(q11, dtype=float)
    q22 = np.asarray(q22, dtype=float)
    q12 = np.asarray(q12, dtype=complex)
    s = q11 + q22
    d_mm = (s - 2.0 * q12.real) / (2.0 * norm)
    d_pp = (s + 2.0 * q12.real) / (2.0 * norm)
    cross = ((q22 - q11) / 2.0 - 1j * q12.imag) / norm
    if d_mm.ndim == 0:
        return DressedDecomposition(float(d_mm), float(d_pp), complex(cross))
    return DressedDecomposition(d_mm, d_pp, cross)


def dressed_inverse(dd: DressedDecomposition, norm=1.0):
    """Inverse of :func:`dressed_transform`; returns ``(q11, q22, q12)``."""
    s = (np.asarray(dd.d_mm) + np.asarray(dd.d_pp)) * norm
    rc = np.real(dd.cross) * norm
    q11 = s / 2.0 - rc
    q22 = s / 2.0 + rc
    q12 = (np.asarray(dd.d_pp) - np.asarray(dd.d_mm)) * norm / 2.0 - 1j * np.imag(dd.cross) * norm
    return q11, q22, q12


def dressed_operators():
    """Single-atom matrices ``(R3-, R-3, R3+, R+3)`` in the (1, 2, 3) basis."""
    ket = {
        "+": np.array([1.0, 1.0, 0.0]) / math.sqrt(2),   # (|2> + |1>)/sqrt(2)
        "-": np.array([-1.0, 1.0, 0.0]) / math.sqrt(2),  # (|2> - |1>)/sqrt(2)
    }
    e3 = np.array([0.0, 0.0, 1.0])
    r3m = np.outer(e3, ket["-"])
    r3p = np.outer(e3, ket["+"])
    return r3m, r3m.T.copy(), r3p, r3p.T.copy()


def interference_fraction(dd: DressedDecomposition, channel: int, floor: float = 1e-300):
    """Signed share of the coherence (cross) terms in one channel's intensity.

    Positive means constructive interference, negative destructive. The
    value is ``0`` wherever the cross term vanishes identically, and absent
    (``None`` for scalars, ``nan`` in arrays) where the channel intensity is
    below ``floor``.
    """
    if channel not in (1, 2):
        raise ValueError("channel must be 1 or 2")
    sign = -1.0 if channel == 1 else 1.0
    rc = np.real(dd.cross)
    contrib = sign * 2.0 * rc
    total = dd.i1 if channel == 1 else dd.i2
    total = np.asarray(total, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(rc == 0, 0.0, np.where(np.abs(total) > floor, contrib / np.where(total == 0, 1, total), np.nan))
    if frac.ndim == 0:
        f = float(frac)
        return None if math.isnan(f) else f
    return frac


def independent_intensity_estimate(gamma1, gamma2, n_atoms):
    """Channel-2 intensity of independent emitters, ``gamma2 N r/(1+r)`` with ``r = gamma2/gamma1``."""
    if not (gamma1 > 0 and gamma2 >= 0):
        raise ValueError("rates must be positive")
    r = gamma2 / gamma1
    return gamma2 * n_atoms * r / (1.0 + r)


def collective_intensity_estimate(gamma2, mu2, n_atoms):
    """Peak channel-2 intensity of a cooperative ensemble, ``gamma2 mu2 N**2``."""
    return gamma2 * mu2 * float(n_atoms) ** 2


def dimensional_intensity(traj: Trajectory, params, channel: int) -> np.ndarray:
    """Cooperative intensity ``mu_s gamma_s q_ss`` in the rate units of ``params``."""
    n2 = float(params.n_atoms) ** 2
    if channel == 1:
        return params.mu1 * params.gamma1 * n2 * traj["I1"]
    if channel == 2:
        return params.mu2 * params.gamma2 * n2 * traj["I2"]
    raise ValueError("channel must be 1 or 2")


def find_plateaus(t, y, threshold: float = 0.02, min_fraction: float = 0.01):
    """Intervals where ``|dy/dt|`` stays below ``threshold`` times its maximum.

    Only interior intervals are returned, i.e. stretches bounded by faster
    variation on both sides; the flat lead-in before a decay and the flat
    tail after it are not plateaus. Intervals shorter than ``min_fraction``
    of the run are dropped. A series with no variation at all is one
    plateau spanning the run. Returns a list of ``(start, end)`` pairs.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 samples")
    slope = np.abs(np.gradient(y, t))
    top = slope.max()
    span = t[-1] - t[0]
    # variation at rounding level counts as none
    if not top * span > 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        return [(float(t[0]), float(t[-1]))]
    below = slope < threshold * top
    out = []
    i = 0
    n = t.size
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and below[j + 1]:
            j += 1
        if i > 0 and j < n - 1 and t[j] - t[i] >= min_fraction * span:
            out.append((float(t[i]), float(t[j])))
        i = j + 1
    return out


def post_decay_rabi_frequency(t, p1, p2, i1, i2, quiet: float = 0.01) -> Optional[float]:
    """Angular frequency of the lower-doublet oscillation after the bursts.

    The window starts once both intensities stay below ``quiet`` times the
    larger peak. ``p1 - p2`` is detrended linearly, a first estimate is read
    from the mean spacing of its zero crossings, and a least-squares fit of a
    sinusoid on a linear trend refines it. ``None`` if fewer than three
    crossings fall in the window.
    """
    t = np.asarray(t, dtype=float)
    loud = np.maximum(np.asarray(i1), np.asarray(i2))
    top = loud.max()
    if top > 0:
        above = np.flatnonzero(loud >= quiet * top)
        start = above[-1] + 1
    else:
        start = 0
    if t.size - start < 5:
        return None
    tw = t[start:]
    s = (np.asarray(p1) - np.asarray(p2))[start:]
    s = s - np.polyval(np.polyfit(tw, s, 1), tw)
    idx = np.flatnonzero(np.signbit(s[:-1]) != np.signbit(s[1:]))
    if idx.size < 3:
        return None
    crossings = tw[idx] - s[idx] * (tw[idx + 1] - tw[idx]) / (s[idx + 1] - s[idx])
    w0 = math.pi / np.mean(np.diff(crossings))
    # refine with a sinusoid-plus-trend least-squares fit seeded by the crossings
    raw = (np.asarray(p1) - np.asarray(p2))[start:]

    def model(t, w, a, b, c, d):
        return a * np.cos(w * t) + b * np.sin(w * t) + c + d * t

    amp = float(np.std(s)) * math.sqrt(2)
    try:
        popt, _ = curve_fit(model, tw, raw, p0=[w0, amp, 0.0, float(np.mean(raw)), 0.0], maxfev=5000)
    except RuntimeError:
        return float(w0)
    w = abs(float(popt[0]))
    return w if abs(w - w0) < 0.25 * w0 else float(w0)


@dataclass
class PulseMetrics:
    i1_peak_time: float
    i1_peak_value: float
    i2_peak_time: float
    i2_peak_value: float
    i1_peak_count: int
    i2_peak_count: int
    i1_energy: float
    i2_energy: float
    p1_at_i2_peak: float
    p2_at_i2_peak: float
    p3_at_i2_peak: float
    i1_at_i2_peak: float
    p2_minus_p3_sign: int
    plateau: Optional[tuple]
    plateau_near_i2_peak: bool
    rabi_frequency_fast: Optional[float]
    plateaus: list = field(default_factory=list)

    def as_row(self):
        row = {k: v for k, v in self.__dict__.items() if k not in ("plateau", "plateaus")}
        row["plateau_start"] = self.plateau[0] if self.plateau else float("nan")
        row["plateau_end"] = self.plateau[1] if self.plateau else float("nan")
        if row["rabi_frequency_fast"] is None:
            row["rabi_frequency_fast"] = float("nan")
        return row


def pulse_metrics(traj: Trajectory, floor: float = 0.05, plateau_threshold: float = 0.02,
                  plateau_min_fraction: float = 0.01) -> PulseMetrics:
    """Peak, energy, plateau and post-decay figures of one run.

    Times are in the trajectory's own unit except ``rabi_frequency_fast``,
    which is measured against ``t_scaled_fast``.
    """
    if len(traj) < 3:
        raise ValueError("trajectory is empty or too short")
    t = traj.times
    i1, i2 = traj["I1"], traj["I2"]
    p1, p2, p3 = traj["p1_over_N"], traj["p2_over_N"], traj["p3_over_N"]
    k1, k2 = int(np.argmax(i1)), int(np.argmax(i2))
    plateaus = find_plateaus(t, p3, plateau_threshold, plateau_min_fraction)
    plateau = max(plateaus, key=lambda ab: ab[1] - ab[0]) if plateaus else None
    t2 = t[k2]
    near = False
    for a, b in plateaus:
        pad = b - a
        if a - pad <= t2 <= b + pad:
            near = True
            plateau = (a, b)
            break
    return PulseMetrics(
        i1_peak_time=float(t[k1]),
        i1_peak_value=float(i1[k1]),
        i2_peak_time=float(t2),
        i2_peak_value=float(i2[k2]),
        i1_peak_count=len(find_peaks(t, i1, floor)),
        i2_peak_count=len(find_peaks(t, i2, floor)),
        i1_energy=float(np.trapezoid(i1, t)),
        i2_energy=float(np.trapezoid(i2, t)),
        p1_at_i2_peak=float(p1[k2]),
        p2_at_i2_peak=float(p2[k2]),
        p3_at_i2_peak=float(p3[k2]),
        i1_at_i2_peak=float(i1[k2]),
        p2_minus_p3_sign=int(np.sign(p2[k2] - p3[k2])),
        plateau=plateau,
        plateau_near_i2_peak=near,
        rabi_frequency_fast=post_decay_rabi_frequency(traj["t_scaled_fast"], p1, p2, i1, i2),
        plateaus=plateaus,
    )


def inversion_slope_diagnostic(traj: Trajectory):
    """Compare ``I1`` with ``-d<S_z>/dt`` for a pure two-level run.

    Only meaningful without the slow channel and without drive; other
    regimes raise ``ValueError``. Both series are rescaled to unit peak.
    Returns a dict with the two series, their maximum deviation and their
    correlation coefficient.
    """
    params = traj.metadata.get("params") or {}
    if params.get("gamma2", 0.0) != 0.0 or params.get("rabi", 0.0) != 0.0:
        raise ValueError("the inversion-slope picture applies only to two-level runs "
                         "(gamma2 = 0, rabi = 0)")
    t = traj.times
    sz = 0.5 * (traj["p3_over_N"] - traj["p1_over_N"])
    slope = -np.gradient(sz, t)
    inten = np.asarray(traj["I1"], dtype=float)

    def unit_peak(x):
        m = np.max(np.abs(x))
        return x / m if m > 1e-12 else np.zeros_like(x)

    a, b = unit_peak(inten), unit_peak(slope)
    if np.any(a) and np.any(b):
        corr = float(np.corrcoef(a, b)[0, 1])
    else:
        corr = float("nan")
    return {
        "times": t,
        "intensity": a,
        "slope": b,
        "max_deviation": float(np.max(np.abs(a - b))),
        "correlation": corr,
    }
