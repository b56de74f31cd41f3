"""Closed mean-field equations for the driven Lambda ensemble.

The state holds collective sums over atoms. Single-atom sums:
``p_a = sum_j <S_aa^j>`` and ``c12 = sum_j <S_12^j>``. Pair sums over
distinct atoms ``j != l``:

* ``q11 = <S31 S13>``, ``q22 = <S32 S23>``, ``q12 = <S31 S23>``
  (the channel intensities and their cross term),
* ``w12 = <S21 S12>`` and ``v12 = <S12 S12>`` (lower-doublet pairs).

Three-atom correlators are factorized as pair x single, keeping the
oppositely charged optical pair together, and pair correlators of neutral
operators (populations, lower-doublet coherences) that are not state
variables are factorized into singles. Exact counting of distinct indices
is kept, so a sum over three distinct atoms contributes ``(N-2)/N`` times
the product of the pair sum and the single sum. The full derivation is in
``docs/derivation.md``.

Internally the equations are integrated in the scaled variables
``x = p/N``, ``c = c12/N``, ``Q = q/N**2`` against the fast time
``tau = mu1 gamma1 N t``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .integrator import Tolerances, Trajectory, integrate
from .model import SystemParams, nondimensionalize
from .observables import build_trajectory, time_axes

__all__ = [
    "CorrelatorState",
    "SeedPolicy",
    "initial_state",
    "rhs",
    "intensities",
    "simulate",
    "MEANFIELD_MIN_ATOMS",
]

MEANFIELD_MIN_ATOMS = 10


@dataclass(frozen=True)
class CorrelatorState:
    p1: float
    p2: float
    p3: float
    c12: complex = 0j
    q11: float = 0.0
    q22: float = 0.0
    q12: complex = 0j
    w12: float = 0.0
    v12: complex = 0j

    def to_scaled(self, n_atoms: int) -> np.ndarray:
        """Pack into the 12-component real vector used by the integrator."""
        n, n2 = float(n_atoms), float(n_atoms) ** 2
        c, q, v = complex(self.c12) / n, complex(self.q12) / n2, complex(self.v12) / n2
        return np.array([
            self.p1 / n, self.p2 / n, self.p3 / n, c.real, c.imag,
            self.q11 / n2, self.q22 / n2, q.real, q.imag,
            self.w12 / n2, v.real, v.imag,
        ])

    @classmethod
    def from_scaled(cls, y, n_atoms: int) -> "CorrelatorState":
        n, n2 = float(n_atoms), float(n_atoms) ** 2
        return cls(
            p1=y[0] * n, p2=y[1] * n, p3=y[2] * n,
            c12=complex(y[3], y[4]) * n,
            q11=y[5] * n2, q22=y[6] * n2,
            q12=complex(y[7], y[8]) * n2,
            w12=y[9] * n2, v12=complex(y[10], y[11]) * n2,
        )

    @property
    def total(self) -> float:
        return self.p1 + self.p2 + self.p3


@dataclass(frozen=True)
class SeedPolicy:
    """How the pair correlators start.

    ``none`` starts them at zero; the closure keeps the spontaneous source
    terms, so the burst still develops. ``fluctuation`` sets
    ``q11 = q22 = epsilon * p3``, a deterministic stand-in for the quantum
    noise that triggers the burst.
    """

    kind: str = "none"
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "fluctuation"):
            raise ConfigError(f"unknown seed policy {self.kind!r}")
        if not self.epsilon >= 0:
            raise ConfigError("seed epsilon must be non-negative")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def fluctuation(cls, epsilon: float = 1.0):
        return cls("fluctuation", epsilon)


def initial_state(params: SystemParams, seed: SeedPolicy = SeedPolicy()) -> CorrelatorState:
    p3 = float(params.initial_excited)
    q = seed.epsilon * p3 if seed.kind == "fluctuation" else 0.0
    # atoms not excited start in |1>
    return CorrelatorState(p1=float(params.n_atoms) - p3, p2=0.0, p3=p3, q11=q, q22=q)


def _scaled_constants(params: SystemParams):
    g1n = params.collective_rate1
    n = float(params.n_atoms)
    return (
        params.rabi / g1n,               # omega
        params.gamma1 / g1n,             # e1
        params.gamma2 / g1n,             # e2
        params.mu2 * params.gamma2 / (params.mu1 * params.gamma1),  # k2
        1.0 / n,
    )


def _scaled_rhs(y, omega, e1, e2, k2, inv_n):
    x1, x2, x3 = y[0], y[1], y[2]
    c = y[3] + 1j * y[4]
    cs = c.conjugate()
    Q11, Q22 = y[5], y[6]
    Q12 = y[7] + 1j * y[8]
    one = 1.0 - inv_n        # pair sum of factorized singles
    two = 1.0 - 2.0 * inv_n  # triple sum of pair x single
    decay = 2.0 * (e1 + e2)
    re_cq = (c * Q12).real

    dx1 = 2 * omega * c.imag + 2 * Q11 + 2 * e1 * x3
    dx2 = -2 * omega * c.imag + 2 * k2 * Q22 + 2 * e2 * x3
    dx3 = -2 * Q11 - 2 * k2 * Q22 - decay * x3
    dc = -1j * omega * (x1 - x2) + (1 + k2) * Q12.conjugate()

    src = x3 * one * inv_n
    dQ11 = (-2 * omega * Q12.imag + 2 * (x3 - x1) * (src + Q11 * two)
            - 2 * k2 * two * re_cq - decay * Q11)
    dQ22 = (2 * omega * Q12.imag + 2 * k2 * (x3 - x2) * (src + Q22 * two)
            - 2 * two * re_cq - decay * Q22)
    dQ12 = (1j * omega * (Q11 - Q22)
            - cs * (src + Q11 * two) + Q12 * (x3 - x1) * two
            + k2 * (-cs * (src + Q22 * two) + Q12 * (x3 - x2) * two)
            - decay * Q12)
    dW = (-2 * omega * c.imag * (x1 - x2) * one
          + 2 * two * re_cq * (1 + k2) + 2 * inv_n * (Q22 + k2 * Q11))
    dV = -2j * omega * c * (x1 - x2) * one + 2 * (1 + k2) * two * c * Q12.conjugate()
    return np.array([
        dx1, dx2, dx3, dc.real, dc.imag, dQ11, dQ22, dQ12.real, dQ12.imag,
        dW, dV.real, dV.imag,
    ])


def rhs(state: CorrelatorState, params: SystemParams) -> CorrelatorState:
    """Time derivative of every field, in the physical time units of ``params``."""
    y = state.to_scaled(params.n_atoms)
    dy = _scaled_rhs(y, *_scaled_constants(params))
    d = CorrelatorState.from_scaled(dy, params.n_atoms)
    rate = params.collective_rate1
    return CorrelatorState(**{k: v * rate for k, v in asdict(d).items()})


def intensities(state: CorrelatorState, n_atoms: int):
    """Normalized superradiant intensities ``(q11/N**2, q22/N**2)``."""
    n2 = float(n_atoms) ** 2
    return state.q11 / n2, state.q22 / n2


def _output_grid(t_end, n_points, spacing):
    if spacing == "linear":
        return np.linspace(0.0, t_end, n_points)
    if spacing == "log":
        # geometric spacing after t = 0; the first nonzero point resolves 1e-6 of the run
        return np.concatenate([[0.0], np.geomspace(t_end * 1e-6, t_end, n_points - 1)])
    raise ConfigError(f"unknown grid spacing {spacing!r}")


def simulate(params: SystemParams, t_end: float, tol: Tolerances = Tolerances(),
             unit: str = "slow", n_points: int = 2001, spacing: str = "linear",
             seed: SeedPolicy = SeedPolicy(), method: str = "auto") -> Trajectory:
    """Integrate the mean-field equations from the initially excited state.

    ``t_end`` is measured in ``unit``: ``"slow"`` (mu2 N gamma2 t, the figure
    axis), ``"fast"`` (mu1 N gamma1 t) or ``"physical"``. The returned
    trajectory uses the same unit.
    """
    if params.n_atoms < MEANFIELD_MIN_ATOMS:
        raise ConfigError(
            f"the mean-field closure needs N >> 1 (got N={params.n_atoms}, minimum "
            f"{MEANFIELD_MIN_ATOMS}); use the exact master-equation solver for small ensembles")
    if not t_end > 0:
        raise ConfigError("t_end must be positive")
    if n_points < 3:
        raise ConfigError("n_points must be at least 3")
    to_fast = time_axes(params)[unit]
    grid = _output_grid(t_end, n_points, spacing)
    tau = grid * to_fast
    consts = _scaled_constants(params)
    y0 = initial_state(params, seed).to_scaled(params.n_atoms)
    sol = integrate(lambda t, y: _scaled_rhs(y, *consts), y0, (0.0, tau[-1]), tol, tau, method=method)
    states = [CorrelatorState.from_scaled(row, params.n_atoms) for row in sol.y]
    metadata = {
        "engine": "meanfield",
        "params": asdict(params),
        "scaled": asdict(nondimensionalize(params)),
        "seed_policy": asdict(seed),
        "tolerances": asdict(tol),
        "solver": sol.stats,
        "n_variables": int(y0.size),
    }
    return build_trajectory(grid, unit, states, params, metadata)
