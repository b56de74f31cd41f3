"""Physical parameters, dimensionless groups and pairwise coupling kernels.

Level labels follow the usual Lambda convention: |3> is the upper level, |1>
the lower level of the fast channel and |2> the lower level of the slow one.
Channel ``s`` (1 or 2) is the |3> -> |s> decay.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigError

__all__ = [
    "SystemParams",
    "ScaledParams",
    "Geometry",
    "Coupling",
    "nondimensionalize",
    "denormalize",
    "pairwise_coupling",
    "coupling_matrix",
    "uniform_coupling",
]


@dataclass(frozen=True)
class SystemParams:
    """Inputs of one run.

    Rates are in inverse time units of the user's choice (``gamma1 = 1`` is
    the usual normalization). ``mu1``, ``mu2`` are the effective fractions
    of the ensemble that radiate cooperatively on each channel, so the
    collective rate of channel ``s`` is ``mu_s * gamma_s * n_atoms``.
    """

    n_atoms: int
    gamma1: float
    gamma2: float
    mu1: float = 1.0
    mu2: float = 1.0
    rabi: float = 0.0
    initial_excited: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.n_atoms, bool) or int(self.n_atoms) != self.n_atoms:
            raise ConfigError(f"n_atoms must be an integer, got {self.n_atoms!r}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        if self.initial_excited is None:
            object.__setattr__(self, "initial_excited", float(self.n_atoms))
        problems = []
        if self.n_atoms < 1:
            problems.append("n_atoms must be >= 1")
        if not self.gamma1 > 0:
            problems.append("gamma1 must be > 0")
        # gamma2 = 0 is allowed: it is the decoupled-channel reduction
        if not self.gamma2 >= 0:
            problems.append("gamma2 must be >= 0")
        for name in ("mu1", "mu2"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                problems.append(f"{name} must lie in (0, 1]")
        if not math.isfinite(self.rabi):
            problems.append("rabi must be finite")
        if not 0 <= self.initial_excited <= self.n_atoms:
            problems.append("initial_excited must lie in [0, n_atoms]")
        if problems:
            raise ConfigError("invalid SystemParams: " + "; ".join(problems))

    @classmethod
    def from_ratios(cls, n_atoms, gamma_ratio, mu2, mu_ratio, omega_bar=0.0,
                    gamma1=1.0, initial_excited=None):
        """Build parameters from the dimensionless groups used in the figures.

        ``gamma_ratio = gamma2/gamma1``, ``mu_ratio = mu2/mu1`` and
        ``omega_bar = rabi / (mu1 gamma1 N)``.
        """
        mu1 = mu2 / mu_ratio
        return cls(
            n_atoms=n_atoms,
            gamma1=gamma1,
            gamma2=gamma_ratio * gamma1,
            mu1=mu1,
            mu2=mu2,
            rabi=omega_bar * mu1 * gamma1 * n_atoms,
            initial_excited=initial_excited,
        )

    @property
    def weak_channel_ordering(self) -> bool:
        return self.gamma2 < self.gamma1

    @property
    def collective_rate1(self) -> float:
        return self.mu1 * self.gamma1 * self.n_atoms

    @property
    def collective_rate2(self) -> float:
        return self.mu2 * self.gamma2 * self.n_atoms

    @property
    def omega_bar(self) -> float:
        return self.rabi / self.collective_rate1

    def replace(self, **changes) -> "SystemParams":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if "n_atoms" in changes and "initial_excited" not in changes:
            # keep "fully excited" meaning when only N changes
            if values["initial_excited"] == values["n_atoms"]:
                values["initial_excited"] = None
        values.update(changes)
        return SystemParams(**values)


@dataclass(frozen=True)
class ScaledParams:
    r_gamma: float
    r_mu: float
    omega_bar: float
    t_fast: float
    t_slow: float


def nondimensionalize(params: SystemParams) -> ScaledParams:
    fast = params.collective_rate1
    slow = params.collective_rate2
    return ScaledParams(
        r_gamma=params.gamma2 / params.gamma1,
        r_mu=params.mu2 / params.mu1,
        omega_bar=params.rabi / fast,
        t_fast=1.0 / fast,
        t_slow=1.0 / slow if slow > 0 else math.inf,
    )


def denormalize(scaled: ScaledParams, gamma1: float, n_atoms: int,
                initial_excited=None) -> SystemParams:
    """Inverse of :func:`nondimensionalize` at fixed ``gamma1`` and ``n_atoms``."""
    mu1 = 1.0 / (scaled.t_fast * gamma1 * n_atoms)
    return SystemParams(
        n_atoms=n_atoms,
        gamma1=gamma1,
        gamma2=scaled.r_gamma * gamma1,
        mu1=mu1,
        mu2=scaled.r_mu * mu1,
        rabi=scaled.omega_bar * mu1 * gamma1 * n_atoms,
        initial_excited=initial_excited,
    )


@dataclass(frozen=True)
class Geometry:
    """Emitter positions with the two transition wavenumbers (omega_3s / c)."""

    positions: tuple
    wavenumber1: float = 2 * math.pi
    wavenumber2: float = 2 * math.pi

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ConfigError("positions must be a list of 3-vectors")
        object.__setattr__(self, "positions", tuple(tuple(float(v) for v in r) for r in pos))
        if self.wavenumber1 <= 0 or self.wavenumber2 <= 0:
            raise ConfigError("wavenumbers must be positive")
        d = self.separations()
        off = ~np.eye(len(pos), dtype=bool)
        if np.any(d[off] <= 0):
            raise ConfigError("zero separation between two emitters")

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.positions)

    def separations(self) -> np.ndarray:
        pos = self.array
        diff = pos[:, None, :] - pos[None, :, :]
        return np.sqrt(np.sum(diff ** 2, axis=-1))

    def wavenumber(self, channel: int) -> float:
        if channel == 1:
            return self.wavenumber1
        if channel == 2:
            return self.wavenumber2
        raise ValueError(f"channel must be 1 or 2, got {channel!r}")


class Coupling(NamedTuple):
    aleph: np.ndarray | float
    lamb: np.ndarray | float
    diagonal: np.ndarray | bool


def pairwise_coupling(x) -> Coupling:
    """Orientation-averaged pair kernels ``sin(x)/x`` and ``-cos(x)/x``.

    ``x`` is the phase ``omega_3s r_jl / c``. At ``x == 0`` the dissipative
    part tends to 1 while the level shift diverges; those entries come back
    with ``lamb = nan`` and ``diagonal = True`` so the caller can apply its
    own convention.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("phase must be non-negative")
    diag = xa == 0
    safe = np.where(diag, 1.0, xa)
    aleph = np.where(diag, 1.0, np.sin(safe) / safe)
    lamb = np.where(diag, np.nan, -np.cos(safe) / safe)
    if xa.ndim == 0:
        return Coupling(float(aleph), float(lamb), bool(diag))
    return Coupling(aleph, lamb, diag)


def coupling_matrix(geom: Optional[Geometry], channel: int, gamma: float,
                    dicke: bool = False, n_atoms: Optional[int] = None) -> np.ndarray:
    """Complex matrix ``gamma_jl = gamma (aleph_jl + i lamb_jl)``.

    The diagonal is ``gamma`` with the single-atom shift set to zero. With
    ``dicke=True`` the geometry is ignored (and may be ``None``): every entry
    equals ``gamma``.
    """
    if dicke:
        n = n_atoms if geom is None else geom.n_atoms
        if n is None:
            raise ValueError("n_atoms is required for a geometry-free coupling")
        return np.full((n, n), complex(gamma))
    if geom is None:
        raise ValueError("a geometry is required unless dicke=True")
    k = geom.wavenumber(channel)
    c = pairwise_coupling(k * geom.separations())
    lamb = np.where(c.diagonal, 0.0, c.lamb)
    return gamma * (c.aleph + 1j * lamb)


def uniform_coupling(n_atoms: int, gamma: float, mu: float) -> np.ndarray:
    """Geometry-free coupling with ``gamma`` on the diagonal and ``mu*gamma`` off it.

    This is the all-to-all model behind the mean-field equations.
    """
    m = np.full((n_atoms, n_atoms), mu * gamma, dtype=complex)
    np.fill_diagonal(m, gamma)
    return m
