"""Exact master-equation solver on the full 3**N Hilbert space (N <= 4).

The generator is

    d rho/dt = -i Omega sum_j [S12^j + S21^j, rho]
               - sum_{s, j, l} gamma_jl^(s) [S3s^j, Ss3^l rho] + h.c.

with the complex pair couplings ``gamma_jl^(s)`` from
:mod:`lambdasr.model`. The superoperator acts on row-major vectorized
density matrices and is stored as a sparse matrix; no symmetry reduction
is applied, so the oracle is valid for any initial state and geometry.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache, reduce
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import CapacityError, ConfigError, InvariantViolation
from .integrator import Tolerances, Trajectory, integrate
from .meanfield import CorrelatorState
from .model import Geometry, SystemParams, coupling_matrix, nondimensionalize, uniform_coupling
from .observables import build_trajectory, time_axes

__all__ = [
    "MAX_ATOMS",
    "DensityMatrix",
    "OperatorSpec",
    "Liouvillian",
    "build_liouvillian",
    "evolve",
    "expectation",
    "product_state",
    "excited_state",
    "correlator_state",
    "simulate_exact",
    "unit",
]

MAX_ATOMS = 4
TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-8


def unit(a: int, b: int) -> np.ndarray:
    """Single-atom matrix unit ``S_ab = |a><b|`` with levels labelled 1, 2, 3."""
    m = np.zeros((3, 3))
    m[a - 1, b - 1] = 1.0
    return m


def _site(op, j, n):
    """Embed the 3x3 operator ``op`` on atom ``j`` of ``n``."""
    factors = [sp.identity(3, format="csr")] * n
    factors[j] = sp.csr_matrix(op)
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)


@dataclass
class DensityMatrix:
    n_atoms: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (self.dim, self.dim):
            raise ValueError(f"expected a {self.dim}x{self.dim} matrix for N={self.n_atoms}")

    @property
    def dim(self) -> int:
        return 3 ** self.n_atoms

    def violations(self):
        """Dictionary of the three invariant residuals."""
        d = self.data
        return {
            "trace": abs(np.trace(d) - 1.0),
            "hermiticity": float(np.max(np.abs(d - d.conj().T))),
            "min_eigenvalue": float(np.min(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))),
        }

    def check(self, trace_tol=TRACE_TOL, herm_tol=HERMITIAN_TOL, pos_tol=POSITIVITY_TOL):
        v = self.violations()
        if v["trace"] > trace_tol or v["hermiticity"] > herm_tol or v["min_eigenvalue"] < -pos_tol:
            raise InvariantViolation(f"density matrix invariants violated: {v}")
        return self


def product_state(single_states: Sequence) -> DensityMatrix:
    """Tensor product of single-atom states.

    Each entry is a level label (1, 2 or 3) or a 3x3 density matrix.
    """
    mats = []
    for s in single_states:
        if np.isscalar(s):
            mats.append(unit(int(s), int(s)).astype(complex))
        else:
            mats.append(np.asarray(s, dtype=complex))
    n = len(mats)
    if n > MAX_ATOMS:
        raise CapacityError(f"exact solver supports at most {MAX_ATOMS} atoms, got {n}")
    return DensityMatrix(n, reduce(np.kron, mats))


def excited_state(n_atoms: int, n_excited: Optional[int] = None) -> DensityMatrix:
    """``n_excited`` atoms in |3>, the rest in |1>; default all excited."""
    k = n_atoms if n_excited is None else n_excited
    return product_state([3] * k + [1] * (n_atoms - k))


@dataclass(frozen=True)
class OperatorSpec:
    """An observable built from single-atom operators.

    ``kind`` is ``"population"`` (``first = alpha``), ``"transition"``
    (``first = (alpha, beta)``) or ``"pair"`` (``first``, ``second`` each an
    ``(alpha, beta)`` tuple or a 3x3 matrix). With ``atoms=None`` the
    collective sum is taken: over ``j`` for one-atom kinds, over ``j != l``
    for pairs. Otherwise ``atoms`` lists the atom index (or the two indices).
    """

    kind: str
    first: object
    second: object = None
    atoms: Optional[tuple] = None

    @classmethod
    def population(cls, alpha, atom=None):
        return cls("population", alpha, atoms=None if atom is None else (atom,))

    @classmethod
    def transition(cls, alpha, beta, atom=None):
        return cls("transition", (alpha, beta), atoms=None if atom is None else (atom,))

    @classmethod
    def pair_correlator(cls, alpha, beta, atoms=None):
        """``sum_{j != l} <S_{alpha beta}^j S_{beta alpha}^l>``."""
        return cls("pair", (alpha, beta), (beta, alpha), atoms)

    @classmethod
    def pair(cls, first, second, atoms=None):
        return cls("pair", first, second, atoms)

    @property
    def hermitian(self) -> bool:
        if self.kind == "population":
            return True
        if self.kind == "pair" and self.atoms is None:
            a, b = _matrix(self.first), _matrix(self.second)
            return np.allclose(a, b.conj().T)
        return False


def _matrix(x):
    if isinstance(x, tuple) and len(x) == 2 and all(np.isscalar(v) for v in x):
        a, b = x
        if a not in (1, 2, 3) or b not in (1, 2, 3):
            raise ValueError(f"level labels must be 1, 2 or 3, got {x}")
        return unit(a, b)
    m = np.asarray(x, dtype=complex)
    if m.shape != (3, 3):
        raise ValueError("single-atom operators are 3x3")
    return m


def operator_matrix(spec: OperatorSpec, n: int) -> sp.csr_matrix:
    try:
        return _cached_operator(spec, n)
    except TypeError:  # spec holds arrays, not hashable
        return _operator(spec, n)


@lru_cache(maxsize=256)
def _cached_operator(spec, n):
    return _operator(spec, n)


def _operator(spec: OperatorSpec, n: int) -> sp.csr_matrix:
    if spec.kind == "population":
        ops = [unit(spec.first, spec.first)]
    elif spec.kind == "transition":
        ops = [_matrix(spec.first)]
    elif spec.kind == "pair":
        ops = [_matrix(spec.first), _matrix(spec.second)]
    else:
        raise ValueError(f"unknown operator kind {spec.kind!r}")
    if len(ops) == 1:
        sites = range(n) if spec.atoms is None else spec.atoms
        return reduce(lambda a, b: a + b, [_site(ops[0], j, n) for j in sites])
    if spec.atoms is not None:
        j, l = spec.atoms
        if j == l:
            raise ValueError("pair operators need two distinct atoms")
        return _site(ops[0], j, n) @ _site(ops[1], l, n)
    total = sp.csr_matrix((3 ** n, 3 ** n), dtype=complex)
    for j in range(n):
        a = _site(ops[0], j, n)
        for l in range(n):
            if l != j:
                total = total + a @ _site(ops[1], l, n)
    return total


def expectation(rho: DensityMatrix, spec: OperatorSpec):
    """``Tr(O rho)``; real for Hermitian observables."""
    op = operator_matrix(spec, rho.n_atoms)
    if op.shape[0] != rho.dim:
        raise ValueError("operator and density matrix dimensions differ")
    val = complex(op.multiply(rho.data.T).sum())
    if spec.hermitian:
        if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
            raise InvariantViolation(f"Hermitian observable has imaginary part {val.imag:g}")
        return val.real
    return val


@dataclass
class Liouvillian:
    n_atoms: int
    matrix: sp.csr_matrix
    coupling1: np.ndarray
    coupling2: np.ndarray
    rabi: float

    @property
    def dim(self) -> int:
        return 3 ** self.n_atoms

    def apply(self, rho) -> np.ndarray:
        data = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
        return (self.matrix @ data.reshape(-1)).reshape(self.dim, self.dim)


def build_liouvillian(params: SystemParams, geometry: Optional[Geometry] = None,
                      dicke: bool = False, couplings=None) -> Liouvillian:
    """Sparse generator for ``params``.

    Pair couplings come from, in order of precedence: explicit ``couplings``
    (a pair of N x N matrices), the Dicke limit (``dicke=True``), the
    geometry kernels, or the uniform all-to-all model with ``mu1``, ``mu2``.
    """
    n = params.n_atoms if geometry is None else geometry.n_atoms
    if geometry is not None and geometry.n_atoms != params.n_atoms:
        raise ConfigError("geometry and params disagree on the number of atoms")
    if n > MAX_ATOMS:
        raise CapacityError(f"exact solver supports at most {MAX_ATOMS} atoms, got {n}")
    if couplings is not None:
        g1, g2 = (np.asarray(c, dtype=complex) for c in couplings)
    elif dicke:
        g1 = coupling_matrix(None, 1, params.gamma1, dicke=True, n_atoms=n)
        g2 = coupling_matrix(None, 2, params.gamma2, dicke=True, n_atoms=n)
    elif geometry is not None:
        g1 = coupling_matrix(geometry, 1, params.gamma1)
        g2 = coupling_matrix(geometry, 2, params.gamma2)
    else:
        g1 = uniform_coupling(n, params.gamma1, params.mu1)
        g2 = uniform_coupling(n, params.gamma2, params.mu2)
    for g in (g1, g2):
        if g.shape != (n, n):
            raise ConfigError(f"coupling matrices must be {n}x{n}")

    dim = 3 ** n
    eye = sp.identity(dim, format="csr", dtype=complex)

    def left(a):
        return sp.kron(a, eye, format="csr")

    def right(b):
        return sp.kron(eye, b.T, format="csr")

    def both(a, b):
        return sp.kron(a, b.T, format="csr")

    drive = reduce(lambda a, b: a + b, [_site(unit(1, 2) + unit(2, 1), j, n) for j in range(n)])
    L = -1j * params.rabi * (left(drive) - right(drive))
    for s, g in ((1, g1), (2, g2)):
        up = [_site(unit(3, s), j, n) for j in range(n)]     # S3s^j
        down = [_site(unit(s, 3), j, n) for j in range(n)]   # Ss3^j
        for j in range(n):
            for l in range(n):
                gjl = g[j, l]
                if gjl == 0:
                    continue
                # -g [S3s^j, Ss3^l rho] and its Hermitian conjugate
                L = L - gjl * left(up[j] @ down[l]) + gjl * both(down[l], up[j])
                L = L - np.conj(gjl) * right(up[l] @ down[j]) + np.conj(gjl) * both(down[j], up[l])
    return Liouvillian(n, L.tocsr(), g1, g2, params.rabi)


def evolve(rho0: DensityMatrix, liouvillian: Liouvillian, t_grid, method: str = "ode",
           tol: Tolerances = Tolerances(rel=1e-12, abs=1e-14), check: bool = True):
    """Density matrices at the times in ``t_grid`` (``t_grid[0]`` is the start).

    ``method="ode"`` integrates the linear system adaptively (DOP853);
    ``method="propagator"`` applies ``exp(L dt)`` between consecutive grid
    points. Every output is checked against the density-matrix invariants.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if rho0.n_atoms != liouvillian.n_atoms:
        raise ValueError("state and Liouvillian sizes differ")
    if t.size == 1:
        return [rho0]
    v0 = rho0.data.reshape(-1).astype(complex)
    M = liouvillian.matrix
    if method == "ode":
        sol = integrate(lambda _t, v: M @ v, v0, (t[0], t[-1]), tol, t, method="explicit")
        vecs = sol.y
    elif method == "propagator":
        vecs = [v0]
        for dt in np.diff(t):
            vecs.append(expm_multiply(M * dt, vecs[-1]))
        vecs = np.array(vecs)
    else:
        raise ValueError(f"unknown method {method!r}")
    d = liouvillian.dim
    out = [DensityMatrix(rho0.n_atoms, v.reshape(d, d)) for v in vecs]
    if check:
        for r in out:
            r.check()
    return out


def correlator_state(rho: DensityMatrix) -> CorrelatorState:
    """The collective sums used by the mean-field closure, evaluated exactly."""
    e = lambda spec: expectation(rho, spec)  # noqa: E731
    return CorrelatorState(
        p1=e(OperatorSpec.population(1)),
        p2=e(OperatorSpec.population(2)),
        p3=e(OperatorSpec.population(3)),
        c12=e(OperatorSpec.transition(1, 2)),
        q11=e(OperatorSpec.pair_correlator(3, 1)),
        q22=e(OperatorSpec.pair_correlator(3, 2)),
        q12=e(OperatorSpec.pair((3, 1), (2, 3))),
        w12=e(OperatorSpec.pair_correlator(2, 1)),
        v12=e(OperatorSpec.pair((1, 2), (1, 2))),
    )


def correlator_derivative(rho: DensityMatrix, liouvillian: Liouvillian) -> CorrelatorState:
    """Exact time derivative of :func:`correlator_state` at ``rho``."""
    drho = DensityMatrix(rho.n_atoms, liouvillian.apply(rho))
    e = lambda spec: complex(operator_matrix(spec, rho.n_atoms).multiply(drho.data.T).sum())  # noqa: E731
    return CorrelatorState(
        p1=e(OperatorSpec.population(1)).real,
        p2=e(OperatorSpec.population(2)).real,
        p3=e(OperatorSpec.population(3)).real,
        c12=e(OperatorSpec.transition(1, 2)),
        q11=e(OperatorSpec.pair_correlator(3, 1)).real,
        q22=e(OperatorSpec.pair_correlator(3, 2)).real,
        q12=e(OperatorSpec.pair((3, 1), (2, 3))),
        w12=e(OperatorSpec.pair_correlator(2, 1)).real,
        v12=e(OperatorSpec.pair((1, 2), (1, 2))),
    )


def simulate_exact(params: SystemParams, t_end: float, unit: str = "fast", n_points: int = 201,
                   spacing: str = "linear", geometry: Optional[Geometry] = None, dicke: bool = False,
                   tol: Tolerances = Tolerances(rel=1e-12, abs=1e-14), method: str = "ode") -> Trajectory:
    """Exact counterpart of :func:`lambdasr.meanfield.simulate` with the same columns."""
    from .meanfield import _output_grid

    n = params.n_atoms
    if n > MAX_ATOMS:
        raise CapacityError(f"exact solver supports at most {MAX_ATOMS} atoms, got {n}")
    k = params.initial_excited
    if k != math.floor(k):
        raise ConfigError("the exact solver needs an integer initial_excited")
    if not t_end > 0:
        raise ConfigError("t_end must be positive")
    L = build_liouvillian(params, geometry=geometry, dicke=dicke)
    grid = _output_grid(t_end, n_points, spacing)
    t_phys = grid * time_axes(params)[unit] / params.collective_rate1
    rhos = evolve(excited_state(n, int(k)), L, t_phys, method=method, tol=tol)
    states = [correlator_state(r) for r in rhos]
    metadata = {
        "engine": "exact",
        "params": asdict(params),
        "scaled": asdict(nondimensionalize(params)),
        "coupling": "dicke" if dicke else ("geometry" if geometry is not None else "uniform"),
        "tolerances": asdict(tol),
        "method": method,
    }
    return build_trajectory(grid, unit, states, params, metadata)
