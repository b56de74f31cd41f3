import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp

from lambdasr.errors import CapacityError, InvariantViolation
from lambdasr.exact import (DensityMatrix, Liouvillian, OperatorSpec, build_liouvillian, evolve,
                            excited_state, expectation, product_state, simulate_exact)
from lambdasr.model import Geometry, SystemParams


def pop(a, atom=None):
    return OperatorSpec.population(a, atom)


def test_single_atom_decay_law():
    p = SystemParams(1, 0.4, 0.1)
    L = build_liouvillian(p)
    t = np.linspace(0, 6, 61)
    rhos = evolve(excited_state(1), L, t)
    p3 = np.array([expectation(r, pop(3)) for r in rhos])
    assert np.max(np.abs(p3 / np.exp(-t) - 1)) < 1e-9


@pytest.mark.parametrize("ratio", [2.0, 10.0, 100.0])
def test_branching_ratio(ratio):
    p = SystemParams(1, 1.0, 1.0 / ratio)
    t_end = 40 / (p.gamma1 + p.gamma2)
    r = evolve(excited_state(1), build_liouvillian(p), [0, t_end])[-1]
    assert expectation(r, pop(1)) / expectation(r, pop(2)) == pytest.approx(ratio, rel=1e-6)


def test_rabi_oscillation_without_decay():
    om = 0.8
    p = SystemParams(1, 1.0, 0.3, rabi=om)
    t = np.linspace(0, 10, 101)
    rhos = evolve(product_state([1]), build_liouvillian(p), t)
    p1 = np.array([expectation(r, pop(1)) for r in rhos])
    p2 = np.array([expectation(r, pop(2)) for r in rhos])
    assert np.max(np.abs(p1 - p2 - np.cos(2 * om * t))) < 1e-9
    assert np.max(np.abs(p1 + p2 - 1)) < 1e-12


def test_two_atom_dicke_cascade():
    g = 0.7
    p = SystemParams(2, g, 0.0)
    t = np.linspace(0, 4, 81)
    rhos = evolve(excited_state(2), build_liouvillian(p, dicke=True), t)
    p3 = np.array([expectation(r, pop(3)) for r in rhos])
    ref = 2 * np.exp(-4 * g * t) + 4 * g * t * np.exp(-4 * g * t)
    assert np.max(np.abs(p3 - ref)) < 1e-9


def test_independent_pair_factorizes():
    p = SystemParams(2, 1.0, 0.25, rabi=0.6)
    diag = (np.diag([1.0, 1.0]).astype(complex), np.diag([0.25, 0.25]).astype(complex))
    L2 = build_liouvillian(p, couplings=diag)
    L1 = build_liouvillian(p.replace(n_atoms=1))
    t = np.linspace(0, 5, 21)
    pair = evolve(excited_state(2), L2, t)
    single = evolve(excited_state(1), L1, t)
    for r2, r1 in zip(pair, single):
        for a in (1, 2, 3):
            s = expectation(r1, pop(a))
            assert expectation(r2, pop(a)) == pytest.approx(2 * s, abs=1e-10)
            both = expectation(r2, OperatorSpec.pair((a, a), (a, a), atoms=(0, 1)))
            assert abs(both - s * s) < 1e-10
        c = expectation(r1, OperatorSpec.transition(1, 2))
        assert abs(expectation(r2, OperatorSpec.pair((1, 2), (2, 1), atoms=(0, 1))) - abs(c) ** 2) < 1e-10
        for a in (1, 2):
            assert abs(expectation(r2, OperatorSpec.pair_correlator(3, a))) < 1e-10


def test_trace_preserved_for_mixed_state():
    p = SystemParams(2, 1.0, 0.5)
    rho = DensityMatrix(2, np.eye(9) / 9)
    out = evolve(rho, build_liouvillian(p, dicke=True), np.linspace(0, 3, 7))
    assert all(abs(np.trace(r.data) - 1) < 1e-10 for r in out)


def swap(n, i, j):
    perm = []
    for idx in itertools.product(range(3), repeat=n):
        k = list(idx)
        k[i], k[j] = k[j], k[i]
        perm.append(int(np.ravel_multi_index(k, [3] * n)))
    d = 3 ** n
    return sp.csr_matrix((np.ones(d), (perm, np.arange(d))), shape=(d, d)).toarray()


def test_permutation_symmetry_in_dicke_limit():
    p = SystemParams(3, 1.0, 0.3, rabi=0.9)
    out = evolve(excited_state(3), build_liouvillian(p, dicke=True), np.linspace(0, 2, 5))
    for i, j in ((0, 1), (1, 2), (0, 2)):
        P = swap(3, i, j)
        for r in out:
            assert np.max(np.abs(P @ r.data - r.data @ P)) < 1e-9


def test_ode_and_propagator_agree_with_geometry():
    g = Geometry([(0, 0, 0), (0.12, 0.05, 0), (0.02, 0.2, 0.1)], wavenumber1=2 * math.pi,
                 wavenumber2=math.pi)
    p = SystemParams(3, 1.0, 0.4, rabi=0.5)
    L = build_liouvillian(p, geometry=g)
    assert np.any(L.coupling1.imag != 0)
    t = np.linspace(0, 2, 9)
    a = evolve(excited_state(3), L, t, method="ode")
    b = evolve(excited_state(3), L, t, method="propagator")
    assert max(np.max(np.abs(x.data - y.data)) for x, y in zip(a, b)) < 1e-9


def test_lamb_shift_enters_dynamics():
    g = Geometry([(0, 0, 0), (0.1, 0, 0)])
    p = SystemParams(2, 1.0, 0.4)
    with_shift = build_liouvillian(p, geometry=g)
    no_shift = build_liouvillian(p, couplings=(with_shift.coupling1.real, with_shift.coupling2.real))
    assert sp.linalg.norm(with_shift.matrix - no_shift.matrix) > 1e-3


def test_expectation_examples():
    rho = excited_state(3)
    assert expectation(rho, pop(3)) == pytest.approx(3.0)
    assert expectation(rho, OperatorSpec.pair_correlator(3, 1)) == 0.0
    psi = np.zeros(9)
    psi[np.ravel_multi_index((2, 0), (3, 3))] = 1 / math.sqrt(2)
    psi[np.ravel_multi_index((0, 2), (3, 3))] = 1 / math.sqrt(2)
    sym = DensityMatrix(2, np.outer(psi, psi))
    assert expectation(sym, OperatorSpec.pair_correlator(3, 1)) == pytest.approx(1.0, abs=1e-15)
    assert expectation(sym, pop(3)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        expectation(sym, OperatorSpec.pair((1, 1), (2, 2), atoms=(0, 0)))


def test_evolve_edge_cases():
    L = build_liouvillian(SystemParams(1, 1.0, 0.2))
    rho = excited_state(1)
    assert evolve(rho, L, [0.0])[0] is rho
    with pytest.raises(ValueError):
        evolve(rho, L, [0.0, 1.0, 0.5])
    broken = Liouvillian(1, sp.identity(9, format="csr", dtype=complex), L.coupling1, L.coupling2, 0.0)
    with pytest.raises(InvariantViolation):
        evolve(rho, broken, [0.0, 1.0])


def test_capacity_guard():
    p = SystemParams(5, 1.0, 0.1)
    with pytest.raises(CapacityError):
        build_liouvillian(p)
    with pytest.raises(CapacityError):
        simulate_exact(p, 1.0)
    with pytest.raises(CapacityError):
        product_state([3] * 5)


def test_density_matrix_checks():
    bad = DensityMatrix(1, np.diag([1.2, -0.1, -0.1]))
    with pytest.raises(InvariantViolation):
        bad.check()
    with pytest.raises(ValueError):
        DensityMatrix(2, np.eye(3))


def test_simulate_exact_columns():
    tr = simulate_exact(SystemParams(2, 1.0, 0.2, rabi=0.4), 3.0, n_points=31)
    tot = tr["p1_over_N"] + tr["p2_over_N"] + tr["p3_over_N"]
    assert np.max(np.abs(tot - 1)) < 1e-10
    assert tr.metadata["engine"] == "exact"
