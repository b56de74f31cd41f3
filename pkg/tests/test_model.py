import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lambdasr.errors import ConfigError
from lambdasr.model import (Geometry, SystemParams, coupling_matrix, denormalize, nondimensionalize,
                            pairwise_coupling, uniform_coupling)


def fig_params(omega_bar=0.0):
    return SystemParams.from_ratios(10**7, 1e-8, 1e-5, 1 / 16, omega_bar=omega_bar)


def test_scaled_groups_of_reference_regime():
    s = nondimensionalize(fig_params())
    assert s.r_gamma == pytest.approx(1e-8, rel=1e-15)
    assert s.r_mu == pytest.approx(1 / 16, rel=1e-15)
    assert s.t_slow / s.t_fast == pytest.approx(1 / (s.r_gamma * s.r_mu), rel=1e-12)
    assert s.t_slow / s.t_fast == pytest.approx(1.6e9, rel=1e-12)


def test_symmetric_channels_share_time_unit():
    s = nondimensionalize(SystemParams(50, 0.3, 0.3, 0.5, 0.5))
    assert (s.r_gamma, s.r_mu) == (1.0, 1.0)
    assert s.t_slow == s.t_fast


def test_omega_bar():
    p = SystemParams(1000, 2.0, 0.1, mu1=0.25, rabi=0.47 * 0.25 * 2.0 * 1000)
    assert nondimensionalize(p).omega_bar == pytest.approx(0.47, rel=1e-14)
    assert fig_params(0.47).omega_bar == pytest.approx(0.47, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 10**8),
    g1=st.floats(1e-3, 1e3),
    rg=st.floats(1e-10, 10),
    mu1=st.floats(1e-6, 1),
    rmu=st.floats(1e-3, 1),
    wbar=st.floats(0, 10),
)
def test_round_trip(n, g1, rg, mu1, rmu, wbar):
    p = SystemParams(n, g1, rg * g1, mu1, mu1 * rmu, wbar * mu1 * g1 * n)
    s = nondimensionalize(p)
    q = denormalize(s, g1, n)
    for name in ("gamma2", "mu1", "mu2", "rabi"):
        assert getattr(q, name) == pytest.approx(getattr(p, name), rel=1e-12, abs=1e-300)
    s2 = nondimensionalize(q)
    for name in ("r_gamma", "r_mu", "omega_bar", "t_fast", "t_slow"):
        assert getattr(s2, name) == pytest.approx(getattr(s, name), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("kw, msg", [
    (dict(n_atoms=0), "n_atoms"),
    (dict(gamma1=0.0), "gamma1"),
    (dict(gamma2=-1e-3), "gamma2"),
    (dict(mu1=0.0), "mu1"),
    (dict(mu2=1.5), "mu2"),
    (dict(initial_excited=11.0), "initial_excited"),
    (dict(n_atoms=2.5), "integer"),
])
def test_invalid_params(kw, msg):
    base = dict(n_atoms=10, gamma1=1.0, gamma2=0.1)
    base.update(kw)
    with pytest.raises(ConfigError, match=msg):
        SystemParams(**base)


def test_defaults_and_ordering_flag():
    p = SystemParams(12, 1.0, 0.5)
    assert p.initial_excited == 12.0
    assert p.weak_channel_ordering
    assert not SystemParams(12, 1.0, 2.0).weak_channel_ordering
    assert p.replace(n_atoms=20).initial_excited == 20.0
    assert SystemParams(12, 1.0, 0.5, initial_excited=3).replace(n_atoms=20).initial_excited == 3


def test_pairwise_coupling_values():
    c = pairwise_coupling(math.pi)
    assert c.aleph == pytest.approx(0.0, abs=1e-16)
    assert c.lamb == pytest.approx(1 / math.pi, rel=1e-15)
    c = pairwise_coupling(math.pi / 2)
    assert c.aleph == pytest.approx(2 / math.pi, rel=1e-15)
    assert c.lamb == pytest.approx(0.0, abs=1e-16)
    assert pairwise_coupling(1e-8).aleph == pytest.approx(1.0, rel=1e-15)
    z = pairwise_coupling(0.0)
    assert z.aleph == 1.0 and z.diagonal and math.isnan(z.lamb)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_kernel_identity_and_bound(x):
    c = pairwise_coupling(x)
    assert c.aleph ** 2 + c.lamb ** 2 == pytest.approx(1 / x ** 2, rel=1e-12)
    assert abs(c.aleph) <= 1.0


def test_coupling_matrix_pair_at_half_wavelength():
    k = 2 * math.pi
    g = Geometry([(0, 0, 0), (0.5, 0, 0)], wavenumber1=k, wavenumber2=k / 3)
    m = coupling_matrix(g, 1, 0.7)
    assert m[0, 1].real == pytest.approx(0.0, abs=1e-15)
    assert m[0, 1].imag == pytest.approx(0.7 / math.pi, rel=1e-14)
    assert np.allclose(np.diag(m), 0.7)
    assert np.array_equal(m, m.T)
    m2 = coupling_matrix(g, 2, 0.7)
    assert m2[0, 1].real == pytest.approx(0.7 * math.sin(math.pi / 3) / (math.pi / 3), rel=1e-14)


def test_coupling_matrix_dicke_and_single():
    d = coupling_matrix(None, 1, 0.3, dicke=True, n_atoms=4)
    assert np.all(d == 0.3)
    one = coupling_matrix(Geometry([(1, 2, 3)]), 2, 0.2)
    assert one.shape == (1, 1) and one[0, 0] == 0.2


def test_random_geometry_symmetry():
    rng = np.random.default_rng(3)
    g = Geometry(rng.uniform(0, 2, (4, 3)))
    for ch in (1, 2):
        m = coupling_matrix(g, ch, 1.3)
        assert np.array_equal(m, m.T)
        assert np.all(np.abs(m.real) <= 1.3 + 1e-15)


def test_zero_separation_rejected():
    with pytest.raises(ConfigError, match="zero separation"):
        Geometry([(0, 0, 0), (1, 0, 0), (0, 0, 0)])


def test_uniform_coupling():
    m = uniform_coupling(3, 2.0, 0.25)
    assert np.allclose(np.diag(m), 2.0)
    assert m[0, 2] == 0.5
